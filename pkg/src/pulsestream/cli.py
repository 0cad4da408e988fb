"""Command-line front end.

Subcommands: ``generate``, ``measure``, ``recover``, ``montecarlo``, ``ingest``.
Exit status is 0 on success, 1 for an invalid configuration and 2 for I/O
or file-format errors.  All outputs are CSV/JSON files; plotting is left to
external tools.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import experiments as ex
from .errors import PulseStreamError, SignalFormatError
from .recovery import RecoveryConfig
from .sampling import add_noise, gaussian_matrix, measure
from .signal_io import FORMATS, read_dense, write_dense, write_sparse
from .signal_model import Domain, PulseModel, random_instance

EXIT_OK, EXIT_CONFIG, EXIT_IO = 0, 1, 2

log = logging.getLogger("pulsestream")


def _shape(args) -> tuple[int, ...]:
    if args.dims == 1:
        return (args.n,)
    side = math.isqrt(args.n)
    if side * side != args.n:
        raise PulseStreamError(f"--dims 2 needs a square --n (got {args.n})")
    return (side, side)


def _model(args) -> PulseModel:
    shape = _shape(args)
    delta = args.delta or ex.default_delta(args.n, args.s, args.f, args.dims)
    return PulseModel(Domain(shape), args.s, args.f, delta)


def _cfg(args) -> RecoveryConfig:
    return RecoveryConfig(
        max_outer_iters=args.max_iters,
        eps=args.eps,
        restarts=args.restarts,
    )


def _manifest(args, algorithms, seeds) -> ex.ExperimentManifest:
    return ex.ExperimentManifest(_model(args), args.m, args.snr_db, tuple(algorithms), tuple(seeds), _cfg(args))


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_generate(args) -> int:
    model = _model(args)
    inst = random_instance(model, seed=ex.derive_seed(args.seed, "instance"))
    out = _outdir(args)
    write_dense(out / "z.csv", inst.z, model.domain)
    write_sparse(out / "x.csv", inst.x.dense(), model.domain)
    write_dense(out / "h.csv", inst.h.coefficients)
    print(f"wrote {model.domain.shape} pulse stream (S={model.S}, F={model.F}, delta={model.delta}) to {out}")
    return EXIT_OK


def cmd_measure(args) -> int:
    z, domain = read_dense(args.input)
    phi = gaussian_matrix(args.m, domain.size, ex.derive_seed(args.seed, "matrix"))
    y = add_noise(measure(phi, z), args.snr_db, ex.derive_seed(args.seed, "noise"))
    out = _outdir(args)
    write_dense(out / "y.csv", y)
    meta = {"M": args.m, "N": domain.size, "shape": list(domain.shape), "seed": args.seed,
            "snr_db": "inf" if math.isinf(args.snr_db) else args.snr_db}
    (out / "measure.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    print(f"wrote {args.m} measurements to {out / 'y.csv'}")
    return EXIT_OK


def cmd_recover(args) -> int:
    algos = args.algo or ["alg2"]
    m = _manifest(args, algos, [args.seed])
    records = ex.run_single(m, args.seed, _outdir(args))
    for r in records:
        print(f"{r.algorithm:>13s}  nmse={r.normalized_mse:.4g}  residual={r.residual_final:.4g}  "
              f"iters={r.iterations}  time={r.wall_time:.2f}s")
    return EXIT_OK


def cmd_montecarlo(args) -> int:
    algos = args.algo or ["oracle", "alg2", "block_cosamp", "cosamp"]
    # trial i uses base seed XOR i
    seeds = [args.seed ^ i for i in range(args.trials)]
    m = _manifest(args, algos, seeds)
    sweep = ex.run_montecarlo(m, args.ratios)
    out = _outdir(args)
    ex.write_table(out / "table.csv", sweep.rows)
    ex.write_records(out / "trials.csv", sweep.records)
    (out / "manifest.json").write_text(
        json.dumps({**m.to_dict(), "mk_ratios": list(args.ratios)}, indent=2, sort_keys=True) + "\n"
    )
    for r in sweep.rows:
        print(f"M/K={r['mk_ratio']:<4g} M={r['M']:<5d} {r['algorithm']:>13s}  "
              f"mean nmse={r['mean_nmse']:.4g} +- {r['stderr_nmse']:.2g}  {r['note']}")
    return EXIT_OK


def cmd_ingest(args) -> int:
    z, domain = ex.ingest_signal(args.input, args.format)
    if args.dims == 2 and domain.ndim == 1:
        args.n = domain.size
        domain = Domain(_shape(args))
    delta = args.delta or ex.default_delta(domain.size, args.s, args.f, domain.ndim)
    model = PulseModel(domain, args.s, args.f, delta)
    res = ex.recover_signal(z, model, args.m, args.seed, _cfg(args), args.snr_db)
    out = _outdir(args)
    write_dense(out / "recovered_z.csv", res.z_hat, domain)
    write_dense(out / "anchor_pulse.csv", res.pulse.coefficients)
    write_sparse(out / "spikes.csv", res.spikes.dense(), domain)
    print(f"nmse={res.normalized_mse:.4g}  pulse norm={np.linalg.norm(res.pulse.coefficients):.6f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--n", type=int, default=1024, help="signal length (pixel count in 2D)")
    common.add_argument("--s", type=int, default=8, help="number of spikes")
    common.add_argument("--f", type=int, default=11, help="pulse length (square number in 2D)")
    common.add_argument("--delta", type=int, default=None,
                        help="minimum spike separation (default N//(2S) in 1D, 2*sqrt(F) in 2D)")
    common.add_argument("--m", type=int, default=100, help="number of measurements")
    common.add_argument("--snr-db", type=float, default=math.inf, help="measurement SNR in dB")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--dims", type=int, choices=(1, 2), default=1)
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("--max-iters", type=int, default=50)
    common.add_argument("--eps", type=float, default=0.0, help="residual threshold")
    common.add_argument("--restarts", type=int, default=40,
                        help="extra pulse initializations for alg2 (0 = flat start only)")
    common.add_argument("-v", "--verbose", action="store_true")

    algo_choices = ("alg1", "alg2", "cosamp", "block", "block_cosamp", "oracle")
    p = argparse.ArgumentParser(prog="pulsestream", description="Compressive sensing of pulse streams.")
    sub = p.add_subparsers(dest="command", required=True)

    sub.add_parser("generate", parents=[common], help="draw a random pulse stream")

    sp = sub.add_parser("measure", parents=[common], help="measure a dense signal file")
    sp.add_argument("--in", dest="input", required=True)

    sp = sub.add_parser("recover", parents=[common], help="generate, measure and recover one trial")
    sp.add_argument("--algo", action="append", choices=algo_choices)

    sp = sub.add_parser("montecarlo", parents=[common], help="mean error versus M/K")
    sp.add_argument("--algo", action="append", choices=algo_choices)
    sp.add_argument("--trials", type=int, default=50)
    sp.add_argument("--ratios", type=float, nargs="+", default=[0.5, 1.0, 1.5, 2.0, 3.0])

    sp = sub.add_parser("ingest", parents=[common], help="measure and recover a signal file")
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--format", choices=FORMATS, default="csv_dense")
    return p


COMMANDS = {
    "generate": cmd_generate,
    "measure": cmd_measure,
    "recover": cmd_recover,
    "montecarlo": cmd_montecarlo,
    "ingest": cmd_ingest,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (SignalFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except PulseStreamError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
