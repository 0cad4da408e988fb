"""Experiment harness: seeded trials, Monte Carlo sweeps and file output.

Every random quantity of a trial is derived from the trial seed, so a trial
does not depend on which other trials run alongside it.
"""
from __future__ import annotations

import csv
import dataclasses
import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ModelError
from .recovery import (
    RecoveryConfig,
    am_exhaustive,
    block_cosamp,
    cosamp,
    iterative_support_estimation,
    oracle_decoder,
    pulse_stream_from_shapes,
)
from .sampling import add_noise, gaussian_matrix, measure
from .signal_io import format_float, read_signal, write_dense, write_sparse
from .signal_model import (
    Domain,
    ImpulseResponse,
    PulseInstance,
    PulseModel,
    SpikeStream,
    Support,
    random_instance,
)

log = logging.getLogger(__name__)

ALGORITHMS = ("alg1", "alg2", "cosamp", "block_cosamp", "oracle")
# short names accepted on the command line
ALIASES = {"block": "block_cosamp"}

_SALTS = {"instance": 0, "matrix": 1, "noise": 2}


def derive_seed(seed: int, purpose: str) -> int:
    """Independent 63-bit stream seed for one purpose of one trial."""
    state = np.random.SeedSequence([int(seed), _SALTS[purpose]]).generate_state(2, dtype=np.uint32)
    return int(state[0]) << 31 | int(state[1]) >> 1


def default_delta(N: int, S: int, F: int, ndim: int = 1) -> int:
    """Separation used when none is given: ``N // (2S)`` in 1D, twice the pulse side in 2D."""
    if ndim == 1:
        return max(F, N // (2 * S))
    return 2 * math.isqrt(F)


def canonical_algorithm(name: str) -> str:
    name = ALIASES.get(name, name)
    if name not in ALGORITHMS:
        raise ModelError(f"unknown algorithm {name!r}; choose from {ALGORITHMS + tuple(ALIASES)}")
    return name


@dataclass(frozen=True)
class ExperimentManifest:
    """Everything needed to reproduce an experiment."""

    model: PulseModel
    M: int
    snr_db: float = math.inf
    algorithms: tuple[str, ...] = ("alg2",)
    seeds: tuple[int, ...] = (0,)
    cfg: RecoveryConfig = field(default_factory=RecoveryConfig)
    amplitude_dist: str = "normal"
    pulse_dist: str = "normal"

    def __post_init__(self):
        object.__setattr__(self, "algorithms", tuple(canonical_algorithm(a) for a in self.algorithms))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if self.M < 1:
            raise ModelError("M must be >= 1")
        if math.isnan(self.snr_db):
            raise ModelError("snr_db must be a number or inf")
        if any(s < 0 for s in self.seeds):
            raise ModelError("seeds must be nonnegative")

    def with_M(self, M: int) -> "ExperimentManifest":
        return dataclasses.replace(self, M=M)

    def to_dict(self) -> dict:
        return {
            "shape": list(self.model.domain.shape),
            "S": self.model.S,
            "F": self.model.F,
            "delta": self.model.delta,
            "M": self.M,
            "snr_db": "inf" if math.isinf(self.snr_db) else self.snr_db,
            "algorithms": list(self.algorithms),
            "seeds": list(self.seeds),
            "cfg": dataclasses.asdict(self.cfg),
            "amplitude_dist": self.amplitude_dist,
            "pulse_dist": self.pulse_dist,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentManifest":
        model = PulseModel(Domain(tuple(d["shape"])), d["S"], d["F"], d["delta"])
        snr = d.get("snr_db", "inf")
        return cls(
            model,
            int(d["M"]),
            math.inf if snr == "inf" else float(snr),
            tuple(d.get("algorithms", ("alg2",))),
            tuple(d.get("seeds", (0,))),
            RecoveryConfig(**d.get("cfg", {})),
            d.get("amplitude_dist", "normal"),
            d.get("pulse_dist", "normal"),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


@dataclass(frozen=True)
class TrialRecord:
    seed: int
    algorithm: str
    M: int
    normalized_mse: float
    residual_final: float
    iterations: int
    wall_time: float

    def __post_init__(self):
        if not (self.normalized_mse >= 0 and math.isfinite(self.normalized_mse)):
            raise ValueError(f"normalized MSE must be finite and >= 0, got {self.normalized_mse}")


@dataclass(frozen=True, eq=False)
class TrialOutput:
    record: TrialRecord
    instance: PulseInstance
    y: np.ndarray
    z_hat: np.ndarray
    h_hat: np.ndarray | None
    residual_history: tuple


def normalized_mse(z, z_hat) -> float:
    z = np.asarray(z, dtype=float)
    d = z - np.asarray(z_hat, dtype=float)
    den = float(z @ z)
    return float(d @ d) / den if den > 0 else float(d @ d)


def make_trial_data(manifest: ExperimentManifest, seed: int):
    """Instance, sampling matrix and (noisy) measurements for one trial."""
    model = manifest.model
    inst = random_instance(
        model, manifest.amplitude_dist, manifest.pulse_dist, seed=derive_seed(seed, "instance")
    )
    phi = gaussian_matrix(manifest.M, model.N, derive_seed(seed, "matrix"))
    y = add_noise(measure(phi, inst.z), manifest.snr_db, derive_seed(seed, "noise"))
    return inst, phi, y


def run_algorithm(name: str, y, phi, model: PulseModel, cfg: RecoveryConfig, h_true=None):
    """Dispatch one recovery; returns ``(z_hat, h_hat or None, residual history, iterations)``."""
    name = canonical_algorithm(name)
    if name in ("cosamp", "block_cosamp"):
        if name == "cosamp":
            z_hat, hist = cosamp(y, phi, model.K, cfg, full_output=True)
        else:
            z_hat, hist = block_cosamp(y, phi, model.S, model.F, cfg, model.domain, full_output=True)
        if not hist:
            hist = (float(np.linalg.norm(y)),)
        return z_hat, None, hist, len(hist)
    if name == "alg1":
        result = am_exhaustive(y, phi, model, cfg)
    elif name == "alg2":
        result = iterative_support_estimation(y, phi, model, cfg)
    else:
        if h_true is None:
            raise ModelError("the oracle decoder needs the true pulse")
        result = oracle_decoder(y, phi, h_true, model, cfg)
    return result.z_hat, result.h_hat.coefficients, result.residual_history, result.iterations


def noise_level(y, snr_db: float) -> float:
    """Expected noise norm in ``y`` measured at ``snr_db`` (0 when noiseless)."""
    if math.isinf(snr_db) and snr_db > 0:
        return 0.0
    r = 10.0 ** (-snr_db / 20.0)
    return float(np.linalg.norm(y)) * r / math.sqrt(1.0 + r * r)


def trial_config(manifest: ExperimentManifest, y) -> RecoveryConfig:
    """The manifest's config, with ``eps`` set to the noise level when it is left at 0.

    Stopping at the noise floor keeps the restarts of the iterative solver
    from running to exhaustion on noisy data.
    """
    cfg = manifest.cfg
    if cfg.eps == 0.0:
        eps = noise_level(y, manifest.snr_db)
        if eps > 0.0:
            cfg = dataclasses.replace(cfg, eps=eps)
    return cfg


def run_trial(manifest: ExperimentManifest, seed: int, algorithm: str) -> TrialOutput:
    inst, phi, y = make_trial_data(manifest, seed)
    t0 = time.perf_counter()
    z_hat, h_hat, history, iters = run_algorithm(
        algorithm, y, phi, manifest.model, trial_config(manifest, y), inst.h
    )
    wall = time.perf_counter() - t0
    rec = TrialRecord(
        seed,
        canonical_algorithm(algorithm),
        manifest.M,
        normalized_mse(inst.z, z_hat),
        float(history[-1]) if history else float("nan"),
        int(iters),
        wall,
    )
    return TrialOutput(rec, inst, y, z_hat, h_hat, tuple(history))


def _write_column(path: Path, header: str, values) -> None:
    path.write_text(header + "\n" + "".join(format_float(v) + "\n" for v in values))


def run_single(manifest: ExperimentManifest, seed: int, out_dir) -> list[TrialRecord]:
    """Run every algorithm of ``manifest`` on trial ``seed`` and write its files.

    Files written to ``out_dir``: ``truth_z.csv`` and ``measurements.csv``
    (dense), ``truth_x.csv`` (sparse), ``truth_h.csv`` (dense, F values),
    then per algorithm ``<algo>_z.csv``, ``<algo>_h.csv`` (when a pulse is
    estimated) and ``<algo>_residuals.csv``, plus ``records.csv`` and
    ``manifest.json``.  Wall times are left out of the files so that
    re-running a manifest reproduces them byte for byte.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    domain = manifest.model.domain
    records = []
    for algo in manifest.algorithms:
        res = run_trial(manifest, seed, algo)
        records.append(res.record)
        write_dense(out / f"{algo}_z.csv", res.z_hat, domain)
        if res.h_hat is not None:
            write_dense(out / f"{algo}_h.csv", res.h_hat)
        _write_column(out / f"{algo}_residuals.csv", "residual", res.residual_history)
        log.info("seed %d %s: nmse %.3g (%.2fs)", seed, algo, res.record.normalized_mse, res.record.wall_time)
    inst, _, y = make_trial_data(manifest, seed)
    write_dense(out / "truth_z.csv", inst.z, domain)
    write_sparse(out / "truth_x.csv", inst.x.dense(), domain)
    write_dense(out / "truth_h.csv", inst.h.coefficients)
    write_dense(out / "measurements.csv", y)
    write_records(out / "records.csv", records)
    (out / "manifest.json").write_text(manifest.dumps())
    return records


RECORD_FIELDS = ("seed", "algorithm", "M", "normalized_mse", "residual_final", "iterations")


def write_records(path, records: Sequence[TrialRecord]) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RECORD_FIELDS)
        for r in sorted(records, key=lambda r: (r.M, r.algorithm, r.seed)):
            w.writerow(
                (r.seed, r.algorithm, r.M, format_float(r.normalized_mse),
                 format_float(r.residual_final), r.iterations)
            )


TABLE_FIELDS = ("mk_ratio", "M", "algorithm", "trials", "mean_nmse", "stderr_nmse", "median_nmse", "note")


@dataclass(frozen=True)
class SweepResult:
    rows: list[dict]
    records: list[TrialRecord]


def run_montecarlo(manifest: ExperimentManifest, mk_ratios: Sequence[float]) -> SweepResult:
    """Mean normalized MSE per ``(M/K, algorithm)`` over the manifest's seeds.

    ``M = round(ratio * S * F)``; ratios giving ``M > N`` produce a row with
    ``note = "skipped: M > N"`` and no trials.
    """
    model = manifest.model
    rows: list[dict] = []
    records: list[TrialRecord] = []
    for ratio in mk_ratios:
        M = int(round(ratio * model.K))
        if M > model.N or M < 1:
            log.warning("M/K=%g gives M=%d outside [1, N=%d]; skipped", ratio, M, model.N)
            for algo in manifest.algorithms:
                rows.append(dict(mk_ratio=ratio, M=M, algorithm=algo, trials=0, mean_nmse=math.nan,
                                 stderr_nmse=math.nan, median_nmse=math.nan, note="skipped: M > N"))
            continue
        m = manifest.with_M(M)
        for algo in manifest.algorithms:
            recs = sorted((run_trial(m, s, algo).record for s in m.seeds), key=lambda r: r.seed)
            records.extend(recs)
            v = np.array([r.normalized_mse for r in recs])
            se = float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else 0.0
            rows.append(dict(mk_ratio=ratio, M=M, algorithm=algo, trials=int(v.size),
                             mean_nmse=float(v.mean()), stderr_nmse=se,
                             median_nmse=float(np.median(v)), note=""))
            log.info("M/K=%g %s: mean nmse %.3g over %d trials", ratio, algo, v.mean(), v.size)
    return SweepResult(rows, records)


def write_table(path, rows: Sequence[dict]) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TABLE_FIELDS)
        for r in rows:
            w.writerow(
                [format_float(r["mk_ratio"]), r["M"], r["algorithm"], r["trials"]]
                + [format_float(r[k]) for k in ("mean_nmse", "stderr_nmse", "median_nmse")]
                + [r["note"]]
            )


# Named reference configurations.  The single-signal case ships in two
# variants, S=6 at M=100 and S=8 at M=90.
PRESETS = {
    "fig1_caption": dict(shape=(1024,), S=6, F=11, M=100),
    "fig1_text": dict(shape=(1024,), S=8, F=11, M=90),
    "fig3": dict(shape=(1024,), S=8, F=11, M=88, ratios=(0.5, 1.0, 1.5, 2.0, 3.0)),
    "fig4": dict(shape=(1024,), S=9, F=11, M=150, snr_db=13.25),
    "fig5": dict(shape=(64, 64), S=7, F=25, M=290),
    "neuronal": dict(shape=(1024,), S=9, F=11, M=150),
    # 121 = 11 x 11 is the nearest square pulse to F = 120
    "astronomy": dict(shape=(64, 64), S=3, F=121, delta=20, M=330),
}


def preset_manifest(name: str, **overrides) -> ExperimentManifest:
    if name not in PRESETS:
        raise ModelError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    p = {**PRESETS[name], **overrides}
    shape = tuple(p["shape"])
    delta = p.get("delta") or default_delta(int(np.prod(shape)), p["S"], p["F"], len(shape))
    model = PulseModel(Domain(shape), p["S"], p["F"], delta)
    return ExperimentManifest(
        model,
        p["M"],
        p.get("snr_db", math.inf),
        tuple(p.get("algorithms", ("alg2",))),
        tuple(p.get("seeds", (0,))),
        p.get("cfg", RecoveryConfig()),
    )


# Synthetic stand-ins for recordings that are not distributed.


def _biphasic_pulse(F: int) -> np.ndarray:
    t = np.linspace(-2.0, 3.0, F)
    p = -t * np.exp(-0.5 * t * t)
    return p / np.linalg.norm(p)


def _psf(side: int, width: float) -> np.ndarray:
    r = np.arange(side) - (side - 1) / 2
    g = np.exp(-(r[:, None] ** 2 + r[None, :] ** 2) / (2 * width * width)).ravel()
    return g / np.linalg.norm(g)


def _separated_support(model: PulseModel, seed: int) -> Support:
    return random_instance(model, seed=seed).x.support


def neuronal_like_signal(N: int = 1024, S: int = 9, F: int = 11, seed: int = 0,
                         jitter: float = 0.05) -> tuple[np.ndarray, PulseModel, list]:
    """Spike train of biphasic pulses whose shapes and heights fluctuate slightly.

    Returns the signal, the model used to place the spikes, and the
    individual pulse shapes.
    """
    model = PulseModel(Domain((N,)), S, F, default_delta(N, S, F))
    rng = np.random.default_rng(derive_seed(seed, "instance"))
    support = _separated_support(model, derive_seed(seed, "matrix"))
    base = _biphasic_pulse(F)
    shapes = [base + jitter * rng.standard_normal(F) for _ in range(S)]
    alpha = 1.0 + 0.2 * rng.standard_normal(S)
    return pulse_stream_from_shapes(shapes, alpha, support), model, shapes


def astronomy_like_signal(side: int = 64, S: int = 3, F: int = 121, delta: int = 20,
                          seed: int = 0) -> tuple[np.ndarray, PulseModel, list]:
    """Image of a few stars blurred by point spread functions of differing width."""
    model = PulseModel(Domain((side, side)), S, F, delta)
    rng = np.random.default_rng(derive_seed(seed, "instance"))
    support = _separated_support(model, derive_seed(seed, "matrix"))
    pside = math.isqrt(F)
    shapes = [_psf(pside, w) for w in rng.uniform(1.2, 2.5, S)]
    alpha = rng.uniform(0.5, 2.0, S)
    return pulse_stream_from_shapes(shapes, alpha, support), model, shapes


@dataclass(frozen=True, eq=False)
class IngestResult:
    z: np.ndarray
    domain: Domain
    z_hat: np.ndarray
    pulse: ImpulseResponse
    spikes: SpikeStream
    normalized_mse: float


def ingest_signal(path, fmt: str) -> tuple[np.ndarray, Domain]:
    """Load a signal file (``csv_dense`` or ``csv_sparse``)."""
    return read_signal(path, fmt)


def recover_signal(z, model: PulseModel, M: int, seed: int, cfg: RecoveryConfig | None = None,
                   snr_db: float = math.inf) -> IngestResult:
    """Measure ``z`` with a seeded Gaussian matrix and recover it with the iterative solver.

    The returned pulse is the estimated anchor pulse of the signal.
    """
    z = np.asarray(z, dtype=float).reshape(-1)
    if z.size != model.N:
        raise ModelError(f"signal of length {z.size} for a model with N={model.N}")
    phi = gaussian_matrix(M, model.N, derive_seed(seed, "matrix"))
    y = add_noise(measure(phi, z), snr_db, derive_seed(seed, "noise"))
    cfg = cfg or RecoveryConfig()
    if cfg.eps == 0.0 and noise_level(y, snr_db) > 0.0:
        cfg = dataclasses.replace(cfg, eps=noise_level(y, snr_db))
    res = iterative_support_estimation(y, phi, model, cfg)
    return IngestResult(z, model.domain, res.z_hat, res.h_hat, res.x_hat, normalized_mse(z, res.z_hat))
