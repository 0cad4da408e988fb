"""Configuration, result type and dictionary helpers shared by the solvers."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import ModelError
from ..linop import CirculantOperator, ColumnRestriction
from ..sampling import SamplingMatrix, measure
from ..signal_model import Domain, ImpulseResponse, SpikeStream, Support, circular_convolve

HALTING = ("residual_below_eps", "relative_change", "max_iters")
STATUSES = ("converged", "max_iters", "integrality_flag")

# updates raising the residual by more than this relative amount are rejected
MONOTONE_SLACK = 1e-12


@dataclass(frozen=True)
class RecoveryConfig:
    max_outer_iters: int = 50
    max_inner_iters: int = 20
    eps: float = 0.0
    halting: str = "relative_change"
    rank_tol: float = 1e-10
    rel_change_tol: float = 1e-6
    approx: str = "dp"
    # extra pulse initializations tried by the iterative solver after the flat one:
    # unit pulses e_0, e_1, ... first, then seeded random unit-norm pulses
    restarts: int = 40
    restart_seed: int = 0
    # re-fit the pulse under small joint shifts of the support after each pass
    align_shifts: bool = True

    def __post_init__(self):
        if self.eps < 0 or math.isnan(self.eps):
            raise ModelError("eps must be >= 0")
        if self.max_outer_iters < 1 or self.max_inner_iters < 1:
            raise ModelError("iteration caps must be >= 1")
        if self.halting not in HALTING:
            raise ModelError(f"halting must be one of {HALTING}")
        if self.approx not in ("dp", "lp"):
            raise ModelError("approx must be 'dp' or 'lp'")
        if not isinstance(self.restarts, int) or self.restarts < 0:
            raise ModelError("restarts must be an int >= 0")


@dataclass(frozen=True, eq=False)
class RecoveryResult:
    z_hat: np.ndarray
    x_hat: SpikeStream
    h_hat: ImpulseResponse
    residual_history: tuple[float, ...]
    iterations: int
    status: str
    rank_deficient: bool = False
    info: dict = field(default_factory=dict)

    @property
    def residual(self) -> float:
        return self.residual_history[-1] if self.residual_history else float("nan")


def phi_entries(phi: SamplingMatrix | None):
    return None if phi is None else phi.entries


def spike_dictionary(phi, h: ImpulseResponse, columns) -> np.ndarray:
    """``(Phi C(h))[:, columns]``."""
    op = CirculantOperator(h.dense(), h.domain)
    return ColumnRestriction(op, columns, phi_entries(phi)).matrix()


def pulse_dictionary(phi, x: SpikeStream, F: int) -> np.ndarray:
    """``(Phi C(x))[:, first F]``, the dictionary for the pulse coefficients."""
    op = CirculantOperator(x.dense(), x.domain)
    cols = ImpulseResponse(np.zeros(F), x.domain).indices
    return ColumnRestriction(op, cols, phi_entries(phi)).matrix()


def normalize_pair(x_vals: np.ndarray, h_coef: np.ndarray):
    """Unit-norm pulse with positive first nonzero; the scale moves into ``x``.

    A zero pulse is returned unchanged.
    """
    nrm = float(np.linalg.norm(h_coef))
    if nrm == 0.0:
        return x_vals, h_coef
    h = h_coef / nrm
    x = x_vals * nrm
    nz = np.flatnonzero(h)
    if nz.size and h[nz[0]] < 0:
        h = -h
        x = -x
    return x, h


def assemble(x: SpikeStream, h: ImpulseResponse) -> np.ndarray:
    return circular_convolve(x.dense(), h.dense(), x.domain)


def measure_or_identity(phi, z) -> np.ndarray:
    return np.asarray(z, dtype=float) if phi is None else measure(phi, z)


def residual_norm(y, phi, z) -> float:
    return float(np.linalg.norm(np.asarray(y) - measure_or_identity(phi, z)))


def check_inputs(y, phi, domain: Domain) -> np.ndarray:
    y = np.asarray(y, dtype=float).reshape(-1)
    rows = domain.size if phi is None else phi.M
    if phi is not None and phi.N != domain.size:
        raise ModelError(f"sampling matrix has N={phi.N}, domain has {domain.size}")
    if y.shape[0] != rows:
        raise ModelError(f"{y.shape[0]} measurements for an operator with {rows} rows")
    return y


def make_stream(domain: Domain, idx, values) -> SpikeStream:
    idx = np.asarray(idx, dtype=np.int64)
    order = np.argsort(idx)
    return SpikeStream(Support(tuple(idx[order]), domain), np.asarray(values)[order])
