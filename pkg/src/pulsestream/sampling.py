"""Random sampling matrices, noisy measurement and isometry probes.

Matrices are regenerated from ``(M, N, seed)`` with numpy's ``PCG64``
bit generator (``numpy.random.default_rng(seed)``) and
``Generator.standard_normal``; entries are scaled by ``1/sqrt(M)`` so that
``E||Phi z||^2 = ||z||^2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainMismatchError, ModelError
from .signal_model import PulseModel, count_supports, random_instance

__all__ = [
    "SamplingMatrix",
    "IsometryReport",
    "gaussian_matrix",
    "bernoulli_matrix",
    "identity_matrix",
    "orthonormal_matrix",
    "measure",
    "add_noise",
    "measured_snr_db",
    "empirical_isometry",
    "measurement_bound",
]


@dataclass(frozen=True, eq=False)
class SamplingMatrix:
    """An ``M x N`` measurement operator.

    ``entries`` is ``None`` for the identity, which keeps Nyquist-rate test
    paths cheap on large domains.
    """

    M: int
    N: int
    seed: int | None
    entries: np.ndarray | None
    kind: str = "gaussian"

    def __post_init__(self):
        if self.entries is not None:
            e = np.asarray(self.entries, dtype=float)
            if e.shape != (self.M, self.N):
                raise DomainMismatchError(f"entries of shape {e.shape} for ({self.M}, {self.N})")
            e.setflags(write=False)
            object.__setattr__(self, "entries", e)

    @property
    def operator(self) -> np.ndarray | None:
        return self.entries

    def dense(self) -> np.ndarray:
        return np.eye(self.N) if self.entries is None else self.entries

    def __matmul__(self, z):
        return measure(self, z)


def gaussian_matrix(M: int, N: int, seed: int) -> SamplingMatrix:
    """I.i.d. ``N(0, 1/M)`` entries, fully determined by the arguments."""
    if M < 1 or N < 1:
        raise ModelError(f"matrix dimensions must be positive, got ({M}, {N})")
    rng = np.random.default_rng(seed)
    return SamplingMatrix(M, N, seed, rng.standard_normal((M, N)) / math.sqrt(M), "gaussian")


def bernoulli_matrix(M: int, N: int, seed: int) -> SamplingMatrix:
    """I.i.d. ``+-1/sqrt(M)`` entries."""
    if M < 1 or N < 1:
        raise ModelError(f"matrix dimensions must be positive, got ({M}, {N})")
    rng = np.random.default_rng(seed)
    signs = rng.choice(np.array([-1.0, 1.0]), size=(M, N))
    return SamplingMatrix(M, N, seed, signs / math.sqrt(M), "bernoulli")


def identity_matrix(N: int) -> SamplingMatrix:
    return SamplingMatrix(N, N, None, None, "identity")


def orthonormal_matrix(N: int, seed: int) -> SamplingMatrix:
    """Random square orthonormal matrix (exact isometry)."""
    rng = np.random.default_rng(seed)
    q, r = np.linalg.qr(rng.standard_normal((N, N)))
    q *= np.sign(np.diag(r))
    return SamplingMatrix(N, N, seed, q, "orthonormal")


def measure(phi: SamplingMatrix, z) -> np.ndarray:
    z = np.asarray(z, dtype=float).reshape(-1)
    if z.shape[0] != phi.N:
        raise DomainMismatchError(f"signal of length {z.shape[0]} for a matrix with N={phi.N}")
    return z.copy() if phi.entries is None else phi.entries @ z


def add_noise(y, snr_db: float, seed: int) -> np.ndarray:
    """Add white Gaussian noise rescaled to hit ``snr_db`` exactly.

    ``snr_db = inf`` returns ``y`` unchanged.
    """
    y = np.asarray(y, dtype=float).reshape(-1)
    if math.isinf(snr_db) and snr_db > 0:
        return y.copy()
    ynorm = float(np.linalg.norm(y))
    if ynorm == 0.0:
        raise ModelError("cannot set a finite SNR for a zero signal")
    rng = np.random.default_rng(seed)
    n = rng.standard_normal(y.shape[0])
    n *= ynorm * 10.0 ** (-snr_db / 20.0) / np.linalg.norm(n)
    return y + n


def measured_snr_db(clean, noisy) -> float:
    clean = np.asarray(clean, dtype=float)
    noise = np.asarray(noisy, dtype=float) - clean
    return 10.0 * math.log10(float(clean @ clean) / float(noise @ noise))


@dataclass(frozen=True)
class IsometryReport:
    delta_hat: float
    num_pairs: int
    model: PulseModel


def empirical_isometry(
    phi: SamplingMatrix, model: PulseModel, num_pairs: int, seed: int
) -> IsometryReport:
    """Worst distortion ``| ||Phi d||^2 / ||d||^2 - 1 |`` over random model differences.

    This is a sampled lower bound on the true isometry constant, nothing more.
    """
    if phi.N != model.N:
        raise DomainMismatchError(f"matrix has N={phi.N}, model has N={model.N}")
    worst = 0.0
    seeds = np.random.SeedSequence(seed).generate_state(2 * num_pairs, dtype=np.uint64)
    for k in range(num_pairs):
        z1 = random_instance(model, seed=int(seeds[2 * k])).z
        z2 = random_instance(model, seed=int(seeds[2 * k + 1])).z
        d = z1 - z2
        dn2 = float(d @ d)
        if dn2 == 0.0:
            continue
        pd = measure(phi, d)
        worst = max(worst, abs(float(pd @ pd) / dn2 - 1.0))
    return IsometryReport(worst, num_pairs, model)


def measurement_bound(model: PulseModel, delta: float, t: float, c: float) -> float:
    """Indicative sample count ``c/delta * ((S+F) ln(1/delta) + ln(L_S L_F) + t)``.

    ``L_S`` is the closed-form subspace count and ``L_F = 1`` because the
    pulse lives in a single fixed subspace.  The constant ``c`` is unknown
    in theory and must be supplied.
    """
    if not 0.0 < delta < 1.0:
        raise ModelError(f"delta must lie in (0, 1), got {delta}")
    if t < 0 or c <= 0:
        raise ModelError("need t >= 0 and c > 0")
    # 2D: the hypercube volume stands in for the 1D separation (indicative only)
    L_S = count_supports(model.N, model.S, model.delta ** model.domain.ndim)
    if L_S == 0:
        raise ModelError("infeasible model: no admissible supports")
    L_F = 1
    return c / delta * ((model.S + model.F) * math.log(1.0 / delta) + math.log(L_S * L_F) + t)
