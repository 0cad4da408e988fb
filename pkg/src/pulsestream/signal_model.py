"""Pulse-stream signal models over circular 1D and 2D domains.

A pulse stream is ``z = x * h`` where ``x`` is a sparse spike stream,
``h`` a short pulse anchored at the domain origin and ``*`` circular
convolution.  All index arithmetic wraps around every axis.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterator

import numpy as np

from .errors import DomainMismatchError, InstanceGenerationError, ModelError

__all__ = [
    "Domain",
    "Support",
    "SpikeStream",
    "ImpulseResponse",
    "PulseModel",
    "PulseInstance",
    "circular_convolve",
    "is_in_model",
    "circular_separation",
    "count_supports",
    "count_circular_supports",
    "enumerate_supports",
    "random_instance",
    "DISTRIBUTIONS",
    "pulse_side",
    "pulse_indices",
]


@dataclass(frozen=True)
class Domain:
    """Circular index domain; ``shape`` has one entry (signals) or two (images)."""

    shape: tuple[int, ...]

    def __post_init__(self):
        shape = tuple(int(s) for s in np.atleast_1d(self.shape))
        if len(shape) not in (1, 2):
            raise ModelError(f"only 1D and 2D domains are supported, got shape {shape}")
        if any(s < 1 for s in shape):
            raise ModelError(f"domain shape entries must be positive, got {shape}")
        object.__setattr__(self, "shape", shape)

    @property
    def size(self) -> int:
        return math.prod(self.shape)

    @property
    def ndim(self) -> int:
        return len(self.shape)

    def unravel(self, indices) -> np.ndarray:
        """Flat indices -> array of shape (len, ndim) of per-axis coordinates."""
        idx = np.asarray(indices, dtype=np.int64).reshape(-1)
        return np.stack(np.unravel_index(idx, self.shape), axis=-1)

    def ravel(self, coords) -> np.ndarray:
        coords = np.asarray(coords, dtype=np.int64).reshape(-1, self.ndim)
        wrapped = tuple(coords[:, a] % self.shape[a] for a in range(self.ndim))
        return np.ravel_multi_index(wrapped, self.shape)

    def shift(self, indices, offset) -> np.ndarray:
        """Translate flat ``indices`` by the flat index ``offset``, wrapping per axis."""
        coords = self.unravel(indices) + self.unravel([offset])[0]
        return self.ravel(coords)

    def shift_table(self, offsets, indices) -> np.ndarray:
        """Table ``T[a, b]`` = flat index of ``indices[b]`` shifted by ``offsets[a]``."""
        off = self.unravel(offsets)
        idx = self.unravel(indices)
        total = off[:, None, :] + idx[None, :, :]
        out = np.zeros(total.shape[:2], dtype=np.int64)
        stride = 1
        for a in range(self.ndim - 1, -1, -1):
            out += (total[..., a] % self.shape[a]) * stride
            stride *= self.shape[a]
        return out


def _as_domain(domain) -> Domain:
    if isinstance(domain, Domain):
        return domain
    if isinstance(domain, (int, np.integer)):
        return Domain((int(domain),))
    return Domain(tuple(domain))


@dataclass(frozen=True)
class Support:
    """Strictly sorted set of flat indices into ``domain``."""

    indices: tuple[int, ...]
    domain: Domain

    def __post_init__(self):
        domain = _as_domain(self.domain)
        idx = tuple(int(i) for i in self.indices)
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise ModelError(f"support indices must be strictly increasing, got {idx}")
        if idx and (idx[0] < 0 or idx[-1] >= domain.size):
            raise ModelError(f"support indices out of range [0, {domain.size})")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "domain", domain)

    @classmethod
    def from_indices(cls, indices, domain) -> "Support":
        """Build from an unsorted collection; duplicates are rejected."""
        idx = sorted(int(i) for i in indices)
        if len(set(idx)) != len(idx):
            raise ModelError("support contains duplicate indices")
        return cls(tuple(idx), _as_domain(domain))

    def __len__(self) -> int:
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)

    def __contains__(self, item) -> bool:
        return int(item) in set(self.indices)

    def array(self) -> np.ndarray:
        return np.asarray(self.indices, dtype=np.int64)


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class SpikeStream:
    """Sparse spike stream: amplitudes ``values`` on ``support``."""

    support: Support
    values: np.ndarray

    def __post_init__(self):
        vals = _frozen(np.ravel(self.values))
        if vals.shape[0] != len(self.support):
            raise ModelError(
                f"{vals.shape[0]} values given for a support of size {len(self.support)}"
            )
        if not np.all(np.isfinite(vals)):
            raise ModelError("spike amplitudes must be finite")
        object.__setattr__(self, "values", vals)

    @property
    def domain(self) -> Domain:
        return self.support.domain

    @classmethod
    def from_dense(cls, x, domain, support=None) -> "SpikeStream":
        """Keep the entries of ``x`` on ``support`` (default: the nonzeros)."""
        domain = _as_domain(domain)
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.shape[0] != domain.size:
            raise DomainMismatchError(f"vector of length {x.shape[0]} on domain {domain.shape}")
        if support is None:
            support = Support(tuple(np.flatnonzero(x)), domain)
        elif not isinstance(support, Support):
            support = Support.from_indices(support, domain)
        return cls(support, x[support.array()])

    @classmethod
    def empty(cls, domain) -> "SpikeStream":
        return cls(Support((), _as_domain(domain)), np.zeros(0))

    def dense(self) -> np.ndarray:
        out = np.zeros(self.domain.size)
        out[self.support.array()] = self.values
        return out


@dataclass(frozen=True, eq=False)
class ImpulseResponse:
    """Pulse shape with ``F`` coefficients anchored at the domain origin.

    In 1D the coefficients occupy indices ``0..F-1``.  In 2D ``F`` must be a
    perfect square and the coefficients fill the ``f x f`` top-left patch in
    row-major order.
    """

    coefficients: np.ndarray
    domain: Domain

    def __post_init__(self):
        domain = _as_domain(self.domain)
        coeffs = _frozen(np.ravel(self.coefficients))
        F = coeffs.shape[0]
        if F < 1:
            raise ModelError("impulse response needs at least one coefficient")
        side = pulse_side(F, domain.ndim)
        if any(side > s for s in domain.shape):
            raise ModelError(f"pulse of size {F} does not fit in domain {domain.shape}")
        object.__setattr__(self, "coefficients", coeffs)
        object.__setattr__(self, "domain", domain)

    @property
    def F(self) -> int:
        return self.coefficients.shape[0]

    @property
    def indices(self) -> np.ndarray:
        return pulse_indices(self.F, self.domain)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.coefficients))

    def dense(self) -> np.ndarray:
        out = np.zeros(self.domain.size)
        out[self.indices] = self.coefficients
        return out

    @classmethod
    def from_dense(cls, h, F: int, domain) -> "ImpulseResponse":
        domain = _as_domain(domain)
        h = np.asarray(h, dtype=float).reshape(-1)
        return cls(h[pulse_indices(F, domain)], domain)

    @classmethod
    def flat(cls, F: int, domain) -> "ImpulseResponse":
        """Unit-norm constant pulse ``(1, ..., 1) / sqrt(F)``."""
        return cls(np.full(F, 1.0 / math.sqrt(F)), _as_domain(domain))


def pulse_side(F: int, ndim: int) -> int:
    if ndim == 1:
        return F
    side = math.isqrt(F)
    if side * side != F:
        raise ModelError(f"2D pulses need a square number of coefficients, got F={F}")
    return side


def pulse_indices(F: int, domain: Domain) -> np.ndarray:
    """Flat indices of the origin-anchored pulse window."""
    if domain.ndim == 1:
        return np.arange(F, dtype=np.int64)
    side = pulse_side(F, 2)
    rows, cols = np.meshgrid(np.arange(side), np.arange(side), indexing="ij")
    return np.ravel_multi_index((rows.ravel(), cols.ravel()), domain.shape).astype(np.int64)


@dataclass(frozen=True)
class PulseModel:
    """Disjoint pulse stream model: ``S`` spikes, pulse size ``F``, separation ``delta``.

    In 2D ``delta`` is the side of the hypercube that may contain at most
    one spike and the pulse occupies a ``sqrt(F)``-sided square.
    """

    domain: Domain
    S: int
    F: int
    delta: int

    def __post_init__(self):
        domain = _as_domain(self.domain)
        object.__setattr__(self, "domain", domain)
        if self.S < 1 or self.F < 1 or self.delta < 1:
            raise ModelError("S, F and delta must all be >= 1")
        side = pulse_side(self.F, domain.ndim)
        if self.delta < side:
            raise ModelError(f"delta={self.delta} smaller than pulse extent {side}: pulses overlap")
        if self.S * self.delta ** domain.ndim > domain.size:
            raise ModelError(
                f"cannot pack S={self.S} spikes with separation {self.delta} into {domain.shape}"
            )

    @property
    def N(self) -> int:
        return self.domain.size

    @property
    def K(self) -> int:
        return self.S * self.F

    @property
    def pulse_side(self) -> int:
        return pulse_side(self.F, self.domain.ndim)

    @property
    def pulse_indices(self) -> np.ndarray:
        return pulse_indices(self.F, self.domain)


def _canonical_pair(a: np.ndarray, b: np.ndarray):
    """Order two operands so the summation below is symmetric in its arguments."""
    na, nb = np.count_nonzero(a), np.count_nonzero(b)
    if na != nb:
        return (a, b) if na < nb else (b, a)
    return (a, b) if a.tobytes() <= b.tobytes() else (b, a)


def circular_convolve(x, h, domain=None) -> np.ndarray:
    """Circular convolution by direct summation over the sparser operand.

    ``z[k] = sum_j x[j] h[(k - j) mod shape]``.  The outer loop runs over the
    nonzeros of a canonically chosen operand, so swapping ``x`` and ``h``
    performs the identical sequence of floating point operations.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    h = np.asarray(h, dtype=float).reshape(-1)
    if x.shape != h.shape:
        raise DomainMismatchError(f"operands have lengths {x.shape[0]} and {h.shape[0]}")
    domain = Domain((x.shape[0],)) if domain is None else _as_domain(domain)
    if domain.size != x.shape[0]:
        raise DomainMismatchError(f"length {x.shape[0]} does not match domain {domain.shape}")
    outer, inner = _canonical_pair(x, h)
    inner_nd = inner.reshape(domain.shape)
    z = np.zeros(domain.shape)
    nz = np.flatnonzero(outer)
    if nz.size == 0:
        return z.reshape(-1)
    shifts = domain.unravel(nz)
    for j, shift in zip(nz, shifts):
        z += outer[j] * np.roll(inner_nd, tuple(shift), axis=tuple(range(domain.ndim)))
    return z.reshape(-1)


def circular_separation(domain: Domain, i: int, j: int) -> int:
    """Circular distance between two flat indices (Chebyshev across axes in 2D)."""
    a, b = domain.unravel([i, j])
    d = 0
    for ax, n in enumerate(domain.shape):
        diff = abs(int(a[ax]) - int(b[ax])) % n
        d = max(d, min(diff, n - diff))
    return d


def is_in_model(support: Support, model: PulseModel) -> bool:
    """True iff ``support`` has at most ``S`` spikes, pairwise separated by ``delta``.

    In 1D the separation is the shorter way round the cycle; in 2D two spikes
    conflict when they fit in one ``delta``-sided square (per-axis circular
    distance below ``delta`` on every axis).
    """
    if len(support) > model.S:
        return False
    if support.domain != model.domain:
        return False
    idx = support.indices
    if len(idx) < 2:
        return True
    if model.domain.ndim == 1:
        N = model.N
        gaps = np.diff(np.asarray(idx + (idx[0] + N,)))
        return bool(gaps.min() >= model.delta)
    return all(
        circular_separation(model.domain, a, b) >= model.delta for a, b in combinations(idx, 2)
    )


def count_supports(N: int, S: int, delta: int) -> int:
    """Closed-form subspace count ``C(N - S*delta + S - 1, S - 1)``; 0 if infeasible.

    This counts gap compositions, i.e. separated configurations with one spike
    pinned to a reference position.  The number of circular supports produced
    by :func:`enumerate_supports` is ``N / S`` times larger (see
    :func:`count_circular_supports`).
    """
    if S < 1 or delta < 1:
        raise ModelError("S and delta must be >= 1")
    if S * delta > N:
        return 0
    return math.comb(N - S * delta + S - 1, S - 1)


def count_circular_supports(N: int, S: int, delta: int) -> int:
    """Exact number of size-``S`` circularly ``delta``-separated supports of ``Z_N``."""
    if S == 0:
        return 1
    return N * count_supports(N, S, delta) // S


def enumerate_supports(N: int, S: int, delta: int) -> Iterator[Support]:
    """All size-``S`` circularly separated supports, in lexicographic order."""
    domain = Domain((N,))
    for idx in _separated_tuples(N, S, delta):
        yield Support(idx, domain)


def _separated_tuples(N: int, S: int, delta: int) -> Iterator[tuple[int, ...]]:
    if S == 0:
        yield ()
        return
    if S * delta > N:
        return

    def extend(prefix: list[int]):
        k = len(prefix)
        if k == S:
            yield tuple(prefix)
            return
        first = prefix[0]
        # room for the remaining S-k spikes and the wrap gap back to `first`
        last_allowed = min(N - 1, first + N - delta * (S - k))
        for i in range(prefix[-1] + delta, last_allowed + 1):
            prefix.append(i)
            yield from extend(prefix)
            prefix.pop()

    for first in range(N):
        yield from extend([first])


def _draw(rng: np.random.Generator, dist: str, size: int) -> np.ndarray:
    if dist == "normal":
        return rng.standard_normal(size)
    if dist == "uniform":
        return rng.uniform(-1.0, 1.0, size)
    if dist == "rademacher":
        return rng.choice([-1.0, 1.0], size)
    raise ModelError(f"unknown distribution {dist!r}; choose one of {sorted(DISTRIBUTIONS)}")


DISTRIBUTIONS = frozenset({"normal", "uniform", "rademacher"})


@dataclass(frozen=True, eq=False)
class PulseInstance:
    """A synthetic pulse stream together with its generating parts."""

    x: SpikeStream
    h: ImpulseResponse
    z: np.ndarray
    sampling: str = "rejection"
    metadata: dict = field(default_factory=dict)

    @property
    def uniform(self) -> bool:
        return self.sampling == "rejection"

    def __iter__(self):
        # unpacks as (x, h, z)
        return iter((self.x, self.h, self.z))


def _sequential_gap_support(model: PulseModel, rng: np.random.Generator) -> tuple[int, ...]:
    N, S, delta = model.N, model.S, model.delta
    slack = N - S * delta
    # random composition of the slack into S nonnegative parts
    cuts = np.sort(rng.choice(slack + S - 1, S - 1, replace=False)) if S > 1 else np.array([], int)
    bounds = np.concatenate(([-1], cuts, [slack + S - 1]))
    extras = np.diff(bounds) - 1
    gaps = delta + extras
    offset = int(rng.integers(N))
    pos = offset + np.concatenate(([0], np.cumsum(gaps[:-1])))
    return tuple(sorted(int(p) % N for p in pos))


def random_instance(
    model: PulseModel,
    amplitude_dist: str = "normal",
    pulse_dist: str = "normal",
    seed: int = 0,
    *,
    fallback: bool = True,
) -> PulseInstance:
    """Draw a random member of ``model``.

    Supports are drawn uniformly by rejection sampling (at most ``10*S*N``
    draws).  If that cap is hit and ``fallback`` is set, a 1D support is
    built by sequential gap placement instead and the instance is marked
    ``sampling="sequential_gap"``.  The pulse has unit Euclidean norm.
    """
    rng = np.random.default_rng(seed)
    N, S = model.N, model.S
    cap = 10 * S * N
    idx = None
    for attempt in range(1, cap + 1):
        cand = Support.from_indices(rng.choice(N, S, replace=False), model.domain)
        if is_in_model(cand, model):
            idx = cand.indices
            break
    sampling = "rejection"
    if idx is None:
        if not fallback or model.domain.ndim != 1:
            raise InstanceGenerationError(
                f"rejection sampling failed after {cap} draws for S={S}, delta={model.delta} "
                f"on {model.domain.shape}; use sequential gap placement (fallback=True, 1D only)"
            )
        idx = _sequential_gap_support(model, rng)
        sampling = "sequential_gap"
    amplitudes = _draw(rng, amplitude_dist, S)
    pulse = _draw(rng, pulse_dist, model.F)
    pulse /= np.linalg.norm(pulse)
    x = SpikeStream(Support(idx, model.domain), amplitudes)
    h = ImpulseResponse(pulse, model.domain)
    z = circular_convolve(x.dense(), h.dense(), model.domain)
    return PulseInstance(x, h, z, sampling, {"attempts": attempt if sampling == "rejection" else cap})
