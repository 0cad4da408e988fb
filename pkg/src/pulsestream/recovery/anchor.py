"""Anchor pulse: where alternating minimization lands when pulse shapes differ.

At Nyquist rate with non-overlapping pulses the two alternating updates have
closed forms.  With a unit pulse estimate ``g`` the amplitudes become
``x_i = c_i alpha_i`` where ``c_i = <h_i, g>``, and the pulse update is

    sum_i c_i alpha_i**2 h_i / sum_i c_i**2 alpha_i**2

A fixed point of this map (after normalization) is the anchor pulse, a
scale-invariant weighted average of the individual shapes.
"""
from __future__ import annotations

from typing import NamedTuple, Sequence

import numpy as np

from ..errors import ModelError
from ..linop import quasi_toeplitz_pinv_apply
from ..signal_model import ImpulseResponse, Support, circular_convolve
from .common import RecoveryConfig, normalize_pair

__all__ = [
    "AnchorResult",
    "anchor_pulse_closed_form",
    "anchor_pulse_fixed_point",
    "anchor_residual",
    "pulse_stream_from_shapes",
]

FIXED_POINT_TOL = 1e-10


class AnchorResult(NamedTuple):
    pulse: ImpulseResponse
    converged: bool
    iterations: int
    steps: tuple


def _coef_matrix(pulses) -> np.ndarray:
    rows = [p.coefficients if isinstance(p, ImpulseResponse) else np.asarray(p, float) for p in pulses]
    if not rows:
        raise ModelError("need at least one pulse")
    F = rows[0].size
    if any(r.ndim != 1 or r.size != F for r in rows):
        raise ModelError("all pulses must have the same length F")
    return np.vstack(rows)


def anchor_pulse_closed_form(pulses: Sequence, alpha, h_hat) -> np.ndarray:
    """Right-hand side of the anchor equation at the unit vector ``h_hat``.

    Parameters
    ----------
    pulses : sequence of ImpulseResponse or 1-D arrays
        Individual pulse shapes ``h_i``, all of length ``F``.
    alpha : array_like
        Spike amplitudes ``alpha_i``.
    h_hat : ImpulseResponse or array_like
        Current unit-norm pulse estimate.

    Returns
    -------
    ndarray
        ``sum c_i alpha_i^2 h_i / sum c_i^2 alpha_i^2`` with ``c_i = <h_i, h_hat>``.
    """
    H = _coef_matrix(pulses)
    g = h_hat.coefficients if isinstance(h_hat, ImpulseResponse) else np.asarray(h_hat, float)
    alpha = np.asarray(alpha, dtype=float).reshape(-1)
    if alpha.size != H.shape[0] or g.size != H.shape[1]:
        raise ModelError("pulses, amplitudes and estimate have inconsistent sizes")
    c = H @ g
    a2 = alpha * alpha
    den = float(np.sum(c * c * a2))
    if den == 0.0:
        raise ModelError("every c_i * alpha_i vanishes; the anchor update is undefined")
    return (c * a2) @ H / den


def anchor_residual(pulses, alpha, h_hat) -> float:
    """``|| h_hat - normalize(closed_form(h_hat)) ||``."""
    g = h_hat.coefficients if isinstance(h_hat, ImpulseResponse) else np.asarray(h_hat, float)
    v = anchor_pulse_closed_form(pulses, alpha, g)
    return float(np.linalg.norm(g - v / np.linalg.norm(v)))


def pulse_stream_from_shapes(pulses, alpha, shifts: Support) -> np.ndarray:
    """Nyquist-rate signal ``sum_i alpha_i S_{t_i} h_i`` with a distinct shape per spike."""
    H = _coef_matrix(pulses)
    domain = shifts.domain
    if len(shifts) != H.shape[0]:
        raise ModelError(f"{len(shifts)} shifts for {H.shape[0]} pulses")
    z = np.zeros(domain.size)
    for t, a, h in zip(shifts.indices, np.asarray(alpha, float), H):
        spike = np.zeros(domain.size)
        spike[t] = a
        z += circular_convolve(spike, ImpulseResponse(h, domain).dense(), domain)
    return z


def anchor_pulse_fixed_point(
    pulses, alpha, shifts: Support, h_init: ImpulseResponse, cfg: RecoveryConfig
) -> AnchorResult:
    """Iterate alternating minimization on ``sum alpha_i S_{t_i} h_i`` at Nyquist rate.

    The amplitude step applies the closed-form pseudo-inverse of the
    quasi-Toeplitz pulse dictionary; the pulse step is the matching closed
    form for the spike dictionary.  Stops when the normalized pulse moves by
    less than ``1e-10`` or after ``cfg.max_inner_iters`` passes, in which
    case ``converged`` is False.
    """
    domain = shifts.domain
    if h_init.domain != domain:
        raise ModelError("initial pulse and shifts live on different domains")
    y = pulse_stream_from_shapes(pulses, alpha, shifts)
    F = h_init.F
    table = domain.shift_table(shifts.indices, h_init.indices)
    blocks = y[table]
    h = h_init
    steps: list[float] = []
    converged = False
    it = 0
    for it in range(1, cfg.max_inner_iters + 1):
        x = quasi_toeplitz_pinv_apply(h, shifts, y)
        den = float(x @ x)
        if den == 0.0:
            raise ModelError("amplitude estimates vanished; the anchor update is undefined")
        _, hv = normalize_pair(x, (x @ blocks) / den)
        step = float(np.linalg.norm(hv - h.coefficients))
        h = ImpulseResponse(hv, domain)
        steps.append(step)
        if step < FIXED_POINT_TOL:
            converged = True
            break
    assert h.F == F
    return AnchorResult(h, converged, it, tuple(steps))
