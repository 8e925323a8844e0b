"""Single-edge Sturm-Liouville evaluation engine.

Computes the solution S(x, lambda) of  -y'' + q(x) y = lambda y  on [0, pi]
with S(0) = 0, S'(0) = 1, and returns the endpoint pair (S(pi), S'(pi)).
Both are entire functions of lambda, so the evaluation must stay valid and
smooth across lambda = 0 and for lambda < 0.

Method: on each grid cell the potential is replaced by the midpoint value
(average of the endpoint samples) and the resulting constant-coefficient
equation is propagated exactly with trigonometric/hyperbolic cell matrices.
The truncation error is O(h^2) from the potential approximation only, which
makes the accuracy uniform in lambda; that matters because the spectral
pipeline samples S at eigenvalues up to the truncation level.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import StepFailure
from .grid import GridFunction, trapezoid_weights

#: |lambda|*t^2 below this uses the power series for sin/cos of rho*t
#: (removes the rho = 0 singularity of the closed forms).
SERIES_GUARD = 1e-4

#: Lambda values per internal evaluation block (bounds peak memory of the
#: cell-matrix tree reduction).
_CHUNK = 96


def cos_rho_t(lam, t):
    """cos(rho*t) with rho = sqrt(lambda), evaluated as an entire function of lambda.

    For lambda < 0 this is cosh(sqrt(-lambda)*t).  Arguments broadcast.
    """
    lam = np.asarray(lam, dtype=float)
    t = np.asarray(t, dtype=float)
    z = np.broadcast_arrays(lam * t * t, lam)[0].copy()
    out = np.empty_like(z)
    small = np.abs(z) <= SERIES_GUARD
    zs = z[small]
    # cos series 1 - z/2 + z^2/24 - z^3/720 + z^4/40320, nested
    out[small] = 1.0 - zs / 2.0 * (1.0 - zs / 12.0 * (1.0 - zs / 30.0 * (1.0 - zs / 56.0)))
    zb = z[~small]
    r = np.sqrt(np.abs(zb))
    out[~small] = np.where(zb > 0.0, np.cos(r), np.cosh(r))
    return out


def sinc_rho_t(lam, t):
    """sin(rho*t)/rho with rho = sqrt(lambda), entire in lambda.

    Equals t at lambda = 0 and sinh(sqrt(-lambda)*t)/sqrt(-lambda) for lambda < 0.
    Requires t >= 0.
    """
    lam = np.asarray(lam, dtype=float)
    t = np.asarray(t, dtype=float)
    z, tb = np.broadcast_arrays(lam * t * t, t)
    z = z.copy()
    out = np.empty_like(z)
    small = np.abs(z) <= SERIES_GUARD
    zs = z[small]
    # t * (1 - z/6 + z^2/120 - z^3/5040 + z^4/362880), nested
    out[small] = tb[small] * (
        1.0 - zs / 6.0 * (1.0 - zs / 20.0 * (1.0 - zs / 42.0 * (1.0 - zs / 72.0)))
    )
    zb = z[~small]
    r = np.sqrt(np.abs(zb))
    out[~small] = tb[~small] * np.where(zb > 0.0, np.sin(r) / r, np.sinh(r) / r)
    return out


def cos_rho_diff(lam, t, t_ref):
    """(cos(rho*t) - cos(rho*t_ref)) / lambda, entire in lambda.

    The apparent 1/lambda singularity cancels; near lambda = 0 the value is
    -(t^2 - t_ref^2)/2 + O(lambda).  Used to evaluate endpoint functions whose
    1/rho^2 terms are tamed by the integral constraint on K.
    """
    lam = np.asarray(lam, dtype=float)
    t = np.asarray(t, dtype=float)
    t_ref = np.asarray(t_ref, dtype=float)
    lb, tb, rb = np.broadcast_arrays(lam, t, t_ref)
    zmax = np.abs(lb) * np.maximum(tb, rb) ** 2
    out = np.empty_like(zmax)
    small = zmax <= SERIES_GUARD
    ls, ts, rs = lb[small], tb[small], rb[small]
    t2, r2 = ts * ts, rs * rs
    d2 = t2 - r2
    d4 = t2 * t2 - r2 * r2
    d6 = t2**3 - r2**3
    d8 = t2**4 - r2**4
    out[small] = -d2 / 2.0 + ls * (d4 / 24.0 - ls * (d6 / 720.0 - ls * d8 / 40320.0))
    big = ~small
    out[big] = (cos_rho_t(lb[big], tb[big]) - cos_rho_t(lb[big], rb[big])) / lb[big]
    return out


def _cell_cs(tau: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray]:
    """Fused cos(rho*h) and sin(rho*h)/rho for the cell propagators (rho^2 = tau).

    Same values as cos_rho_t / sinc_rho_t; one shared mask and radical since
    this pair sits in the innermost loop.
    """
    z = tau * (h * h)
    c = np.empty_like(z)
    s = np.empty_like(z)
    small = np.abs(z) <= SERIES_GUARD
    zs = z[small]
    c[small] = 1.0 - zs / 2.0 * (1.0 - zs / 12.0 * (1.0 - zs / 30.0 * (1.0 - zs / 56.0)))
    s[small] = h * (1.0 - zs / 6.0 * (1.0 - zs / 20.0 * (1.0 - zs / 42.0 * (1.0 - zs / 72.0))))
    big = ~small
    zb = z[big]
    r = np.sqrt(np.abs(zb))
    pos = zb > 0.0
    cb = np.where(pos, np.cos(r), np.cosh(r))
    sb = h * np.where(pos, np.sin(r), np.sinh(r)) / r
    c[big] = cb
    s[big] = sb
    return c, s


def integrate_potential(q: GridFunction) -> float:
    """omega = (1/2) * integral of q over [0, pi] (trapezoid on the native grid)."""
    return 0.5 * q.integrate()


def pole_threshold(lam):
    """|S(pi, lam)| at or below this counts as numerically zero.

    Scale-aware: 1e-8 * max(1, |lam|^(-1/2)), matching the 1/rho decay of S.
    The growth factor is capped at 1e4 so the threshold stays meaningful as
    lam -> 0.  Broadcasts over arrays.
    """
    lam = np.asarray(lam, dtype=float)
    with np.errstate(divide="ignore"):
        factor = np.minimum(1e4, np.maximum(1.0, np.abs(lam) ** -0.5))
    out = 1e-8 * factor
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class BoundarySample:
    """Endpoint values (S(pi, lambda), S'(pi, lambda)) of the edge solution."""

    s_end: float
    s_prime_end: float


def edge_endpoint_values(q: GridFunction, lams) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized core: S(pi, lam) and S'(pi, lam) for an array of lambdas.

    Returns two float arrays aligned with ``lams``.  Raises StepFailure listing
    the offending indices if propagation overflows (strongly negative lambda).
    """
    lams = np.atleast_1d(np.asarray(lams, dtype=float))
    qv = q.values
    qmid = 0.5 * (qv[:-1] + qv[1:])
    h = q.h
    n_cells = qmid.size

    s_out = np.empty(lams.size)
    sp_out = np.empty(lams.size)
    for start in range(0, lams.size, _CHUNK):
        block = lams[start : start + _CHUNK]
        tau = block[None, :] - qmid[:, None]  # (n_cells, nb)
        with np.errstate(over="ignore", invalid="ignore"):
            c, s = _cell_cs(tau, h)
            # cell propagator [[c, s], [-tau*s, c]]; fold pairwise so each
            # level is a handful of elementwise ops (order preserved: later
            # cells multiply from the left)
            m00, m01, m10, m11 = c, s, -tau * s, c
            while m00.shape[0] > 1:
                even = (m00.shape[0] // 2) * 2
                a00, a01 = m00[1:even:2], m01[1:even:2]
                a10, a11 = m10[1:even:2], m11[1:even:2]
                b00, b01 = m00[0:even:2], m01[0:even:2]
                b10, b11 = m10[0:even:2], m11[0:even:2]
                n00 = a00 * b00 + a01 * b10
                n01 = a00 * b01 + a01 * b11
                n10 = a10 * b00 + a11 * b10
                n11 = a10 * b01 + a11 * b11
                if m00.shape[0] != even:
                    n00 = np.concatenate([n00, m00[even:]], axis=0)
                    n01 = np.concatenate([n01, m01[even:]], axis=0)
                    n10 = np.concatenate([n10, m10[even:]], axis=0)
                    n11 = np.concatenate([n11, m11[even:]], axis=0)
                m00, m01, m10, m11 = n00, n01, n10, n11
        s_out[start : start + _CHUNK] = m01[0]
        sp_out[start : start + _CHUNK] = m11[0]

    bad = ~(np.isfinite(s_out) & np.isfinite(sp_out))
    if np.any(bad):
        idx = np.nonzero(bad)[0].tolist()
        raise StepFailure(
            f"edge propagation produced non-finite values at {len(idx)} lambda(s), "
            f"first lambda = {lams[idx[0]]:.6g}",
            indices=idx,
        )
    return s_out, sp_out


def solve_edge(q: GridFunction, lam: float) -> BoundarySample:
    """(S(pi, lambda), S'(pi, lambda)) for a single spectral parameter."""
    s, sp = edge_endpoint_values(q, [lam])
    return BoundarySample(float(s[0]), float(sp[0]))


def solve_edge_batch(q: GridFunction, lams: Sequence[float]) -> list[BoundarySample]:
    """Element-wise solve_edge over a list of lambdas (single propagator setup)."""
    lams = np.asarray(list(lams), dtype=float)
    if lams.size == 0:
        return []
    s, sp = edge_endpoint_values(q, lams)
    return [BoundarySample(float(a), float(b)) for a, b in zip(s, sp)]


def h_inner(top_a, bot_a, top_b, bot_b, weights: np.ndarray) -> float:
    """Inner product in L2(0,pi) + L2(0,pi) via the shared trapezoid weights."""
    return float(weights @ (top_a * top_b + bot_a * bot_b))


def h_norm(top: np.ndarray, bot: np.ndarray, weights: np.ndarray) -> float:
    return float(np.sqrt(weights @ (top * top + bot * bot)))


__all__ = [
    "SERIES_GUARD",
    "BoundarySample",
    "cos_rho_t",
    "sinc_rho_t",
    "cos_rho_diff",
    "integrate_potential",
    "edge_endpoint_values",
    "solve_edge",
    "solve_edge_batch",
    "h_inner",
    "h_norm",
    "trapezoid_weights",
]
