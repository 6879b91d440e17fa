"""Optimal constants of the p-variance inequality on the two-point space {-1, 1}.

With ``mu({1}) = alpha`` the best constant in
``E f^2 - (E f^p)^(2/p) <= C (f(1) - f(-1))^2`` has the closed form
``C = (alpha^(1-2/p) - (1-alpha)^(1-2/p)) / (alpha^(-2/p) - (1-alpha)^(-2/p))``.
The brute-force optimizer below is the reference the closed form is checked
against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInstance, DomainError

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class TwoPointInstance:
    alpha: float
    p: float

    def __post_init__(self):
        _check(self.alpha, self.p)


def _check(alpha: float, p: float) -> None:
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha={alpha} outside (0, 1)")
    if not 1.0 <= p < 2.0:
        raise DomainError(f"p={p} outside [1, 2)")


def optimal_constant_closed_form(alpha: float, p: float) -> float:
    _check(alpha, p)
    q = -2.0 / p
    if alpha == 0.5:
        return (2.0 - p) / 4.0
    # factor (1-alpha)^q out of both differences to avoid cancellation near 1/2
    log_odds = math.log1p((2.0 * alpha - 1.0) / (1.0 - alpha))
    return (1.0 - alpha) * math.expm1((1.0 + q) * log_odds) / math.expm1(q * log_odds)


def witness_ratio(alpha: float, p: float, f_minus, f_plus):
    """``Var(p) / (f(1) - f(-1))^2`` for the function ``(f(-1), f(1))``.

    Evaluated through ``delta = f(1)/f(-1) - 1`` so that nearly constant
    functions keep their leading-order variance.
    """
    f_minus = np.asarray(f_minus, dtype=float)
    delta = np.asarray(f_plus, dtype=float) / f_minus - 1.0
    e_p = alpha * np.expm1(p * np.log1p(delta))
    var_scaled = alpha * delta * (2.0 + delta) - np.expm1((2.0 / p) * np.log1p(e_p))
    with np.errstate(divide="ignore", invalid="ignore"):
        return var_scaled / delta**2


def _ratio_on_arc(alpha: float, p: float, theta):
    theta = np.asarray(theta, dtype=float)
    return witness_ratio(alpha, p, np.cos(theta), np.sin(theta))


def optimal_constant_bruteforce(alpha: float, p: float, resolution: int = 4096,
                                tol: float = 1e-13) -> tuple[float, tuple[float, float]]:
    """Maximize the witness ratio over ``f = (cos t, sin t)``, ``t in (0, pi/2)``.

    A grid scan locates the best cell, golden-section search refines it.
    Returns the maximum and the maximizer ``(f(-1), f(1))``.
    """
    _check(alpha, p)
    if resolution < 1000:
        raise DomainError("resolution must be at least 1000")
    grid = np.linspace(0.0, math.pi / 2, resolution + 2)[1:-1]
    # the ratio is 0/0 on the diagonal f(-1) = f(1)
    grid = grid[np.abs(grid - math.pi / 4) > 1e-7]
    vals = _ratio_on_arc(alpha, p, grid)
    vals = np.where(np.isfinite(vals), vals, -np.inf)
    if not np.any(vals > 0):
        raise DegenerateInstance(f"no positive witness for alpha={alpha}, p={p}")
    k = int(np.argmax(vals))
    lo = grid[max(k - 1, 0)]
    hi = grid[min(k + 1, grid.size - 1)]

    def obj(t):
        if abs(t - math.pi / 4) < 1e-6:
            t = math.pi / 4 + math.copysign(1e-6, t - math.pi / 4 or 1.0)
        return float(_ratio_on_arc(alpha, p, t))

    c = hi - GOLDEN * (hi - lo)
    d = lo + GOLDEN * (hi - lo)
    fc, fd = obj(c), obj(d)
    while hi - lo > tol:
        if fc >= fd:
            hi, d, fd = d, c, fc
            c = hi - GOLDEN * (hi - lo)
            fc = obj(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + GOLDEN * (hi - lo)
            fd = obj(d)
    best_t, best = (c, fc) if fc >= fd else (d, fd)
    if vals[k] > best:
        best_t, best = grid[k], float(vals[k])
    return best, (math.cos(best_t), math.sin(best_t))


def claimed_maximizer(alpha: float, p: float) -> tuple[float, float]:
    """The extremal function ``(f(-1), f(1)) = (alpha^(2/p), (1-alpha)^(2/p))``."""
    return alpha ** (2.0 / p), (1.0 - alpha) ** (2.0 / p)


def direction_gap(u: tuple[float, float], v: tuple[float, float]) -> float:
    """Angle between two vectors of the positive quadrant."""
    return abs(math.atan2(u[1], u[0]) - math.atan2(v[1], v[0]))
