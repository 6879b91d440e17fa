"""Gauss-Legendre quadrature: adaptive panel refinement and batched fixed rules."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .errors import DomainError, NonConvergent


@dataclass(frozen=True)
class QuadratureSpec:
    truncation_radius: float = 40.0
    panel_count: int = 2**14
    abs_tol: float = 1e-10
    rel_tol: float = 1e-9

    def __post_init__(self):
        if not self.truncation_radius > 0:
            raise DomainError("truncation_radius must be positive")
        if self.panel_count < 1:
            raise DomainError("panel_count must be a positive integer")
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise DomainError("tolerances must be positive")


DEFAULT_SPEC = QuadratureSpec()


class QuadResult(NamedTuple):
    value: float
    error: float
    panels: int


@lru_cache(maxsize=None)
def gauss_legendre_rule(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights on [-1, 1]."""
    nodes, weights = np.polynomial.legendre.leggauss(order)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def _checked(values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(values)):
        raise DomainError("integrand is not finite at a quadrature node")
    return values


def adaptive_gauss_legendre(
    f: Callable[[np.ndarray], np.ndarray],
    breakpoints: Sequence[float],
    abs_tol: float = DEFAULT_SPEC.abs_tol,
    rel_tol: float = DEFAULT_SPEC.rel_tol,
    max_panels: int = DEFAULT_SPEC.panel_count,
    order: int = 16,
) -> QuadResult:
    """Integrate a vectorized ``f`` over ``[breakpoints[0], breakpoints[-1]]``.

    Each panel is estimated with an ``order``-point rule on the whole panel and
    on its two halves; the difference is the panel's error estimate. Panels
    whose estimate exceeds their share of the tolerance are bisected. All
    active panels of a round are evaluated in one call to ``f``.
    """
    edges = np.asarray(breakpoints, dtype=float)
    if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0):
        raise DomainError("breakpoints must be strictly increasing")
    x, w = gauss_legendre_rule(order)
    total_width = edges[-1] - edges[0]

    a, b = edges[:-1], edges[1:]
    done_value = 0.0
    done_error = 0.0
    n_panels = a.size
    while True:
        mid = 0.5 * (a + b)
        half = 0.5 * (b - a)
        quarter = 0.5 * half
        coarse_nodes = mid[:, None] + half[:, None] * x
        left_nodes = (a + quarter)[:, None] + quarter[:, None] * x
        right_nodes = (mid + quarter)[:, None] + quarter[:, None] * x
        stacked = np.concatenate([coarse_nodes, left_nodes, right_nodes], axis=1)
        vals = _checked(f(stacked.ravel())).reshape(stacked.shape)
        k = x.size
        coarse = half * (vals[:, :k] @ w)
        fine = quarter * (vals[:, k : 2 * k] @ w + vals[:, 2 * k :] @ w)
        err = np.abs(fine - coarse)

        estimate = done_value + fine.sum()
        tol = max(abs_tol, rel_tol * abs(estimate))
        if done_error + err.sum() <= tol:
            return QuadResult(float(estimate), float(done_error + err.sum()), n_panels)

        share = tol * (b - a) / total_width
        ok = err <= share
        done_value += fine[ok].sum()
        done_error += err[ok].sum()
        bad_a, bad_b, bad_mid = a[~ok], b[~ok], mid[~ok]
        n_panels += bad_a.size
        if n_panels > max_panels:
            raise NonConvergent(
                f"adaptive quadrature exceeded {max_panels} panels "
                f"(error estimate {done_error + err.sum():.3e}, tolerance {tol:.3e})"
            )
        a = np.concatenate([bad_a, bad_mid])
        b = np.concatenate([bad_mid, bad_b])


def fixed_gauss_legendre(
    f: Callable[[np.ndarray], np.ndarray],
    a: np.ndarray,
    b: np.ndarray,
    order: int = 20,
    panels: int = 1,
) -> np.ndarray:
    """Composite rule applied to a batch of intervals ``[a_i, b_i]``.

    ``f`` receives an array of shape ``(batch, panels * order)`` and must act
    elementwise.
    """
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    x, w = gauss_legendre_rule(order)
    frac = np.linspace(0.0, 1.0, panels + 1)
    lo = a[:, None] + (b - a)[:, None] * frac[:-1]
    width = ((b - a) / panels)[:, None]
    nodes = (lo[:, :, None] + 0.5 * width[:, :, None] * (x + 1.0)).reshape(a.size, -1)
    vals = _checked(f(nodes)).reshape(a.size, panels, order)
    return (0.5 * width * (vals @ w)).sum(axis=1)
