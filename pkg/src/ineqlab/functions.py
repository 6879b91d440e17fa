"""Test functions: an evaluator plus its gradient, on points of shape (k, d)."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DomainError

GRADIENT_RTOL = 1e-5


def as_points(x, arity: int) -> np.ndarray:
    pts = np.asarray(x, dtype=float)
    if pts.ndim == 0:
        pts = pts.reshape(1, 1)
    elif pts.ndim == 1:
        pts = pts[:, None] if arity == 1 else pts[None, :]
    if pts.shape[-1] != arity:
        raise DomainError(f"points have dimension {pts.shape[-1]}, function arity is {arity}")
    return pts


@dataclass(frozen=True)
class TestFunction:
    arity: int
    eval: Callable[[np.ndarray], np.ndarray]
    gradient: Callable[[np.ndarray], np.ndarray]
    label: str = "f"

    __test__ = False  # keep pytest from collecting this class

    def __call__(self, x) -> np.ndarray:
        return np.asarray(self.eval(as_points(x, self.arity)), dtype=float)

    def grad(self, x) -> np.ndarray:
        pts = as_points(x, self.arity)
        return np.asarray(self.gradient(pts), dtype=float).reshape(pts.shape)

    def derivative(self, x) -> np.ndarray:
        """Scalar derivative of a one-variable function."""
        if self.arity != 1:
            raise DomainError("derivative() needs a one-variable function")
        return self.grad(x)[:, 0]

    def validate_gradient(self, probes: np.ndarray, rtol: float = GRADIENT_RTOL) -> float:
        """Worst relative gap between ``gradient`` and central differences."""
        pts = as_points(probes, self.arity)
        g = self.grad(pts)
        worst = 0.0
        for j in range(self.arity):
            h = 1e-6 * np.maximum(1.0, np.abs(pts[:, j]))
            up, down = pts.copy(), pts.copy()
            up[:, j] += h
            down[:, j] -= h
            fd = (self(up) - self(down)) / (2 * h)
            gap = np.abs(fd - g[:, j]) / np.maximum(1.0, np.abs(fd))
            worst = max(worst, float(np.max(gap)))
        if worst > rtol:
            raise DomainError(f"gradient disagrees with central differences (gap {worst:.2e})")
        return worst


def constant(c: float, arity: int = 1) -> TestFunction:
    return TestFunction(
        arity,
        lambda p: np.full(p.shape[0], float(c)),
        lambda p: np.zeros_like(p),
        label=f"const {c!r}",
    )


def from_callables(f, df, label: str = "f") -> TestFunction:
    """One-variable function from scalar-vectorized ``f`` and ``df``."""
    return TestFunction(1, lambda p: f(p[:, 0]), lambda p: df(p[:, 0])[:, None], label)


def compose(outer: TestFunction, inner, inner_prime, label: str | None = None) -> TestFunction:
    """``outer(inner(x))`` for one-variable functions, with the chain rule."""

    def ev(p):
        return outer(inner(p[:, 0]))

    def gr(p):
        x = p[:, 0]
        return (outer.derivative(inner(x)) * inner_prime(x))[:, None]

    return TestFunction(1, ev, gr, label or f"{outer.label}(map)")
