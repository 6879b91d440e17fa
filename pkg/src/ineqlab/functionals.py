"""p-variance, entropy, Dirichlet energies and I(a) ratios."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DegenerateWitness, DomainError
from .functions import TestFunction
from .measures import Continuous1D, DiscreteMeasure, Measure, ProductMeasure, integrate
from .quadrature import QuadratureSpec

_ZERO_RTOL = 1e-14


@dataclass(frozen=True)
class InequalityReport:
    p: float
    a: float
    var_p: float
    energy: float
    ratio: float
    measure_key: str
    function_label: str

    def to_dict(self) -> dict:
        return asdict(self)


def _atoms(m: Measure) -> Optional[DiscreteMeasure]:
    if isinstance(m, DiscreteMeasure):
        return m
    if isinstance(m, ProductMeasure) and m.is_discrete:
        return m.enumerate()
    return None


def _nonneg_values(f: TestFunction, pts) -> np.ndarray:
    vals = f(pts)
    if np.any(vals < 0):
        raise DomainError(f"{f.label} is negative at an evaluated point")
    return vals


def _moments(m: Measure, f: TestFunction, powers: Sequence[float],
             q: QuadratureSpec | None = None) -> list[float]:
    """``E f^k`` for each k in ``powers``, requiring f >= 0."""
    disc = _atoms(m)
    if disc is not None:
        vals = _nonneg_values(f, disc.points)
        return [disc.expect(vals**k) for k in powers]
    if not isinstance(m, Continuous1D):
        raise DomainError("moments over continuous products need sampling, not quadrature")
    out = []
    for k in powers:
        out.append(integrate(m, lambda x, k=k: _nonneg_values(f, x) ** k, q).value)
    return out


def _var_from_moments(second: float, pth: float, p: float) -> float:
    if p == 2.0:
        return 0.0
    v = second - pth ** (2.0 / p)
    if v < 0 and -v <= 1e-12 * max(second, 1e-300):
        return 0.0
    return v


def p_variance(m: Measure, f: TestFunction, p: float, q: QuadratureSpec | None = None) -> float:
    """``E f^2 - (E f^p)^(2/p)`` for nonnegative ``f``."""
    if not 1.0 <= p <= 2.0:
        raise DomainError(f"p={p} outside [1, 2]")
    second, pth = _moments(m, f, [2.0, p], q)
    return _var_from_moments(second, pth, p)


def _xlogx(v: np.ndarray) -> np.ndarray:
    safe = np.where(v > 0, v, 1.0)
    return np.where(v > 0, v * np.log(safe), 0.0)


def entropy(m: Measure, f: TestFunction, q: QuadratureSpec | None = None) -> float:
    """``Ent(f^2) = E[f^2 ln f^2] - E f^2 ln E f^2`` with ``0 ln 0 = 0``."""
    disc = _atoms(m)
    if disc is not None:
        sq = _nonneg_values(f, disc.points) ** 2
        second = disc.expect(sq)
        first = disc.expect(_xlogx(sq))
    else:
        if not isinstance(m, Continuous1D):
            raise DomainError("entropy over continuous products needs sampling")
        second = integrate(m, lambda x: _nonneg_values(f, x) ** 2, q).value
        first = integrate(m, lambda x: _xlogx(_nonneg_values(f, x) ** 2), q).value
    if second <= 0:
        raise DomainError("entropy undefined: E f^2 = 0")
    ent = first - second * math.log(second)
    if ent < 0 and -ent <= 1e-12 * second:
        return 0.0
    return ent


def phi_curve(m: Measure, f: TestFunction, p_grid: Sequence[float],
              q: QuadratureSpec | None = None) -> list[tuple[float, float]]:
    """``(p, Var(p) / (1/p - 1/2))`` along an increasing grid in ``[1, 2)``."""
    grid = np.asarray(p_grid, dtype=float)
    if np.any(grid < 1) or np.any(grid >= 2) or np.any(np.diff(grid) <= 0):
        raise DomainError("p_grid must be increasing within [1, 2)")
    disc = _atoms(m)
    if disc is not None:
        vals = _nonneg_values(f, disc.points)
        second = disc.expect(vals**2)
        pth = vals[None, :] ** grid[:, None] @ disc.weights
        var = [_var_from_moments(second, s, p) for s, p in zip(pth, grid)]
    else:
        var = [p_variance(m, f, p, q) for p in grid]
    return [(float(p), float(v / (1.0 / p - 0.5))) for p, v in zip(grid, var)]


def _hypercube(disc: DiscreteMeasure) -> Optional[np.ndarray]:
    """Index of the flipped atom per (atom, coordinate) if atoms form {-1,1}^d."""
    pts = disc.points
    if not np.all(np.isin(pts, (-1.0, 1.0))) or disc.size != 2**disc.dimension:
        return None
    code = ((pts > 0).astype(np.int64) * (1 << np.arange(disc.dimension))).sum(axis=1)
    where = np.empty(disc.size, dtype=np.int64)
    where[code] = np.arange(disc.size)
    flips = code[:, None] ^ (1 << np.arange(disc.dimension))[None, :]
    return where[flips]


def dirichlet_energy(m: Measure, f: TestFunction,
                     weight: Optional[Callable[[np.ndarray], np.ndarray]] = None,
                     q: QuadratureSpec | None = None) -> float:
    """``E[weight * |grad f|^2]``.

    On ``{-1, 1}^d`` (two-point laws and their products) the gradient is the
    difference quotient: each coordinate contributes ``((f(+1) - f(-1)) / 2)^2``.
    """
    disc = _atoms(m)
    if disc is not None:
        flips = _hypercube(disc)
        if flips is None:
            raise DomainError("discrete energy is defined on {-1, 1}^d only")
        vals = f(disc.points)
        diff2 = ((vals[:, None] - vals[flips]) / 2.0) ** 2
        w = np.ones(disc.size) if weight is None else np.asarray(weight(disc.points), dtype=float)
        return disc.expect(w * diff2.sum(axis=1))
    if not isinstance(m, Continuous1D):
        raise DomainError("energy over continuous products needs sampling")
    probes = m.scale * np.array([-2.31, -1.27, -0.61, -0.13, 0.19, 0.73, 1.41, 2.17])
    f.validate_gradient(probes)

    def integrand(x):
        g2 = f.derivative(x) ** 2
        if weight is None:
            return g2
        w = np.asarray(weight(x), dtype=float)
        if np.any(w < 0):
            raise DomainError("energy weight must be nonnegative")
        return w * g2

    return integrate(m, integrand, q).value


def ia_ratio(m: Measure, f: TestFunction, p: float, a: float,
             weight: Optional[Callable[[np.ndarray], np.ndarray]] = None,
             q: QuadratureSpec | None = None) -> InequalityReport:
    """Constant witnessed by ``f`` in ``Var(p) <= C (2-p)^a E(f)``."""
    if not 1.0 <= p < 2.0:
        raise DomainError(f"p={p} outside [1, 2)")
    if not 0.0 <= a <= 1.0:
        raise DomainError(f"a={a} outside [0, 1]")
    second, pth = _moments(m, f, [2.0, p], q)
    var = _var_from_moments(second, pth, p)
    energy = dirichlet_energy(m, f, weight, q)
    if energy > 0:
        ratio = var / ((2.0 - p) ** a * energy)
    elif var <= _ZERO_RTOL * max(second, 1e-300):
        ratio = 0.0
    else:
        raise DegenerateWitness(f"energy is 0 but Var({p}) = {var:.3e}")
    return InequalityReport(float(p), float(a), float(var), float(energy), float(ratio),
                            getattr(m, "key", "custom"), f.label)
