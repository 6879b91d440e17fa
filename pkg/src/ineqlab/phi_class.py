"""The convexity cone Phi, tensorization checks and the technical lemma suites.

A function belongs to Phi when it is affine, or has a strictly positive second
derivative whose reciprocal is concave. Membership here is always relative to
a probe grid.

Every ``*_check`` returns a margin that is nonnegative when the inequality
holds. Margins of homogeneous inequalities are divided by the matching power
of the largest input, so the suite tolerance means the same thing at every
scale.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DomainError, RegimeError, SizeError
from .expr import parse_expression
from .functions import TestFunction
from .measures import MAX_GRID_ATOMS, DiscreteMeasure, ProductMeasure, Seed
from .quadrature import adaptive_gauss_legendre

CONCAVITY_RTOL = 1e-9
MARGIN_TOL = 1e-10
METRIC_TOL = 1e-12
MAX_CN_FACTORS = 12


@dataclass(frozen=True)
class PhiCandidate:
    eval: Callable[[np.ndarray], np.ndarray]
    second_derivative: Optional[Callable[[np.ndarray], np.ndarray]] = None
    label: str = "phi"

    def __call__(self, x):
        return np.asarray(self.eval(np.asarray(x, dtype=float)), dtype=float)

    def d2(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.second_derivative is not None:
            return np.asarray(self.second_derivative(x), dtype=float)
        h = x * 1e-5 + 1e-8
        center = self(x)
        # one-sided stencil where the central one would leave [0, inf)
        left_ok = x - h >= 0
        central = (self(x + h) - 2 * center + self(np.where(left_ok, x - h, x))) / h**2
        forward = (self(x + 2 * h) - 2 * self(x + h) + center) / h**2
        return np.where(left_ok, central, forward)


def power(k: float, coef: float = 1.0) -> PhiCandidate:
    if k == 1.0:
        return PhiCandidate(lambda x: coef * x, lambda x: np.zeros_like(x), f"{coef!r}*x")
    return PhiCandidate(
        lambda x: coef * np.power(x, k),
        lambda x: coef * k * (k - 1) * np.power(x, k - 2),
        f"{coef!r}*x^{k!r}",
    )


def affine(slope: float, intercept: float) -> PhiCandidate:
    return PhiCandidate(lambda x: slope * x + intercept, lambda x: np.zeros_like(x),
                        f"{slope!r}*x+{intercept!r}")


def combine(parts: Sequence[PhiCandidate], coefs: Sequence[float]) -> PhiCandidate:
    """Nonnegative combination; analytic second derivative only if all parts have one."""
    parts, coefs = tuple(parts), tuple(float(c) for c in coefs)
    analytic = all(p.second_derivative is not None for p in parts)
    d2 = (lambda x: sum(c * p.d2(x) for p, c in zip(parts, coefs))) if analytic else None
    return PhiCandidate(lambda x: sum(c * p(x) for p, c in zip(parts, coefs)), d2,
                        "+".join(f"{c!r}*({p.label})" for p, c in zip(parts, coefs)))


@dataclass(frozen=True)
class PhiVerdict:
    member: bool
    affine: bool
    worst_slack: float
    failing: Optional[tuple] = None

    def __bool__(self) -> bool:
        return self.member


def is_in_phi(c: PhiCandidate, grid: Sequence[float], tol: float = CONCAVITY_RTOL) -> PhiVerdict:
    """Grid-relative membership test.

    ``worst_slack`` is the smallest relative midpoint-concavity slack of
    ``1/phi''`` over all grid pairs and consecutive triples; ``failing`` is the
    triple (left, middle, right) where it occurs.
    """
    x = np.unique(np.asarray(grid, dtype=float))
    if x.size < 64:
        raise DomainError("grid needs at least 64 distinct points")
    if np.any(x <= 0):
        raise DomainError("grid must lie in (0, inf)")
    vals = c(x)
    design = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(design, vals, rcond=None)
    resid = np.max(np.abs(design @ coef - vals))
    if resid <= 1e-12 * max(np.max(np.abs(vals)), 1e-300):
        return PhiVerdict(True, True, 0.0)

    d2 = c.d2(x)
    if not np.all(np.isfinite(d2)):
        raise DomainError(f"second derivative of {c.label} is not finite on the grid")
    bad = np.flatnonzero(d2 <= tol)
    if bad.size:
        k = int(bad[0])
        return PhiVerdict(False, False, float(d2[k]), (float(x[k]),) * 3)

    g = 1.0 / d2
    i, j = np.triu_indices(x.size, k=1)
    left, right = x[i], x[j]
    mid = 0.5 * (left + right)
    g_mid = 1.0 / c.d2(mid)
    slack = (g_mid - 0.5 * (g[i] + g[j])) / np.maximum.reduce([np.abs(g[i]), np.abs(g[j]), np.abs(g_mid)])

    # second differences on the (possibly uneven) grid
    x0, x1, x2 = x[:-2], x[1:-1], x[2:]
    w = (x1 - x0) / (x2 - x0)
    interp = (1 - w) * g[:-2] + w * g[2:]
    slack3 = (g[1:-1] - interp) / np.maximum.reduce([g[:-2], g[1:-1], g[2:]])

    k2, k3 = int(np.argmin(slack)), int(np.argmin(slack3))
    if slack[k2] <= slack3[k3]:
        worst, failing = float(slack[k2]), (float(left[k2]), float(mid[k2]), float(right[k2]))
    else:
        worst, failing = float(slack3[k3]), (float(x0[k3]), float(x1[k3]), float(x2[k3]))
    member = worst >= -tol
    return PhiVerdict(member, False, worst, None if member else failing)


def ft_deficit(c: PhiCandidate, t, x, y):
    """``t phi(x) + (1-t) phi(y) - phi(t x + (1-t) y)``."""
    t, x, y = (np.asarray(v, dtype=float) for v in (t, x, y))
    if np.any((t < 0) | (t > 1)):
        raise DomainError("t must lie in [0, 1]")
    if np.any(x < 0) or np.any(y < 0):
        raise DomainError("x and y must be nonnegative")
    out = t * c(x) + (1 - t) * c(y) - c(t * x + (1 - t) * y)
    return float(out) if out.ndim == 0 else out


def _psi(c: PhiCandidate, weights: np.ndarray, z: np.ndarray):
    """``E phi(Z) - phi(E Z)`` along the last axis."""
    return c(z) @ weights - c(z @ weights)


def psi_convexity_check(c: PhiCandidate, m: DiscreteMeasure, X: TestFunction,
                        Y: TestFunction, t: float) -> float:
    """``t Psi(X) + (1-t) Psi(Y) - Psi(tX + (1-t)Y)`` with ``Psi(Z) = E phi(Z) - phi(E Z)``.

    Nonnegative because ``Psi`` is convex: the margin equals
    ``E F_t(X, Y) - F_t(E X, E Y)``, which is Jensen for the convex ``F_t``.
    """
    if not 0.0 <= t <= 1.0:
        raise DomainError("t must lie in [0, 1]")
    xv, yv = X(m.points), Y(m.points)
    if np.any(xv < 0) or np.any(yv < 0):
        raise DomainError("X and Y must be nonnegative")
    w = m.weights
    return float(t * _psi(c, w, xv) + (1 - t) * _psi(c, w, yv) - _psi(c, w, t * xv + (1 - t) * yv))


def _grid_tensor(pm: ProductMeasure, Z: Callable[[np.ndarray], np.ndarray]):
    """Factor weights and Z laid out on the product grid, shape (k_1, ..., k_n, ...)."""
    if not pm.is_discrete:
        raise DomainError("exact enumeration needs discrete factors")
    atoms = pm.enumerate(MAX_GRID_ATOMS)
    shape = tuple(f.size for f in pm.factors)
    vals = np.asarray(Z(atoms.points), dtype=float)
    return [f.weights for f in pm.factors], vals.reshape(shape + vals.shape[1:])


def _expect_axes(z: np.ndarray, weights: list, axes: Sequence[int]) -> np.ndarray:
    """Integrate out the listed grid axes; the other axes stay in place."""
    for k in sorted(axes, reverse=True):
        z = np.tensordot(weights[k], z, axes=([0], [k]))
    return z


def _full_expect(z: np.ndarray, weights: list) -> np.ndarray:
    return _expect_axes(z, weights, range(len(weights)))


def _subadd_tensor(c: PhiCandidate, weights: list, z: np.ndarray) -> tuple[float, float]:
    n = len(weights)
    lhs = float(_full_expect(c(z), weights) - c(_full_expect(z, weights)))
    e_phi = float(_full_expect(c(z), weights))
    rhs = 0.0
    for k in range(n):
        zk = _expect_axes(z, weights, [k])
        rest = [w for j, w in enumerate(weights) if j != k]
        rhs += e_phi - float(_full_expect(c(zk), rest))
    return lhs, rhs


def subadditivity_margin(pm: ProductMeasure, Z: TestFunction, c: PhiCandidate) -> tuple[float, float]:
    """Both sides of ``E phi(Z) - phi(E Z) <= sum_k E[E_k phi(Z) - phi(E_k Z)]``."""
    weights, z = _grid_tensor(pm, Z)
    if np.any(z < 0):
        raise DomainError("Z must be nonnegative on the grid")
    return _subadd_tensor(c, weights, z)


def var_p_subadditivity(pm: ProductMeasure, f: TestFunction, p: float) -> tuple[float, float]:
    """Subadditivity of ``E f^2 - (E f^p)^(2/p)`` over the factors of ``pm``."""
    if not 1.0 <= p <= 2.0:
        raise DomainError(f"p={p} outside [1, 2]")
    weights, fv = _grid_tensor(pm, f)
    if np.any(fv < 0):
        raise DomainError("f must be nonnegative on the grid")
    return _subadd_tensor(power(2.0 / p), weights, fv**p)


def _alternating(f: Callable, weights: list, z: np.ndarray) -> float:
    n = len(weights)
    total = 0.0
    for size in range(n + 1):
        for K in itertools.combinations(range(n), size):
            inner = _expect_axes(z, weights, K)
            rest = [w for j, w in enumerate(weights) if j not in K]
            total += (-1) ** size * float(_full_expect(np.asarray(f(inner), dtype=float), rest))
    return total


def cn_alternating_sum(f: Callable[[np.ndarray], np.ndarray], pm: ProductMeasure,
                       Z: Callable[[np.ndarray], np.ndarray]) -> float:
    """``sum over K of (-1)^|K| E f(E_K Z)``, by exact enumeration.

    ``Z`` maps grid points to values in the domain of ``f``: shape (k,) for
    scalar domains or (k, d) for vector ones; ``f`` must reduce the trailing
    vector axis itself.
    """
    n = len(pm.factors)
    if n > MAX_CN_FACTORS:
        raise SizeError(f"{n} factors means 2^{n} subsets; the limit is {MAX_CN_FACTORS}")
    weights, z = _grid_tensor(pm, Z)
    return _alternating(f, weights, z)


def _rho_sq_unit(s: float, u: np.ndarray) -> np.ndarray:
    """``((1+u)^s + (1-u)^s)/2 - 1`` for ``|u| <= 1`` without cancellation."""
    u = np.abs(u)
    u2 = u * u
    series = np.zeros_like(u)
    coef = 1.0
    term_pow = np.ones_like(u)
    for k in range(1, 30):
        coef *= (s - 2 * k + 2) * (s - 2 * k + 1) / ((2 * k - 1) * (2 * k))
        term_pow = term_pow * u2
        series = series + coef * term_pow
    # (1 +- u)^s = (1 +- u)(1 + expm1((s-1) log(1 +- u))): the leading terms cancel exactly
    w = np.minimum(u, 1.0)
    with np.errstate(divide="ignore"):
        low = np.where(w < 1.0, (1 - w) * np.expm1((s - 1) * np.log1p(-w)), 0.0)
    direct = 0.5 * ((1 + w) * np.expm1((s - 1) * np.log1p(w)) + low)
    return np.where(u < 0.5, series, direct)


def rho_s(x, y, s):
    """``sqrt((x^s + y^s)/2 - ((x + y)/2)^s)``, a metric on ``[0, inf)``.

    Broadcasts over ``x``, ``y`` and ``s``.
    """
    x, y, s = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (x, y, s)))
    if np.any((s <= 1.0) | (s > 2.0)):
        raise DomainError("s outside (1, 2]")
    if np.any(x < 0) or np.any(y < 0):
        raise DomainError("rho_s is defined on [0, inf)")
    m = 0.5 * (x + y)
    safe = np.where(m > 0, m, 1.0)
    u = (x - y) / (2.0 * safe)
    general = np.where(m > 0, np.sqrt(np.maximum(safe**s * _rho_sq_unit(s, u), 0.0)), 0.0)
    out = np.where(s == 2.0, np.abs(x - y) / 2.0, general)
    return float(out) if out.ndim == 0 else out


def _ft_pow(s, t, x, y):
    return t * x**s + (1 - t) * y**s - (t * x + (1 - t) * y) ** s


LEMMA8_REGIMES = {1: 1.0, 2: 2.0, 3: 12.0}


def lemma8_check(s, t, c, d, x, regime: int):
    """``K [F_t(d, x) + F_t(x, c)] - F_t(d, c)`` for ``F_t(x, y) = t x^s + (1-t) y^s - (t x + (1-t) y)^s``.

    Regimes: 1 means x outside the open interval spanned by c and d, K = 1;
    2 means t = 1/2, K = 2; 3 means t <= 1/2 and c >= d, K = 12.
    """
    s, t, c, d, x = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (s, t, c, d, x)))
    if regime not in LEMMA8_REGIMES:
        raise RegimeError(f"unknown regime {regime}")
    if np.any((s < 1) | (s > 2)) or np.any((t < 0) | (t > 1)):
        raise RegimeError("need s in [1, 2] and t in [0, 1]")
    if np.any(c < 0) or np.any(d < 0) or np.any(x < 0):
        raise RegimeError("c, d, x must be nonnegative")
    if regime == 1 and np.any((x > np.minimum(c, d)) & (x < np.maximum(c, d))):
        raise RegimeError("regime 1 needs x outside the interval between c and d")
    if regime == 2 and np.any(t != 0.5):
        raise RegimeError("regime 2 needs t = 1/2")
    if regime == 3 and (np.any(t > 0.5) or np.any(c < d)):
        raise RegimeError("regime 3 needs t <= 1/2 and c >= d")
    K = LEMMA8_REGIMES[regime]
    scale = np.maximum.reduce([c, d, x])
    scale = np.where(scale > 0, scale, 1.0)
    c, d, x = c / scale, d / scale, x / scale
    out = K * (_ft_pow(s, t, d, x) + _ft_pow(s, t, x, c)) - _ft_pow(s, t, d, c)
    return float(out) if out.ndim == 0 else out


def _lambda_weighted(f, x1: float, x2: float, abs_tol: float) -> float:
    """``int_x1^x2 f(x) (1/2) e^(-x) dx`` for ``0 <= x1 < x2``."""
    breaks = sorted({x1, x2, *(b for b in (1.0, 0.5 * (x1 + x2)) if x1 < b < x2)})
    return adaptive_gauss_legendre(lambda x: f(x) * 0.5 * np.exp(-x), breaks,
                                   abs_tol=abs_tol, rel_tol=1e-12, max_panels=1 << 14).value


def lemma9_check(x1: float, x2: float, y1: float, y2: float, a: float, g: TestFunction) -> float:
    """Weighted energy of ``g`` on ``[x1, x2]`` minus its lower bound, over ``(y2 - y1)^2``.

    The bound is ``(y2 - y1)^2 max(1, x2^a) / (4 (e^x2 - e^x1))``; when
    ``y1 = y2`` the raw (unscaled) energy is returned.
    """
    if not 0.0 <= x1 < x2:
        raise RegimeError("need 0 <= x1 < x2")
    if not 0.0 <= a <= 1.0:
        raise RegimeError("need a in [0, 1]")
    ends = g(np.array([x1, x2]))
    if not np.allclose(ends, [y1, y2], rtol=1e-9, atol=1e-12):
        raise RegimeError(f"g does not interpolate: g(x1), g(x2) = {ends[0]!r}, {ends[1]!r}")
    energy = _lambda_weighted(lambda x: np.maximum(1.0, x**a) * g.derivative(x) ** 2, x1, x2, 1e-15)
    gap = (y2 - y1) ** 2
    # e^x2 - e^x1 = e^x2 (1 - e^(x1 - x2)), kept finite for large x2
    bound = gap * max(1.0, x2**a) * math.exp(-x2) / (4.0 * -math.expm1(x1 - x2))
    if gap == 0:
        return energy
    return (energy - bound) / gap


def exponential_ramp(x1: float, x2: float, y1: float, y2: float):
    """The function constant ``y1`` up to ``x1`` then affine in ``e^x`` up to ``(x2, y2)``."""
    span = -math.expm1(x1 - x2)

    def g(x):
        x = np.asarray(x, dtype=float)
        theta = np.where(x <= x1, 0.0, (np.exp(np.minimum(x, x2) - x2) - math.exp(x1 - x2)) / span)
        return y1 + theta * (y2 - y1)

    def dg(x):
        x = np.asarray(x, dtype=float)
        return np.where(x <= x1, 0.0, np.exp(np.minimum(x, x2) - x2) / span) * (y2 - y1)

    return g, dg


def lemma10_check(x1: float, x2: float, y1: float, y2: float, p: float) -> tuple[float, float]:
    """Energy identity gap and moment-bound margin for the exponential ramp.

    Both numbers are relative: the energy gap is divided by the closed form
    and the moment margin by ``y2^p``.
    """
    if not (0.0 <= y1 < y2 and 0.0 <= x1 < x2):
        raise RegimeError("need 0 <= y1 < y2 and 0 <= x1 < x2")
    if p < 1:
        raise RegimeError("need p >= 1")
    g, dg = exponential_ramp(x1, x2, y1, y2)
    closed = (y2 - y1) ** 2 * math.exp(-x2) / (2.0 * -math.expm1(x1 - x2))
    energy = _lambda_weighted(lambda x: dg(x) ** 2, x1, x2, 1e-16 * max(closed, 1e-300) + 1e-300)
    energy_gap = abs(energy - closed) / closed

    r1, r2 = y1 / y2, 1.0
    below = 1.0 - 0.5 * math.exp(-x1)
    moment = below * r1**p + _lambda_weighted(lambda x: (g(x) / y2) ** p, x1, x2, 1e-15)
    w = 0.5 * x2 * math.exp(-x2)
    rhs = (1.0 - 0.5 * math.exp(-x2)) * ((1.0 - w) * r1**p + w * r2)
    return energy_gap, rhs - moment


def lemma11_shift(s: float) -> float:
    """``u = s / (4 (s-1)) e^(-s / (2 (s-1)))``."""
    return s / (4.0 * (s - 1.0)) * math.exp(-s / (2.0 * (s - 1.0)))


def lemma11_check(s, t, a, b, c, d, ta, tc, x):
    """Eight times the right bracket minus the left side, divided by ``d^s``.

    ``ta`` and ``tc`` are the shifted pair; the side conditions are
    ``c < x < d``, ``c^s <= a``, ``d^s <= b``, ``tc^s <= ta`` and
    ``tc <= (1-u) c + u x``.
    """
    s, t, a, b, c, d, ta, tc, x = np.broadcast_arrays(
        *(np.asarray(v, dtype=float) for v in (s, t, a, b, c, d, ta, tc, x)))
    if np.any((s <= 1) | (s > 2)) or np.any((t <= 0) | (t >= 1)):
        raise RegimeError("need s in (1, 2] and t in (0, 1)")
    if np.any(np.minimum.reduce([a, b, c, d, ta, tc, x]) <= 0):
        raise RegimeError("all of a, b, c, d, ta, tc, x must be positive")
    u = s / (4.0 * (s - 1.0)) * np.exp(-s / (2.0 * (s - 1.0)))
    if np.any((c >= x) | (x >= d)):
        raise RegimeError("need c < x < d")
    slack = 1 + 1e-12
    if np.any(c**s > a * slack) or np.any(d**s > b * slack) or np.any(tc**s > ta * slack):
        raise RegimeError("need c^s <= a, d^s <= b and tc^s <= ta")
    if np.any(tc > ((1 - u) * c + u * x) * slack):
        raise RegimeError("need tc <= (1-u) c + u x")
    ds = d**s
    a, b, ta = a / ds, b / ds, ta / ds
    c, tc, x = c / d, tc / d, x / d
    lhs = (1 - t) * a + t * b - ((1 - t) * c + t) ** s
    bracket = ((1 - t) * ta + t * b - ((1 - t) * tc + t) ** s
               + (1 - t) * a + t * x**s - ((1 - t) * c + t * x) ** s)
    out = 8.0 * bracket - lhs
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class LemmaVerdict:
    lemma_id: str
    trials: int
    violations: int
    worst_margin: float
    params_of_worst: dict
    tolerance: float = MARGIN_TOL
    sampling: str = ""

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def to_dict(self) -> dict:
        return asdict(self)


def _log_uniform(rng: np.random.Generator, size, lo: float = 1e-3, hi: float = 1e3):
    return np.exp(rng.uniform(math.log(lo), math.log(hi), size))


def _verdict(lemma_id: str, margins: np.ndarray, params: dict, tol: float, sampling: str) -> LemmaVerdict:
    margins = np.asarray(margins, dtype=float)
    k = int(np.argmin(margins))
    worst = {name: _plain(v[k]) for name, v in params.items()}
    return LemmaVerdict(lemma_id, int(margins.size), int(np.sum(margins < -tol)),
                        float(margins[k]), worst, tol, sampling)


def _plain(v):
    if isinstance(v, np.ndarray):
        return [_plain(e) for e in v]
    if isinstance(v, np.generic):
        return v.item()
    return v


PROBE_GRID = np.geomspace(1e-3, 1e3, 64)


def _suite_phi_cone(rng, n):
    k = rng.uniform(1.0, 2.0, (n, 2))
    coefs = _log_uniform(rng, (n, 4))
    margins = np.empty(n)
    for i in range(n):
        cand = combine([power(k[i, 0]), power(k[i, 1]), affine(1.0, 1.0)], coefs[i, :3])
        margins[i] = is_in_phi(cand, PROBE_GRID).worst_slack
    return margins, {"k": k, "coef": coefs[:, :3]}, CONCAVITY_RTOL, \
        "powers k ~ U[1,2], coefficients log-uniform on [1e-3, 1e3], 64-point geometric grid"


def _suite_ft_convex(rng, n):
    k = rng.uniform(1.0, 2.0, n)
    t = rng.uniform(0, 1, n)
    P, Q = _log_uniform(rng, (n, 2)), _log_uniform(rng, (n, 2))
    scale = np.maximum(P.max(axis=1), Q.max(axis=1))
    P, Q = P / scale[:, None], Q / scale[:, None]
    M = 0.5 * (P + Q)
    F = lambda z: _ft_pow(k, t, z[:, 0], z[:, 1])
    margins = 0.5 * (F(P) + F(Q)) - F(M)
    return margins, {"k": k, "t": t, "P": P, "Q": Q}, MARGIN_TOL, \
        "phi = x^k, k ~ U[1,2], t ~ U[0,1], points log-uniform on [1e-3, 1e3]^2"


def _suite_psi_convex(rng, n):
    k = rng.uniform(1.0, 2.0, n)
    t = rng.uniform(0, 1, n)
    w = rng.dirichlet(np.ones(4), n)
    X, Y = _log_uniform(rng, (n, 4)), _log_uniform(rng, (n, 4))
    scale = np.maximum(X.max(axis=1), Y.max(axis=1))[:, None]
    X, Y = X / scale, Y / scale

    def psi(z):
        return np.sum(w * z ** k[:, None], axis=1) - np.sum(w * z, axis=1) ** k

    margins = t * psi(X) + (1 - t) * psi(Y) - psi(t[:, None] * X + (1 - t[:, None]) * Y)
    return margins, {"k": k, "t": t, "weights": w, "X": X, "Y": Y}, MARGIN_TOL, \
        "4 atoms, Dirichlet(1) weights, phi = x^k, k ~ U[1,2], values log-uniform on [1e-3, 1e3]"


def _random_shape(rng) -> tuple[int, ...]:
    n = int(rng.integers(2, 4))
    return tuple(int(v) for v in rng.integers(2, 4, n))


def _suite_subadd(rng, n, varp: bool):
    margins, ks, shapes = np.empty(n), np.empty(n), []
    for i in range(n):
        shape = _random_shape(rng)
        weights = [rng.dirichlet(np.ones(m)) for m in shape]
        z = _log_uniform(rng, shape)
        z = z / z.max()
        if varp:
            p = rng.uniform(1.0, 2.0)
            ks[i] = p
            lhs, rhs = _subadd_tensor(power(2.0 / p), weights, z**p)
        else:
            k = rng.uniform(1.0, 2.0)
            ks[i] = k
            lhs, rhs = _subadd_tensor(power(k), weights, z)
        margins[i] = rhs - lhs
        shapes.append(list(shape))
    name = "p" if varp else "k"
    what = "f log-uniform, p ~ U[1,2]" if varp else "Z log-uniform, phi = x^k, k ~ U[1,2]"
    return margins, {name: ks, "shape": shapes}, MARGIN_TOL, \
        f"2-3 factors of 2-3 atoms, Dirichlet(1) weights, {what}, values on [1e-3, 1e3]"


def _suite_cn(rng, n):
    margins, kinds = np.empty(n), []
    for i in range(n):
        kind = int(rng.integers(0, 3))
        if kind == 0:
            shape = (int(rng.integers(2, 5)),)
            k = rng.uniform(1.0, 3.0)
            f, z = (lambda v, k=k: v**k), _log_uniform(rng, shape)
            z = z / z.max()
        elif kind == 1:
            shape = tuple(int(v) for v in rng.integers(2, 4, 2))
            k = rng.uniform(1.0, 2.0)
            f, z = (lambda v, k=k: v**k), _log_uniform(rng, shape)
            z = z / z.max()
        else:
            shape = tuple(int(v) for v in rng.integers(2, 4, int(rng.integers(1, 5))))
            A = rng.normal(size=(2, 2))
            Q, lin = A @ A.T, rng.normal(size=2)
            f = lambda v, Q=Q, lin=lin: np.einsum("...i,ij,...j->...", v, Q, v) + v @ lin + 0.5
            z = rng.normal(size=shape + (2,))
        weights = [rng.dirichlet(np.ones(m)) for m in shape]
        margins[i] = _alternating(f, weights, z)
        kinds.append(["convex, n=1", "power in Phi, n=2", "quadratic, n<=4"][kind])
    return margins, {"family": kinds}, MARGIN_TOL, \
        "n=1 with x^k, k ~ U[1,3]; n=2 with x^k, k ~ U[1,2]; n<=4 with PSD quadratics on R^2"


def _suite_rho(rng, n):
    s = rng.uniform(1.0, 2.0, n)
    s = np.where(s == 1.0, 2.0, s)
    x, y, z = _log_uniform(rng, (3, n))
    scale = np.maximum.reduce([x, y, z]) ** (s / 2)
    margins = (rho_s(x, y, s) + rho_s(y, z, s) - rho_s(x, z, s)) / scale
    return margins, {"s": s, "x": x, "y": y, "z": z}, METRIC_TOL, \
        "s ~ U(1,2], points log-uniform on [1e-3, 1e3], triangle margin over max(x,y,z)^(s/2)"


def _suite_lemma8(rng, n):
    regime = rng.integers(1, 4, n)
    s = rng.uniform(1.0, 2.0, n)
    t = rng.uniform(0, 1, n)
    c, d, x = _log_uniform(rng, (3, n))
    t = np.where(regime == 2, 0.5, np.where(regime == 3, 0.5 * t, t))
    swap = (regime == 3) & (c < d)
    c, d = np.where(swap, d, c), np.where(swap, c, d)
    lo, hi = np.minimum(c, d), np.maximum(c, d)
    inside = (regime == 1) & (x > lo) & (x < hi)
    shrink = rng.uniform(0, 1, n)
    x = np.where(inside, np.where(shrink < 0.5, lo * shrink * 2, hi / np.maximum(shrink, 1e-3)), x)
    margins = np.empty(n)
    for r in (1, 2, 3):
        sel = regime == r
        if np.any(sel):
            margins[sel] = lemma8_check(s[sel], t[sel], c[sel], d[sel], x[sel], r)
    return margins, {"regime": regime, "s": s, "t": t, "c": c, "d": d, "x": x}, MARGIN_TOL, \
        "regime uniform in {1,2,3}, s ~ U[1,2], t ~ U[0,1] (U[0,1/2] in regime 3), c, d, x log-uniform on [1e-3, 1e3]"


_LEMMA9_SHAPES = (
    "x^{k}",
    "exp({k}*x)",
    "x+{k}*sin(x)",
    "log(1+{k}*x)",
    "x^2+{k}*cos(3*x)",
)


def _suite_lemma9(rng, n):
    margins, labels = np.empty(n), []
    x1s, x2s, ays = np.empty(n), np.empty(n), np.empty(n)
    for i in range(n):
        x1 = float(rng.uniform(0, 5))
        x2 = x1 + float(rng.uniform(0.05, 5))
        a = float(rng.uniform(0, 1))
        y1, y2 = (float(v) for v in _log_uniform(rng, 2))
        shape = _LEMMA9_SHAPES[int(rng.integers(len(_LEMMA9_SHAPES)))].format(k=repr(float(rng.uniform(0.2, 2.0))))
        h = parse_expression(shape).to_test_function()
        h1, h2 = (float(v) for v in h(np.array([x1, x2])))
        if not abs(h2 - h1) > 1e-9 * max(abs(h1), abs(h2), 1.0):
            shape, h1, h2 = "x", x1, x2
        src = f"{y1!r}+({y2 - y1!r})*(({shape})-({h1!r}))/({h2 - h1!r})"
        g = parse_expression(src).to_test_function()
        ends = g(np.array([x1, x2]))
        margins[i] = lemma9_check(x1, x2, float(ends[0]), float(ends[1]), a, g)
        labels.append(src)
        x1s[i], x2s[i], ays[i] = x1, x2, a
    return margins, {"x1": x1s, "x2": x2s, "a": ays, "g": labels}, MARGIN_TOL, \
        "x1 ~ U[0,5], x2 - x1 ~ U[0.05,5], a ~ U[0,1], y log-uniform on [1e-3, 1e3], g rescaled from parsed shapes"


def _suite_lemma10(rng, n):
    x1 = rng.uniform(0, 10, n)
    x2 = x1 + rng.uniform(0.01, 20, n)
    y1 = rng.uniform(0, 1, n)
    y2 = 1.0 + _log_uniform(rng, n, 1e-3, 1e3)
    p = rng.uniform(1.0, 6.0, n)
    margins, gaps = np.empty(n), np.empty(n)
    for i in range(n):
        gaps[i], margins[i] = lemma10_check(x1[i], x2[i], y1[i], y2[i], p[i])
    # an energy identity gap above 1e-8 also counts as a violation
    margins = np.minimum(margins, np.where(gaps > 1e-8, -gaps, np.inf))
    return margins, {"x1": x1, "x2": x2, "y1": y1, "y2": y2, "p": p}, MARGIN_TOL, \
        "x1 ~ U[0,10], x2 - x1 ~ U[0.01,20], y1 ~ U[0,1], y2 - 1 log-uniform on [1e-3, 1e3], p ~ U[1,6]"


def _suite_lemma11(rng, n):
    s = 2.0 - rng.uniform(0, 1, n) * (1 - 1e-3)
    t = rng.uniform(1e-6, 1 - 1e-6, n)
    d = _log_uniform(rng, n)
    c = d * rng.uniform(1e-3, 1 - 1e-3, n)
    x = c + (d - c) * rng.uniform(1e-3, 1 - 1e-3, n)
    u = s / (4.0 * (s - 1.0)) * np.exp(-s / (2.0 * (s - 1.0)))
    tight = rng.uniform(0, 1, n) < 0.5
    tc = ((1 - u) * c + u * x) * np.where(tight, 1.0, rng.uniform(0.01, 1, n))
    excess = np.where(rng.uniform(0, 1, (3, n)) < 0.5, 0.0, _log_uniform(rng, (3, n), 1e-3, 1.0))
    a, b, ta = c**s * (1 + excess[0]), d**s * (1 + excess[1]), tc**s * (1 + excess[2])
    margins = lemma11_check(s, t, a, b, c, d, ta, tc, x)
    return np.atleast_1d(margins), {"s": s, "t": t, "a": a, "b": b, "c": c, "d": d, "ta": ta, "tc": tc, "x": x}, \
        MARGIN_TOL, "s ~ U(1,2], t ~ U(0,1), d log-uniform on [1e-3, 1e3], c < x < d uniform, " \
        "tc on or below its cap, half of a, b, ta at their floors"


def _suite_selftest_fail(rng, n):
    # x^4 is outside Phi: 1/phi'' = 1/(12 x^2) is convex
    margins = np.full(n, is_in_phi(power(4.0), PROBE_GRID).worst_slack)
    return margins, {"phi": np.array(["x^4"] * n)}, CONCAVITY_RTOL, \
        "known non-member x^4 under the concavity test; every trial must fail"


SUITES = {
    "phi-cone": _suite_phi_cone,
    "ft-convex": _suite_ft_convex,
    "psi-convex": _suite_psi_convex,
    "subadd": lambda rng, n: _suite_subadd(rng, n, varp=False),
    "varp-subadd": lambda rng, n: _suite_subadd(rng, n, varp=True),
    "cn": _suite_cn,
    "rho-metric": _suite_rho,
    "lemma8": _suite_lemma8,
    "lemma9": _suite_lemma9,
    "lemma10": _suite_lemma10,
    "lemma11": _suite_lemma11,
    "selftest-fail": _suite_selftest_fail,
}

LEMMA_IDS = tuple(SUITES)


def run_lemma_suite(lemma_id: str, trials: int, seed: Seed) -> LemmaVerdict:
    if lemma_id not in SUITES:
        raise DomainError(f"unknown lemma id {lemma_id!r}; choose from {', '.join(LEMMA_IDS)}")
    if trials < 1:
        raise DomainError("trials must be positive")
    rng = seed.generator(LEMMA_IDS.index(lemma_id))
    margins, params, tol, sampling = SUITES[lemma_id](rng, trials)
    return _verdict(lemma_id, margins, params, tol, sampling)
