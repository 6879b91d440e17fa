"""Discrete, continuous 1-D and product probability measures.

Continuous laws are symmetric with density ``exp(log_norm - V(x))`` for an
even convex potential ``V`` with ``V(0) = 0``. Tails are computed by
Gauss-Legendre quadrature of the density rescaled by its value at the left
end, so tails as small as ``exp(-1600)`` keep full relative precision in log
space.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from functools import cached_property
from itertools import product as cartesian
from typing import Callable, Sequence, Union

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError, NonConvergent, SizeError
from .quadrature import (
    DEFAULT_SPEC,
    QuadResult,
    QuadratureSpec,
    adaptive_gauss_legendre,
    fixed_gauss_legendre,
)

MAX_GRID_ATOMS = 10**6
SAMPLE_TAIL_RTOL = 1e-12


@dataclass(frozen=True)
class Seed:
    """Reproducible randomness: equal ``(value, stream_id)`` give equal draws."""

    value: int
    stream_id: int = 0

    def __post_init__(self):
        if not 0 <= self.value < 2**64:
            raise DomainError("seed value must be a 64-bit unsigned integer")

    def generator(self, *substream: int) -> np.random.Generator:
        seq = np.random.SeedSequence(self.value, spawn_key=(self.stream_id, *substream))
        return np.random.Generator(np.random.PCG64(seq))

    def substream(self, index: int) -> "Seed":
        """A disjoint stream, used to hand work to parallel workers."""
        return Seed(self.value, self.stream_id * 1_000_003 + index + 1)


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    points: np.ndarray
    weights: np.ndarray
    key: str = "discrete"

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        w = np.asarray(self.weights, dtype=float)
        if pts.ndim != 2 or w.shape != (pts.shape[0],):
            raise DomainError("points must be (k, d) with one weight per atom")
        if np.any(w <= 0):
            raise DomainError("atom weights must be positive")
        if abs(w.sum() - 1.0) > 1e-12:
            raise DomainError(f"weights sum to {w.sum():.17g}, not 1")
        if np.unique(pts, axis=0).shape[0] != pts.shape[0]:
            raise DomainError("atom points must be pairwise distinct")
        pts.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @property
    def dimension(self) -> int:
        return self.points.shape[1]

    @property
    def size(self) -> int:
        return self.weights.size

    def expect(self, values: np.ndarray) -> float:
        return float(np.dot(self.weights, values))

    def sample(self, n: int, seed: Seed, *substream: int) -> np.ndarray:
        if n < 1:
            raise DomainError("sample size must be at least 1")
        idx = seed.generator(*substream).choice(self.size, size=n, p=self.weights)
        return self.points[idx]


@dataclass(frozen=True, eq=False)
class Continuous1D:
    """Symmetric log-concave law on the real line."""

    key: str
    potential: Callable[[np.ndarray], np.ndarray]
    potential_slope: Callable[[np.ndarray], np.ndarray]
    log_norm: float
    scale: float = 1.0
    r: float | None = None
    quad: QuadratureSpec = field(default=DEFAULT_SPEC)

    name = property(lambda self: self.key)
    support = (-math.inf, math.inf)
    dimension = 1

    def log_density(self, x):
        return self.log_norm - self.potential(np.abs(x))

    def density(self, x):
        return np.exp(self.log_density(x))

    @property
    def radius(self) -> float:
        return self.quad.truncation_radius * self.scale

    # ---- tails -------------------------------------------------------------

    def _remainder_bound(self, length: float) -> float:
        # convexity of V: int_L^inf exp(-V(u)) du <= exp(-V(L)) / V'(L)
        return float(np.exp(-self.potential(length)) / self.potential_slope(length))

    def log_upper_tail(self, x: float) -> float:
        """``log mu((x, inf))`` by adaptive quadrature of the rescaled density."""
        x = float(x)
        if x < 0:
            return math.log1p(-math.exp(self.log_upper_tail(-x)))
        vx = float(self.potential(x))
        length = self.radius
        q = self.quad

        def scaled(u):
            return np.exp(vx - self.potential(x + u))

        breaks = np.concatenate([[0.0], np.geomspace(1e-8, 1.0, 9) * length])
        res = adaptive_gauss_legendre(
            scaled, breaks, abs_tol=q.abs_tol * 1e-3, rel_tol=q.rel_tol * 1e-3,
            max_panels=q.panel_count,
        )
        total = res.value + self._remainder_bound(length)
        return self.log_norm - vx + math.log(total)

    def log_upper_tail_grid(self, xs: np.ndarray) -> np.ndarray:
        """Log tails on an increasing grid of nonnegative nodes.

        The last node is integrated adaptively; every other node adds the
        density mass of its segment, accumulated from the right in log space.
        """
        xs = np.asarray(xs, dtype=float)
        if xs.ndim != 1 or np.any(xs < 0) or np.any(np.diff(xs) <= 0):
            raise DomainError("grid must be increasing and nonnegative")
        out = np.empty_like(xs)
        out[-1] = self.log_upper_tail(xs[-1])
        if xs.size == 1:
            return out
        lo, hi = xs[:-1], xs[1:]
        width = hi - lo
        steepness = np.max(self.potential_slope(hi) * width + width / self.scale)
        panels = int(min(64, max(1, math.ceil(steepness))))
        v_lo = self.potential(lo)
        seg = fixed_gauss_legendre(
            lambda s: np.exp(v_lo[:, None] - self.potential(s)), lo, hi, order=20, panels=panels
        )
        log_seg = self.log_norm - v_lo + np.log(seg)
        if lo[0] == 0.0 and self.r is not None and self.r != round(self.r):
            # |x|^r is not smooth at the origin: integrate that segment adaptively
            res = adaptive_gauss_legendre(
                lambda s: np.exp(-self.potential(s)), [0.0, hi[0] * 1e-6, hi[0]],
                abs_tol=1e-18, rel_tol=1e-15,
            )
            log_seg[0] = self.log_norm + math.log(res.value)
        for i in range(xs.size - 2, -1, -1):
            out[i] = np.logaddexp(log_seg[i], out[i + 1])
        return out

    @cached_property
    def _tail_table(self) -> tuple[np.ndarray, np.ndarray]:
        # table reaches where V = 45, i.e. tail ~ 1e-20, below double-precision uniforms
        top = brentq(lambda x: float(self.potential(x)) - 45.0, 0.0, 1e3 * self.scale)
        u = np.linspace(0.0, 1.0, 2049)
        beta = 2.0
        xs = top * (1.0 - np.tanh(beta * (1.0 - u)) / np.tanh(beta))
        xs[0] = 0.0
        return xs, np.exp(self.log_upper_tail_grid(xs))

    def _tail_from_node(self, idx: np.ndarray, x: np.ndarray) -> np.ndarray:
        xs, tails = self._tail_table
        node = xs[idx]
        mass = fixed_gauss_legendre(self.density, node, x, order=16)
        return tails[idx] - mass

    def upper_tail(self, x):
        """``mu((x, inf))``; accepts a scalar or an array."""
        arr = np.asarray(x, dtype=float)
        flat = np.atleast_1d(arr).ravel()
        mag = np.abs(flat)
        xs, _ = self._tail_table
        inside = mag <= xs[-1]
        tail = np.empty_like(flat)
        if inside.any():
            idx = np.clip(np.searchsorted(xs, mag[inside], side="right") - 1, 0, xs.size - 2)
            tail[inside] = self._tail_from_node(idx, mag[inside])
        for j in np.flatnonzero(~inside):
            tail[j] = math.exp(self.log_upper_tail(mag[j]))
        tail = np.where(flat < 0, 1.0 - tail, tail)
        tail = np.clip(tail, 0.0, 1.0)
        return float(tail[0]) if arr.ndim == 0 else tail.reshape(arr.shape)

    def cdf(self, x):
        return 1.0 - self.upper_tail(x)

    def inverse_upper_tail(self, u: np.ndarray) -> np.ndarray:
        """Solve ``upper_tail(x) = u`` for ``u`` in ``(0, 1/2]``, giving ``x >= 0``.

        Safeguarded Newton iteration inside the table bracket: a step that
        leaves the bracket is replaced by bisection.
        """
        u = np.asarray(u, dtype=float)
        if np.any((u <= 0) | (u > 0.5)):
            raise DomainError("inverse tail defined here for u in (0, 1/2]")
        xs, tails = self._tail_table
        # tails decrease along xs; bracket so that tails[i] >= u > tails[i+1]
        i = np.clip(np.searchsorted(-tails, -u, side="left") - 1, 0, xs.size - 2)
        lo, hi = xs[i].copy(), xs[i + 1].copy()
        t_lo, t_hi = tails[i], tails[i + 1]
        with np.errstate(divide="ignore", invalid="ignore"):
            frac = np.log(t_lo / u) / np.log(t_lo / t_hi)
        x = np.where(np.isfinite(frac), lo + np.clip(frac, 0, 1) * (hi - lo), 0.5 * (lo + hi))
        active = np.ones(u.shape, dtype=bool)
        for _ in range(100):
            ia = np.flatnonzero(active)
            if ia.size == 0:
                return x
            resid = self._tail_from_node(i[ia], x[ia]) - u[ia]
            conv = np.abs(resid) <= SAMPLE_TAIL_RTOL * u[ia]
            # tail too large -> root lies to the right
            lo[ia] = np.where(resid > 0, x[ia], lo[ia])
            hi[ia] = np.where(resid < 0, x[ia], hi[ia])
            step = x[ia] + resid / self.density(x[ia])
            inside = (step > lo[ia]) & (step < hi[ia])
            new = np.where(inside, step, 0.5 * (lo[ia] + hi[ia]))
            x[ia] = np.where(conv, x[ia], new)
            stalled = (hi[ia] - lo[ia]) <= 4 * np.finfo(float).eps * np.maximum(1.0, hi[ia])
            active[ia] = ~(conv | stalled)
        raise NonConvergent("inverse-tail iteration did not converge")

    def sample(self, n: int, seed: Seed, *substream: int) -> np.ndarray:
        if n < 1:
            raise DomainError("sample size must be at least 1")
        rng = seed.generator(*substream)
        u = rng.random(n)
        sign = np.where(u < 0.5, 1.0, -1.0)
        # u in [0, 1): fold onto (0, 1/2] without losing resolution near 0
        w = np.where(u < 0.5, 0.5 - u, u - 0.5)
        w = np.where(w == 0.0, 0.5, w)
        return sign * self.inverse_upper_tail(w)


@dataclass(frozen=True, eq=False)
class ProductMeasure:
    factors: tuple

    def __post_init__(self):
        if len(self.factors) == 0:
            raise DomainError("a product needs at least one factor")
        object.__setattr__(self, "factors", tuple(self.factors))

    @property
    def dimension(self) -> int:
        return sum(f.dimension for f in self.factors)

    @property
    def key(self) -> str:
        keys = {f.key for f in self.factors}
        if len(keys) == 1:
            return f"product:{self.factors[0].key}^{len(self.factors)}"
        return "product:(" + ",".join(f.key for f in self.factors) + ")"

    @property
    def is_discrete(self) -> bool:
        return all(isinstance(f, DiscreteMeasure) for f in self.factors)

    def grid_size(self) -> int:
        if not self.is_discrete:
            raise DomainError("only products of discrete factors have an atom grid")
        return int(np.prod([f.size for f in self.factors], dtype=object))

    def enumerate(self, limit: int = MAX_GRID_ATOMS) -> DiscreteMeasure:
        size = self.grid_size()
        if size > limit:
            raise SizeError(f"product grid has {size} atoms, above the limit {limit}")
        idx = np.array(list(cartesian(*[range(f.size) for f in self.factors])))
        pts = np.concatenate([f.points[idx[:, k]] for k, f in enumerate(self.factors)], axis=1)
        w = np.prod([f.weights[idx[:, k]] for k, f in enumerate(self.factors)], axis=0)
        w = w / w.sum()
        return DiscreteMeasure(pts, w, key=self.key)

    def sample(self, n: int, seed: Seed, *substream: int) -> np.ndarray:
        cols = [f.sample(n, seed, *substream, k) for k, f in enumerate(self.factors)]
        return np.column_stack([c.reshape(n, -1) for c in cols])


Measure = Union[DiscreteMeasure, Continuous1D, ProductMeasure]


def product(ms: Sequence[Measure]) -> Measure:
    """Product law; a single factor is returned unchanged."""
    ms = list(ms)
    if not ms:
        raise DomainError("product of an empty sequence")
    if len(ms) == 1:
        return ms[0]
    flat = []
    for m in ms:
        flat.extend(m.factors if isinstance(m, ProductMeasure) else [m])
    return ProductMeasure(tuple(flat))


# ---- catalog -------------------------------------------------------------------


def exp_power_normalizer(r: float) -> float:
    """``c_r`` making ``c_r exp(-|x|^r)`` a probability density."""
    if not 1.0 <= r <= 2.0:
        raise DomainError(f"r={r} outside [1, 2]")
    first = 1.0 / (2.0 * math.gamma(1.0 + 1.0 / r))
    second = r / (2.0 * math.gamma(1.0 / r))
    if abs(first - second) > 1e-12:
        raise ArithmeticError("gamma identity failed")
    return first


def _fmt(x: float) -> str:
    return repr(float(x))


def exp_power(r: float, quad: QuadratureSpec = DEFAULT_SPEC) -> Continuous1D:
    c = exp_power_normalizer(r)
    return Continuous1D(
        key=f"exp_power:r={_fmt(r)}",
        potential=lambda x: np.abs(x) ** r,
        potential_slope=lambda x: r * np.abs(x) ** (r - 1.0),
        log_norm=math.log(c),
        scale=1.0,
        r=float(r),
        quad=quad,
    )


def sym_exp(quad: QuadratureSpec = DEFAULT_SPEC) -> Continuous1D:
    """The symmetric exponential law ``(1/2) exp(-|x|) dx``."""
    m = exp_power(1.0, quad)
    return Continuous1D("sym_exp", m.potential, m.potential_slope, m.log_norm, 1.0, 1.0, quad)


def gauss(sigma: float = 1.0, quad: QuadratureSpec = DEFAULT_SPEC) -> Continuous1D:
    if not sigma > 0:
        raise DomainError("sigma must be positive")
    s2 = sigma * sigma
    return Continuous1D(
        key=f"gauss:sigma={_fmt(sigma)}",
        potential=lambda x: 0.5 * np.square(x) / s2,
        potential_slope=lambda x: np.abs(x) / s2,
        log_norm=-math.log(sigma * math.sqrt(2.0 * math.pi)),
        scale=sigma,
        quad=quad,
    )


def two_point(alpha: float) -> DiscreteMeasure:
    """Law on ``{-1, 1}`` with ``mu({1}) = alpha``."""
    if not 0.0 < alpha < 1.0:
        raise DomainError("alpha must lie in (0, 1)")
    return DiscreteMeasure(
        np.array([[-1.0], [1.0]]), np.array([1.0 - alpha, alpha]),
        key=f"two_point:alpha={_fmt(alpha)}",
    )


CATALOG_KEYS = (
    "exp_power:r=<x>",
    "sym_exp",
    "gauss:sigma=<x>",
    "two_point:alpha=<x>",
    "product:<key>^<n>",
)

_PARAM = re.compile(r"^(\w+):(\w+)=([-+0-9.eE]+)$")


def parse_measure(key: str, quad: QuadratureSpec = DEFAULT_SPEC) -> Measure:
    """Build a measure from its catalog key, e.g. ``product:two_point:alpha=0.5^3``."""
    key = key.strip()
    if key.startswith("product:"):
        body, sep, count = key[len("product:"):].rpartition("^")
        if not sep or not count.isdigit() or int(count) < 1:
            raise DomainError(f"bad product key {key!r}")
        base = parse_measure(body, quad)
        return ProductMeasure(tuple([base] * int(count)))
    if key == "sym_exp":
        return sym_exp(quad)
    m = _PARAM.match(key)
    if not m:
        raise DomainError(f"unknown measure key {key!r}")
    family, param, raw = m.groups()
    try:
        value = float(raw)
    except ValueError as exc:
        raise DomainError(f"bad parameter in {key!r}") from exc
    builders = {
        ("exp_power", "r"): lambda v: exp_power(v, quad),
        ("gauss", "sigma"): lambda v: gauss(v, quad),
        ("two_point", "alpha"): two_point,
    }
    if (family, param) not in builders:
        raise DomainError(f"unknown measure key {key!r}")
    return builders[family, param](value)


# ---- operations ------------------------------------------------------------------


def integrate(m: Measure, f: Callable[[np.ndarray], np.ndarray],
              q: QuadratureSpec | None = None) -> QuadResult:
    """``E_m f`` with an error estimate. ``f`` is vectorized over points."""
    if isinstance(m, DiscreteMeasure):
        vals = np.asarray(f(m.points if m.dimension > 1 else m.points[:, 0]), dtype=float)
        if not np.all(np.isfinite(vals)):
            raise DomainError("integrand is not finite at an atom")
        return QuadResult(m.expect(vals), 0.0, 0)
    if isinstance(m, ProductMeasure):
        if m.is_discrete:
            return integrate(m.enumerate(), f, q)
        raise DomainError("quadrature over continuous products is not supported; sample instead")
    q = q or m.quad
    R = q.truncation_radius * m.scale
    breaks = np.array([-R, -8, -2, -0.5, 0.0, 0.5, 2, 8, R]) * np.array(
        [1, m.scale, m.scale, m.scale, 1, m.scale, m.scale, m.scale, 1]
    )
    breaks = np.unique(np.clip(breaks, -R, R))

    def integrand(x):
        return np.asarray(f(x), dtype=float) * m.density(x)

    return adaptive_gauss_legendre(integrand, breaks, q.abs_tol, q.rel_tol, q.panel_count)


def upper_tail(m: Continuous1D, x):
    return m.upper_tail(x)


def sample(m: Measure, n: int, s: Seed) -> np.ndarray:
    return m.sample(n, s)
