"""Herbst-type MGF and tail bounds from an I(a) inequality, plus Monte Carlo tail experiments.

An I(a) inequality with constant ``C`` gives, for 1-Lipschitz ``h``,
``E exp(lam (h - E h)) <= (1 - C lam^2 (2-p)^a / 4)^(-2/(2-p))`` for every
``p`` in ``[1, 2)``. A Chernoff step then bounds
``P(h - E h >= t sqrt(C))`` and, with a suitable ``(p, lam)``, yields
``exp(-t^2 / 3)`` for ``t <= 1`` and ``exp(-t^r / 3)`` with ``r = 2/(2-a)``
for ``t >= 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import optimize, special, stats

from .errors import DomainError, InsufficientData, LipschitzViolation
from .functions import TestFunction
from .measures import Continuous1D, DiscreteMeasure, Measure, ProductMeasure, Seed, exp_power, integrate

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
LIPSCHITZ_PROBES = 256
LIPSCHITZ_SLACK = 1e-9
MGF_TOL = 1e-8
SMALL_T_RATE = 16.0 / (9.0 * math.e)


@dataclass(frozen=True)
class HerbstParams:
    C: float
    a: float

    def __post_init__(self):
        if not self.C > 0:
            raise DomainError("C must be positive")
        if not 0.0 <= self.a <= 1.0:
            raise DomainError("a must lie in [0, 1]")

    @property
    def r(self) -> float:
        return 2.0 / (2.0 - self.a)

    @classmethod
    def from_r(cls, C: float, r: float) -> "HerbstParams":
        return cls(C, 2.0 - 2.0 / r)


def _log_mgf_bound(a: float, gap: float, mu: float) -> float:
    """Log of the MGF bound in terms of ``gap = 2 - p`` and ``mu = lam sqrt(C)``."""
    x = mu * mu * gap**a / 4.0
    if not x < 1.0:
        return math.inf
    return -(2.0 / gap) * math.log1p(-x)


def herbst_mgf_bound(hp: HerbstParams, p: float, lam: float) -> float:
    if not 1.0 <= p < 2.0:
        raise DomainError(f"p={p} outside [1, 2)")
    gap = 2.0 - p
    x = hp.C * lam * lam * gap**hp.a / 4.0
    if not x < 1.0:
        raise DomainError(f"lambda={lam} at or beyond the singularity for p={p}")
    return math.exp(-(2.0 / gap) * math.log1p(-x))


@dataclass(frozen=True)
class IterationTrace:
    """Finite-depth versions of the MGF bound.

    ``raw`` keeps every factor ``(1 - x q^(2k))^(-(2/p)^k)`` with ``q = p/2``;
    ``telescoped`` replaces each by ``(1 - x)^(-q^k)``; ``closed`` is the
    infinite-depth limit ``(1 - x)^(-2/(2-p))``. The identity factor from the
    leftover ``H(q^m lam)^((2/p)^m)`` is omitted: it tends to 1.
    """

    depth: int
    raw: float
    telescoped: float
    closed: float
    factors_ok: bool

    @property
    def relative_gap(self) -> float:
        return abs(self.closed - self.telescoped) / self.closed

    @property
    def ordered(self) -> bool:
        eps = 1e-14 * self.closed
        return self.raw <= self.telescoped + eps and self.telescoped <= self.closed + eps


def herbst_iterate(hp: HerbstParams, p: float, lam: float, depth: int = 64) -> IterationTrace:
    if depth < 1:
        raise DomainError("depth must be positive")
    closed = herbst_mgf_bound(hp, p, lam)
    q = p / 2.0
    x = hp.C * lam * lam * (2.0 - p) ** hp.a / 4.0
    k = np.arange(depth)
    shrink = q ** (2 * k)
    log_raw = -np.sum((1.0 / q) ** k * np.log1p(-x * shrink))
    log_tele = -np.sum(q**k) * math.log1p(-x)
    # 1 - x q^(2k) >= (1 - x)^(q^(2k)), factor by factor
    lhs = np.log1p(-x * shrink)
    rhs = shrink * math.log1p(-x)
    factors_ok = bool(np.all(lhs >= rhs - 1e-15 * np.abs(rhs)))
    return IterationTrace(depth, float(math.exp(log_raw)), float(math.exp(log_tele)), closed, factors_ok)


def predicted_depth_gap(hp: HerbstParams, p: float, lam: float, depth: int) -> float:
    """``closed / telescoped - 1`` computed directly from the omitted geometric tail."""
    q = p / 2.0
    x = hp.C * lam * lam * (2.0 - p) ** hp.a / 4.0
    return math.expm1(-(q**depth / (1.0 - q)) * math.log1p(-x))


def _explicit_choice_log(a: float, t: float) -> float:
    if t <= 1.0:
        # p = 1, lam sqrt(C) = t
        return -t * t + _log_mgf_bound(a, 1.0, t)
    r = 2.0 / (2.0 - a)
    # p = 2 - t^(-r), lam sqrt(C) = t^(a/(2-a)): collapses to t^r log(16/(9e))
    return t**r * math.log(SMALL_T_RATE)


def _inner_best_mu(a: float, gap: float, t: float) -> float:
    """Minimizer over ``mu`` of ``-mu t + log_mgf_bound``; the objective is convex in ``mu``."""
    c = gap**a / 4.0
    b = 4.0 * c / gap
    # root of t c mu^2 + b mu - t = 0
    return 2.0 * t / (b + math.sqrt(b * b + 4.0 * t * t * c))


def _optimized_log(a: float, t: float) -> tuple[float, float, float]:
    def obj(u):
        gap = math.exp(u)
        mu = _inner_best_mu(a, gap, t)
        return -mu * t + _log_mgf_bound(a, gap, mu)

    us = np.linspace(math.log(1e-12), 0.0, 241)
    vals = np.array([obj(u) for u in us])
    k = int(np.argmin(vals))
    lo, hi = us[max(k - 1, 0)], us[min(k + 1, us.size - 1)]
    c, d = hi - GOLDEN * (hi - lo), lo + GOLDEN * (hi - lo)
    fc, fd = obj(c), obj(d)
    while hi - lo > 1e-12:
        if fc <= fd:
            hi, d, fd = d, c, fc
            c = hi - GOLDEN * (hi - lo)
            fc = obj(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + GOLDEN * (hi - lo)
            fd = obj(d)
    u, best = (c, fc) if fc <= fd else (d, fd)
    if vals[k] < best:
        u, best = us[k], float(vals[k])
    gap = math.exp(u)
    return best, 2.0 - gap, _inner_best_mu(a, gap, t)


def tail_bound(hp: HerbstParams, t: float, mode: str = "paper_choice") -> float:
    """Bound on ``P(h - E h >= t sqrt(C))``.

    ``paper_choice`` takes ``p = 1, lam = t/sqrt(C)`` for ``t <= 1`` and
    ``p = 2 - t^(-r), lam = t^(a/(2-a))/sqrt(C)`` beyond. ``optimized``
    minimizes over ``(p, lam)`` and never exceeds ``paper_choice``.
    """
    if t < 0:
        raise DomainError("t must be nonnegative")
    if t == 0:
        return 1.0
    explicit = min(_explicit_choice_log(hp.a, t), 0.0)
    if mode == "paper_choice":
        return math.exp(explicit)
    if mode == "optimized":
        return math.exp(min(_optimized_log(hp.a, t)[0], explicit))
    raise DomainError(f"unknown mode {mode!r}")


def optimized_parameters(hp: HerbstParams, t: float) -> tuple[float, float]:
    """The ``(p, lam)`` found by the optimized mode."""
    _, p, mu = _optimized_log(hp.a, t)
    return p, mu / math.sqrt(hp.C)


def theorem_tail(a: float, t):
    """``exp(-t^2 / 3)`` for ``t <= 1`` and ``exp(-t^r / 3)`` with ``r = 2/(2-a)`` beyond."""
    t = np.asarray(t, dtype=float)
    return np.exp(-np.where(t <= 1.0, t * t, t ** (2.0 / (2.0 - a))) / 3.0)


def _probe_points(m: Measure, rng: np.random.Generator, count: int) -> np.ndarray:
    if isinstance(m, DiscreteMeasure):
        return m.points[rng.integers(0, m.size, count)]
    if isinstance(m, ProductMeasure) and m.is_discrete:
        return _probe_points(m.enumerate(), rng, count)
    dim = m.dimension
    return rng.normal(scale=3.0 * getattr(m, "scale", 1.0), size=(count, dim))


def check_lipschitz(h: TestFunction, m: Measure, seed: Seed = Seed(0),
                    pairs: int = LIPSCHITZ_PROBES) -> float:
    """Largest ``|h(x) - h(y)| / |x - y|`` over random probe pairs.

    A guard against obviously non-Lipschitz input, not a certificate.
    """
    rng = seed.generator(0x11)
    xs, ys = _probe_points(m, rng, pairs), _probe_points(m, rng, pairs)
    dist = np.linalg.norm(xs - ys, axis=1)
    keep = dist > 0
    ratio = np.abs(h(xs[keep]) - h(ys[keep])) / dist[keep]
    worst = float(ratio.max()) if ratio.size else 0.0
    if worst > 1.0 + LIPSCHITZ_SLACK:
        raise LipschitzViolation(f"{h.label} has difference quotient {worst:.6g} > 1")
    return worst


@dataclass(frozen=True)
class MGFRow:
    p: float
    lam: float
    value: float
    bound: float

    @property
    def margin(self) -> float:
        return self.bound - self.value


@dataclass(frozen=True)
class MGFReport:
    rows: tuple
    skipped: tuple
    lipschitz: float

    @property
    def worst_margin(self) -> float:
        return min(r.margin for r in self.rows) if self.rows else math.inf

    @property
    def violations(self) -> int:
        return sum(r.margin < -MGF_TOL for r in self.rows)

    def to_dict(self) -> dict:
        return {
            "rows": [{"p": r.p, "lambda": r.lam, "value": r.value, "bound": r.bound,
                      "margin": r.margin} for r in self.rows],
            "skipped": [{"p": p, "lambda": lam} for p, lam in self.skipped],
            "lipschitz_probe": self.lipschitz,
            "violations": self.violations,
            "worst_margin": self.worst_margin,
        }


def centered_mgf(m: Measure, h: TestFunction, lam: float) -> float:
    """``E exp(lam (h - E h))`` by exact enumeration or quadrature."""
    if isinstance(m, Continuous1D):
        mean = integrate(m, lambda x: h(x)).value
        return integrate(m, lambda x: np.exp(lam * (h(x) - mean))).value
    disc = m.enumerate() if isinstance(m, ProductMeasure) else m
    if not isinstance(disc, DiscreteMeasure):
        raise DomainError("MGF needs a discrete or one-dimensional measure")
    vals = h(disc.points)
    mean = disc.expect(vals)
    return disc.expect(np.exp(lam * (vals - mean)))


def mgf_verify(m: Measure, h: TestFunction, hp: HerbstParams, lambdas: Sequence[float],
               ps: Sequence[float] = (1.0, 1.5, 1.9, 1.99), seed: Seed = Seed(0)) -> MGFReport:
    """Compare the centered MGF with the bound on the ``p x lambda`` grid.

    Pairs where ``lambda`` is beyond the singularity of the bound are skipped
    and listed.
    """
    lip = check_lipschitz(h, m, seed)
    values = {lam: centered_mgf(m, h, lam) for lam in lambdas}
    rows, skipped = [], []
    for p in ps:
        for lam in lambdas:
            try:
                bound = herbst_mgf_bound(hp, p, lam)
            except DomainError:
                skipped.append((float(p), float(lam)))
                continue
            rows.append(MGFRow(float(p), float(lam), float(values[lam]), bound))
    return MGFReport(tuple(rows), tuple(skipped), lip)


@dataclass(frozen=True)
class TailCurve:
    t: np.ndarray
    bound: np.ndarray
    counts: Optional[np.ndarray] = None
    samples: int = 0
    cp_upper: Optional[np.ndarray] = None
    empirical_override: Optional[np.ndarray] = None
    zero_fraction: float = 1.0
    widening: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def empirical(self) -> Optional[np.ndarray]:
        if self.empirical_override is not None:
            return self.empirical_override
        if self.counts is None:
            return None
        return self.counts / self.samples

    @classmethod
    def synthetic(cls, t, tail, a: float = 1.0) -> "TailCurve":
        """A curve whose empirical column is an exact tail function."""
        t = np.asarray(t, dtype=float)
        return cls(t, theorem_tail(a, t), empirical_override=np.asarray(tail, dtype=float),
                   zero_fraction=1.0)

    def to_dict(self) -> dict:
        out = {"t": self.t, "bound": self.bound, "samples": self.samples,
               "zero_fraction": self.zero_fraction, "widening": self.widening, **self.meta}
        if self.counts is not None:
            out["counts"] = self.counts
            out["empirical"] = self.empirical
        if self.cp_upper is not None:
            out["cp_upper"] = self.cp_upper
        return out

    CSV_COLUMNS = ("t", "bound", "empirical", "cp_upper")

    def csv_rows(self):
        emp = self.empirical
        for i, t in enumerate(self.t):
            yield (t, self.bound[i], np.nan if emp is None else emp[i],
                   np.nan if self.cp_upper is None else self.cp_upper[i])


def clopper_pearson_upper(k, n: int, level: float = 0.95) -> np.ndarray:
    """Upper end of the two-sided Clopper-Pearson interval for ``k`` successes in ``n``."""
    k = np.asarray(k, dtype=float)
    upper = stats.beta.ppf(1.0 - (1.0 - level) / 2.0, k + 1.0, np.maximum(n - k, 1e-300))
    return np.where(k >= n, 1.0, upper)


def mc_tail_experiment(r: float, n: int, h: TestFunction, ts: Sequence[float], samples: int,
                       seed: Seed, C_assumed: float = 1.0) -> TailCurve:
    """Empirical ``P(h - mean >= t sqrt(C))`` under ``mu_r^n``.

    The sample mean stands in for ``E h``; the Clopper-Pearson upper end is
    taken at the threshold lowered by ``2 sd / sqrt(samples)`` to absorb that
    substitution.
    """
    if samples < 10**4:
        raise DomainError("need at least 10^4 samples")
    if h.arity != n:
        raise DomainError(f"h has arity {h.arity}, dimension is {n}")
    base = exp_power(r)
    m = base if n == 1 else ProductMeasure(tuple([base] * n))
    pts = m.sample(samples, seed).reshape(samples, n)
    check_lipschitz(h, m, seed)
    vals = h(pts)
    mean = float(np.mean(vals))
    dev = np.sort(vals - mean)
    ts = np.asarray(ts, dtype=float)
    thresholds = ts * math.sqrt(C_assumed)
    widen = 2.0 * float(np.std(vals)) / math.sqrt(samples)

    def count_at_least(x):
        return samples - np.searchsorted(dev, x, side="left")

    counts = count_at_least(thresholds)
    cp = clopper_pearson_upper(count_at_least(thresholds - widen), samples)
    a = 2.0 - 2.0 / r
    zero = float(count_at_least(np.array([0.0]))[0]) / samples
    return TailCurve(ts, theorem_tail(a, ts), counts.astype(float), samples, cp,
                     zero_fraction=zero, widening=widen,
                     meta={"r": r, "n": n, "h": h.label, "C_assumed": C_assumed, "mean": mean})


@dataclass(frozen=True)
class SharpnessFit:
    slope: float
    slope_stderr: float
    exponent: float
    scale: float
    points: int

    def to_dict(self) -> dict:
        return {"slope": self.slope, "slope_stderr": self.slope_stderr,
                "exponent": self.exponent, "scale": self.scale, "points": self.points}


FIT_WINDOW = (1.5, 3.5)
MIN_COUNT = 5


def _log_gamma_tail(rho: float, log_scale: float, t: np.ndarray) -> np.ndarray:
    z = (t / math.exp(log_scale)) ** rho
    q = special.gammaincc(1.0 / rho, z)
    # far tail: gammaincc(s, z) ~ z^(s-1) e^(-z) / Gamma(s)
    asym = (1.0 / rho - 1.0) * np.log(np.maximum(z, 1e-300)) - z - special.gammaln(1.0 / rho)
    return np.where(q > 1e-280, np.log(np.maximum(q, 1e-300)), asym)


def sharpness_fit(curve: TailCurve) -> SharpnessFit:
    """Tail exponent estimates from points with ``t`` in ``[1.5, 3.5]``.

    ``slope`` is the least-squares slope of ``ln(-ln P)`` against ``ln t``.
    It is exact for pure ``exp(-t^r)`` tails but is biased low when the tail
    carries a polynomial prefactor, as the exponential-power laws do.
    ``exponent`` fits ``P(dev >= t) / P(dev >= 0)`` by the exponential-power
    tail ``Gamma(1/rho, (t/sigma)^rho) / Gamma(1/rho)``, weighting points by
    the square root of their counts.
    """
    emp = curve.empirical
    if emp is None:
        raise InsufficientData("curve has no empirical column")
    t = np.asarray(curve.t, dtype=float)
    sel = (t >= FIT_WINDOW[0]) & (t <= FIT_WINDOW[1]) & (emp > 0) & (emp < 1)
    if curve.counts is not None:
        sel &= curve.counts >= MIN_COUNT
    if np.count_nonzero(sel) < 5:
        raise InsufficientData(f"{int(np.count_nonzero(sel))} usable points in t in {FIT_WINDOW}; need 5")
    ts, ps = t[sel], emp[sel]
    X, Y = np.log(ts), np.log(-np.log(ps))
    res = stats.linregress(X, Y)

    weights = np.ones_like(ts) if curve.counts is None else np.sqrt(curve.counts[sel])
    target = np.log(ps / curve.zero_fraction)

    def resid(theta):
        return weights * (target - _log_gamma_tail(theta[0], theta[1], ts))

    start = np.array([min(max(res.slope, 0.5), 6.0), 0.0])
    fit = optimize.least_squares(resid, start, bounds=([0.2, -5.0], [6.0, 5.0]),
                                 xtol=1e-12, ftol=1e-12, gtol=1e-12)
    return SharpnessFit(float(res.slope), float(res.stderr), float(fit.x[0]),
                        float(math.exp(fit.x[1])), int(ts.size))
