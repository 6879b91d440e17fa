"""The increasing map carrying the exponential-power law mu_r onto the symmetric exponential law.

``z_r`` equates upper tails: ``(1/2) exp(-z_r(x)) = mu_r((x, inf))`` for
``x >= 0``, extended by oddness. Since the left side inverts in closed form,
``z_r(x) = -ln 2 - ln mu_r((x, inf))`` and the derivative is
``z_r'(x) = 2 c_r exp(|z_r(x)| - |x|^r)``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import stats
from scipy.interpolate import CubicHermiteSpline

from .errors import DomainError, NonConvergent
from .functionals import InequalityReport, ia_ratio
from .functions import TestFunction
from .measures import Seed, exp_power, exp_power_normalizer, sym_exp
from .phi_class import LemmaVerdict

GRID_NODES = 4096
GRID_TOP = 40.0
ORIGIN_NODES = 400
ORIGIN_TOP = 0.05
JACOBIAN_LO = 1.0 / 50.0
JACOBIAN_HI = 600.0


def tanh_grid(nodes: int = GRID_NODES, top: float = GRID_TOP, steepness: float = 2.0) -> np.ndarray:
    """Nodes on ``[0, top]``, denser near 0.

    Below ``ORIGIN_TOP`` the nodes are geometric instead: ``|x|^r`` is not
    smooth at the origin, and cells that are wide relative to ``x`` cost
    several digits there.
    """
    u = np.linspace(0.0, 1.0, nodes)
    x = top * (1.0 - np.tanh(steepness * (1.0 - u)) / np.tanh(steepness))
    x[-1] = top
    x = x[x > ORIGIN_TOP]
    return np.concatenate([[0.0], np.geomspace(1e-10, ORIGIN_TOP, ORIGIN_NODES), x])


@dataclass(frozen=True, eq=False)
class TransportMap:
    r: float
    grid: np.ndarray
    z_values: np.ndarray
    slopes: np.ndarray
    _forward: CubicHermiteSpline = field(repr=False)
    _backward: CubicHermiteSpline = field(repr=False)

    @property
    def a(self) -> float:
        return 2.0 - 2.0 / self.r

    @property
    def c_r(self) -> float:
        return exp_power_normalizer(self.r)

    @property
    def x_max(self) -> float:
        return float(self.grid[-1])

    @property
    def z_max(self) -> float:
        return float(self.z_values[-1])

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if np.any(np.abs(x) > self.x_max):
            raise DomainError(f"x outside the grid hull [-{self.x_max}, {self.x_max}]")
        out = np.sign(x) * self._forward(np.abs(x))
        return float(out) if out.ndim == 0 else out

    def derivative(self, x):
        """``2 c_r exp(|z(x)| - |x|^r)`` with the interpolated ``z``."""
        x = np.asarray(x, dtype=float)
        out = 2.0 * self.c_r * np.exp(np.abs(self(x)) - np.abs(x) ** self.r)
        return float(out) if out.ndim == 0 else out

    def inverse(self, y, newton_steps: int = 3):
        y = np.asarray(y, dtype=float)
        mag = np.abs(y)
        if np.any(mag > self.z_max):
            raise DomainError(f"y outside the image [-{self.z_max}, {self.z_max}]")
        x = self._backward(mag)
        for _ in range(newton_steps):
            x = np.clip(x - (self._forward(x) - mag) / self.derivative(x), 0.0, self.x_max)
        out = np.sign(y) * x
        return float(out) if out.ndim == 0 else out

    def jacobian_at_image(self, y):
        """``(z'(z^-1(y)))^2 = (2 c_r exp(|y| - |z^-1(y)|^r))^2``."""
        y = np.asarray(y, dtype=float)
        x = self.inverse(y)
        return (2.0 * self.c_r * np.exp(np.abs(y) - np.abs(x) ** self.r)) ** 2


def build_z_r(r: float, nodes: int = GRID_NODES, top: float = GRID_TOP) -> TransportMap:
    """Tabulate ``z_r`` on a tanh-graded grid and interpolate with exact slopes."""
    if not 1.0 <= r <= 2.0:
        raise DomainError(f"r={r} outside [1, 2]")
    grid = tanh_grid(nodes, top)
    m = exp_power(r)
    log_tail = m.log_upper_tail_grid(grid)
    if not np.all(np.isfinite(log_tail)):
        bad = int(np.flatnonzero(~np.isfinite(log_tail))[0])
        raise NonConvergent(f"tail evaluation failed at node x={grid[bad]!r}")
    z = -math.log(2.0) - log_tail
    z[0] = 0.0
    if np.any(np.diff(z) <= 0):
        raise NonConvergent("tabulated map is not strictly increasing")
    slopes = 2.0 * exp_power_normalizer(r) * np.exp(z - grid**r)
    forward = CubicHermiteSpline(grid, z, slopes, extrapolate=False)
    backward = CubicHermiteSpline(z, grid, 1.0 / slopes, extrapolate=False)
    return TransportMap(float(r), grid, z, slopes, forward, backward)


def jacobian_profile(tm: TransportMap, ys) -> dict:
    ys = np.asarray(ys, dtype=float)
    jac = tm.jacobian_at_image(ys)
    envelope = np.maximum(1.0, np.abs(ys) ** tm.a)
    return {"y": ys, "jacobian": jac, "bound_lo": JACOBIAN_LO * envelope,
            "bound_hi": JACOBIAN_HI * envelope, "normalized": jac / envelope}


def jacobian_bound_check(tm: TransportMap, ys) -> LemmaVerdict:
    """Two-sided Jacobian envelope at points ``ys`` of the image.

    The margin is the smaller relative distance to either envelope; the
    observed range of the normalized Jacobian is recorded for reference.
    """
    prof = jacobian_profile(tm, ys)
    margins = np.minimum(prof["jacobian"] / prof["bound_lo"] - 1.0,
                         1.0 - prof["jacobian"] / prof["bound_hi"])
    k = int(np.argmin(margins))
    worst = {"r": tm.r, "y": float(prof["y"][k]), "jacobian": float(prof["jacobian"][k]),
             "normalized_min": float(prof["normalized"].min()),
             "normalized_max": float(prof["normalized"].max())}
    return LemmaVerdict("jacobian", int(margins.size), int(np.sum(margins < 0)), float(margins[k]),
                        worst, 0.0, "caller-supplied image points")


@dataclass(frozen=True)
class KSResult:
    statistic: float
    threshold: float
    n: int
    source_r: float
    map_r: float

    @property
    def passed(self) -> bool:
        return self.statistic < self.threshold


def pushforward_check(tm: TransportMap, n: int, seed: Seed,
                      source_r: Optional[float] = None) -> KSResult:
    """KS distance between ``z_r`` applied to ``mu_source_r`` samples and the symmetric exponential law."""
    if n < 10**4:
        raise DomainError("pushforward check needs n >= 10^4")
    src = tm.r if source_r is None else float(source_r)
    xs = exp_power(src).sample(n, seed)
    stat = stats.kstest(tm(xs), stats.laplace.cdf).statistic
    return KSResult(float(stat), 1.95 / math.sqrt(n), n, src, tm.r)


@dataclass(frozen=True)
class TransferReport:
    direction: str
    factor: float
    mu_side: InequalityReport
    lambda_side: InequalityReport

    @property
    def holds(self) -> bool:
        tol = 1e-9 * max(self.mu_side.ratio, self.lambda_side.ratio, 1e-300)
        if self.direction == "forward":
            return self.lambda_side.ratio <= self.factor * self.mu_side.ratio + tol
        return self.mu_side.ratio <= self.factor * self.lambda_side.ratio + tol

    def to_dict(self) -> dict:
        return {"direction": self.direction, "factor": self.factor, "holds": self.holds,
                "mu_side": self.mu_side.to_dict(), "lambda_side": self.lambda_side.to_dict()}


def equivalence_transfer(tm: TransportMap, func: TestFunction, p: float,
                         direction: str = "forward") -> TransferReport:
    """Witnessed I(a) ratios on both sides of the map for ``f = g o z_r``.

    ``forward``: ``func`` is ``g`` on the exponential side and the check is
    ``ratio_lambda <= 600 ratio_mu``. ``converse``: ``func`` is ``f`` on the
    mu_r side and the check is ``ratio_mu <= 50 ratio_lambda``. The exponential
    side uses the energy weight ``max(1, |x|^a)``.
    """
    if direction not in ("forward", "converse"):
        raise DomainError("direction must be 'forward' or 'converse'")
    a = tm.a
    mu, lam = exp_power(tm.r), sym_exp()
    if direction == "forward":
        g = func
        f = TestFunction(
            1, lambda pts: g(tm(pts[:, 0])),
            lambda pts: (g.derivative(tm(pts[:, 0])) * tm.derivative(pts[:, 0]))[:, None],
            f"({g.label}) o z_r")
    else:
        f = func

        def g_grad(pts):
            x = tm.inverse(pts[:, 0])
            return (f.derivative(x) / tm.derivative(x))[:, None]

        g = TestFunction(1, lambda pts: f(tm.inverse(pts[:, 0])), g_grad, f"({f.label}) o z_r^-1")
    weight = lambda x: np.maximum(1.0, np.abs(x) ** a)
    mu_rep = ia_ratio(mu, f, p, a)
    lam_rep = ia_ratio(lam, g, p, a, weight=weight)
    factor = JACOBIAN_HI if direction == "forward" else 1.0 / JACOBIAN_LO
    return TransferReport(direction, factor, mu_rep, lam_rep)


CSV_COLUMNS = ("x", "z", "z_prime", "jacobian_at_x", "bound_lo", "bound_hi")


def dump_csv(tm: TransportMap, xs=None) -> str:
    """Rows of ``x, z(x), z'(x), (z'(z^-1(x)))^2`` and the envelope at ``x``."""
    xs = np.concatenate([-tm.grid[:0:-1], tm.grid]) if xs is None else np.asarray(xs, dtype=float)
    inside = np.abs(xs) <= min(tm.x_max, tm.z_max)
    xs = xs[inside]
    prof = jacobian_profile(tm, xs)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for row in zip(xs, tm(xs), tm.derivative(xs), prof["jacobian"], prof["bound_lo"], prof["bound_hi"]):
        w.writerow([format(float(v), ".17g") for v in row])
    return buf.getvalue()
