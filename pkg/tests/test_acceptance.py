"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -s -v`` to see the summary lines
next to pytest's own verdicts.
"""

import math
import time

import numpy as np
import pytest
from scipy import integrate, special

from ineqlab import (
    DiscreteMeasure,
    Seed,
    entropy,
    exp_power,
    exp_power_normalizer,
    gauss,
    ia_ratio,
    p_variance,
    phi_curve,
    sym_exp,
    test_function,
    two_point,
)
from ineqlab.concentration import (
    SMALL_T_RATE,
    HerbstParams,
    herbst_iterate,
    mc_tail_experiment,
    mgf_verify,
    sharpness_fit,
    tail_bound,
)
from ineqlab.phi_class import lemma8_check, rho_s, run_lemma_suite
from ineqlab.transport import build_z_r, jacobian_bound_check, pushforward_check
from ineqlab.two_point import (
    claimed_maximizer,
    direction_gap,
    optimal_constant_bruteforce,
    optimal_constant_closed_form,
)

R_GRID = np.round(np.arange(1.0, 2.0001, 0.1), 10)


@pytest.fixture
def verdict(capsys):
    def emit(number: int, ok: bool, detail: str):
        with capsys.disabled():
            print(f"\ncriterion {number}: {'PASS' if ok else 'FAIL'} ({detail})")
        assert ok, f"criterion {number}: {detail}"
    return emit


def test_c01_two_point_bruteforce(verdict):
    start = time.perf_counter()
    worst_gap = worst_dir = 0.0
    for alpha in (0.1, 0.2, 0.3, 0.4, 0.45, 0.55):
        for p in (1.1, 1.25, 1.5, 1.75, 1.9):
            best, arg = optimal_constant_bruteforce(alpha, p)
            worst_gap = max(worst_gap, abs(best - optimal_constant_closed_form(alpha, p)))
            worst_dir = max(worst_dir, direction_gap(arg, claimed_maximizer(alpha, p)))
    elapsed = time.perf_counter() - start
    ok = worst_gap <= 1e-6 and worst_dir <= 1e-4 and elapsed < 10.0
    verdict(1, ok, f"max value gap {worst_gap:.2e}, max direction gap {worst_dir:.2e}, {elapsed:.2f} s")


def test_c02_limit_constants(verdict):
    worst_var = 0.0
    for alpha in (0.1, 0.3, 0.45, 0.7):
        target = alpha * (1 - alpha)
        best, _ = optimal_constant_bruteforce(alpha, 1 + 1e-6)
        worst_var = max(worst_var, abs(optimal_constant_closed_form(alpha, 1 + 1e-6) - target),
                        abs(best - target))
    worst_sym = 0.0
    for p in (1.1, 1.5, 1.9):
        for alpha in (0.5 - 1e-5, 0.5 + 1e-5):
            worst_sym = max(worst_sym, abs(optimal_constant_closed_form(alpha, p) - (2 - p) / 4))
    ok = worst_var <= 1e-5 and worst_sym <= 1e-6
    verdict(2, ok, f"p -> 1 error {worst_var:.2e}, alpha -> 1/2 error {worst_sym:.2e}")


def test_c03_phi_monotone(verdict):
    rng = np.random.default_rng(301)
    grid = np.linspace(1.0, 1.99, 32)
    violations, worst = 0, math.inf
    for _ in range(1000):
        k = int(rng.integers(2, 9))
        vals = np.exp(rng.uniform(math.log(1e-3), 0.0, k))
        vals /= vals.max()
        m = DiscreteMeasure(vals, rng.dirichlet(np.ones(k)))
        phis = np.array([v for _, v in phi_curve(m, test_function("x"), grid)])
        step = np.min(np.diff(phis))
        worst = min(worst, step)
        violations += int(step < -1e-10)
    verdict(3, violations == 0, f"{violations} violations in 1000 instances, smallest step {worst:.2e}")


def _bridge_cases():
    rng = np.random.default_rng(401)
    cases = []
    for i in range(10):
        k = int(rng.integers(2, 9))
        pts = np.sort(rng.uniform(0.25, 4.0, k))
        cases.append((f"discrete#{i}", DiscreteMeasure(pts, rng.dirichlet(np.ones(k))), test_function("x")))
    for m in (gauss(), sym_exp(), exp_power(1.5), gauss(0.7), exp_power(1.2)):
        for src in ("1+0.5*sin(x)", "exp(0.3*x)"):
            cases.append((f"{m.key} {src}", m, test_function(src)))
    return cases


def test_c04_entropy_bridge(verdict):
    cases = _bridge_cases()
    assert len(cases) == 20
    worst, where = 0.0, ""
    for label, m, f in cases:
        ent = entropy(m, f)
        err = abs(p_variance(m, f, 1.999) / 0.001 - ent / 2) / ent
        if err > worst:
            worst, where = err, label
    verdict(4, worst <= 1e-2, f"max relative error {worst:.2e} at {where}")


def _gaussian_witnesses():
    rng = np.random.default_rng(501)
    out = []
    for i in range(50):
        kind = i % 5
        b = float(rng.uniform(0.1, 1.5))
        c = float(rng.uniform(0.2, 3.0))
        if kind == 0:
            src = f"{1 + b!r}+sin({c!r}*x)"
        elif kind == 1:
            src = f"exp({b!r}*x)"
        elif kind == 2:
            src = f"sqrt(1+{b!r}*x^2)"
        elif kind == 3:
            src = f"{b!r}+exp(-{c!r}*x^2)"
        else:
            src = f"1/(1+{b!r}*x^2)+{c!r}*cos(x)^2"
        out.append(src)
    return out


def test_c05_gaussian_witnesses(verdict):
    m = gauss()
    ps = (1.0, 1.25, 1.5, 1.75, 1.9, 1.99)
    worst, where = 0.0, ""
    for src in _gaussian_witnesses():
        f = test_function(src)
        for p in ps:
            r = ia_ratio(m, f, p, 1.0).ratio
            if r > worst:
                worst, where = r, f"{src} at p={p}"
    rng = np.random.default_rng(502)
    worst_two = 0.0
    for _ in range(500):
        lo, hi = (float(v) for v in np.exp(rng.uniform(-5, 5, 2)))
        f = test_function(f"{(lo + hi) / 2!r}+({(hi - lo) / 2!r})*x")
        p = float(rng.uniform(1.0, 1.999))
        worst_two = max(worst_two, ia_ratio(two_point(0.5), f, p, 1.0).ratio)
    ok = worst <= 1 + 1e-6 and worst_two <= 1 + 1e-9
    verdict(5, ok, f"Gaussian max ratio {worst:.9f} ({where}), two-point max ratio {worst_two:.12f}")


def test_c06_subadditivity(verdict):
    a = run_lemma_suite("subadd", 10**4, Seed(601))
    b = run_lemma_suite("varp-subadd", 10**4, Seed(602))
    ok = a.violations == 0 and b.violations == 0 and a.tolerance == b.tolerance == 1e-10
    verdict(6, ok, f"phi power: {a.violations} violations, worst {a.worst_margin:.2e}; "
                   f"Var(p): {b.violations} violations, worst {b.worst_margin:.2e}")


def test_c07_rho_metric(verdict):
    v = run_lemma_suite("rho-metric", 10**5, Seed(701))
    rng = np.random.default_rng(702)
    x, y = np.exp(rng.uniform(-7, 7, (2, 10**4)))
    exact = np.abs(x - y) / 2
    rel = np.max(np.abs(rho_s(x, y, 2.0) - exact) / np.maximum(exact, 1e-300))
    ok = v.violations == 0 and v.worst_margin >= -1e-12 and rel <= 4 * np.finfo(float).eps
    verdict(7, ok, f"triangle worst margin {v.worst_margin:.2e} over {v.trials} triples, rho_2 rel error {rel:.1e}")


def _lemma8_margins(regime: int, n: int, rng):
    s = rng.uniform(1.0, 2.0, n)
    t = rng.uniform(0, 1, n)
    c, d, x = np.exp(rng.uniform(math.log(1e-3), math.log(1e3), (3, n)))
    if regime == 1:
        lo, hi = np.minimum(c, d), np.maximum(c, d)
        below = rng.uniform(0, 1, n) < 0.5
        x = np.where(below, lo * rng.uniform(0, 1, n), hi * np.exp(rng.uniform(0, math.log(1e3), n)))
    elif regime == 2:
        t = np.full(n, 0.5)
    else:
        t = 0.5 * t
        c, d = np.maximum(c, d), np.minimum(c, d)
    return lemma8_check(s, t, c, d, x, regime)


def test_c08_lemma_suites(verdict):
    rng = np.random.default_rng(801)
    parts, ok = [], True
    for regime in (1, 2, 3):
        margins = _lemma8_margins(regime, 10**5, rng)
        bad = int(np.sum(margins < -1e-10))
        ok &= bad == 0
        parts.append(f"lemma8 regime {regime}: {bad}/{margins.size}")
    for lid in ("lemma9", "lemma10", "lemma11"):
        v = run_lemma_suite(lid, 10**4, Seed(802))
        ok &= v.violations == 0
        parts.append(f"{lid}: {v.violations}/{v.trials}")
    verdict(8, ok, "; ".join(parts))


def test_c09_transport(verdict):
    ys = np.linspace(-30, 30, 60001)
    pos = np.linspace(1e-6, 30, 30001)
    parts, ok = [], True
    worst_ks = 0.0
    for i, r in enumerate(R_GRID):
        tm = build_z_r(r)
        jac = jacobian_bound_check(tm, ys)
        ks = pushforward_check(tm, 10**5, Seed(900 + i))
        z = tm(pos)
        above = bool(np.all(z >= pos**r - 1e-10 * np.maximum(1.0, pos**r)))
        ok &= jac.violations == 0 and ks.passed and above
        worst_ks = max(worst_ks, ks.statistic / ks.threshold)
        if jac.violations or not ks.passed or not above:
            parts.append(f"r={r}: jacobian {jac.violations}, KS {ks.statistic:.4f}, z>=x^r {above}")
    detail = "; ".join(parts) if parts else f"all {R_GRID.size} maps clean, max KS/threshold {worst_ks:.3f}"
    verdict(9, ok, detail)


def test_c10_herbst(verdict):
    hp = HerbstParams(1.0, 1.0)
    gaps = {}
    for p in (1.0, 1.5, 1.9, 1.99):
        gaps[p] = max(herbst_iterate(hp, p, lam).relative_gap for lam in (0.5, 1.0, 1.8))
    depth_ok = all(g <= 1e-10 for g in gaps.values())
    ts = np.linspace(0, 1, 201)
    small_ok = all(tail_bound(HerbstParams(1.0, a), t) <= math.exp(-t * t / 3) * (1 + 1e-15)
                   for a in (0.0, 0.5, 1.0) for t in ts)
    rate_ok = SMALL_T_RATE <= math.exp(-1 / 3) and SMALL_T_RATE == 16 / (9 * math.e)
    mgf = mgf_verify(gauss(), test_function("x"), hp, np.linspace(0, 1.8, 37), [1.0, 1.5, 1.9, 1.99])
    mgf_ok = mgf.violations == 0 and mgf.worst_margin >= -1e-8 and not mgf.skipped
    gap_text = ", ".join(f"p={p}: {g:.1e}" for p, g in gaps.items())
    verdict(10, depth_ok and small_ok and rate_ok and mgf_ok,
            f"depth-64 relative gaps {gap_text}; small-t display {small_ok}; "
            f"16/(9e)={SMALL_T_RATE:.6f} <= e^(-1/3)={math.exp(-1 / 3):.6f} {rate_ok}; "
            f"Gaussian MGF worst margin {mgf.worst_margin:.2e}")


@pytest.mark.parametrize("r", [1.0, 1.5, 2.0])
def test_c11_sharpness(verdict, r):
    start = time.perf_counter()
    curve = mc_tail_experiment(r, 1, test_function("x"), np.linspace(0, 4, 81), 10**6, Seed(1100))
    fit = sharpness_fit(curve)
    elapsed = time.perf_counter() - start
    rel = abs(fit.exponent - r) / r
    verdict(11, rel <= 0.15 and elapsed < 60.0,
            f"r={r}: fitted exponent {fit.exponent:.4f} (off by {rel:.1%}), log-log slope {fit.slope:.3f}, "
            f"{elapsed:.1f} s")


def test_c12_normalizer(verdict):
    worst, lo, hi = 0.0, math.inf, -math.inf
    for r in np.linspace(1.0, 2.0, 101):
        c = exp_power_normalizer(r)
        variants = (r / (2 * math.gamma(1 / r)),
                    math.exp(-math.log(2) - special.gammaln(1 + 1 / r)),
                    0.5 / integrate.quad(lambda x: math.exp(-x**r), 0, math.inf, epsabs=0, epsrel=1e-13)[0])
        worst = max(worst, max(abs(v - c) / c for v in variants))
        lo, hi = min(lo, c), max(hi, c)
    ok = 1 / 3 <= lo and hi <= math.e / 2 and worst <= 1e-12
    verdict(12, ok, f"range [{lo:.6f}, {hi:.6f}] within [1/3, e/2], max variant disagreement {worst:.1e}")
