import math
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate as sint, special, stats

from ineqlab import (
    DomainError,
    NonConvergent,
    Seed,
    SizeError,
    exp_power,
    exp_power_normalizer,
    gauss,
    parse_measure,
    product,
    sym_exp,
    two_point,
)
from ineqlab.measures import DiscreteMeasure, ProductMeasure, integrate
from ineqlab.quadrature import QuadratureSpec, adaptive_gauss_legendre, fixed_gauss_legendre

R_GRID = np.round(np.arange(1.0, 2.0001, 0.1), 10)


class TestQuadrature:
    def test_polynomial_exact(self):
        res = adaptive_gauss_legendre(lambda x: x**7 - 3 * x**2, [0.0, 2.0])
        np.testing.assert_allclose(res.value, 2.0**8 / 8 - 8.0, rtol=1e-14)

    def test_matches_scipy_on_kink(self):
        f = lambda x: np.abs(x - 0.3) ** 0.5 * np.exp(-x)
        ref = sint.quad(lambda x: abs(x - 0.3) ** 0.5 * math.exp(-x), 0, 3, points=[0.3],
                        epsabs=1e-13, epsrel=1e-13)[0]
        res = adaptive_gauss_legendre(f, [0.0, 3.0], abs_tol=1e-12, rel_tol=1e-12)
        np.testing.assert_allclose(res.value, ref, rtol=1e-10)

    def test_error_estimate_bounds_true_error(self):
        res = adaptive_gauss_legendre(np.cos, [0.0, 10.0], abs_tol=1e-8, rel_tol=1e-8)
        assert abs(res.value - math.sin(10.0)) <= max(res.error, 1e-14)

    def test_panel_budget(self):
        with pytest.raises(NonConvergent):
            adaptive_gauss_legendre(lambda x: np.sin(1.0 / np.maximum(x, 1e-300)),
                                    [1e-6, 1.0], abs_tol=1e-15, rel_tol=1e-15, max_panels=64)

    def test_rejects_unordered_breaks(self):
        with pytest.raises(DomainError):
            adaptive_gauss_legendre(np.exp, [1.0, 0.0])

    def test_rejects_nonfinite(self):
        with pytest.raises(DomainError):
            adaptive_gauss_legendre(lambda x: np.where(x > 0.5, np.inf, 1.0), [0.0, 1.0])

    def test_fixed_batch(self):
        out = fixed_gauss_legendre(np.exp, np.array([0.0, 1.0]), np.array([1.0, 3.0]), panels=4)
        np.testing.assert_allclose(out, [math.e - 1, math.exp(3) - math.e], rtol=1e-14)

    def test_spec_validation(self):
        with pytest.raises(DomainError):
            QuadratureSpec(truncation_radius=0.0)
        with pytest.raises(DomainError):
            QuadratureSpec(abs_tol=0.0)


class TestNormalizer:
    def test_known_values(self):
        assert exp_power_normalizer(1.0) == pytest.approx(0.5, abs=1e-15)
        np.testing.assert_allclose(exp_power_normalizer(2.0), 1 / math.sqrt(math.pi), rtol=1e-14)

    @pytest.mark.parametrize("r", R_GRID)
    def test_bounds_and_gamma_identity(self, r):
        c = exp_power_normalizer(r)
        assert 1 / 3 <= c <= math.e / 2
        np.testing.assert_allclose(c, r / (2 * special.gamma(1 / r)), rtol=1e-13)

    @pytest.mark.filterwarnings("ignore::scipy.integrate.IntegrationWarning")
    @pytest.mark.parametrize("r", [1.0, 1.37, 2.0])
    def test_density_integrates_to_one(self, r):
        c = exp_power_normalizer(r)
        g = lambda x: c * math.exp(-(x**r))
        pieces = [sint.quad(g, lo, hi, epsabs=1e-16, epsrel=1e-14, limit=200)[0] for lo, hi in ((0, 1), (1, 60))]
        total = 2 * sum(pieces)
        np.testing.assert_allclose(total, 1.0, rtol=1e-12)

    @pytest.mark.parametrize("r", [0.99, 2.01])
    def test_out_of_range(self, r):
        with pytest.raises(DomainError):
            exp_power_normalizer(r)


class TestIntegrate:
    def test_sym_exp_moments(self):
        lam = sym_exp()
        np.testing.assert_allclose(integrate(lam, lambda x: np.ones_like(x)).value, 1.0, atol=1e-10)
        np.testing.assert_allclose(integrate(lam, lambda x: x).value, 0.0, atol=1e-10)
        np.testing.assert_allclose(integrate(lam, lambda x: x**2).value, 2.0, rtol=1e-9)

    def test_gauss_fourth_moment(self):
        np.testing.assert_allclose(integrate(gauss(1.5), lambda x: x**4).value, 3 * 1.5**4, rtol=1e-9)

    def test_discrete_is_exact(self):
        m = two_point(0.3)
        np.testing.assert_allclose(integrate(m, lambda x: x).value, 0.3 - 0.7, rtol=1e-15)

    def test_discrete_product_enumerates(self):
        m = product([two_point(0.5), two_point(0.5)])
        val = integrate(m, lambda pts: (pts[:, 0] + pts[:, 1]) ** 2).value
        np.testing.assert_allclose(val, 2.0, rtol=1e-15)

    def test_continuous_product_refused(self):
        with pytest.raises(DomainError):
            integrate(product([sym_exp(), sym_exp()]), lambda pts: pts[:, 0])


class TestUpperTail:
    def test_half_at_origin(self):
        assert sym_exp().upper_tail(0.0) == pytest.approx(0.5, abs=1e-12)

    def test_total_mass(self):
        m = exp_power(1.5)
        assert m.upper_tail(-m.radius) == pytest.approx(1.0, abs=1e-10)

    def test_gaussian_kernel_against_erfc(self):
        # c_2 exp(-t^2) on [1, inf) is erfc(1) / 2
        np.testing.assert_allclose(exp_power(2.0).upper_tail(1.0), 0.5 * special.erfc(1.0), rtol=1e-10)

    @pytest.mark.parametrize("r", [1.0, 1.3, 1.5, 1.8, 2.0])
    def test_against_incomplete_gamma(self, r):
        xs = np.array([0.0, 0.1, 0.7, 1.0, 2.5, 6.0, 15.0])
        ref = 0.5 * special.gammaincc(1 / r, xs**r)
        np.testing.assert_allclose(exp_power(r).upper_tail(xs), ref, rtol=1e-10, atol=1e-300)

    def test_log_tail_grid_far_out(self):
        xs = np.array([10.0, 20.0, 30.0, 40.0])
        ref = np.log(0.5 * special.gammaincc(1 / 1.5, xs**1.5))
        np.testing.assert_allclose(exp_power(1.5).log_upper_tail_grid(xs), ref, rtol=1e-11)

    def test_symmetry(self):
        m = gauss(1.0)
        xs = np.array([0.3, 1.1, 2.9])
        np.testing.assert_allclose(m.upper_tail(-xs), 1 - m.upper_tail(xs), rtol=1e-13)

    @given(st.floats(1.0, 2.0), st.floats(0.0, 12.0), st.floats(0.0, 3.0))
    @settings(max_examples=60, deadline=None)
    def test_tail_nonincreasing(self, r, x, dx):
        m = exp_power(r)
        assert m.upper_tail(x + dx) <= m.upper_tail(x) + 1e-15


class TestSampling:
    def test_sym_exp_mean(self):
        n = 10**5
        xs = sym_exp().sample(n, Seed(11))
        assert abs(xs.mean()) < 4 * math.sqrt(2.0 / n)

    def test_two_point_frequency(self):
        n = 10**5
        xs = two_point(0.3).sample(n, Seed(12))[:, 0]
        freq = np.mean(xs == 1.0)
        assert abs(freq - 0.3) < 4 * math.sqrt(0.3 * 0.7 / n)

    def test_gaussian_ks(self):
        n = 10**5
        m = exp_power(2.0)
        xs = m.sample(n, Seed(13))
        assert stats.kstest(xs, m.cdf).statistic < 1.95 / math.sqrt(n)

    @pytest.mark.parametrize("r", [1.0, 1.5])
    def test_ks_against_scipy_gennorm(self, r):
        n = 10**5
        xs = exp_power(r).sample(n, Seed(14))
        assert stats.kstest(xs, stats.gennorm(r).cdf).statistic < 1.95 / math.sqrt(n)

    def test_product_coordinates_uncorrelated(self):
        n = 10**5
        xs = product([sym_exp(), sym_exp()]).sample(n, Seed(15))
        assert abs(np.corrcoef(xs.T)[0, 1]) < 4 / math.sqrt(n)

    def test_reproducible(self):
        a = exp_power(1.5).sample(1000, Seed(99))
        b = exp_power(1.5).sample(1000, Seed(99))
        np.testing.assert_array_equal(a, b)
        c = exp_power(1.5).sample(1000, Seed(99).substream(0))
        assert not np.array_equal(a, c)

    def test_bad_seed(self):
        with pytest.raises(DomainError):
            Seed(-1)


class TestConstruction:
    def test_constructor_survives_submodule_import(self):
        # the two_point submodule shares the constructor's name
        code = "import ineqlab.two_point, ineqlab; print(callable(ineqlab.two_point))"
        proc = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True)
        assert proc.stdout.strip() == "True"

    def test_product_of_one(self):
        m = two_point(0.2)
        assert product([m]) is m

    def test_two_symmetric_factors(self):
        atoms = product([two_point(0.5), two_point(0.5)]).enumerate()
        assert atoms.size == 4
        np.testing.assert_allclose(atoms.weights, 0.25, rtol=1e-15)

    def test_enumeration_order(self):
        atoms = ProductMeasure((two_point(0.2), two_point(0.7))).enumerate()
        np.testing.assert_array_equal(atoms.points, [[-1, -1], [-1, 1], [1, -1], [1, 1]])
        np.testing.assert_allclose(atoms.weights, [0.8 * 0.3, 0.8 * 0.7, 0.2 * 0.3, 0.2 * 0.7])

    def test_grid_limit(self):
        with pytest.raises(SizeError):
            ProductMeasure(tuple([two_point(0.5)] * 21)).enumerate()

    def test_discrete_validation(self):
        with pytest.raises(DomainError):
            DiscreteMeasure(np.array([0.0, 1.0]), np.array([0.5, 0.6]))
        with pytest.raises(DomainError):
            DiscreteMeasure(np.array([0.0, 0.0]), np.array([0.5, 0.5]))

    @pytest.mark.parametrize("key", ["sym_exp", "gauss:sigma=2", "exp_power:r=1.5",
                                     "two_point:alpha=0.25", "product:two_point:alpha=0.5^3"])
    def test_parse_catalog(self, key):
        m = parse_measure(key)
        assert m.dimension >= 1

    @pytest.mark.parametrize("key", ["uniform", "gauss:mu=1", "product:sym_exp^x", "two_point:alpha=1.5"])
    def test_parse_rejects(self, key):
        with pytest.raises(DomainError):
            parse_measure(key)
