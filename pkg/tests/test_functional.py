import itertools
import math

import numpy as np
import pytest

from chaoscale import (
    DerivativeUnavailableError,
    EmpiricalMeasure,
    FirstMomentLinear,
    LinearFunctional,
    MomentCylinder,
    ProductOfLinear,
    cos_mean,
    mean_power,
    sin_mean,
    taylor_measure_expand,
    verify_polynomial_growth,
)
from chaoscale.functional import (
    directional_derivative_exact,
    directional_derivative_fd,
    lfd_tensor_integral,
    mix_measures,
    signed_difference,
)


def half_half():
    return EmpiricalMeasure(np.array([[0.0], [1.0]]), np.array([0.5, 0.5]))


BUILTINS = [
    FirstMomentLinear(),
    LinearFunctional(lambda x: x[0] ** 2, name="second_moment"),
    mean_power(2),
    mean_power(3),
    mean_power(4),
    sin_mean(),
    cos_mean(),
    ProductOfLinear([lambda x: x[0], lambda x: x[0] ** 3], name="mean_times_third"),
]


class TestEval:
    def test_mean_functional(self):
        assert FirstMomentLinear()(half_half()) == pytest.approx(0.5)

    def test_mean_squared(self):
        assert mean_power(2)(half_half()) == pytest.approx(0.25)

    def test_sin_mean_at_point_mass(self):
        assert sin_mean()(EmpiricalMeasure.point_mass(0.0)) == pytest.approx(0.0)

    def test_second_moment_linear(self):
        u = LinearFunctional(lambda x: x[0] ** 2)
        assert u(half_half()) == pytest.approx(0.5)

    def test_product_of_linear(self):
        u = ProductOfLinear([lambda x: x[0], lambda x: x[0] ** 3])
        mu = EmpiricalMeasure.from_points([1.0, 2.0])
        assert u(mu) == pytest.approx(1.5 * 4.5)


class TestLfd:
    def test_square_cylinder_second_derivative(self):
        u = mean_power(2)
        assert u.lfd(2, half_half(), [3.0, -2.0]) == pytest.approx(2 * 3.0 * -2.0)

    def test_normalization_at_zero(self):
        for u in BUILTINS:
            p = min(2, u.max_order)
            ys = np.zeros((p, 1))
            assert u.lfd(p, half_half(), ys) == pytest.approx(0.0, abs=1e-12)

    def test_sin_third_derivative_at_zero_mean(self):
        u = sin_mean()
        m = EmpiricalMeasure(np.array([[-1.0], [1.0]]), np.array([0.5, 0.5]))
        assert u.lfd(3, m, [1.0, 1.0, 1.0]) == pytest.approx(-1.0)

    def test_order_beyond_table_raises(self):
        u = MomentCylinder([np.sin, np.cos], name="short")
        with pytest.raises(DerivativeUnavailableError):
            u.lfd(2, half_half(), [1.0, 1.0])

    def test_permutation_symmetry(self):
        rng = np.random.default_rng(5)
        m = EmpiricalMeasure.from_points(rng.normal(size=4))
        for u in BUILTINS:
            p = min(3, u.max_order)
            ys = rng.normal(size=(p, 1))
            base = u.lfd(p, m, ys)
            for perm in itertools.permutations(range(p)):
                assert u.lfd(p, m, ys[list(perm)]) == pytest.approx(base, rel=1e-12)

    def test_lfd_batch_matches_scalar(self):
        rng = np.random.default_rng(6)
        m = EmpiricalMeasure.from_points(rng.normal(size=3))
        for u in BUILTINS:
            p = min(2, u.max_order)
            ys = rng.normal(size=(7, p, 1))
            batch = u.lfd_batch(p, m, ys)
            scalar = [u.lfd(p, m, tup) for tup in ys]
            assert batch == pytest.approx(scalar)


class TestDirectionalConsistency:
    # central difference h=1e-5 against the exact first-order contraction
    @pytest.mark.parametrize("t", [0.2, 0.5, 0.8])
    def test_first_order(self, t):
        rng = np.random.default_rng(7)
        m = EmpiricalMeasure.from_points(rng.normal(size=3))
        m2 = EmpiricalMeasure.from_points(rng.normal(size=4))
        for u in BUILTINS:
            fd = directional_derivative_fd(u, m, m2, t)
            exact = directional_derivative_exact(u, m, m2, t)
            scale = max(abs(exact), 1.0)
            assert fd == pytest.approx(exact, abs=1e-6 * scale)

    def test_higher_order(self):
        # d/dt lfd(p-1, m_t, y) equals the order-p contraction against m'-m
        rng = np.random.default_rng(8)
        m = EmpiricalMeasure.from_points(rng.normal(size=3))
        m2 = EmpiricalMeasure.from_points(rng.normal(size=3))
        atoms, signed = signed_difference(m2, m)
        h = 1e-5
        for u in [mean_power(3), sin_mean(), mean_power(4)]:
            for p in [2, 3]:
                y_fixed = rng.normal(size=(p - 1, 1))
                t = 0.4

                def lower(tt):
                    return u.lfd(p - 1, mix_measures(m, m2, tt), y_fixed)

                fd = (lower(t + h) - lower(t - h)) / (2 * h)
                m_t = mix_measures(m, m2, t)
                exact = math.fsum(
                    w * u.lfd(p, m_t, np.vstack([y_fixed, atom[None, :]]))
                    for atom, w in zip(atoms, signed)
                )
                scale = max(abs(exact), 1.0)
                assert fd == pytest.approx(exact, abs=1e-5 * scale)


class TestTaylorExpansion:
    def test_linear_is_exact_at_first_order(self):
        u = FirstMomentLinear()
        m = EmpiricalMeasure.from_points([0.0, 2.0])
        m2 = EmpiricalMeasure.from_points([1.0, 3.0, 4.0])
        terms, remainder = taylor_measure_expand(u, m, m2, 2)
        assert terms[0] == pytest.approx(u(m2) - u(m))
        assert abs(remainder) <= 1e-12

    def test_mean_squared_quadratic_exact(self):
        u = mean_power(2)
        m = EmpiricalMeasure.point_mass(0.0)
        m2 = EmpiricalMeasure.point_mass(1.0)
        terms, remainder = taylor_measure_expand(u, m, m2, 3)
        assert terms == pytest.approx([0.0, 1.0])
        assert abs(remainder) <= 1e-12

    def test_polynomial_remainder_vanishes_at_degree(self):
        rng = np.random.default_rng(9)
        for k in [2, 3, 4]:
            u = mean_power(k)
            m = EmpiricalMeasure.from_points(rng.normal(size=3))
            m2 = EmpiricalMeasure.from_points(rng.normal(size=4))
            _, remainder = taylor_measure_expand(u, m, m2, k + 1)
            assert abs(remainder) <= 1e-10

    def test_second_order_remainder_scaling(self):
        # (mean)^3 truncated at q=2: remainder shrinks quadratically in the shift
        u = mean_power(3)
        m = EmpiricalMeasure.point_mass(1.0)
        rems = []
        for shift in [0.4, 0.2, 0.1, 0.05]:
            m2 = EmpiricalMeasure.point_mass(1.0 + shift)
            _, rem = taylor_measure_expand(u, m, m2, 2)
            rems.append(abs(rem))
        ratios = [rems[i] / rems[i + 1] for i in range(3)]
        assert all(3.0 < r < 5.0 for r in ratios)


class TestPolynomialGrowth:
    def test_sin_cylinder_order_two(self):
        report = verify_polynomial_growth(sin_mean(), 2, 2000, 1.0, seed=0)
        assert report.passed
        assert report.worst_ratio <= 1.0

    def test_square_cylinder_am_gm(self):
        report = verify_polynomial_growth(mean_power(2), 2, 2000, 1.0, seed=1)
        assert report.passed

    def test_linear_first_order(self):
        u = LinearFunctional(lambda x: 2.5 * x[0], name="scaled_mean")
        report = verify_polynomial_growth(u, 1, 1000, 2.5, seed=2)
        assert report.passed


class TestTensorIntegral:
    def test_signed_integral_of_linear_vanishes_at_order_two(self):
        u = FirstMomentLinear()
        m = EmpiricalMeasure.from_points([0.0, 1.0])
        m2 = EmpiricalMeasure.from_points([2.0, 5.0])
        atoms, signed = signed_difference(m2, m)
        assert lfd_tensor_integral(u, 2, m, atoms, signed) == pytest.approx(0.0, abs=1e-14)
