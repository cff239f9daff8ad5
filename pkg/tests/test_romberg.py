import math

import numpy as np
import pytest

from chaoscale import (
    FirstMomentLinear,
    LinearFunctional,
    RombergScheme,
    SimConfig,
    builtin_model,
    cost_plan,
    ensemble_estimate,
    limit_functional_value,
    mean_power,
    mse_report,
    romberg_estimate,
    romberg_weights,
)


def ou_model():
    return builtin_model(
        "mean_field_ou", a=1.0, c=0.5, sigma=0.4, T=1.0,
        initial_law={"kind": "bernoulli", "p": 0.5},
    )


class TestWeights:
    def test_low_orders(self):
        assert romberg_weights(1) == pytest.approx([1.0])
        assert romberg_weights(2) == pytest.approx([-1.0, 2.0])
        assert romberg_weights(3) == pytest.approx([0.5, -4.0, 4.5])

    @pytest.mark.parametrize("k", range(1, 9))
    def test_weights_sum_to_one(self, k):
        assert math.fsum(romberg_weights(k)) == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("k", range(2, 9))
    def test_bias_cancellation_identities(self, k):
        # sum_m alpha_m m^-j = 0 for j = 1..k-1 kills the first k-1 bias terms
        w = romberg_weights(k)
        ms = np.arange(1, k + 1, dtype=float)
        for j in range(1, k):
            assert math.fsum(w * ms**-j) == pytest.approx(0.0, abs=1e-9)

    def test_order_bounds(self):
        with pytest.raises(ValueError):
            romberg_weights(0)
        with pytest.raises(ValueError):
            romberg_weights(9)


class TestScheme:
    def test_sizes(self):
        scheme = RombergScheme(k=3, base_n=10)
        assert scheme.sizes == (10, 20, 30)
        assert scheme.weights == pytest.approx([0.5, -4.0, 4.5])

    def test_validation(self):
        with pytest.raises(ValueError):
            RombergScheme(k=0, base_n=4)
        with pytest.raises(ValueError):
            RombergScheme(k=2, base_n=0)


class TestCostPlan:
    def test_reference_point(self):
        plan = cost_plan(0.1, 1)
        assert plan.n == 10
        assert plan.m == 10
        assert plan.interactions == 1000
        assert plan.n_single == 100
        assert plan.interactions_single == 10000

    def test_cost_identity_random(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            eps = float(rng.uniform(0.01, 0.9))
            k = int(rng.integers(1, 6))
            plan = cost_plan(eps, k)
            assert plan.n == math.ceil(eps ** (-1.0 / k))
            assert plan.m == math.ceil(eps ** (-2.0 + 1.0 / k))
            assert plan.interactions == plan.m * sum((j * plan.n) ** 2 for j in range(1, k + 1))
            assert plan.interactions_single == math.ceil(eps**-2.0) ** 2

    def test_higher_order_is_cheaper_at_small_eps(self):
        eps = 1e-3
        assert cost_plan(eps, 2).interactions < cost_plan(eps, 1).interactions
        assert cost_plan(eps, 1).interactions < cost_plan(eps, 1).interactions_single

    def test_validation(self):
        with pytest.raises(ValueError):
            cost_plan(0.0, 1)
        with pytest.raises(ValueError):
            cost_plan(1.5, 1)
        with pytest.raises(ValueError):
            cost_plan(0.1, 0)

    def test_as_dict_keys(self):
        d = cost_plan(0.1, 2).as_dict()
        assert set(d) == {"epsilon", "k", "N", "M", "C", "N_single", "C_single"}


class TestRombergEstimate:
    def test_extrapolation_removes_leading_bias(self):
        # the (mean)^2 bias of this model is exactly C1/N, so the k=2
        # combination is unbiased up to Monte Carlo noise
        model = ou_model()
        u = mean_power(2)
        limit = limit_functional_value(model, u)
        est, se = romberg_estimate(model, u, RombergScheme(k=2, base_n=16), 60000, SimConfig(master_seed=21))
        assert abs(est - limit) < 4 * se
        # ... while the plain N=16 estimate is biased by several sigma
        from chaoscale import phi_estimate

        plain, plain_se = phi_estimate(model, u, 16, 60000, SimConfig(master_seed=21), stream=(0, 1))
        assert abs(plain - limit) > 5 * plain_se

    def test_reps_floor(self):
        with pytest.raises(ValueError):
            romberg_estimate(ou_model(), mean_power(2), RombergScheme(k=2, base_n=4), 1, SimConfig())


class TestEnsembleEstimate:
    def test_requires_linear_functional(self):
        with pytest.raises(ValueError):
            ensemble_estimate(ou_model(), mean_power(2), 8, 10, 2, SimConfig())

    def test_value_and_variance(self):
        model = ou_model()
        u = LinearFunctional(lambda x: x[0] ** 2)
        est = ensemble_estimate(model, u, 16, 400, 2, SimConfig(master_seed=22))
        assert est.ensembles == 400
        assert len(est.per_ensemble) == 400
        limit = limit_functional_value(model, u)
        assert abs(est.value - limit) < 4 * math.sqrt(est.variance_estimate)

    def test_variance_scales_inversely_with_m(self):
        model = ou_model()
        u = FirstMomentLinear()
        small = ensemble_estimate(model, u, 8, 100, 2, SimConfig(master_seed=23))
        large = ensemble_estimate(model, u, 8, 1600, 2, SimConfig(master_seed=23))
        ratio = small.variance_estimate / large.variance_estimate
        assert 8 < ratio < 32  # nominal 16


class TestMseReport:
    def test_decomposition(self):
        model = ou_model()
        u = LinearFunctional(lambda x: x[0] ** 2)
        report = mse_report(model, u, 8, 40, 2, SimConfig(master_seed=24), outer_reps=60)
        assert report.mse >= 0
        assert report.variance >= 0
        # mse = bias^2 + variance up to the sampling identity's ddof correction
        assert abs(report.decomposition_gap) < 0.1 * report.mse + 3 * report.mse_stderr
        assert abs(report.bias) < 4 * report.bias_stderr + 0.01
