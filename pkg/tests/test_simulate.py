import math

import numpy as np
import pytest

from chaoscale import (
    FirstMomentLinear,
    NumericalBlowupError,
    ParticleSystemState,
    SimConfig,
    builtin_model,
    mean_power,
    ou_variance,
    phi_estimate,
    phi_values,
    run_terminal_measure,
    step,
    step_exact_linear,
    stream_generator,
    terminal_positions,
)
from chaoscale.simulate import exact_linear_update, with_seed


def ou_model(**kw):
    base = dict(a=1.0, c=0.5, sigma=0.4, T=1.0, initial_law={"kind": "bernoulli", "p": 0.5})
    base.update(kw)
    return builtin_model("mean_field_ou", **base)


class TestStreamGenerator:
    def test_same_key_same_stream(self):
        a = stream_generator(7, 1, 2).standard_normal(5)
        b = stream_generator(7, 1, 2).standard_normal(5)
        assert np.array_equal(a, b)

    def test_different_keys_differ(self):
        a = stream_generator(7, 1, 2).standard_normal(5)
        b = stream_generator(7, 1, 3).standard_normal(5)
        assert not np.array_equal(a, b)

    def test_seed_separates_streams(self):
        a = stream_generator(7, 0).standard_normal(5)
        b = stream_generator(8, 0).standard_normal(5)
        assert not np.array_equal(a, b)


class TestSimConfig:
    def test_rejects_bad_scheme(self):
        with pytest.raises(ValueError):
            SimConfig(scheme="milstein")

    def test_rejects_zero_steps(self):
        with pytest.raises(ValueError):
            SimConfig(step_count=0)

    def test_exact_scheme_requires_linear_model(self):
        cfg = SimConfig(scheme="exact_linear")
        with pytest.raises(ValueError):
            cfg.validate_for(builtin_model("bounded_kuramoto"))

    def test_with_seed(self):
        cfg = with_seed(SimConfig(master_seed=0), 42)
        assert cfg.master_seed == 42


class TestSingleSteps:
    def test_euler_deterministic_drift(self):
        # sigma = 0: one Euler step of dX = -aX dt moves x to x(1 - a dt)
        model = ou_model(c=0.0, sigma=0.0)
        state = ParticleSystemState(np.array([1.0, 2.0]))
        out = step(state, model, 0.1, np.random.default_rng(0))
        assert out.positions[:, 0] == pytest.approx([0.9, 1.8])
        assert out.time == pytest.approx(0.1)

    def test_exact_step_deterministic_decay(self):
        # sigma = 0: exact one-step decay of the mean is e^{-(a-c) dt} and of
        # deviations e^{-a dt}
        model = ou_model(c=0.5, sigma=0.0)
        state = ParticleSystemState(np.array([0.0, 2.0]))
        out = step_exact_linear(state, model, 1.0, np.random.default_rng(0))
        mean = math.exp(-0.5)
        dev = math.exp(-1.0)
        assert out.positions[:, 0] == pytest.approx([mean - dev, mean + dev])

    def test_exact_step_requires_linear(self):
        state = ParticleSystemState(np.array([0.0]))
        with pytest.raises(ValueError):
            step_exact_linear(state, builtin_model("bounded_kuramoto"), 0.1, np.random.default_rng(0))

    @pytest.mark.filterwarnings("ignore:overflow")
    def test_euler_blowup_raises(self):
        model = builtin_model(
            "mean_field_ou", a=-1e300, c=0.0, sigma=0.0, initial_law={"kind": "point", "x": 1.0}
        )
        state = ParticleSystemState(np.array([1.0]))
        with pytest.raises(NumericalBlowupError) as exc:
            step(step(state, model, 1.0, np.random.default_rng(0)), model, 1.0, np.random.default_rng(0))
        assert exc.value.step_index == 0

    def test_exact_update_mean_variance(self):
        # marginal statistics of the exact one-step transition at N = 2
        model = ou_model()
        rng = np.random.default_rng(3)
        b = 200000
        x = np.ones((b, 2))
        z = rng.standard_normal((b, 2))
        z_mean = rng.standard_normal(b)
        out = exact_linear_update(model, x, 1.0, z, z_mean)
        xbar = out.mean(axis=1)
        assert xbar.mean() == pytest.approx(math.exp(-0.5), abs=3e-3)
        assert xbar.var() == pytest.approx(ou_variance(0.5, 0.4, 1.0) / 2, rel=0.02)
        dev = out[:, 0] - xbar
        assert dev.var() == pytest.approx(ou_variance(1.0, 0.4, 1.0) / 2, rel=0.02)


class TestTerminalSimulation:
    def test_shapes(self):
        model = ou_model()
        cfg = SimConfig(step_count=2, scheme="exact_linear", master_seed=1)
        pos = terminal_positions(model, 8, 100, cfg)
        assert pos.shape == (100, 8, 1)

    def test_exact_scheme_step_count_invariant(self):
        # the exact transition composes: statistics are unchanged by splitting
        # the horizon into more steps (streams differ, so compare moments)
        model = ou_model()
        u = FirstMomentLinear()
        est1, se1 = phi_estimate(model, u, 16, 40000, SimConfig(step_count=1, master_seed=5))
        est4, se4 = phi_estimate(model, u, 16, 40000, SimConfig(step_count=4, master_seed=6))
        assert abs(est1 - est4) < 3 * math.hypot(se1, se4)

    def test_exact_matches_analytic_mean(self):
        model = ou_model()
        est, se = phi_estimate(model, FirstMomentLinear(), 32, 60000, SimConfig(master_seed=7))
        assert abs(est - model.analytic.mean_at(1.0)) < 3.5 * se

    def test_euler_converges_to_exact(self):
        model = ou_model()
        u = mean_power(2)
        exact, se_e = phi_estimate(model, u, 16, 60000, SimConfig(master_seed=8))
        euler, se_u = phi_estimate(
            model, u, 16, 60000, SimConfig(step_count=64, scheme="euler_maruyama", master_seed=8)
        )
        assert abs(exact - euler) < 4 * math.hypot(se_e, se_u) + 2e-3

    def test_thread_determinism(self):
        model = ou_model()
        cfg = SimConfig(master_seed=9)
        a = phi_values(model, mean_power(2), 8, 10000, cfg, threads=1)
        b = phi_values(model, mean_power(2), 8, 10000, cfg, threads=4)
        assert np.array_equal(a, b)

    def test_reps_prefix_stability(self):
        # asking for fewer replications returns a prefix of the longer run
        model = ou_model()
        cfg = SimConfig(master_seed=10)
        long = phi_values(model, mean_power(2), 8, 9000, cfg)
        short = phi_values(model, mean_power(2), 8, 5000, cfg)
        assert np.array_equal(long[:5000], short)

    def test_run_terminal_measure_indexing(self):
        model = ou_model()
        cfg = SimConfig(master_seed=11)
        mu = run_terminal_measure(model, 4, cfg, ensemble=0, replication=3)
        assert mu.atoms.shape == (4, 1)
        again = run_terminal_measure(model, 4, cfg, ensemble=0, replication=3)
        assert np.array_equal(mu.atoms, again.atoms)
        other = run_terminal_measure(model, 4, cfg, ensemble=1, replication=3)
        assert not np.array_equal(mu.atoms, other.atoms)

    def test_streams_disjoint(self):
        model = ou_model()
        cfg = SimConfig(master_seed=12)
        a = phi_values(model, mean_power(2), 8, 100, cfg, stream=(0,))
        b = phi_values(model, mean_power(2), 8, 100, cfg, stream=(1,))
        assert not np.array_equal(a, b)
