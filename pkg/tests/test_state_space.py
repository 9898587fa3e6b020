"""Tests for propagation, the CIR and the equilibrium gain."""

from dataclasses import replace

import numpy as np
import pytest

from mfmc.channel_config import REFERENCE_CHANNEL, ChannelConfig, elementary_probabilities, validate_config
from mfmc.errors import ConfigError, DimensionMismatch, SingularSystem
from mfmc.markov_kernel import TransitionModel, build_transition_model
from mfmc.state_space import (
    cir,
    continuous_response,
    convolve_response,
    equilibrium_gain,
    neumann_gain,
    peak,
    propagate,
    pulse_response,
)


def _make_model(cfg: ChannelConfig) -> TransitionModel:
    cfg = validate_config(cfg)
    return build_transition_model(cfg, elementary_probabilities(cfg))


def _make_toy() -> TransitionModel:
    return TransitionModel.from_dense(
        [[0.5, 0.2], [0.3, 0.6]], psi=[0.2, 0.2], b=[1.0, 0.0], h=[0.0, 1.0]
    )


def _unit_config(**kw) -> ChannelConfig:
    base = dict(D=0.1, v=0.1, k_on=0.1, k_off=0.05, c_p=1.0, dx=1.0, dt=1.0, N=30, r=5)
    base.update(kw)
    return ChannelConfig(**base)


def _random_small_config(rng: np.random.Generator, max_states: int) -> ChannelConfig:
    p_diff = rng.uniform(0.01, 0.3)
    p_flow = rng.uniform(0, 1 - 2 * p_diff)
    N = int(rng.integers(4, max_states + 1))
    return _unit_config(
        D=p_diff,
        v=p_flow,
        k_on=rng.uniform(0, 1 - 2 * p_diff - p_flow),
        k_off=rng.uniform(0.01, 1),
        N=N,
        r=int(rng.integers(2, N - 1)),
    )


class TestPropagate:
    def test_one_step_of_toy(self):
        traj = propagate(_make_toy(), x0=[1.0, 0.0], u=[0.0])
        np.testing.assert_allclose(traj.x[-1], [0.5, 0.3])
        assert traj.z_obs[1] == pytest.approx(0.3)
        assert traj.z_out[1] == pytest.approx(0.2)
        assert traj.x_total[1] + traj.z_out[1] == pytest.approx(1.0)

    def test_mass_conservation_random(self):
        rng = np.random.default_rng(11)
        for _ in range(10):
            model = _make_model(_random_small_config(rng, max_states=60))
            u = rng.uniform(0, 100, size=1000)
            x0 = rng.uniform(0, 10, size=model.N)
            traj = propagate(model, x0, u)
            total = x0.sum() + traj.injected()
            np.testing.assert_allclose(traj.x_total + traj.z_out, total, rtol=1e-9)

    def test_z_out_non_decreasing(self):
        traj = pulse_response(_make_model(_unit_config()), 100.0, K=300)
        assert np.all(np.diff(traj.z_out) >= 0)

    def test_zero_steps(self):
        traj = pulse_response(_make_model(_unit_config()), 1e5, K=0)
        assert traj.K == 0
        assert list(traj.z_obs) == [0.0]
        assert list(traj.z_out) == [0.0]

    def test_stride_snapshots(self):
        traj = pulse_response(_make_model(_unit_config()), 1.0, K=10, stride=4)
        assert list(traj.x_steps) == [0, 4, 8]
        assert traj.x.shape == (3, 30)

    def test_time_axis(self):
        traj = pulse_response(_make_model(REFERENCE_CHANNEL), 1.0, K=3)
        np.testing.assert_allclose(traj.t, [0.0, 8e-4, 1.6e-3, 2.4e-3])

    def test_shape_errors(self):
        model = _make_toy()
        with pytest.raises(DimensionMismatch):
            propagate(model, x0=[1.0], u=[0.0])
        with pytest.raises(DimensionMismatch):
            propagate(model, x0=[0.0, 0.0], u=[0.0, 1.0], K=3)

    def test_negative_release_rejected(self):
        with pytest.raises(ConfigError) as exc:
            pulse_response(_make_toy(), -1.0, K=5)
        assert exc.value.key == "u0"

    def test_bad_stride_rejected(self):
        with pytest.raises(ConfigError):
            propagate(_make_toy(), x0=[0.0, 0.0], u=[1.0], stride=0)


    def test_linear_in_the_input(self):
        rng = np.random.default_rng(21)
        model = _make_model(_unit_config())
        zeros = np.zeros(model.N)
        u1 = rng.uniform(0, 10, size=200)
        u2 = rng.uniform(0, 10, size=200)
        z1 = propagate(model, zeros, u1).z_obs
        z2 = propagate(model, zeros, u2).z_obs
        for alpha in (0.5, 3.0, 1e4):
            scaled = propagate(model, zeros, alpha * u1).z_obs
            np.testing.assert_allclose(scaled, alpha * z1, rtol=1e-12, atol=1e-300)
        summed = propagate(model, zeros, u1 + u2).z_obs
        np.testing.assert_allclose(summed, z1 + z2, rtol=1e-12, atol=1e-300)

    def test_initial_state_adds_free_decay(self):
        rng = np.random.default_rng(13)
        K = 60
        for _ in range(20):
            model = _make_model(_random_small_config(rng, max_states=6))
            x0 = rng.uniform(0, 5, size=model.N)
            u = rng.uniform(0, 10, size=K)
            z = propagate(model, x0, u).z_obs
            forced = convolve_response(cir(model, K), u)
            Q = model.dense()
            free = np.array([model.h @ np.linalg.matrix_power(Q, k) @ x0 for k in range(K + 1)])
            np.testing.assert_allclose(z, free + forced, rtol=1e-10, atol=1e-12)


class TestCir:
    def test_toy_values(self):
        g = cir(_make_toy(), 2).g
        np.testing.assert_allclose(g, [0.0, 0.3, 0.33], rtol=0, atol=1e-15)

    def test_matches_dense_powers(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            model = _make_model(_random_small_config(rng, max_states=6))
            g = cir(model, 50).g
            Q = model.dense()
            for i in range(51):
                expected = model.h @ np.linalg.matrix_power(Q, i) @ model.b
                assert abs(g[i] - expected) <= 1e-14

    def test_first_tap_is_zero_away_from_source(self):
        assert cir(_make_model(REFERENCE_CHANNEL), 5).g[0] == 0.0

    def test_pulse_is_shifted_scaled_cir(self):
        model = _make_model(_unit_config())
        u0 = 1e5
        g = cir(model, 400).g
        traj = pulse_response(model, u0, K=401)
        assert traj.z_obs[0] == 0.0
        np.testing.assert_allclose(traj.z_obs[1:], u0 * g, rtol=1e-12, atol=1e-200)

    def test_continuous_is_prefix_sum(self):
        model = _make_model(_unit_config())
        u0 = 1e3
        response = cir(model, 400)
        traj = continuous_response(model, u0, K=401)
        np.testing.assert_allclose(traj.z_obs[1:], u0 * response.partial_sums(), rtol=1e-10, atol=1e-200)
        assert np.all(np.diff(traj.z_obs) >= 0)

    def test_convolution_matches_propagation(self):
        rng = np.random.default_rng(8)
        model = _make_model(_unit_config())
        u = rng.uniform(0, 10, size=200)
        expected = propagate(model, np.zeros(model.N), u).z_obs
        z = convolve_response(cir(model, 200), u)
        np.testing.assert_allclose(z, expected, rtol=1e-10, atol=1e-12)

    def test_convolution_needs_enough_taps(self):
        with pytest.raises(DimensionMismatch):
            convolve_response(cir(_make_toy(), 3), np.ones(10))

    def test_cir_sum_bounded_by_gain(self):
        model = _make_model(_unit_config())
        assert cir(model, 2000).g.sum() <= equilibrium_gain(model) * (1 + 1e-12)

    def test_pulse_peaks_then_decays(self):
        traj = pulse_response(_make_model(_unit_config()), 1e5, K=3000)
        k, z = traj.peak()
        assert 0 < k < 3000
        assert np.all(np.diff(traj.z_obs[k:]) <= 0)
        assert traj.z_obs[-1] < 1e-3 * z


class TestEquilibrium:
    def test_toy_gain(self):
        assert equilibrium_gain(_make_toy()) == pytest.approx(15 / 7, abs=1e-12)

    def test_no_binding_gives_zero(self):
        assert equilibrium_gain(_make_model(_unit_config(k_on=0.0))) == 0.0

    def test_frozen_chain_is_singular(self):
        cfg = ChannelConfig(D=0, v=0, k_on=0, k_off=0, c_p=0, dx=1, dt=1, N=4, r=2)
        with pytest.raises(SingularSystem):
            equilibrium_gain(_make_model(cfg))

    def test_permanent_binding_is_singular(self):
        with pytest.raises(SingularSystem):
            equilibrium_gain(_make_model(_unit_config(k_off=0.0)))

    def test_neumann_cross_check(self):
        model = _make_model(_unit_config())
        direct = equilibrium_gain(model)
        assert neumann_gain(model) == pytest.approx(direct, rel=1e-8)

    @pytest.mark.parametrize("tol", [0.0, -1e-9, float("nan")])
    def test_non_positive_tol_rejected(self, tol):
        model = _make_model(_unit_config())
        with pytest.raises(ConfigError) as exc:
            equilibrium_gain(model, tol=tol)
        assert exc.value.key == "tol"
        with pytest.raises(ConfigError):
            neumann_gain(model, tol=tol)

    def test_neumann_unreachable_receiver(self):
        assert neumann_gain(_make_model(_unit_config(k_on=0.0))) == 0.0

    def test_continuous_settles_at_gain(self):
        model = _make_model(_unit_config())
        u0 = 1e3
        traj = continuous_response(model, u0, K=5000)
        assert traj.z_obs[-1] == pytest.approx(equilibrium_gain(model) * u0, rel=1e-6)


class TestPeak:
    def test_first_maximum(self):
        assert peak(np.array([0.0, 2.0, 1.0, 2.0])) == (1, 2.0)

    def test_empty(self):
        with pytest.raises(ValueError):
            peak(np.array([]))


class TestReferenceTrends:
    """Orderings of the reference channel at Pe = 60 and Pe = 360."""

    K = 40000

    def _cir_peak(self, **kw):
        return cir(_make_model(replace(REFERENCE_CHANNEL, **kw)), self.K).peak()

    def test_faster_flow_peaks_earlier_and_higher(self):
        slow_k, slow_g = self._cir_peak(v=1e-5)
        fast_k, fast_g = self._cir_peak(v=6e-5)
        assert fast_k < slow_k
        assert fast_g > slow_g

    def test_farther_receiver_peaks_later_and_lower(self):
        near_k, near_g = self._cir_peak(r=100)
        far_k, far_g = self._cir_peak(r=200)
        assert far_k > near_k
        assert far_g < near_g

    def test_faster_flow_lowers_gain(self):
        slow = equilibrium_gain(_make_model(replace(REFERENCE_CHANNEL, v=1e-5)))
        fast = equilibrium_gain(_make_model(replace(REFERENCE_CHANNEL, v=6e-5)))
        assert fast < slow
