"""Prescribed-time scaling and distributed observer pieces."""

import math

import numpy as np
import pytest

from salvosim import (
    ObserverParams,
    ScalingParams,
    TargetState,
    build_topology,
    gain_ratio,
    laplacian_bundle,
    observer_derivative,
    relative_estimation_error,
    scaling,
    scaling_rate,
)

SENSING_EDGES = [(0, 1), (1, 2), (1, 3), (2, 4), (3, 2), (4, 1)]


def sensing_W():
    topo = build_topology(5, SENSING_EDGES, has_leader=True)
    return laplacian_bundle(topo).W


class TestScaling:
    def test_frozen_value(self):
        # (3/pi) sin(pi/2) + 1.5 - 3
        assert scaling(1.5, 3.0) == pytest.approx(-0.545070341448628, rel=1e-12)

    def test_boundary_values(self):
        assert scaling(0.0, 2.0) == pytest.approx(-2.0, rel=1e-12)
        assert scaling(2.0, 2.0) == 1.0
        assert scaling(5.0, 2.0) == 1.0
        # approaches zero from below at the horizon
        assert -1e-9 < scaling(2.0 - 1e-4, 2.0) < 0.0

    def test_negative_and_increasing(self):
        ts = np.linspace(0.0, 0.999, 200) * 0.6
        vals = [scaling(t, 0.6) for t in ts]
        assert all(v < 0.0 for v in vals)
        assert all(b > a for a, b in zip(vals, vals[1:]))

    def test_rate_is_derivative(self):
        rng = np.random.RandomState(17)
        h = 1e-7
        for _ in range(50):
            T = float(rng.uniform(0.5, 5.0))
            t = float(rng.uniform(h, T * 0.99))
            fd = (scaling(t + h, T) - scaling(t - h, T)) / (2.0 * h)
            assert fd == pytest.approx(scaling_rate(t, T), abs=1e-6)

    def test_rate_boundaries(self):
        assert scaling_rate(0.0, 0.6) == pytest.approx(2.0, rel=1e-12)
        assert scaling_rate(0.6, 0.6) == 0.0
        assert scaling_rate(1.0, 0.6) == 0.0


class TestGainRatio:
    def test_initial_value(self):
        params = ScalingParams(T_c=0.6, epsilon_guard=0.01)
        assert gain_ratio(0.0, params) == pytest.approx(-2.0 / 0.6, rel=1e-12)

    def test_never_positive(self):
        params = ScalingParams(T_c=3.0, epsilon_guard=0.01)
        for t in np.linspace(0.0, 4.0, 400):
            assert gain_ratio(float(t), params) <= 0.0

    def test_terminal_guard_branch(self):
        params = ScalingParams(T_c=1.0, epsilon_guard=0.01)
        assert gain_ratio(0.99, params) == 0.0
        assert gain_ratio(0.995, params) == 0.0
        assert gain_ratio(2.0, params) == 0.0
        assert gain_ratio(0.989, params) != 0.0

    def test_terminal_asymptote(self):
        # exact ratio behaves like -3/tau just inside the horizon; below
        # tau ~ 1e-5 the scaling function itself hits float cancellation,
        # which is what the terminal guard is for
        params = ScalingParams(T_c=2.0, epsilon_guard=1e-9)
        for tau in (1e-2, 1e-3, 1e-4):
            rho = gain_ratio(2.0 - tau, params)
            assert rho == pytest.approx(-3.0 / tau, rel=1e-2)


class TestRelativeEstimationError:
    def test_relay_only_pursuer(self):
        # pursuer 3 hears only pursuer 1: delta_3 = psi_hat_3 - psi_hat_1
        W = sensing_W()
        estimates = [np.full(4, float(k + 1)) for k in range(4)]
        psi = TargetState(psi=(0.0, 0.0, 0.0, 0.0))
        delta = relative_estimation_error(2, estimates, psi, W)
        assert np.allclose(delta, estimates[2] - estimates[0])

    def test_sensor_pursuer_mixes_truth(self):
        # pursuer 1 hears the target and pursuer 4
        W = sensing_W()
        estimates = [np.array([k + 1.0, 0.0, 0.0, 0.0]) for k in range(4)]
        psi = TargetState(psi=(10.0, 0.0, 0.0, 0.0))
        delta = relative_estimation_error(0, estimates, psi, W)
        expected = (estimates[0] - np.array([10.0, 0.0, 0.0, 0.0])) + (estimates[0] - estimates[3])
        assert np.allclose(delta, expected)

    def test_consistent_estimates_zero_error(self):
        W = sensing_W()
        psi = TargetState(psi=(3.0, -2.0, 1.0, 4.0))
        estimates = [np.asarray(psi.psi, float) for _ in range(4)]
        for i in range(4):
            assert np.allclose(relative_estimation_error(i, estimates, psi, W), 0.0)


class TestObserverDerivative:
    def test_zero_disagreement_is_pure_drift(self):
        params = ObserverParams(K1=8.0, K2=8.0, T_o=0.6)
        sc = ScalingParams(T_c=0.6, epsilon_guard=0.01)
        d = observer_derivative((1.0, 2.0, 3.0, 4.0), (0.0, 0.0, 0.0, 0.0), 0.1, params, sc)
        assert np.allclose(d, [3.0, 4.0, 0.0, 0.0])

    def test_effective_gain_at_start(self):
        # K1 = K2 = 1, T_o = 0.6: effective gain 1 + 2/0.6 = 4.333...
        params = ObserverParams(K1=1.0, K2=1.0, T_o=0.6)
        sc = ScalingParams(T_c=0.6, epsilon_guard=0.001)
        delta = (1.0, 0.0, 0.0, 0.0)
        d = observer_derivative((0.0, 0.0, 0.0, 0.0), delta, 0.0, params, sc)
        assert d[0] == pytest.approx(-4.333333333333334, rel=1e-12)

    def test_gain_grows_toward_horizon(self):
        params = ObserverParams(K1=8.0, K2=8.0, T_o=0.6)
        sc = ScalingParams(T_c=0.6, epsilon_guard=1e-6)
        delta = (1.0, 0.0, 0.0, 0.0)
        d_early = observer_derivative((0.0,) * 4, delta, 0.0, params, sc)
        d_late = observer_derivative((0.0,) * 4, delta, 0.59, params, sc)
        assert d_late[0] < d_early[0] < 0.0

    def test_networked_convergence_single_sensor(self):
        """A two-pursuer relay drives both estimates to the truth by T_o."""
        T_o = 0.5
        params = ObserverParams(K1=6.0, K2=6.0, T_o=T_o)
        psi = TargetState(psi=(100.0, -50.0, 20.0, 10.0))
        # pursuer 1 sees the target; pursuer 2 only hears pursuer 1
        topo = build_topology(3, [(0, 1), (1, 2)], has_leader=True)
        W = laplacian_bundle(topo).W
        dt = 1e-4
        sc = ScalingParams(T_c=T_o, epsilon_guard=10.0 * dt)
        est = [np.array([500.0, 400.0, -30.0, 5.0]), np.array([-200.0, 0.0, 0.0, 40.0])]
        psi_vec = np.asarray(psi.psi)

        def advance(psi_t, states, t):
            # target coasts; estimates follow the observer law (RK4)
            def deriv(states_s, tau):
                return [observer_derivative(states_s[i],
                                            relative_estimation_error(i, states_s, TargetState(psi=tuple(psi_t)), W),
                                            tau, params, sc)
                        for i in range(2)]

            k1 = deriv(states, t)
            k2 = deriv([s + 0.5 * dt * k for s, k in zip(states, k1)], t + 0.5 * dt)
            k3 = deriv([s + 0.5 * dt * k for s, k in zip(states, k2)], t + 0.5 * dt)
            k4 = deriv([s + dt * k for s, k in zip(states, k3)], t + dt)
            return [s + dt / 6.0 * (a + 2 * b + 2 * c + d)
                    for s, a, b, c, d in zip(states, k1, k2, k3, k4)]

        init_err = max(np.linalg.norm(e - psi_vec) for e in est)
        t = 0.0
        steps = int(round(T_o / dt))
        for _ in range(steps):
            est = advance(psi_vec + t * np.array([psi.psi[2], psi.psi[3], 0.0, 0.0]), est, t)
            t += dt
        psi_final = psi_vec + t * np.array([psi.psi[2], psi.psi[3], 0.0, 0.0])
        final_err = max(np.linalg.norm(e - psi_final) for e in est)
        assert final_err <= 1e-3 * init_err
