import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ddfl.controller import (ExcitationConfig, closed_loop_poles, control, design_gain,
                             excitation_input, is_hurwitz)
from ddfl.errors import InvalidArgument, PEViolation
from ddfl.estimator import (BetaEstimate, estimate_beta_from_data, init_estimator,
                            push_sample, reconstruct)
from ddfl.numerics import check_pe, rk4_hold_step
from ddfl.plant import build_extended_model, make_vdp_demo


class TestDesignGain:
    def test_demo_poles(self):
        K = design_gain(2, [-5 + 5 ** 0.5, -5 - 5 ** 0.5])
        np.testing.assert_allclose(K, [-20, -10], atol=1e-12)

    def test_rounded_demo_poles(self):
        np.testing.assert_allclose(design_gain(2, [-2.76, -7.23]), [-20, -10], atol=0.05)

    def test_first_order(self):
        np.testing.assert_allclose(design_gain(1, [-3.5]), [-3.5])

    def test_third_order(self):
        np.testing.assert_allclose(design_gain(3, [-1, -2, -3]), [-6, -11, -6])

    def test_complex_pair(self):
        K = design_gain(2, [-1 + 2j, -1 - 2j])
        np.testing.assert_allclose(K, [-5, -2])

    @pytest.mark.parametrize("poles", [[-1, 0.5], [-1, 0], [-1], [-1, -2, -3],
                                       [-1 + 1j, -2]])
    def test_rejects(self, poles):
        with pytest.raises(InvalidArgument):
            design_gain(2, poles)

    @given(st.lists(st.floats(0.1, 20), min_size=1, max_size=3),
           st.lists(st.tuples(st.floats(0.1, 20), st.floats(0.1, 20)), max_size=2))
    def test_pole_round_trip(self, reals, pairs):
        poles = [-r for r in reals] + [c for a, b in pairs for c in (-a + 1j * b, -a - 1j * b)]
        K = design_gain(len(poles), poles)
        got = closed_loop_poles(K)
        want = np.array(poles, dtype=complex)
        scale = max(1.0, np.max(np.abs(want)))
        # pole sensitivity grows with clustering; 1e-8 relative holds for separated sets
        sep = np.abs(np.subtract.outer(want, want)) + np.eye(len(want)) * 1e9
        if np.min(sep) > 1e-2 * scale:
            dist = np.abs(np.subtract.outer(want, got))
            assert np.max(dist.min(axis=1)) < 1e-8 * scale
            assert np.max(dist.min(axis=0)) < 1e-8 * scale
        assert is_hurwitz(K)

    def test_is_hurwitz(self):
        assert is_hurwitz([-20, -10])
        assert not is_hurwitz([20, -10])


class TestControl:
    def test_zero(self):
        assert control([0, 0], 0.0, 2.0, [-20, -10]) == 0.0

    def test_arithmetic(self):
        assert control([1, 0], 0.5, 2.0, [-20, -10]) == pytest.approx(-10.25)

    def test_zero_beta(self):
        with pytest.raises(InvalidArgument):
            control([1, 0], 0.5, 0.0, [-20, -10])

    @given(st.floats(-1e3, 1e3), st.floats(-10, 10), st.floats(-10, 10), st.floats(-10, 10))
    def test_homogeneous(self, c, x1, x2, a):
        K = [-20.0, -10.0]
        u = control([x1, x2], a, 2.0, K)
        uc = control([c * x1, c * x2], c * a, 2.0, K)
        assert uc == pytest.approx(c * u, rel=1e-9, abs=1e-9)


class TestExcitation:
    def test_deterministic(self):
        cfg = ExcitationConfig(seed=42)
        a = [excitation_input(cfg, k, r, 2) for r in [cfg.make_rng()] for k in range(11)]
        b = [excitation_input(cfg, k, r, 2) for r in [cfg.make_rng()] for k in range(11)]
        assert a == b

    @pytest.mark.parametrize("seed", range(10))
    def test_batch_is_pe(self, seed):
        cfg = ExcitationConfig(length_l=8, seed=seed)
        rng = cfg.make_rng()
        u = [excitation_input(cfg, k, rng, 2) for k in range(cfg.batch_length(2))]
        assert len(u) == 11
        assert check_pe(u, 6)

    def test_amplitude_zero_fails_gate(self):
        cfg = ExcitationConfig(amplitude=0.0)
        rng = cfg.make_rng()
        u = [excitation_input(cfg, k, rng, 2) for k in range(11)]
        assert not check_pe(u, 6)
        with pytest.raises(PEViolation):
            estimate_beta_from_data(np.arange(11.0), u, 2, 8, 0.02)

    def test_outside_phase(self):
        cfg = ExcitationConfig()
        with pytest.raises(InvalidArgument):
            excitation_input(cfg, 11, cfg.make_rng(), 2)

    def test_negative_amplitude(self):
        with pytest.raises(InvalidArgument):
            ExcitationConfig(amplitude=-1.0)


def _control_gap(T):
    """Largest |u(estimates) - u(true values)| along a smooth open-loop trajectory."""
    p = make_vdp_demo(1, 0.0)
    K = np.array([-20.0, -10.0])
    model = build_extended_model(2, T)
    est = init_estimator(model, BetaEstimate(2.0, np.eye(6), 6), 3)
    x = [1.0, 0.0, 0.5, 0.0]
    u_prev = None
    gap = 0.0
    for k in range(int(round(1.0 / T)) + 1):
        est = push_sample(est, x[2], u_prev)
        if est.ready:
            e = reconstruct(est)
            xi, alpha = np.array(x[2:]), p.alpha(x[2:], x[:2])
            gap = max(gap, abs(control(e.xi_hat, e.alpha_hat, 2.0, K) - control(xi, alpha, 2.0, K)))
        u_prev = np.sin(k * T)
        x = list(rk4_hold_step(p.rhs, x, u_prev, T, 20))
    return gap


def test_estimate_induced_control_error_is_order_T():
    Ts = [0.04, 0.02, 0.01, 0.005]
    gaps = [_control_gap(T) for T in Ts]
    slope = np.polyfit(np.log(Ts), np.log(gaps), 1)[0]
    assert 0.7 <= slope, (gaps, slope)
    assert all(a > b for a, b in zip(gaps, gaps[1:]))
