import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ddfl.errors import IntegrationDiverged, InvalidArgument
from ddfl.numerics import (build_hankel, check_pe, default_substeps, numeric_rank, pinv,
                           rk4_hold_step)
from oracles import exact_rank

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


class TestHankel:
    def test_definition(self):
        np.testing.assert_array_equal(build_hankel([1, 2, 3, 4], 2), [[1, 2, 3], [2, 3, 4]])

    @pytest.mark.parametrize("length,depth", [(10, 1), (10, 4), (15, 6), (7, 7)])
    def test_shape(self, length, depth):
        assert build_hankel(np.arange(length), depth).shape == (depth, length - depth + 1)

    def test_vector_samples(self):
        s = np.arange(12.0).reshape(6, 2)
        H = build_hankel(s, 3)
        assert H.shape == (6, 4)
        np.testing.assert_array_equal(H[:, 1], s[1:4].ravel())

    def test_constant_signal_rank_one(self):
        assert numeric_rank(build_hankel([5, 5, 5, 5], 2)) == 1

    def test_too_short(self):
        with pytest.raises(InvalidArgument):
            build_hankel([1, 2], 3)

    @given(arrays(float, st.integers(1, 30), elements=finite), st.data())
    def test_first_column_is_first_samples(self, sig, data):
        G = data.draw(st.integers(1, len(sig)))
        np.testing.assert_array_equal(build_hankel(sig, G)[:, 0], sig[:G])


class TestRank:
    def test_identity(self):
        assert numeric_rank(np.eye(3)) == 3

    def test_zero(self):
        assert numeric_rank(np.zeros((3, 4))) == 0

    def test_ramp_hankel(self):
        H = build_hankel([0, 1, 2, 3, 4, 5], 3)
        assert exact_rank(H.astype(int).tolist()) == 2
        assert numeric_rank(H) == 2

    def test_empty_rejected(self):
        with pytest.raises(InvalidArgument):
            numeric_rank(np.zeros((0, 3)))

    def test_bad_tol(self):
        with pytest.raises(InvalidArgument):
            numeric_rank(np.eye(2), tol=0)

    def test_matches_exact_rank_on_integer_matrices(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            r, c, k = rng.integers(1, 7, size=3)
            M = rng.integers(-3, 4, size=(r, k)) @ rng.integers(-3, 4, size=(k, c))
            assert numeric_rank(M) == exact_rank(M.tolist())


class TestPE:
    def test_zero_signal(self):
        assert check_pe(np.zeros(15), 6) is False

    def test_seeded_normal(self):
        assert check_pe(np.random.default_rng(0).standard_normal(15), 6) is True

    def test_constant(self):
        assert check_pe([2.0, 2.0, 2.0, 2.0], 2) is False

    def test_too_short_is_an_error_not_false(self):
        with pytest.raises(InvalidArgument):
            check_pe(np.random.default_rng(0).standard_normal(10), 6)

    @settings(max_examples=50)
    @given(st.integers(0, 10_000), st.floats(1e-3, 1e3).flatmap(
        lambda a: st.sampled_from([a, -a])))
    def test_invariant_to_scaling(self, seed, c):
        rng = np.random.default_rng(seed)
        sig = rng.standard_normal(15)
        if seed % 3 == 0:
            sig[:] = sig[0]  # also cover a failing case
        assert check_pe(sig, 6) == check_pe(c * sig, 6)


def _mp_residuals(X, P):
    s = max(1.0, np.linalg.norm(X), np.linalg.norm(P))
    return [np.linalg.norm(X @ P @ X - X) / s, np.linalg.norm(P @ X @ P - P) / s,
            np.linalg.norm((X @ P).T - X @ P) / s, np.linalg.norm((P @ X).T - P @ X) / s]


class TestPinv:
    def test_identity(self):
        np.testing.assert_array_equal(pinv(np.eye(3)), np.eye(3))

    def test_column_of_ones(self):
        np.testing.assert_allclose(pinv([[1.0], [1.0]]), [[0.5, 0.5]], atol=1e-15)

    def test_full_column_rank(self):
        X = np.random.default_rng(3).standard_normal((5, 3))
        P = pinv(X)
        assert np.linalg.norm(P @ X - np.eye(3)) < 1e-10
        np.testing.assert_allclose(P, np.linalg.solve(X.T @ X, X.T), atol=1e-12)

    @settings(max_examples=60)
    @given(st.integers(1, 20), st.integers(1, 20), st.integers(0, 2**31), st.booleans())
    def test_moore_penrose_identities(self, r, c, seed, deficient):
        rng = np.random.default_rng(seed)
        if deficient and min(r, c) > 1:
            k = int(rng.integers(1, min(r, c)))
            X = rng.standard_normal((r, k)) @ rng.standard_normal((k, c))
        else:
            X = rng.standard_normal((r, c))
        assert max(_mp_residuals(X, pinv(X))) < 1e-8

    def test_near_singular_stays_finite(self):
        X = np.array([[1.0, 1.0], [1.0, 1.0 + 1e-300]])
        assert np.all(np.isfinite(pinv(X)))

    def test_zero_matrix(self):
        np.testing.assert_array_equal(pinv(np.zeros((2, 3))), np.zeros((3, 2)))


def _linear(lam):
    return lambda x, u, t: [lam * x[0]]


class TestRK4:
    def test_zero_field(self):
        x = rk4_hold_step(lambda x, u, t: [0.0, 0.0], [3.0, -1.0], 0.0, 0.5, 7)
        np.testing.assert_array_equal(x, [3.0, -1.0])

    def test_local_truncation_on_decay(self):
        x0 = 2.0
        x = rk4_hold_step(_linear(-1.0), [x0], 0.0, 0.1, 1)[0]
        # RK4 reproduces the Taylor series through h^4; the remainder is h^5/120
        assert abs(x - math.exp(-0.1) * x0) <= 0.1 ** 5 / 120 * abs(x0)

    @pytest.mark.parametrize("substeps", [1, 3, 10])
    def test_double_integrator_exact(self, substeps):
        x0, v0, u, t = 0.7, -1.3, 2.5, 0.8
        got = rk4_hold_step(lambda x, uu, tt: [x[1], uu], [x0, v0], u, t, substeps)
        np.testing.assert_allclose(got, [x0 + v0 * t + u * t * t / 2, v0 + u * t], rtol=1e-14)

    def test_time_argument(self):
        # x' = t on [1, 3] -> x gains (9 - 1) / 2
        got = rk4_hold_step(lambda x, u, t: [t], [0.0], 0.0, 2.0, 4, t0=1.0)
        assert got[0] == pytest.approx(4.0, rel=1e-14)

    def test_observed_order(self):
        lam, horizon = -1.0, 1.0
        ns = [4, 8, 16, 32]
        errs = [abs(rk4_hold_step(_linear(lam), [1.0], 0.0, horizon, n)[0] - math.exp(lam))
                for n in ns]
        slope = -np.polyfit(np.log(ns), np.log(errs), 1)[0]
        assert slope >= 3.8

    def test_divergence_reports_time(self):
        with pytest.raises(IntegrationDiverged) as ei:
            rk4_hold_step(lambda x, u, t: [x[0] ** 2], [1.0], 0.0, 2.0, 200)
        # blow-up of x' = x^2 from x(0)=1 happens at t=1
        assert 0.9 < ei.value.time < 1.1
        assert np.all(np.isfinite(ei.value.state))

    @pytest.mark.parametrize("dt,n", [(0.0, 1), (-0.1, 1), (0.1, 0)])
    def test_bad_arguments(self, dt, n):
        with pytest.raises(InvalidArgument):
            rk4_hold_step(_linear(-1.0), [1.0], 0.0, dt, n)

    def test_default_substeps(self):
        assert default_substeps(0.02) == 200
        assert default_substeps(0.0025) == 25
        assert default_substeps(1e-5) == 1
