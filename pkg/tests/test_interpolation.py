from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rik.interpolation import (
    KThetaQ,
    OperatorNormEstimate,
    divergent_end,
    k_functional,
    k_profile,
    operator_norm_estimate,
    phi_theta_q,
)
from rik.majorization import hlp_leq
from rik.measure import HALF_LINE, CumulativeProfile, StepFunction, cumulative_profile, from_cells, indicator
from rik.operators import Grid, Identity, build_partition_sequence, certify_substochastic
from rik.sampling import random_grid_function, random_operator
from rik.spaces import NormSpec

from conftest import grid_functions

TWO_BLOCKS = StepFunction([0, 1, 2], [3, 1], space=HALF_LINE)
# K(t) = min(t, 1)
RAMP = CumulativeProfile([0.0, 1.0], [0.0, 1.0], 0)


def truncation_oracle(values, width, t, levels):
    """min over c of ||(|x| - c)_+||_1 + t c, i.e. the cost of x = (x - clamp) + clamp."""
    a = np.abs(values)[None, :]
    c = levels[:, None]
    return float(np.min(np.sum(np.maximum(a - c, 0.0), axis=1) * width + t * levels))


def log_grid_phi(profile, theta, q, samples=400001):
    """Dense trapezoid in ln t over [1e-30, 1e30] as an independent check of Phi."""
    u = np.linspace(math.log(1e-30), math.log(1e30), samples)
    t = np.exp(u)
    vals = (t ** (-theta) * profile(t)) ** q
    return float(np.sum(0.5 * (vals[1:] + vals[:-1]) * np.diff(u))) ** (1 / q)


class TestKFunctional:
    @pytest.mark.parametrize("t, expected", [(0.5, 1.5), (1, 3), (2, 4), (3, 4)])
    def test_two_blocks(self, t, expected):
        assert k_functional(t, TWO_BLOCKS) == expected

    def test_zero(self):
        z = StepFunction.zero(HALF_LINE)
        assert all(k_functional(t, z) == 0 for t in (0.1, 1, 10))

    def test_nonpositive_t(self):
        with pytest.raises(ValueError):
            k_functional(0, TWO_BLOCKS)

    def test_cross_check_with_sum_norm(self):
        assert k_functional(1, TWO_BLOCKS) == NormSpec.l1_plus_linf().norm(TWO_BLOCKS)

    @pytest.mark.parametrize("seed", range(200))
    def test_truncation_oracle(self, seed):
        rng = np.random.default_rng(seed)
        scale = float(rng.integers(1, 5))
        values = scale * rng.integers(-100, 101, size=32) / 100
        x = from_cells(values, 1 / 32)
        # spacing scale/10^4 puts every value scale*k/100 on the level grid
        levels = np.linspace(0, scale, 10001)
        for t in (0.5, 1.0, 2.0):
            assert abs(k_functional(t, x) - truncation_oracle(values, 1 / 32, t, levels)) <= 1e-8

    @given(grid_functions())
    def test_concave_nondecreasing(self, x):
        ts = np.geomspace(1e-3, 8, 64)
        K = k_profile(x)(ts)
        assert np.all(np.diff(K) >= -1e-12)
        assert np.all(np.diff(K / ts) <= 1e-12)

    @given(grid_functions(half_line=True), st.integers(0, 4), st.integers(1, 8))
    def test_monotone_under_majorization(self, g, k, scale):
        from rik.operators import PartitionAverage, PartitionFamily

        w = 4.0 / 2 ** k
        fam = PartitionFamily([i * w for i in range(2 ** k)], [(i + 1) * w for i in range(2 ** k)], HALF_LINE)
        f = PartitionAverage(fam).apply(g) * (scale / 8)
        assert hlp_leq(f, g).holds
        for t in np.union1d(cumulative_profile(f).t, cumulative_profile(g).t)[1:]:
            assert k_functional(t, f) <= k_functional(t, g) + 1e-12


class TestPhi:
    def test_ramp_sqrt_two(self):
        assert phi_theta_q(RAMP, 0.5, 2) == pytest.approx(math.sqrt(2), abs=1e-9)

    def test_ramp_theta_zero_diverges(self):
        assert phi_theta_q(RAMP, 0, 2) == math.inf
        assert divergent_end(RAMP, 0, 2) == "infinity"

    def test_ramp_theta_one_diverges_at_zero(self):
        assert divergent_end(RAMP, 1, 2) == "zero"
        assert phi_theta_q(RAMP, 1, 2) == math.inf

    def test_zero_profile(self):
        zero = cumulative_profile(StepFunction.zero(HALF_LINE))
        assert phi_theta_q(zero, 0.5, 3) == 0

    @pytest.mark.parametrize("theta", [0.0, 0.25, 0.5, 1.0])
    def test_sup_case(self, theta):
        # sup t^-theta min(t, 1) is attained at t = 1
        assert phi_theta_q(RAMP, theta, math.inf) == 1

    def test_sup_interior_critical_point(self):
        p = k_profile(TWO_BLOCKS)
        ts = np.geomspace(1e-4, 1e4, 200001)
        dense = float(np.max(ts ** -0.5 * p(ts)))
        assert phi_theta_q(p, 0.5, math.inf) == pytest.approx(dense, rel=1e-8)
        assert phi_theta_q(p, 0.5, math.inf) >= dense

    def test_q_one_closed_form(self):
        # int_0^1 t^-1/2 dt + int_1^inf t^-3/2 dt = 2 + 2
        assert phi_theta_q(RAMP, 0.5, 1) == pytest.approx(4, rel=1e-14)

    @pytest.mark.parametrize("q", [1, 2, 3, 4.5])
    @pytest.mark.parametrize("theta", [0.3, 0.5, 0.8])
    def test_against_dense_trapezoid(self, q, theta):
        p = k_profile(TWO_BLOCKS)
        assert phi_theta_q(p, theta, q) == pytest.approx(log_grid_phi(p, theta, q), rel=1e-6)

    def test_quadrature_matches_closed_form(self):
        # q = 2 uses the closed form; q = 2 + tiny uses quadrature and should be continuous in q
        p = k_profile(StepFunction([0, 0.5, 1, 3], [4, 2, 1], space=HALF_LINE))
        assert phi_theta_q(p, 0.4, 2 + 1e-12) == pytest.approx(phi_theta_q(p, 0.4, 2), rel=1e-10)

    @given(grid_functions(half_line=True), st.sampled_from([0.2, 0.5, 0.7]), st.sampled_from([1.5, 3.0, 5.0]))
    def test_step_halving_stability(self, x, theta, q):
        p = k_profile(x)
        for panels in (8, 64):
            a, b = phi_theta_q(p, theta, q, panels=panels), phi_theta_q(p, theta, q, panels=2 * panels)
            if math.isfinite(a):
                assert abs(a - b) <= 1e-8 * max(1.0, abs(b))

    @pytest.mark.parametrize("theta, q", [(-0.1, 2), (1.1, 2), (0.5, 0.5)])
    def test_invalid_parameters(self, theta, q):
        with pytest.raises(ValueError):
            phi_theta_q(RAMP, theta, q)
        with pytest.raises(ValueError):
            KThetaQ(theta, q)

    def test_k_norm_json(self):
        assert KThetaQ(0.5, math.inf).to_json() == {"variant": "K", "theta": 0.5, "q": "inf"}


class TestOperatorNormEstimate:
    def test_identity_is_one(self):
        probes = [TWO_BLOCKS, indicator([(0, 3)], HALF_LINE)]
        est = operator_norm_estimate(Identity(), NormSpec.l1(), NormSpec.l1(), probes)
        assert est.value == 1 and est.bound_kind == "lower" and est.probe_count == 2

    def test_difference_with_level_one_average(self):
        from rik.experiments import staircase

        S1 = build_partition_sequence("Sn", 1)[0]
        probes = [staircase(k) for k in (1, 2, 3)]
        est = operator_norm_estimate(Identity(), NormSpec.l1(), NormSpec.l1(), probes, minus=S1)
        stair = probes[1]
        assert NormSpec.l1().norm(stair - S1.apply(stair)) == 0.125
        assert est.value >= 0.125
        assert est.bound_kind == "lower"

    def test_empty_and_zero_probes(self):
        with pytest.raises(ValueError):
            operator_norm_estimate(Identity(), NormSpec.l1(), NormSpec.l1(), [])
        with pytest.raises(ValueError):
            operator_norm_estimate(Identity(), NormSpec.l1(), NormSpec.l1(), [StepFunction.zero()])

    def test_json_keys(self):
        assert OperatorNormEstimate(0.5, 3, 1).to_json() == {
            "value": 0.5, "probes": 3, "witness_id": 1, "bound_kind": "lower"}

    @given(st.integers(0, 2 ** 32 - 1))
    def test_interpolation_inequality(self, seed):
        from rik.experiments import interpolation_trials

        rows = interpolation_trials(np.random.default_rng(seed), 3)
        for row in rows:
            mid, lo, hi = row[:3]
            assert mid <= lo ** 0.5 * hi ** 0.5 + 1e-9


class TestContraction:
    @given(st.integers(0, 2 ** 32 - 1), st.sampled_from([(0.5, 2), (0.3, 1), (0.7, 3), (0.5, math.inf)]))
    def test_certified_operator_contracts_k_norms(self, seed, params):
        rng = np.random.default_rng(seed)
        grid = Grid(8)
        T = random_operator(rng, grid, 3)
        x = random_grid_function(rng, 8, signed=True)
        assert certify_substochastic(T, [x]).passed
        K = KThetaQ(*params)
        nx = K.norm(x)
        if math.isfinite(nx):
            assert K.norm(T.apply(x)) <= nx + 1e-8
