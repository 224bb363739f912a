from __future__ import annotations

import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rik.majorization import TransferMatrix, hlp_leq
from rik.measure import HALF_LINE, UNIT, StepFunction, from_cells, indicator, rearrange
from rik.operators import (
    ChainViolationError,
    CirculantKernel,
    Compose,
    ConvexCombine,
    DiscreteMatrix,
    DisjointFamilyCombine,
    FiniteRankTruncate,
    Grid,
    GridAlignmentError,
    Identity,
    MeasurePreserve,
    Operator,
    PartitionAverage,
    PartitionFamily,
    Permutation,
    build_partition_sequence,
    certify_substochastic,
    dyadic_family,
    finite_rank_truncate,
    operator_from_json,
    power_iterate,
    truncated_dyadic_family,
)
from rik.sampling import NODE_KINDS, random_grid_function, random_operator
from rik.spaces import NormSpec

from conftest import grid_functions

STAIRCASE = from_cells([0.25, 0.5, 0.75, 1.0], 0.25)
WHOLE = PartitionFamily([0.0], [1.0])


def cells(*vals):
    return from_cells(np.asarray(vals, dtype=float), 1.0 / len(vals))


class Doubler(Operator):
    """Not substochastic: used to trip the certification and the chain trap."""

    node = "Doubler"

    def apply(self, x):
        return x * 2.0


class TestApply:
    def test_average_of_half_spike(self):
        assert PartitionAverage(WHOLE).apply(indicator([(0, 0.5)]) * 2.0) == indicator([(0, 1)])

    def test_block_swap(self):
        x = cells(1, 3)
        assert MeasurePreserve((1, 0), 0.5).apply(x) == cells(3, 1)

    def test_disjoint_family_keeps_residual(self):
        f = StepFunction([0, 0.5, 1, 2], [2, 0, 5], space=HALF_LINE)
        fam = PartitionFamily([0.0], [1.0], HALF_LINE)
        out = DisjointFamilyCombine(fam, (PartitionAverage(fam),)).apply(f)
        assert out == StepFunction([0, 1, 2], [1, 5], space=HALF_LINE)

    def test_circulant_two_cells(self):
        assert CirculantKernel((0.5, 0.5), Grid(2)).apply(cells(1, 0)) == cells(0.5, 0.5)

    def test_permutation(self):
        assert Permutation((2, 0, 1, 3), Grid(4)).apply(cells(1, 2, 3, 4)) == cells(3, 1, 2, 4)

    def test_compose_applies_last_child_first(self):
        swap = MeasurePreserve((1, 0), 0.5)
        keep_left = PartitionAverage(PartitionFamily([0.0], [0.5]), keep_residual=False)
        assert Compose((keep_left, swap)).apply(cells(1, 3)) == cells(3, 0)
        assert Compose((swap, keep_left)).apply(cells(1, 3)) == cells(0, 1)

    def test_convex_combination(self):
        op = ConvexCombine((Identity(), PartitionAverage(WHOLE)), (0.5, 0.5))
        assert op.apply(cells(2, 0)) == cells(1.5, 0.5)

    def test_grid_alignment_required(self):
        with pytest.raises(GridAlignmentError):
            CirculantKernel((1.0,), Grid(2)).apply(indicator([(0, 0.3)]))

    def test_grid_leaves_outside_untouched(self):
        x = StepFunction([0, 1, 2], [1, 7], space=HALF_LINE)
        out = Permutation((1, 0), Grid(2, 1.0)).apply(x)
        assert out == x

    def test_exchange_must_fit(self):
        with pytest.raises(ValueError):
            MeasurePreserve((0, 1, 2), 0.5).apply(cells(1, 2))

    @pytest.mark.parametrize("kwargs", [dict(perm=(0, 0), width=0.5), dict(perm=(0,), width=0.0)])
    def test_invalid_exchange(self, kwargs):
        with pytest.raises(ValueError):
            MeasurePreserve(**kwargs)

    def test_invalid_weights(self):
        with pytest.raises(ValueError):
            CirculantKernel((0.5, 0.4), Grid(2))
        with pytest.raises(ValueError):
            ConvexCombine((Identity(), Identity()), (0.7, 0.7))

    @given(st.integers(0, 2 ** 32 - 1))
    def test_linear_and_positive(self, seed):
        rng = np.random.default_rng(seed)
        grid = Grid(8)
        op = random_operator(rng, grid, 4)
        x = random_grid_function(rng, 8, signed=True)
        y = random_grid_function(rng, 8, signed=True)
        lhs = op.apply(x * 0.5 + y * 0.25)
        rhs = op.apply(x) * 0.5 + op.apply(y) * 0.25
        assert np.allclose(lhs._left_values((np.arange(8) + 0.5) / 8),
                           rhs._left_values((np.arange(8) + 0.5) / 8), atol=1e-12)
        assert op.apply(abs(x)).is_nonnegative() or min(op.apply(abs(x)).values) > -1e-12


class TestPartitionFamily:
    def test_overlap_rejected(self):
        with pytest.raises(ValueError):
            PartitionFamily([0.0, 0.25], [0.5, 1.0])

    def test_refinement_checked(self):
        coarse = PartitionFamily([0.0], [0.5])
        PartitionFamily([0.0, 0.25], [0.25, 0.5], parent=coarse)
        with pytest.raises(ValueError):
            PartitionFamily([0.0, 0.3], [0.25, 0.5], parent=coarse)

    def test_residual(self):
        fam = PartitionFamily([0.25, 0.75], [0.5, 1.0])
        assert fam.residual() == [(0.0, 0.25), (0.5, 0.75)]
        assert fam.residual_measure() == 0.5

    def test_json(self):
        fam = PartitionFamily([0.0, 1.0], [1.0, 3.0], HALF_LINE)
        again = PartitionFamily.from_json(fam.to_json())
        assert again.residual() == fam.residual() == [(3.0, np.inf)]


class TestCertify:
    def test_identity(self):
        cert = certify_substochastic(Identity(), [STAIRCASE, cells(-1, 2)])
        assert cert.passed and cert.margin == 0

    def test_half_identity_half_average(self):
        op = ConvexCombine((Identity(), PartitionAverage(WHOLE)), (0.5, 0.5))
        assert certify_substochastic(op, [STAIRCASE, cells(3, -1, 0, 2)]).passed

    def test_circulant(self):
        assert certify_substochastic(CirculantKernel((0.5, 0.5), Grid(2)), [cells(1, 0)]).passed

    def test_non_substochastic_detected(self):
        cert = certify_substochastic(Doubler(), [STAIRCASE])
        assert not cert.passed
        assert {f["check"] for f in cert.failures} >= {"hlp", "L1", "LInf"}

    def test_empty_probe_list(self):
        with pytest.raises(ValueError):
            certify_substochastic(Identity(), [])

    @given(st.integers(0, 2 ** 32 - 1))
    def test_random_trees_certify(self, seed):
        rng = np.random.default_rng(seed)
        op = random_operator(rng, Grid(16), 5)
        probes = [random_grid_function(rng, 16, signed=bool(i % 2)) for i in range(10)]
        assert certify_substochastic(op, probes, 1e-10).passed

    def test_every_node_kind_reachable(self):
        rng = np.random.default_rng(7)
        for kind in NODE_KINDS:
            op = random_operator(rng, Grid(8), 3, kind=kind)
            assert op.node == kind
            assert certify_substochastic(op, [random_grid_function(rng, 8, signed=True)]).passed

    @given(st.integers(0, 2 ** 32 - 1))
    def test_json_round_trip(self, seed):
        rng = np.random.default_rng(seed)
        op = random_operator(rng, Grid(8), 4)
        again = operator_from_json(json.loads(json.dumps(op.to_json())))
        x = random_grid_function(rng, 8, signed=True)
        assert again.apply(x) == op.apply(x)

    @given(grid_functions(half_line=False), st.permutations(range(4)))
    def test_interval_exchange_preserves_rearrangement(self, x, perm):
        assert rearrange(MeasurePreserve(tuple(perm), 0.25).apply(x)) == rearrange(x)


class TestPartitionSequences:
    def test_level_one_on_staircase(self):
        S1 = build_partition_sequence("Sn", 1)[0]
        out = S1.apply(STAIRCASE)
        assert out == cells(0.375, 0.875)
        assert NormSpec.l1().norm(out - STAIRCASE) == 0.125

    def test_residual_only_input_vanishes(self):
        H = build_partition_sequence("Hn", 3, truncated_dyadic_family)[-1]
        assert H.apply(indicator([(0.875, 1.0)]) * 4.0) == StepFunction.zero()

    @pytest.mark.parametrize("kind", ["Sn", "Hn"])
    def test_constants_fixed(self, kind):
        x = indicator([(0, 1)]) * 3.0
        for S in build_partition_sequence(kind, 5):
            assert S.apply(x) == x

    def test_mesh_and_refinement(self):
        seq = build_partition_sequence("Sn", 6)
        assert [S.family.mesh for S in seq] == [2.0 ** -n for n in range(1, 7)]
        assert all(S.family.parent is prev.family for prev, S in zip(seq, seq[1:]))

    def test_half_line_dyadic_cover(self):
        fam = dyadic_family(2, HALF_LINE)
        assert fam.residual() == [(4.0, np.inf)]

    def test_bad_generator(self):
        def shifted(level, space):
            w = 2.0 ** -level
            return PartitionFamily([w / 3], [w / 3 + w], space)

        with pytest.raises(ValueError):
            build_partition_sequence("Sn", 3, shifted)

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            build_partition_sequence("Xn", 2)


class TestFiniteRank:
    def test_full_rank_matches_average(self):
        S = build_partition_sequence("Sn", 2)[-1]
        T = finite_rank_truncate(S, 1, len(S.family))
        assert T.apply(STAIRCASE) == S.apply(STAIRCASE)

    def test_zero_rank_empty_theta(self):
        S = build_partition_sequence("Sn", 2)[-1]
        assert finite_rank_truncate(S, 0, 0).apply(STAIRCASE) == StepFunction.zero()

    def test_rank_one_of_two(self):
        S1 = build_partition_sequence("Sn", 1)[0]
        T1 = finite_rank_truncate(S1, 1, 1)
        out = T1.apply(STAIRCASE)
        assert out == StepFunction([0, 0.5], [0.375])
        mids = (np.arange(8) + 0.5) / 8
        assert np.all(np.abs(out(mids)) <= np.abs(S1.apply(STAIRCASE)(mids)))

    def test_rank_too_large(self):
        S1 = build_partition_sequence("Sn", 1)[0]
        with pytest.raises(ValueError):
            FiniteRankTruncate(S1, 1.0, 3)

    @given(grid_functions(half_line=True), st.integers(1, 3), st.integers(0, 8))
    def test_dominated_by_average(self, x, level, rank):
        S = PartitionAverage(dyadic_family(level, HALF_LINE))
        T = finite_rank_truncate(S, 2.0, min(rank, len(S.family)))
        pts = np.union1d(S.apply(x).breakpoints, T.apply(x).breakpoints)
        assert np.all(np.abs(T.apply(x)(pts)) <= np.abs(S.apply(x)(pts)))


class TestPowerIterate:
    def test_idempotent_average_stops_at_first_step(self):
        x = indicator([(0, 0.5)]) * 2.0
        traj = power_iterate(PartitionAverage(WHOLE), x, 50, 1e-12, NormSpec.l1())
        assert traj.converged_step == 1
        assert traj.limit_star == indicator([(0, 1)])

    def test_circulant_two_cells(self):
        traj = power_iterate(CirculantKernel((0.5, 0.5), Grid(2)), cells(1, 0), 50, 1e-12, NormSpec.l1())
        assert traj.limit == cells(0.5, 0.5)
        assert hlp_leq(traj.limit, cells(1, 0)).holds
        assert traj.chain_ok()

    def test_identity_constant_trajectory(self):
        traj = power_iterate(Identity(), STAIRCASE, 5, 1e-12, NormSpec.lp(2))
        assert traj.limit_star == rearrange(STAIRCASE)
        assert all(r[2] == 0 for r in traj.rows)

    def test_chain_violation_trap(self):
        with pytest.raises(ChainViolationError):
            power_iterate(Doubler(), STAIRCASE, 5, 1e-12, NormSpec.l1())

    def test_measure_gaps_shrink(self):
        traj = power_iterate(CirculantKernel((0.5, 0.5), Grid(8)), cells(1, 0, 0, 0, 0, 0, 0, 0),
                             400, 1e-12, NormSpec.l1())
        assert traj.converged
        assert traj.measure_gaps[-1] == 0
        assert traj.measure_gaps[0] > 0


BANACH = [NormSpec.l1(), NormSpec.linf(), NormSpec.l1_plus_linf(), NormSpec.lp(1.5), NormSpec.lp(3)]


@given(st.integers(0, 2 ** 32 - 1), st.sampled_from(range(len(BANACH))))
def test_certified_operators_contract_banach_norms(seed, which):
    from rik.spaces import QuasiconcavePhi

    rng = np.random.default_rng(seed)
    op = random_operator(rng, Grid(16), 4)
    x = random_grid_function(rng, 16, signed=True)
    for spec in (BANACH[which], NormSpec.marcinkiewicz(QuasiconcavePhi.power(0.5))):
        assert spec.norm(op.apply(x)) <= spec.norm(x) + 1e-12
