"""Threshold partitions, the dual problem, oracles and the subdivision."""

import math
import random
from fractions import Fraction as F

import pytest

from pelab import (
    BudgetError,
    ConfigError,
    CubeId,
    DyadicSelfSimilar,
    Evaluator,
    GuardError,
    MAdicSelfSimilar,
    PowerSpec,
    ProductSpec,
    VolumeWeight,
    adaptive_partition,
    birman_solomjak,
    brute_force_dual_values,
    brute_force_min_partition,
    bs_bound_check,
    classical_grid,
    dual_sweep,
    dual_value,
    entropy_estimate,
    interior_grid,
    lebesgue,
    partition_count,
    positive_grid,
    threshold_summary,
    validate_partition,
)

W28 = DyadicSelfSimilar(1, (F("0.2"), F("0.8")))
CANTOR = MAdicSelfSimilar(3, (F("0.1"), F(0), F("0.9")))


def random_weights(rng, d, allow_zero=False):
    count = 1 << d
    while True:
        raw = [rng.randrange(0 if allow_zero else 1, 10) for _ in range(count)]
        if sum(w > 0 for w in raw) >= 2:
            return tuple(F(r, sum(raw)) for r in raw)


class TestAdaptivePartition:
    def test_lebesgue_uniform_split(self):
        res = adaptive_partition(lebesgue(1), classical_grid(1), 0.3)
        assert res.count == 4
        assert [c.as_text() for c in res.partition.cubes] == ["2:0", "2:1", "2:2", "2:3"]
        assert validate_partition(res.partition).is_partition_of_unit

    def test_weighted_hand_trace(self):
        res = adaptive_partition(W28, classical_grid(1), F(1, 2))
        assert res.count == 5
        masses = sorted(Evaluator(W28).value(c, True).exact for c in res.partition.cubes)
        assert masses == sorted([F(1, 5), F(4, 25), F(16, 125), F(64, 625), F(256, 625)])
        assert sum(masses) == 1
        assert res.max_value.exact == F(256, 625)
        assert res.max_value.log2 < res.threshold.log2

    def test_interior_grid_roots_skipped(self):
        res = adaptive_partition(lebesgue(1), interior_grid(1), 0.2)
        assert [c.as_text() for c in res.partition.cubes] == ["3:2", "3:3", "3:4", "3:5"]
        assert res.count == 4
        rep = validate_partition(res.partition)
        assert rep.disjoint and rep.all_members and not rep.covers_unit

    def test_threshold_above_root_warns_empty(self):
        res = adaptive_partition(lebesgue(1), classical_grid(1), 2.0)
        assert res.count == 0 and res.warning is not None

    def test_zero_weight_children_emitted(self):
        spec = DyadicSelfSimilar(2, (F(1, 2), F(1, 2), F(0), F(0)))
        res = adaptive_partition(spec, classical_grid(2), F(1, 4))
        assert validate_partition(res.partition).is_partition_of_unit
        # zeros emitted along the positive chain; cubes at exactly 1/4 split
        assert dict(res.level_histogram) == {1: 2, 2: 4, 3: 16}

    def test_positive_grid_drops_zero_cubes(self):
        spec = DyadicSelfSimilar(2, (F(1, 2), F(1, 2), F(0), F(0)))
        grid = positive_grid(Evaluator(spec))
        res = adaptive_partition(spec, grid, F(1, 4))
        assert res.count == 8  # the 2*4 positive level-3 cubes only
        assert all(not Evaluator(spec).value(c).is_zero for c in res.partition.cubes)

    def test_max_depth_guard_reports_cube(self):
        # one child keeps full mass: values never fall below 1/2
        spec = DyadicSelfSimilar(1, (F(1), F(0)))
        with pytest.raises(GuardError):
            adaptive_partition(spec, classical_grid(1), F(1, 2), max_depth=12)

    def test_refinement_consistency(self):
        grid = classical_grid(1)
        coarse = adaptive_partition(W28, grid, F(1, 2))
        fine = adaptive_partition(W28, grid, F(1, 8))
        coarse_set = set(coarse.partition.cubes)
        for cube in fine.partition.cubes:
            assert any(
                anc.contains(cube) for anc in coarse_set if anc.level <= cube.level
            )

    def test_grouped_and_streamed_counts_agree(self):
        rng = random.Random(100)
        grid = classical_grid(1)
        for _ in range(20):
            spec = DyadicSelfSimilar(1, random_weights(rng, 1, allow_zero=True))
            t = F(rng.randrange(1, 64), 64)
            grouped = threshold_summary(spec, grid, t)
            streamed = adaptive_partition(spec, grid, t)
            assert grouped.count == streamed.count
            assert grouped.level_histogram == streamed.level_histogram
            assert grouped.max_value.log2 == pytest.approx(
                streamed.max_value.log2, abs=1e-9
            )


class TestCounts:
    def test_lebesgue_exact_dyadic_threshold(self):
        # values equal to the threshold are split (strict comparison)
        for k in (1, 2, 3):
            assert partition_count(lebesgue(2), classical_grid(2), F(1, 4**k)) == 4 ** (k + 1)

    def test_power_closed_form(self):
        spec = PowerSpec(lebesgue(1), F(2))
        grid = classical_grid(1)
        for x in (5, 9, 100, 2**9 + 1):
            expected = 2 ** math.ceil(math.log2(x) / 2)
            assert partition_count(spec, grid, F(1, x)) == expected

    def test_fig1_counts_increase(self):
        fig1 = VolumeWeight(ProductSpec(CANTOR, CANTOR), F(2), F(1))
        grid = positive_grid(Evaluator(fig1))
        counts = [partition_count(fig1, grid, t) for t in ("1e-3", "1e-4", "1e-7")]
        assert counts == sorted(counts) and len(set(counts)) == 3

    def test_count_monotone_in_threshold(self):
        grid = classical_grid(1)
        ts = [F(1, 2**k) for k in range(1, 12)]
        counts = [partition_count(W28, grid, t) for t in ts]
        assert counts == sorted(counts)


class TestBruteForceEquivalence:
    def test_spec_examples(self):
        count, part = brute_force_min_partition(lebesgue(1), 0.3, 4)
        assert count == 4
        count, _ = brute_force_min_partition(W28, F(1, 2), 6)
        assert count == 5
        count, part = brute_force_min_partition(W28, 2.0, 3)
        assert count == 1 and part.cubes[0].level == 0

    def test_infeasible_depth(self):
        with pytest.raises(ConfigError):
            brute_force_min_partition(lebesgue(1), F(1, 64), 3)

    def test_random_specs_match_adaptive(self):
        rng = random.Random(321)
        for _ in range(60):
            d = rng.choice((1, 2))
            spec = DyadicSelfSimilar(d, random_weights(rng, d, allow_zero=True))
            ev = Evaluator(spec)
            grid = classical_grid(d)
            sup4 = ev.sup_level_log2(4)
            values = sorted(
                {ev.value(c, True).exact for c, _ in ev.iter_level_values(grid, 2)}
            )
            thresholds = [v for v in values if v > 0 and math.log2(v) > sup4]
            thresholds += [F(1, 2), F(3, 4)]
            for t in thresholds[:4]:
                res = adaptive_partition(ev, grid, t)
                depth = max((c.level for c in res.partition.cubes), default=0)
                if depth * d > 16:
                    continue
                count, witness = brute_force_min_partition(ev, t, max(depth, 1))
                assert count == res.count
                assert validate_partition(witness).is_partition_of_unit


class TestDual:
    def test_lebesgue_series(self):
        grid = classical_grid(1)
        for budget, expected in [(2, F(1, 2)), (4, F(1, 4)), (7, F(1, 4)), (8, F(1, 8))]:
            assert dual_value(lebesgue(1), grid, budget).value.exact == expected

    def test_lebesgue_d2_powers(self):
        grid = classical_grid(2)
        for k in (1, 2, 3):
            assert dual_value(lebesgue(2), grid, 4**k).value.exact == F(1, 4**k)

    def test_weighted_example(self):
        assert dual_value(W28, classical_grid(1), 5).value.exact == F(256, 625)

    def test_budget_below_minimum(self):
        with pytest.raises(BudgetError):
            dual_value(lebesgue(1), classical_grid(1), 1)

    def test_monotone_in_budget(self):
        grid = classical_grid(1)
        values = [dual_value(W28, grid, n).value.exact for n in range(2, 12)]
        assert all(b <= a for a, b in zip(values, values[1:]))

    def test_matches_exhaustive_oracle(self):
        rng = random.Random(77)
        for _ in range(25):
            d = rng.choice((1, 2))
            spec = DyadicSelfSimilar(d, random_weights(rng, d))
            grid = classical_grid(d)
            depth = 6 if d == 1 else 3
            budget_cap = depth + 1 if d == 1 else 3 * depth + 1
            oracle = brute_force_dual_values(spec, range(1, budget_cap + 1), depth)
            minimum = threshold_summary(spec, grid, Evaluator(spec).value(
                CubeId(0, (0,) * d), True)).count
            for budget in range(minimum, budget_cap + 1):
                got = dual_value(spec, grid, budget).value.exact
                assert got == oracle[budget - 1]

    def test_sweep_reports_infeasible(self):
        sweep = dual_sweep(lebesgue(1), classical_grid(1), [1, 2, 4])
        assert sweep.results[0] is None and sweep.notes
        assert sweep.results[1].value.exact == F(1, 2)


class TestEntropy:
    def test_lebesgue_slope_one(self):
        est = entropy_estimate(lebesgue(1), classical_grid(1), [2**k for k in range(4, 31, 2)])
        assert est.slope == pytest.approx(1.0, abs=0.01)

    def test_power_slope_half(self):
        spec = PowerSpec(lebesgue(1), F(2))
        est = entropy_estimate(spec, classical_grid(1), [2**k for k in range(4, 31, 2)])
        assert est.slope == pytest.approx(0.5, abs=0.02)

    def test_requires_three_points(self):
        with pytest.raises(ConfigError):
            entropy_estimate(lebesgue(1), classical_grid(1), [4, 8])

    def test_requires_x_above_root(self):
        with pytest.raises(ConfigError):
            entropy_estimate(lebesgue(1), classical_grid(1), [1, 2, 4])


class TestBirmanSolomjak:
    def test_lebesgue_d1_trace(self):
        traj = birman_solomjak(lebesgue(1), 1, 6)
        assert traj.counts == (1, 2, 4, 8, 16, 32, 64)
        assert [m.log2 for m in traj.maxima] == [-2.0 * k for k in range(7)]

    def test_lebesgue_d2_trace(self):
        traj = birman_solomjak(lebesgue(2), 1, 5)
        assert traj.counts == tuple(4**k for k in range(6))
        assert [m.log2 for m in traj.maxima] == [-4.0 * k for k in range(6)]

    def test_zero_steps(self):
        traj = birman_solomjak(lebesgue(1), 1, 0)
        assert traj.counts == (1,) and traj.maxima[0].log2 == 0.0

    def test_explicit_initial_partition(self):
        xi0 = [CubeId(1, (0,)), CubeId(2, (2,)), CubeId(2, (3,))]
        traj = birman_solomjak(lebesgue(1), 1, 3, initial=xi0)
        assert traj.counts[0] == 3
        assert validate_partition(
            __import__("pelab").Partition(traj.cubes, classical_grid(1))
        ).is_partition_of_unit

    def test_initial_must_be_partition(self):
        with pytest.raises(ConfigError):
            birman_solomjak(lebesgue(1), 1, 1, initial=[CubeId(1, (0,))])

    def test_bound_check_lebesgue(self):
        traj = birman_solomjak(lebesgue(1), 1, 10)
        check = bs_bound_check(traj)
        assert 0 < check.measured_constant < 1
        # closed form of the measured products: (1 - 2^-k)^2
        for k, p in enumerate(check.products_log2, start=1):
            assert 2.0**p == pytest.approx((1 - 2.0**-k) ** 2, rel=1e-12)

    def test_bound_check_vacuous(self):
        traj = birman_solomjak(lebesgue(1), 1, 0)
        assert bs_bound_check(traj).measured_constant == 0.0

    def test_cantor_singular_decay(self):
        traj = birman_solomjak(CANTOR, 1, 20)
        check = bs_bound_check(traj)
        prods = [2.0**p for p in check.products_log2]
        assert prods[-1] < prods[1] / 10
        assert check.tail_decreasing
