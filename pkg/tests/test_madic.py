"""Exact base-m interval masses against hand-derived and iterative oracles."""

import random
from fractions import Fraction as F

import pytest

from pelab import GuardError
from pelab.madic import IntervalMassEngine


def cantor_engine():
    return IntervalMassEngine(3, (F("0.1"), F(0), F("0.9")))


class TestHandDerived:
    def test_gap_interval_carries_first_weight_only(self):
        # [1/3, 1/2) sits inside the middle gap, so [0, 1/2) holds exactly p_0.
        assert cantor_engine().mass(F(0), F(1, 2)) == F(1, 10)

    def test_two_state_cycle(self):
        # x = nu([0,1/4)) satisfies x = p0 (p0 + p2 x): x = 0.01/0.91 = 1/91.
        assert cantor_engine().mass(F(0), F(1, 4)) == F(1, 91)

    def test_total_mass(self):
        assert cantor_engine().mass(F(0), F(1)) == 1

    def test_empty_and_degenerate(self):
        eng = cantor_engine()
        assert eng.mass(F(1, 2), F(1, 2)) == 0
        assert eng.mass(F(3, 4), F(1, 4)) == 0

    def test_non_dyadic_rational_endpoints(self):
        # [0, 1/3) is the image of the full interval under the first map.
        assert cantor_engine().mass(F(0), F(1, 3)) == F(1, 10)
        assert cantor_engine().mass(F(2, 3), F(1)) == F(9, 10)

    def test_atom_at_one_degenerate_weights(self):
        # All mass at the fixed point 1: every half-open interval gets zero.
        eng = IntervalMassEngine(2, (F(0), F(1)))
        assert eng.mass(F(0), F(1)) == 0
        assert eng.mass(F(1, 2), F(1)) == 0


def _iterative_mass(base, weights, lo, hi, depth=60):
    """Truncated unfolding of the self-similarity recursion, exact rationals.

    Unresolved branches at the cutoff are replaced by 1/2; only the two
    boundary chains stay unresolved, so the truncation error is bounded by
    (max weight)^depth.
    """

    def go(a, b, d):
        a, b = max(a, F(0)), min(b, F(1))
        if b <= a:
            return F(0)
        if a == 0 and b == 1:
            return F(1)
        if d == 0:
            return F(1, 2)
        total = F(0)
        for j, w in enumerate(weights):
            if w == 0:
                continue
            total += w * go(base * a - j, base * b - j, d - 1)
        return total

    return go(F(lo), F(hi), depth)


class TestAgainstIterativeOracle:
    def test_random_intervals_random_weights(self):
        rng = random.Random(20240809)
        for _ in range(25):
            base = rng.choice((2, 3, 4))
            raw = [rng.randrange(0, 5) for _ in range(base)]
            if sum(raw) == 0:
                raw[0] = 1
            weights = tuple(F(r, sum(raw)) for r in raw)
            if weights[-1] == 1:
                continue
            eng = IntervalMassEngine(base, weights)
            for _ in range(8):
                n = rng.randrange(1, 9)
                k = rng.randrange(1 << n)
                lo, hi = F(k, 1 << n), F(k + 1, 1 << n)
                exact = eng.mass(lo, hi)
                approx = _iterative_mass(base, weights, lo, hi)
                assert abs(exact - approx) < F(1, 10**4)

    def test_level_mass_conservation(self):
        rng = random.Random(5)
        for base in (2, 3):
            raw = [rng.randrange(0, 4) for _ in range(base)]
            raw[0] += 1
            weights = tuple(F(r, sum(raw)) for r in raw)
            if weights[-1] == 1:
                continue
            eng = IntervalMassEngine(base, weights)
            for n in (3, 6, 9):
                total = sum(eng.mass(F(k, 1 << n), F(k + 1, 1 << n)) for k in range(1 << n))
                assert total == 1


def test_state_cap_guard():
    eng = IntervalMassEngine(3, (F("0.1"), F(0), F("0.9")), state_cap=5)
    with pytest.raises(GuardError):
        eng.mass(F(1, 1024), F(3, 1024))
