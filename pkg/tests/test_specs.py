"""Spec construction rules, schedules and JSON round-trips."""

from fractions import Fraction as F

import pytest

from pelab import (
    ConfigError,
    DyadicSelfSimilar,
    HomogeneousOscillating,
    MAdicSelfSimilar,
    PowerSpec,
    ProductSpec,
    Schedule,
    VolumeWeight,
    as_rational,
    lebesgue,
    parse_spec,
    spec_to_json,
)


def test_as_rational_forms():
    assert as_rational("0.2") == F(1, 5)
    assert as_rational("3/7") == F(3, 7)
    assert as_rational(2) == 2
    assert as_rational(0.5) == F(1, 2)
    with pytest.raises(ConfigError):
        as_rational("abc")


def test_weights_must_sum_to_one_exactly():
    DyadicSelfSimilar(1, (F(1, 3), F(2, 3)))
    with pytest.raises(ConfigError):
        DyadicSelfSimilar(1, (F(1, 3), F(1, 3)))
    with pytest.raises(ConfigError):
        DyadicSelfSimilar(1, (F(3, 2), F(-1, 2)))
    with pytest.raises(ConfigError):
        DyadicSelfSimilar(2, (F(1, 2), F(1, 2)))  # needs 4 weights


def test_madic_weight_count_matches_base():
    MAdicSelfSimilar(3, (F("0.1"), F(0), F("0.9")))
    with pytest.raises(ConfigError):
        MAdicSelfSimilar(3, (F("0.1"), F("0.9")))


def test_power_and_volume_weight_validation():
    leb = lebesgue(1)
    with pytest.raises(ConfigError):
        PowerSpec(leb, F(0))
    with pytest.raises(ConfigError):
        VolumeWeight(leb, F(1), F(0))
    assert VolumeWeight(leb, F(-1, 2), F(1)).sup_depth == 12


def test_schedule_indexing_and_counts():
    s = Schedule((2, 1), (2, 2, 1))
    assert [s.split_at(n) for n in range(1, 9)] == [2, 1, 2, 2, 1, 2, 2, 1]
    assert s.count(5) == 2 * 1 * 2 * 2 * 1
    assert s.count(8) == 32  # head 2*1, then two full cycles 2*2*1
    with pytest.raises(ConfigError):
        Schedule((), ())
    with pytest.raises(ConfigError):
        HomogeneousOscillating(1, Schedule((), (3,)))  # split exceeds 2^d


def test_spec_json_round_trip():
    spec = VolumeWeight(
        ProductSpec(
            MAdicSelfSimilar(3, (F("0.1"), F(0), F("0.9"))),
            DyadicSelfSimilar(1, (F("0.2"), F("0.8"))),
        ),
        F(2),
        F(1),
    )
    doc = spec_to_json(spec)
    assert parse_spec(doc) == spec
    osc = HomogeneousOscillating(2, Schedule((4,), (2, 1)))
    assert parse_spec(spec_to_json(osc)) == osc


def test_parse_rejects_unknown_fields():
    with pytest.raises(ConfigError):
        parse_spec({"kind": "dyadic-self-similar", "dimension": 1,
                    "weights": ["1/2", "1/2"], "extra": 1})
    with pytest.raises(ConfigError):
        parse_spec({"kind": "no-such-kind"})
    with pytest.raises(ConfigError):
        parse_spec({"kind": "power", "inner": {"kind": "dyadic-self-similar",
                    "dimension": 1, "weights": ["1/2", "1/2"]}})  # missing s


def test_parse_schedule_list_shorthand():
    spec = parse_spec(
        {"kind": "homogeneous-oscillating", "dimension": 1, "schedule": [2, 1]}
    )
    assert spec.schedule == Schedule((), (2, 1))
