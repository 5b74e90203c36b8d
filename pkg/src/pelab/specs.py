"""Declarative cube-function specifications and their JSON (de)serialisation.

A spec is an immutable tree: measure leaves (dyadic/self-similar, base-m
self-similar, homogeneous schedule-driven) combined by product, power and a
volume-weight wrapper.  Construction validates weights exactly in rational
arithmetic; evaluation lives in :mod:`pelab.evaluate`.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Union

from .numerics import ConfigError


def as_rational(x) -> Fraction:
    """Parse ints, Fractions, floats (exact binary value) and strings.

    Strings admit "p/q" and decimal/scientific notation; "0.2" means exactly
    1/5, which a float literal cannot.
    """
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise ConfigError("booleans are not rationals")
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, float):
        return Fraction(x)
    if isinstance(x, str):
        try:
            return Fraction(x.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError(f"cannot parse rational {x!r}") from exc
    raise ConfigError(f"cannot interpret {type(x).__name__} as a rational")


@dataclass(frozen=True)
class Schedule:
    """Eventually periodic split counts s_1, s_2, ... (head then cycle)."""

    head: tuple[int, ...]
    cycle: tuple[int, ...]

    def __post_init__(self):
        if not self.cycle:
            raise ConfigError("schedule cycle must be nonempty")
        for s in self.head + self.cycle:
            if not isinstance(s, int) or s < 1:
                raise ConfigError("schedule entries must be positive integers")

    def split_at(self, n: int) -> int:
        """s_n for levels n >= 1."""
        if n < 1:
            raise ConfigError("schedule index starts at 1")
        if n <= len(self.head):
            return self.head[n - 1]
        return self.cycle[(n - 1 - len(self.head)) % len(self.cycle)]

    def count(self, n: int) -> int:
        """prod_{k<=n} s_k as an exact integer."""
        if n <= len(self.head):
            out = 1
            for s in self.head[:n]:
                out *= s
            return out
        out = 1
        for s in self.head:
            out *= s
        rest = n - len(self.head)
        cyc_prod = 1
        for s in self.cycle:
            cyc_prod *= s
        full, rem = divmod(rest, len(self.cycle))
        out *= cyc_prod**full
        for s in self.cycle[:rem]:
            out *= s
        return out

    def max_split(self) -> int:
        return max(self.head + self.cycle) if self.head else max(self.cycle)

    def min_split(self) -> int:
        return min(self.head + self.cycle) if self.head else min(self.cycle)


@dataclass(frozen=True)
class DyadicSelfSimilar:
    """Self-similar probability weights on the 2^d children of every cube."""

    dimension: int
    weights: tuple[Fraction, ...]

    def __post_init__(self):
        if self.dimension < 1:
            raise ConfigError("dimension must be positive")
        object.__setattr__(self, "weights", tuple(as_rational(w) for w in self.weights))
        if len(self.weights) != 1 << self.dimension:
            raise ConfigError(
                f"need {1 << self.dimension} weights for dimension {self.dimension}"
            )
        _check_weights(self.weights)


@dataclass(frozen=True)
class MAdicSelfSimilar:
    """Base-m self-similar measure on [0,1): maps x -> (x+j)/m with weight p_j.

    One weight per branch j in 0..m-1; a Cantor-style measure leaves interior
    branches at weight zero.  Evaluation on dyadic intervals is exact, via the
    self-similarity recursion (see :mod:`pelab.madic`).
    """

    base: int
    weights: tuple[Fraction, ...]

    def __post_init__(self):
        if self.base < 2:
            raise ConfigError("base must be at least 2")
        object.__setattr__(self, "weights", tuple(as_rational(w) for w in self.weights))
        if len(self.weights) != self.base:
            raise ConfigError(f"need {self.base} weights for base {self.base}")
        _check_weights(self.weights)

    @property
    def dimension(self) -> int:
        return 1


@dataclass(frozen=True)
class HomogeneousOscillating:
    """Keep the lexicographically first s_n children at level n, mass 1/s_n each.

    All surviving level-n cubes carry equal mass, so level statistics do not
    depend on which fixed child choice survives.
    """

    dimension: int
    schedule: Schedule

    def __post_init__(self):
        if self.dimension < 1:
            raise ConfigError("dimension must be positive")
        if self.schedule.max_split() > 1 << self.dimension:
            raise ConfigError("schedule split exceeds 2^d children")


@dataclass(frozen=True)
class ProductSpec:
    """Product measure/function on dimension d_left + d_right."""

    left: "Spec"
    right: "Spec"

    @property
    def dimension(self) -> int:
        return self.left.dimension + self.right.dimension


@dataclass(frozen=True)
class PowerSpec:
    """Pointwise power: value(Q) = inner(Q) ** exponent, exponent > 0."""

    inner: "Spec"
    exponent: Fraction

    def __post_init__(self):
        object.__setattr__(self, "exponent", as_rational(self.exponent))
        if self.exponent <= 0:
            raise ConfigError("power exponent must be positive")

    @property
    def dimension(self) -> int:
        return self.inner.dimension


@dataclass(frozen=True)
class VolumeWeight:
    """Volume-weighted envelope over subcubes.

    For a > 0 this collapses to inner(Q)^b * vol(Q)^a.  For a <= 0 the value
    is the supremum of inner(R)^b * vol(R)^a over subcubes R of Q (with the
    |log2 vol(R)| factor replacing vol^a when a == 0); the supremum is
    truncated ``sup_depth`` levels below Q unless a closed form applies.
    """

    inner: "Spec"
    a: Fraction
    b: Fraction
    sup_depth: int = 12

    def __post_init__(self):
        object.__setattr__(self, "a", as_rational(self.a))
        object.__setattr__(self, "b", as_rational(self.b))
        if self.b <= 0:
            raise ConfigError("exponent b must be positive")
        if self.sup_depth < 0:
            raise ConfigError("sup_depth must be nonnegative")

    @property
    def dimension(self) -> int:
        return self.inner.dimension


Spec = Union[
    DyadicSelfSimilar,
    MAdicSelfSimilar,
    HomogeneousOscillating,
    ProductSpec,
    PowerSpec,
    VolumeWeight,
]

MEASURE_LEAVES = (DyadicSelfSimilar, MAdicSelfSimilar, HomogeneousOscillating)


def _check_weights(weights: tuple[Fraction, ...]) -> None:
    if any(w < 0 for w in weights):
        raise ConfigError("weights must be nonnegative")
    if sum(weights) != 1:
        raise ConfigError(f"weights must sum to 1 exactly, got {sum(weights)}")
    if not any(w > 0 for w in weights):
        raise ConfigError("at least one weight must be positive")


def lebesgue(dimension: int) -> DyadicSelfSimilar:
    """Lebesgue measure restricted to dyadic cubes."""
    w = Fraction(1, 1 << dimension)
    return DyadicSelfSimilar(dimension, (w,) * (1 << dimension))


# ---------------------------------------------------------------------------
# JSON schema


def _rational_to_json(x: Fraction):
    if x.denominator == 1:
        return int(x)
    return f"{x.numerator}/{x.denominator}"


def spec_to_json(spec: Spec) -> dict:
    if isinstance(spec, DyadicSelfSimilar):
        return {
            "kind": "dyadic-self-similar",
            "dimension": spec.dimension,
            "weights": [_rational_to_json(w) for w in spec.weights],
        }
    if isinstance(spec, MAdicSelfSimilar):
        return {
            "kind": "m-adic-self-similar",
            "base": spec.base,
            "weights": [_rational_to_json(w) for w in spec.weights],
        }
    if isinstance(spec, HomogeneousOscillating):
        return {
            "kind": "homogeneous-oscillating",
            "dimension": spec.dimension,
            "schedule": {"head": list(spec.schedule.head), "cycle": list(spec.schedule.cycle)},
        }
    if isinstance(spec, ProductSpec):
        return {
            "kind": "product",
            "left": spec_to_json(spec.left),
            "right": spec_to_json(spec.right),
        }
    if isinstance(spec, PowerSpec):
        return {
            "kind": "power",
            "inner": spec_to_json(spec.inner),
            "s": _rational_to_json(spec.exponent),
        }
    if isinstance(spec, VolumeWeight):
        return {
            "kind": "lambda-weight",
            "inner": spec_to_json(spec.inner),
            "a": _rational_to_json(spec.a),
            "b": _rational_to_json(spec.b),
            "sup-depth": spec.sup_depth,
        }
    raise ConfigError(f"unknown spec node {type(spec).__name__}")


def _expect_keys(obj: dict, required: set[str], optional: set[str] = frozenset()):
    keys = set(obj)
    missing = required - keys
    unknown = keys - required - optional
    if missing:
        raise ConfigError(f"spec object missing keys {sorted(missing)}")
    if unknown:
        raise ConfigError(f"spec object has unknown keys {sorted(unknown)}")


def parse_spec(obj) -> Spec:
    """Build a spec tree from its JSON form, rejecting unknown fields."""
    if not isinstance(obj, dict):
        raise ConfigError("spec node must be a JSON object")
    kind = obj.get("kind")
    if kind == "dyadic-self-similar":
        _expect_keys(obj, {"kind", "dimension", "weights"})
        return DyadicSelfSimilar(int(obj["dimension"]), tuple(obj["weights"]))
    if kind == "m-adic-self-similar":
        _expect_keys(obj, {"kind", "base", "weights"})
        return MAdicSelfSimilar(int(obj["base"]), tuple(obj["weights"]))
    if kind == "homogeneous-oscillating":
        _expect_keys(obj, {"kind", "dimension", "schedule"})
        sched = obj["schedule"]
        if isinstance(sched, list):
            sched = {"head": [], "cycle": sched}
        _expect_keys(sched, {"cycle"}, {"head"})
        schedule = Schedule(tuple(sched.get("head", ())), tuple(sched["cycle"]))
        return HomogeneousOscillating(int(obj["dimension"]), schedule)
    if kind == "product":
        _expect_keys(obj, {"kind", "left", "right"})
        return ProductSpec(parse_spec(obj["left"]), parse_spec(obj["right"]))
    if kind == "power":
        _expect_keys(obj, {"kind", "inner", "s"})
        return PowerSpec(parse_spec(obj["inner"]), as_rational(obj["s"]))
    if kind == "lambda-weight":
        _expect_keys(obj, {"kind", "inner", "a", "b"}, {"sup-depth"})
        return VolumeWeight(
            parse_spec(obj["inner"]),
            as_rational(obj["a"]),
            as_rational(obj["b"]),
            int(obj.get("sup-depth", 12)),
        )
    raise ConfigError(f"unknown spec kind {kind!r}")
