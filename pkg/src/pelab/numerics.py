"""Dual-channel numeric values (log2 float + exact rational) and small fit helpers.

Cube-function values range over hundreds of binary orders of magnitude, so the
primary numeric channel is log2; an exact Fraction channel rides along wherever
the backend can produce one, and strict threshold comparisons prefer it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

NEG_INF = float("-inf")


class PelabError(Exception):
    """Base class for package errors."""


class ConfigError(PelabError):
    """Invalid parameters, spec files, or preconditions."""


class GuardError(PelabError):
    """A resource guard (depth, enumeration size, state count) tripped."""


class BudgetError(PelabError):
    """Cardinality budget below the minimum achievable partition size."""


class UnavailableError(PelabError):
    """Exact evaluation is not supported for this spec."""


def log2_fraction(x: Fraction) -> float:
    """log2 of a nonnegative rational, safe for huge numerators/denominators."""
    if x < 0:
        raise ValueError("log2 of negative rational")
    if x == 0:
        return NEG_INF
    return math.log2(x.numerator) - math.log2(x.denominator)


def log2_int(n: int) -> float:
    if n <= 0:
        return NEG_INF
    return math.log2(n)


@dataclass(frozen=True)
class Value:
    """A nonnegative quantity in the log2 channel, optionally exact.

    ``log2 == -inf`` encodes the value 0.  ``exact`` is filled only when the
    producing backend supports exact rationals and the caller asked for them.
    """

    log2: float
    exact: Fraction | None = None

    @property
    def is_zero(self) -> bool:
        return self.log2 == NEG_INF

    def approx(self) -> float:
        """Plain float approximation (may underflow to 0 for deep cubes)."""
        if self.is_zero:
            return 0.0
        return 2.0 ** self.log2


ZERO = Value(NEG_INF, Fraction(0))
ONE = Value(0.0, Fraction(1))


def as_value(x) -> Value:
    """Coerce a threshold-like input into a Value.

    Accepts Value, Fraction, int, float (taken at its exact binary value) and
    strings ("1/8", "0.25", "1e-3").
    """
    if isinstance(x, Value):
        return x
    if isinstance(x, Fraction):
        return Value(log2_fraction(x), x)
    if isinstance(x, int):
        return Value(log2_int(x), Fraction(x))
    if isinstance(x, float):
        if x < 0 or math.isnan(x) or math.isinf(x):
            raise ConfigError(f"not a usable threshold: {x!r}")
        return Value(NEG_INF if x == 0 else math.log2(x), Fraction(x))
    if isinstance(x, str):
        s = x.strip()
        try:
            if "/" in s or ("." in s and "e" not in s.lower()):
                return as_value(Fraction(s))
            return as_value(float(s))
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError(f"cannot parse value {x!r}") from exc
    raise ConfigError(f"cannot interpret {type(x).__name__} as a value")


def value_lt(v: Value, t: Value) -> bool:
    """Strict v < t, using the exact channel when both sides carry one."""
    if v.exact is not None and t.exact is not None:
        return v.exact < t.exact
    return v.log2 < t.log2


def value_ge(v: Value, t: Value) -> bool:
    return not value_lt(v, t)


def value_max(a: Value, b: Value) -> Value:
    if a.exact is not None and b.exact is not None:
        return a if a.exact >= b.exact else b
    return a if a.log2 >= b.log2 else b


def log2_sum(terms: Iterable[float]) -> float:
    """log2 of a sum of nonnegative quantities given by their log2 values.

    Accumulates in a fixed order (max-shifted fsum) so results are
    deterministic for a deterministic input order.
    """
    ts = [t for t in terms if t != NEG_INF]
    if not ts:
        return NEG_INF
    m = max(ts)
    if m == NEG_INF:
        return NEG_INF
    return m + math.log2(math.fsum(2.0 ** (t - m) for t in ts))


def log2_sum_weighted(pairs: Iterable[tuple[float, int]]) -> float:
    """log2 of sum(count * 2**log2v) over (log2v, count) pairs."""
    return log2_sum(lv + log2_int(c) for lv, c in pairs if c > 0)


def fit_slope(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Least-squares slope of ys against xs."""
    n = len(xs)
    if n < 2:
        raise ConfigError("need at least two points for a slope fit")
    mx = math.fsum(xs) / n
    my = math.fsum(ys) / n
    sxx = math.fsum((x - mx) ** 2 for x in xs)
    if sxx == 0:
        raise ConfigError("degenerate abscissae in slope fit")
    sxy = math.fsum((x - mx) * (y - my) for x, y in zip(xs, ys))
    return sxy / sxx


def tail_window(items: Sequence, fraction: float = 0.5) -> Sequence:
    """The trailing window (default: last half, at least two entries)."""
    n = len(items)
    if n == 0:
        return items
    k = max(2, math.ceil(n * fraction))
    k = min(k, n)
    return items[n - k :]


def multinomial(n: int, counts: Sequence[int]) -> int:
    """Exact multinomial coefficient n! / prod(c_i!) with sum(counts) == n."""
    total = 0
    out = 1
    for c in counts:
        total += c
        out *= math.comb(total, c)
    if total != n:
        raise ValueError("counts do not sum to n")
    return out
