"""Evaluation engine for cube-function specs.

Provides pointwise values (log2 channel plus optional exact rationals),
level suprema, level power sums, grouped level profiles for closed-form
families, and streaming enumeration for everything else.  The grouping trick:
for self-similar weights the level-n value of a cube depends only on the
multiset of branch choices, so sums and counts run over composition types
with exact multinomial multiplicities instead of 2^(nd) cubes.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterator

from .cubes import (
    STREAM_LEVEL_BITS,
    STREAM_VISIT_GUARD,
    CubeId,
    GridScheme,
    children_in_grid,
    classical_grid,
    grid_roots,
    predicate_grid,
    unit_cube,
)
from .madic import IntervalMassEngine
from .numerics import (
    NEG_INF,
    ZERO,
    ConfigError,
    GuardError,
    UnavailableError,
    Value,
    log2_fraction,
    log2_int,
    log2_sum,
    multinomial,
    value_max,
)
from .specs import (
    DyadicSelfSimilar,
    HomogeneousOscillating,
    MAdicSelfSimilar,
    PowerSpec,
    ProductSpec,
    Spec,
    VolumeWeight,
)


class SupTruncationWarning(UserWarning):
    """A truncated subcube supremum did not stabilise within sup_depth."""


_STABLE_TOL = 1e-12
_SUP_STABILITY_GAP = 2.0**-20
_TREE_SCAN_GUARD = 200_000

Group = tuple[float, int, Fraction | None]  # (log2 value, cube count, exact value)


def _pow2(e: int) -> Fraction:
    return Fraction(1 << e) if e >= 0 else Fraction(1, 1 << -e)


def _is_int(x: Fraction) -> bool:
    return x.denominator == 1


@dataclass(frozen=True)
class _SSTable:
    per_child: tuple[tuple[Fraction, float], ...]  # weight, log2 per child rank
    distinct: tuple[tuple[Fraction, int, float], ...]  # (weight, multiplicity, log2)
    zero_children: int


class Evaluator:
    """Evaluation context for one spec tree (caches engines and tables)."""

    def __init__(self, spec: Spec):
        self.spec = spec
        self.dimension = spec.dimension
        self._engines: dict[MAdicSelfSimilar, IntervalMassEngine] = {}
        self._ss_tables: dict[DyadicSelfSimilar, _SSTable] = {}

    # -- pointwise ---------------------------------------------------------

    def value(self, cube: CubeId, exact: bool = False) -> Value:
        if cube.dimension != self.dimension:
            raise ConfigError(
                f"cube dimension {cube.dimension} does not match spec dimension {self.dimension}"
            )
        return self._value(self.spec, cube, exact)

    def value_log2(self, cube: CubeId) -> float:
        return self.value(cube).log2

    def value_exact(self, cube: CubeId) -> Fraction:
        if not self.supports_exact():
            raise UnavailableError(f"{type(self.spec).__name__} has no exact channel")
        v = self.value(cube, exact=True)
        if v.exact is None:
            raise UnavailableError("exact value unavailable for this cube")
        return v.exact

    def supports_exact(self) -> bool:
        return _supports_exact(self.spec)

    def _value(self, node: Spec, cube: CubeId, exact: bool) -> Value:
        if isinstance(node, DyadicSelfSimilar):
            table = self._ss_table(node)
            logs = []
            ex = Fraction(1) if exact else None
            for rank in cube.digit_ranks():
                w, lw = table.per_child[rank]
                if w == 0:
                    return ZERO
                logs.append(lw)
                if ex is not None:
                    ex *= w
            return Value(math.fsum(logs), ex)
        if isinstance(node, MAdicSelfSimilar):
            engine = self._engine(node)
            k = cube.coords[0]
            mass = engine.mass_scaled(k, k + 1, 1 << cube.level)
            return Value(log2_fraction(mass), mass if exact else None)
        if isinstance(node, HomogeneousOscillating):
            for step, rank in enumerate(cube.digit_ranks(), start=1):
                if rank >= node.schedule.split_at(step):
                    return ZERO
            count = node.schedule.count(cube.level)
            return Value(-log2_int(count), Fraction(1, count) if exact else None)
        if isinstance(node, ProductSpec):
            dl = node.left.dimension
            left = self._value(node.left, CubeId(cube.level, cube.coords[:dl]), exact)
            right = self._value(node.right, CubeId(cube.level, cube.coords[dl:]), exact)
            if left.is_zero or right.is_zero:
                return ZERO
            ex = None
            if left.exact is not None and right.exact is not None:
                ex = left.exact * right.exact
            return Value(left.log2 + right.log2, ex)
        if isinstance(node, PowerSpec):
            inner = self._value(node.inner, cube, exact)
            if inner.is_zero:
                return ZERO
            ex = None
            if inner.exact is not None:
                if _is_int(node.exponent):
                    ex = inner.exact ** int(node.exponent)
                elif inner.exact == 1:
                    ex = Fraction(1)
            return Value(float(node.exponent) * inner.log2, ex)
        if isinstance(node, VolumeWeight):
            if node.a > 0 or (node.a < 0 and self._vw_stable(node)):
                inner = self._value(node.inner, cube, exact)
                return self._vw_at_cube(node, inner, cube.level)
            return self._vw_sup(node, cube, exact)
        raise ConfigError(f"unknown spec node {type(node).__name__}")

    def _vw_at_cube(self, node: VolumeWeight, inner: Value, level: int) -> Value:
        """inner(Q)^b * vol(Q)^a without any subcube supremum."""
        if inner.is_zero:
            return ZERO
        d = node.dimension
        log2 = float(node.b) * inner.log2 + float(node.a) * (-level * d)
        ex = None
        shift = -node.a * level * d
        if inner.exact is not None and _is_int(node.b) and _is_int(shift):
            ex = inner.exact ** int(node.b) * _pow2(int(shift))
        return Value(log2, ex)

    # -- volume-weight envelope (a <= 0) ------------------------------------

    def _vw_stable(self, node: VolumeWeight) -> bool:
        """True when one subdivision step can never increase the weighted value,
        so the subcube supremum is attained at the cube itself (a < 0)."""
        step = self._max_step_log2(node.inner)
        if step is None:
            return False
        factor = float(node.b) * step - float(node.a) * node.dimension
        return factor <= _STABLE_TOL

    def _max_step_log2(self, node: Spec) -> float | None:
        """log2 of the largest one-step child/parent value ratio, if known."""
        if isinstance(node, DyadicSelfSimilar):
            return log2_fraction(max(node.weights))
        if isinstance(node, HomogeneousOscillating):
            return -log2_int(node.schedule.min_split())
        if isinstance(node, ProductSpec):
            left = self._max_step_log2(node.left)
            right = self._max_step_log2(node.right)
            if left is None or right is None:
                return None
            return left + right
        if isinstance(node, PowerSpec):
            inner = self._max_step_log2(node.inner)
            return None if inner is None else float(node.exponent) * inner
        return None  # m-adic on dyadic cubes has no closed one-step bound

    def _step_log2(self, node: Spec, level: int) -> float | None:
        """log2 of the largest child/parent ratio at a specific level."""
        if isinstance(node, DyadicSelfSimilar):
            return log2_fraction(max(node.weights))
        if isinstance(node, HomogeneousOscillating):
            return -log2_int(node.schedule.split_at(level))
        if isinstance(node, ProductSpec):
            left = self._step_log2(node.left, level)
            right = self._step_log2(node.right, level)
            if left is None or right is None:
                return None
            return left + right
        if isinstance(node, PowerSpec):
            inner = self._step_log2(node.inner, level)
            return None if inner is None else float(node.exponent) * inner
        return None

    def _vw_weight_log2(self, node: VolumeWeight, level: int) -> float:
        """log2 of the volume factor: vol^a for a != 0, |log2 vol| for a == 0."""
        d = node.dimension
        if node.a == 0:
            return log2_int(level * d) if level > 0 else NEG_INF
        return float(node.a) * (-level * d)

    def _vw_sup(self, node: VolumeWeight, cube: CubeId, exact: bool) -> Value:
        if self._step_log2(node.inner, 1) is not None:
            return self._vw_sup_path(node, cube)
        return self._vw_sup_tree(node, cube, exact)

    def _vw_sup_path(self, node: VolumeWeight, cube: CubeId) -> Value:
        """Depth scan using exact per-level maxima of the inner function.

        At each depth below the cube the inner maximum over subcubes is the
        running product of per-level step maxima, so the supremum reduces to a
        one-dimensional scan over depths.  Terms that have fallen 64 binary
        orders below the running best cannot affect the supremum again once
        the drift is downhill, so the scan stops there.
        """
        inner = self._value(node.inner, cube, False)
        if inner.is_zero:
            return ZERO
        b = float(node.b)
        n = cube.level
        best = b * inner.log2 + self._vw_weight_log2(node, n)
        run = inner.log2
        cap = self._path_scan_cap(node)
        falling = 0
        for j in range(1, cap + 1):
            run += self._step_log2(node.inner, n + j)
            term = b * run + self._vw_weight_log2(node, n + j)
            if term > best:
                best = term
                falling = 0
            else:
                falling += 1
            if term < best - 64 and falling > 4:
                return Value(best)
        warnings.warn(
            f"subcube supremum still changing at depth {cap}",
            SupTruncationWarning,
            stacklevel=3,
        )
        return Value(best)

    def _path_scan_cap(self, node: VolumeWeight) -> int:
        """Scan horizon for the depth scan; raises on genuine divergence."""
        inner = node.inner
        b = float(node.b)
        drift_window = 1
        if isinstance(inner, HomogeneousOscillating):
            drift_window = max(1, len(inner.schedule.cycle))
            head = len(inner.schedule.head)
        else:
            head = 0
        drift = 0.0
        probe = head + 1
        for k in range(drift_window):
            drift += b * self._step_log2(inner, probe + k) - float(node.a) * node.dimension
        if node.a != 0 and drift > _STABLE_TOL:
            raise ConfigError(
                "volume-weight supremum diverges (growth per level exceeds decay)"
            )
        if node.a == 0 and drift > -_STABLE_TOL:
            raise ConfigError(
                "volume-weight supremum with a=0 diverges (inner maxima do not decay)"
            )
        base = max(node.sup_depth, 4 * (head + drift_window), 64)
        return min(base + 10_000, 100_000)

    def _vw_sup_tree(self, node: VolumeWeight, cube: CubeId, exact: bool) -> Value:
        """Truncated DFS supremum over subcubes for enumeration-backed inners."""
        b = float(node.b)
        n = cube.level
        depth = node.sup_depth
        inner0 = self._value(node.inner, cube, exact)
        if inner0.is_zero:
            return ZERO
        best = self._vw_term(node, inner0, n)
        frontier = [cube]
        visited = 1
        # Most favourable volume factor anywhere within the horizon; branches
        # whose inner value cannot beat the best even with it are pruned.
        horizon = self._vw_weight_log2(node, n + depth)
        best_by_depth = [best.log2]
        converged = depth == 0
        for j in range(1, depth + 1):
            nxt = []
            for parent in frontier:
                for child in parent.children():
                    cval = self._value(node.inner, child, exact)
                    if cval.is_zero:
                        continue
                    visited += 1
                    if visited > _TREE_SCAN_GUARD:
                        raise GuardError("subcube supremum scan exceeded visit guard")
                    term = self._vw_term(node, cval, n + j)
                    best = value_max(best, term)
                    if b * cval.log2 + horizon > best.log2:
                        nxt.append(child)
            frontier = nxt
            best_by_depth.append(best.log2)
            if not frontier and j < depth:
                converged = True  # nothing within the horizon can improve
                break
        if not converged and (
            len(best_by_depth) < 2
            or abs(best_by_depth[-1] - best_by_depth[-2]) > _SUP_STABILITY_GAP
        ):
            warnings.warn(
                f"subcube supremum not stabilised within depth {depth}",
                SupTruncationWarning,
                stacklevel=3,
            )
        return best

    def _vw_term(self, node: VolumeWeight, inner: Value, level: int) -> Value:
        if inner.is_zero:
            return ZERO
        if node.a == 0:
            if level == 0:
                return ZERO
            log2 = float(node.b) * inner.log2 + log2_int(level * node.dimension)
            ex = None
            if inner.exact is not None and _is_int(node.b):
                ex = inner.exact ** int(node.b) * level * node.dimension
            return Value(log2, ex)
        return self._vw_at_cube(node, inner, level)

    # -- caches --------------------------------------------------------------

    def _engine(self, node: MAdicSelfSimilar) -> IntervalMassEngine:
        engine = self._engines.get(node)
        if engine is None:
            engine = IntervalMassEngine(node.base, node.weights)
            self._engines[node] = engine
        return engine

    def _ss_table(self, node: DyadicSelfSimilar) -> _SSTable:
        table = self._ss_tables.get(node)
        if table is None:
            per_child = tuple((w, log2_fraction(w)) for w in node.weights)
            seen: dict[Fraction, int] = {}
            for w in node.weights:
                if w > 0:
                    seen[w] = seen.get(w, 0) + 1
            distinct = tuple(
                (w, g, log2_fraction(w)) for w, g in sorted(seen.items(), reverse=True)
            )
            zero_children = sum(1 for w in node.weights if w == 0)
            table = _SSTable(per_child, distinct, zero_children)
            self._ss_tables[node] = table
        return table

    # -- level suprema ---------------------------------------------------------

    def sup_level_log2(self, n: int, grid: GridScheme | None = None) -> float:
        """log2 of the largest value over the level's grid members."""
        if grid is None or grid.kind == "classical":
            return self._sup_node(self.spec, n)
        best = NEG_INF
        for _, v in self.iter_level_values(grid, n):
            if v.log2 > best:
                best = v.log2
        return best

    def _sup_node(self, node: Spec, n: int) -> float:
        closed = self._sup_closed(node, n)
        if closed is not None:
            return closed
        if isinstance(node, ProductSpec):
            # Level maxima multiply: the componentwise argmax pair is a cube.
            left = self._sup_node(node.left, n)
            right = self._sup_node(node.right, n)
            if left == NEG_INF or right == NEG_INF:
                return NEG_INF
            return left + right
        if isinstance(node, PowerSpec):
            return float(node.exponent) * self._sup_node(node.inner, n)
        if isinstance(node, VolumeWeight) and (
            node.a > 0 or (node.a < 0 and self._vw_stable(node))
        ):
            inner = self._sup_node(node.inner, n)
            if inner == NEG_INF:
                return NEG_INF
            return float(node.b) * inner + float(node.a) * (-n * node.dimension)
        best = NEG_INF
        for _, v in self._iter_node_level(node, classical_grid(node.dimension), n):
            if v.log2 > best:
                best = v.log2
        return best

    def _sup_closed(self, node: Spec, n: int) -> float | None:
        if isinstance(node, DyadicSelfSimilar):
            return n * self._ss_table(node).distinct[0][2] if n else 0.0
        if isinstance(node, HomogeneousOscillating):
            return -log2_int(node.schedule.count(n))
        if isinstance(node, ProductSpec):
            left = self._sup_closed(node.left, n)
            right = self._sup_closed(node.right, n)
            if left is None or right is None:
                return None
            return left + right
        if isinstance(node, PowerSpec):
            inner = self._sup_closed(node.inner, n)
            return None if inner is None else float(node.exponent) * inner
        if isinstance(node, VolumeWeight):
            if node.a > 0 or (node.a < 0 and self._vw_stable(node)):
                inner = self._sup_closed(node.inner, n)
                if inner is None:
                    return None
                return float(node.b) * inner + float(node.a) * (-n * node.dimension)
            # Envelope case: the level supremum is a depth scan over the
            # closed per-level inner suprema.
            if self._sup_closed(node.inner, n) is None:
                return None
            return self._sup_envelope_closed(node, n)
        return None

    def _sup_envelope_closed(self, node: VolumeWeight, n: int) -> float:
        b = float(node.b)
        cap = self._path_scan_cap(node)
        best = NEG_INF
        rising_guard = 0
        for j in range(cap + 1):
            term = b * self._sup_closed(node.inner, n + j) + self._vw_weight_log2(node, n + j)
            if term > best:
                best = term
                rising_guard = 0
            else:
                rising_guard += 1
            if term < best - 64 and rising_guard > 4:
                break
        return best

    # -- level power sums -------------------------------------------------------

    def tau_sum_log2(self, n: int, q, grid: GridScheme | None = None) -> float:
        """log2 of sum over level-n members of value(Q)^q, zero cubes dropped.

        q may be a float or a Fraction; integer rationals use the exact
        big-rational power-sum path on closed-form families.
        """
        if n < 0:
            raise ConfigError("level must be nonnegative")
        qf = Fraction(q) if isinstance(q, (int, Fraction)) else q
        if (isinstance(qf, Fraction) and qf < 0) or (isinstance(qf, float) and qf < 0):
            raise ConfigError("q must be nonnegative")
        if grid is None or grid.kind == "classical":
            return self._tau_node(self.spec, n, qf)
        return self._tau_stream(self.spec, grid, n, qf)

    def _tau_node(self, node: Spec, n: int, q) -> float:
        """Classical-grid power sum for one node, recursing through wrappers.

        Products factorise exactly (sum of (vw)^q = sum v^q * sum w^q over a
        product level) and power/weight wrappers reduce to the inner node, so
        streaming only ever happens on leaves that really need it.
        """
        closed = self._tau_closed(node, n, q)
        if closed is not None:
            return closed
        if isinstance(node, ProductSpec):
            left = self._tau_node(node.left, n, q)
            right = self._tau_node(node.right, n, q)
            if left == NEG_INF or right == NEG_INF:
                return NEG_INF
            return left + right
        if isinstance(node, PowerSpec):
            if _q_is_zero(q):
                return self._tau_node(node.inner, n, q)
            inner_q = q * node.exponent if isinstance(q, Fraction) else q * float(node.exponent)
            return self._tau_node(node.inner, n, inner_q)
        if isinstance(node, VolumeWeight) and (
            node.a > 0 or (node.a < 0 and self._vw_stable(node))
        ):
            if _q_is_zero(q):
                return self._tau_node(node.inner, n, q)
            inner_q = q * node.b if isinstance(q, Fraction) else q * float(node.b)
            inner = self._tau_node(node.inner, n, inner_q)
            if inner == NEG_INF:
                return NEG_INF
            return inner + float(node.a) * (-n * node.dimension) * float(q)
        return self._tau_stream(node, classical_grid(node.dimension), n, q)

    def _tau_closed(self, node: Spec, n: int, q) -> float | None:
        """Leaf closed forms; composite nodes are composed in _tau_node."""
        if isinstance(node, DyadicSelfSimilar):
            table = self._ss_table(node)
            if _q_is_zero(q):
                total = sum(g for _, g, _ in table.distinct)
                return n * log2_int(total)
            if isinstance(q, Fraction) and _is_int(q):
                power_sum = sum(g * w ** int(q) for w, g, _ in table.distinct)
                return n * log2_fraction(power_sum)
            qf = float(q)
            return n * log2_sum(log2_int(g) + qf * lw for _, g, lw in table.distinct)
        if isinstance(node, HomogeneousOscillating):
            count_log2 = log2_int(node.schedule.count(n))
            return (1.0 - float(q)) * count_log2
        return None

    def _tau_stream(self, node: Spec, grid: GridScheme, n: int, q) -> float:
        qf = float(q)
        if _q_is_zero(q):
            count = 0
            for _ in self._iter_node_level(node, grid, n):
                count += 1
            return log2_int(count) if count else NEG_INF
        return log2_sum(qf * v.log2 for _, v in self._iter_node_level(node, grid, n))

    # -- level profiles ----------------------------------------------------------

    def level_groups(
        self, n: int, exact: bool = False, cap: int = 2_000_000
    ) -> list[Group] | None:
        """Grouped positive values of a classical level, or None if unsupported."""
        return self._groups(self.spec, n, exact, cap)

    def _groups(self, node: Spec, n: int, exact: bool, cap: int) -> list[Group] | None:
        if isinstance(node, DyadicSelfSimilar):
            table = self._ss_table(node)
            r = len(table.distinct)
            if math.comb(n + r - 1, r - 1) > cap:
                return None
            out: list[Group] = []

            # Multiplicity of a composition (c_1..c_r) of the n branch steps:
            # multinomial(n; c) * prod g_i^c_i, built as sequential binomials.
            def rec(idx: int, remaining: int, log2v: float, cnt: int, ex: Fraction | None):
                w, g, lw = table.distinct[idx]
                if idx == r - 1:
                    out.append(
                        (
                            log2v + remaining * lw,
                            cnt * g**remaining,
                            ex * w**remaining if ex is not None else None,
                        )
                    )
                    return
                for c in range(remaining + 1):
                    rec(
                        idx + 1,
                        remaining - c,
                        log2v + c * lw,
                        cnt * math.comb(remaining, c) * g**c,
                        ex * w**c if ex is not None else None,
                    )

            rec(0, n, 0.0, 1, Fraction(1) if exact else None)
            return out
        if isinstance(node, HomogeneousOscillating):
            count = node.schedule.count(n)
            ex = Fraction(1, count) if exact else None
            return [(-log2_int(count), count, ex)]
        if isinstance(node, ProductSpec):
            left = self._groups(node.left, n, exact, cap)
            right = self._groups(node.right, n, exact, cap)
            if left is None or right is None:
                return None
            if len(left) * len(right) > cap:
                return None
            out = []
            for ll, lc, le in left:
                for rl, rc, re in right:
                    ex = le * re if le is not None and re is not None else None
                    out.append((ll + rl, lc * rc, ex))
            return out
        if isinstance(node, PowerSpec):
            inner = self._groups(node.inner, n, exact, cap)
            if inner is None:
                return None
            s = node.exponent
            sf = float(s)
            return [
                (sf * lv, c, e ** int(s) if e is not None and _is_int(s) else None)
                for lv, c, e in inner
            ]
        if isinstance(node, VolumeWeight):
            if not (node.a > 0 or (node.a < 0 and self._vw_stable(node))):
                return None
            inner = self._groups(node.inner, n, exact, cap)
            if inner is None:
                return None
            bf = float(node.b)
            shift_log2 = float(node.a) * (-n * node.dimension)
            shift = -node.a * n * node.dimension
            out = []
            for lv, c, e in inner:
                ex = None
                if e is not None and _is_int(node.b) and _is_int(shift):
                    ex = e ** int(node.b) * _pow2(int(shift))
                out.append((bf * lv + shift_log2, c, ex))
            return out
        return None

    # -- streaming enumeration ------------------------------------------------

    def iter_level_values(
        self, grid: GridScheme, n: int, max_visits: int = STREAM_VISIT_GUARD
    ) -> Iterator[tuple[CubeId, Value]]:
        """Positive-valued grid members at one level, by subtree descent.

        Zero-valued subtrees are pruned (monotonicity), so the work scales
        with the number of positive cubes rather than 2^(nd).
        """
        return self._iter_node_level(self.spec, grid, n, max_visits)

    def _iter_node_level(
        self, node: Spec, grid: GridScheme, n: int, max_visits: int = STREAM_VISIT_GUARD
    ) -> Iterator[tuple[CubeId, Value]]:
        if n * node.dimension > STREAM_LEVEL_BITS:
            raise GuardError(
                f"level sweep at {n}*{node.dimension} bits exceeds the "
                f"{STREAM_LEVEL_BITS}-bit streaming guard"
            )
        if grid.dimension != node.dimension:
            raise ConfigError("grid dimension does not match the evaluated node")
        visits = 0
        for root_level in range(n + 1):
            roots = grid_roots(grid, root_level)
            for root in roots:
                stack = [root]
                while stack:
                    cube = stack.pop()
                    visits += 1
                    if visits > max_visits:
                        raise GuardError("level sweep exceeded visit guard")
                    v = self._value(node, cube, False)
                    if v.is_zero:
                        continue
                    if cube.level == n:
                        yield cube, v
                    else:
                        stack.extend(reversed(children_in_grid(cube, grid)))
            if grid.roots_only_at_zero:
                break

    def count_positive_level(self, grid: GridScheme, n: int) -> int:
        return sum(1 for _ in self.iter_level_values(grid, n))

    # -- diagnostics -------------------------------------------------------------

    def vanishing_check(self, grid: GridScheme | None, horizon: int) -> "VanishingReport":
        """Advisory check of the decay of per-level suprema up to a horizon."""
        sups = [self.sup_level_log2(n, grid) for n in range(horizon + 1)]
        nonincreasing = all(b <= a + 1e-12 for a, b in zip(sups, sups[1:]))
        below_one = sups[-1] < 0 if sups else False
        return VanishingReport(tuple(sups), nonincreasing, below_one)


@dataclass(frozen=True)
class VanishingReport:
    sup_log2: tuple[float, ...]
    nonincreasing: bool
    eventually_below_one: bool


def _q_is_zero(q) -> bool:
    return (isinstance(q, Fraction) and q == 0) or (isinstance(q, float) and q == 0.0)


def _supports_exact(node: Spec) -> bool:
    if isinstance(node, (DyadicSelfSimilar, MAdicSelfSimilar, HomogeneousOscillating)):
        return True
    if isinstance(node, ProductSpec):
        return _supports_exact(node.left) and _supports_exact(node.right)
    if isinstance(node, PowerSpec):
        return _is_int(node.exponent) and _supports_exact(node.inner)
    if isinstance(node, VolumeWeight):
        return (
            _is_int(node.b)
            and _is_int(node.a * node.dimension)
            and _supports_exact(node.inner)
        )
    return False


def default_max_depth(spec: Spec) -> int:
    """Termination guard: tight for enumeration-backed evaluation."""
    return 64 if _has_madic(spec) else 10_000


def _has_madic(node: Spec) -> bool:
    if isinstance(node, MAdicSelfSimilar):
        return True
    if isinstance(node, ProductSpec):
        return _has_madic(node.left) or _has_madic(node.right)
    if isinstance(node, (PowerSpec, VolumeWeight)):
        return _has_madic(node.inner)
    return False


def positive_grid(evaluator: Evaluator) -> GridScheme:
    """The sub-grid of cubes where the function is positive.

    Monotonicity puts every positive cube under the level-0 root, so root
    discovery stops at level zero.
    """

    def member(cube: CubeId) -> bool:
        return not evaluator.value(cube).is_zero

    return predicate_grid(
        evaluator.dimension, member, name="positive", roots_only_at_zero=True
    )


# ---------------------------------------------------------------------------
# Value-class models for grouped partition walks


@dataclass(frozen=True)
class ClassModel:
    """Level-indexed value classes with child transitions and multiplicities.

    ``children(state, child_level)`` returns the positive child classes with
    multiplicities plus the number of zero-valued children; ``value`` gives
    the class value at a level.  Cube counts per class are exact integers.
    """

    root: object
    children: Callable[[object, int], tuple[list[tuple[object, int]], int]]
    value: Callable[[object, int, bool], Value]


def class_model(evaluator: Evaluator) -> ClassModel | None:
    return _model(evaluator, evaluator.spec)


def _model(ev: Evaluator, node: Spec) -> ClassModel | None:
    if isinstance(node, DyadicSelfSimilar):
        table = ev._ss_table(node)
        distinct = table.distinct
        r = len(distinct)
        zeros = table.zero_children

        def children(state, child_level):
            kids = []
            for i in range(r):
                child = state[:i] + (state[i] + 1,) + state[i + 1 :]
                kids.append((child, distinct[i][1]))
            return kids, zeros

        def value(state, level, exact):
            log2v = math.fsum(c * distinct[i][2] for i, c in enumerate(state))
            ex = None
            if exact:
                ex = Fraction(1)
                for i, c in enumerate(state):
                    ex *= distinct[i][0] ** c
            return Value(log2v, ex)

        return ClassModel((0,) * r, children, value)
    if isinstance(node, HomogeneousOscillating):
        total = 1 << node.dimension
        schedule = node.schedule

        def children(state, child_level):
            s = schedule.split_at(child_level)
            return [((), s)], total - s

        def value(state, level, exact):
            count = schedule.count(level)
            return Value(-log2_int(count), Fraction(1, count) if exact else None)

        return ClassModel((), children, value)
    if isinstance(node, ProductSpec):
        left = _model(ev, node.left)
        right = _model(ev, node.right)
        if left is None or right is None:
            return None
        total = 1 << node.dimension

        def children(state, child_level):
            lkids, _ = left.children(state[0], child_level)
            rkids, _ = right.children(state[1], child_level)
            kids = [((ls, rs), lm * rm) for ls, lm in lkids for rs, rm in rkids]
            positive = sum(m for _, m in kids)
            return kids, total - positive

        def value(state, level, exact):
            lv = left.value(state[0], level, exact)
            rv = right.value(state[1], level, exact)
            if lv.is_zero or rv.is_zero:
                return ZERO
            ex = None
            if lv.exact is not None and rv.exact is not None:
                ex = lv.exact * rv.exact
            return Value(lv.log2 + rv.log2, ex)

        return ClassModel((left.root, right.root), children, value)
    if isinstance(node, PowerSpec):
        inner = _model(ev, node.inner)
        if inner is None:
            return None
        s = node.exponent
        sf = float(s)
        s_int = int(s) if _is_int(s) else None

        def value(state, level, exact):
            iv = inner.value(state, level, exact)
            if iv.is_zero:
                return ZERO
            ex = None
            if iv.exact is not None and s_int is not None:
                ex = iv.exact**s_int
            return Value(sf * iv.log2, ex)

        return ClassModel(inner.root, inner.children, value)
    if isinstance(node, VolumeWeight):
        if not (node.a > 0 or (node.a < 0 and ev._vw_stable(node))):
            return None
        inner = _model(ev, node.inner)
        if inner is None:
            return None
        a, b, d = node.a, node.b, node.dimension
        bf, af = float(b), float(a)
        b_int = int(b) if _is_int(b) else None

        def value(state, level, exact):
            iv = inner.value(state, level, exact)
            if iv.is_zero:
                return ZERO
            log2v = bf * iv.log2 + af * (-level * d)
            ex = None
            shift = -a * level * d
            if iv.exact is not None and b_int is not None and _is_int(shift):
                ex = iv.exact**b_int * _pow2(int(shift))
            return Value(log2v, ex)

        return ClassModel(inner.root, inner.children, value)
    return None
