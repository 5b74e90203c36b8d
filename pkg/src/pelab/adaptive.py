"""Adaptive threshold partitions, the dual problem, and exhaustive oracles.

The central object: for a threshold t, the partition of cubes whose value
falls below t while the parent's value does not.  A depth-first sweep builds
it; for closed-form specs an equivalent walk over value classes counts it
without materialising cubes, which keeps thresholds like 2^-34 cheap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .cubes import (
    CubeId,
    GridScheme,
    Partition,
    children_in_grid,
    classical_grid,
    grid_roots,
    unit_cube,
    validate_partition,
)
from .evaluate import ClassModel, Evaluator, class_model, default_max_depth
from .numerics import (
    NEG_INF,
    ZERO,
    BudgetError,
    ConfigError,
    GuardError,
    Value,
    as_value,
    fit_slope,
    log2_fraction,
    log2_int,
    tail_window,
    value_lt,
    value_max,
)
from .specs import Spec, VolumeWeight

_DEFAULT_MAX_CUBES = 2_000_000
_ROOT_SWEEP_MARGIN = 1e-9


def _as_evaluator(spec) -> Evaluator:
    return spec if isinstance(spec, Evaluator) else Evaluator(spec)


def _as_threshold(t) -> Value:
    tv = as_value(t)
    if tv.log2 == NEG_INF:
        raise ConfigError("threshold must be positive")
    return tv


@dataclass(frozen=True)
class PartitionSummary:
    """Cardinality and maximum of a threshold partition, without its cubes."""

    count: int
    max_value: Value
    level_histogram: tuple[tuple[int, int], ...]
    warning: str | None = None


@dataclass(frozen=True)
class GoodPartitionResult:
    """A materialised threshold partition with its certificate data."""

    threshold: Value
    partition: Partition
    count: int
    max_value: Value
    level_histogram: tuple[tuple[int, int], ...]
    warning: str | None = None


def _iter_bad_roots(ev: Evaluator, grid: GridScheme, t: Value, exact: bool, max_depth: int):
    """Roots whose value meets the threshold.  Roots below it are skipped:
    without a member parent they cannot enter the partition, and their
    subtrees cannot either (monotonicity)."""
    level = 0
    while level <= max_depth:
        if level > 0:
            # No member at this level or deeper can reach t once the
            # classical level supremum has fallen below it.
            if ev.sup_level_log2(level) < t.log2 - _ROOT_SWEEP_MARGIN:
                return
        for root in grid_roots(grid, level):
            v = ev.value(root, exact)
            if not value_lt(v, t):
                yield root, v
        if grid.roots_only_at_zero:
            return
        level += 1
    raise GuardError(f"root sweep exceeded {max_depth} levels")


def _stream_summary(
    ev: Evaluator,
    grid: GridScheme,
    t: Value,
    *,
    exact: bool,
    collect: bool,
    max_depth: int,
    max_cubes: int,
):
    count = 0
    maxv = ZERO
    hist: dict[int, int] = {}
    cubes: list[CubeId] | None = [] if collect else None
    any_bad = False
    for root, _ in _iter_bad_roots(ev, grid, t, exact, max_depth):
        any_bad = True
        stack = [root]
        while stack:
            cube = stack.pop()
            for child in children_in_grid(cube, grid):
                cv = ev.value(child, exact)
                if value_lt(cv, t):
                    count += 1
                    hist[child.level] = hist.get(child.level, 0) + 1
                    if not cv.is_zero:
                        maxv = value_max(maxv, cv)
                    if cubes is not None:
                        cubes.append(child)
                    if count > max_cubes:
                        raise GuardError(f"partition exceeded {max_cubes} cubes")
                else:
                    if child.level >= max_depth:
                        raise GuardError(
                            f"max depth {max_depth} exceeded at cube {child.as_text()}"
                        )
                    stack.append(child)
    warning = None
    if not any_bad:
        warning = "threshold not below any root value: partition is empty"
    summary = PartitionSummary(count, maxv, tuple(sorted(hist.items())), warning)
    return summary, cubes


def _grouped_summary(
    ev: Evaluator, model: ClassModel, t: Value, *, exact: bool, max_depth: int
) -> PartitionSummary:
    rootv = model.value(model.root, 0, exact)
    if value_lt(rootv, t):
        return PartitionSummary(
            0, ZERO, (), "threshold not below any root value: partition is empty"
        )
    bad: dict = {model.root: 1}
    level = 0
    count = 0
    maxv = ZERO
    hist: dict[int, int] = {}
    while bad:
        level += 1
        if level > max_depth:
            raise GuardError(f"max depth {max_depth} exceeded in grouped walk")
        nxt: dict = {}
        values: dict = {}
        emitted = 0
        for state, cnt in bad.items():
            kids, zero_mult = model.children(state, level)
            emitted += cnt * zero_mult
            for child, mult in kids:
                v = values.get(child)
                if v is None:
                    v = model.value(child, level, exact)
                    values[child] = v
                if value_lt(v, t):
                    emitted += cnt * mult
                    if not v.is_zero:
                        maxv = value_max(maxv, v)
                else:
                    nxt[child] = nxt.get(child, 0) + cnt * mult
        if emitted:
            hist[level] = hist.get(level, 0) + emitted
            count += emitted
        bad = nxt
    return PartitionSummary(count, maxv, tuple(sorted(hist.items())))


def threshold_summary(
    spec,
    grid: GridScheme,
    threshold,
    *,
    exact: bool | None = None,
    max_depth: int | None = None,
    max_cubes: int = _DEFAULT_MAX_CUBES,
) -> PartitionSummary:
    """Count the threshold partition without materialising it."""
    ev = _as_evaluator(spec)
    t = _as_threshold(threshold)
    if exact is None:
        exact = t.exact is not None and ev.supports_exact()
    depth = max_depth if max_depth is not None else default_max_depth(ev.spec)
    if grid.kind == "classical":
        model = class_model(ev)
        if model is not None:
            return _grouped_summary(ev, model, t, exact=exact, max_depth=depth)
    summary, _ = _stream_summary(
        ev, grid, t, exact=exact, collect=False, max_depth=depth, max_cubes=max_cubes
    )
    return summary


def partition_count(spec, grid: GridScheme, threshold, **kwargs) -> int:
    """Cardinality of the threshold partition (streaming count)."""
    return threshold_summary(spec, grid, threshold, **kwargs).count


def adaptive_partition(
    spec,
    grid: GridScheme,
    threshold,
    *,
    exact: bool | None = None,
    max_depth: int | None = None,
    max_cubes: int = _DEFAULT_MAX_CUBES,
) -> GoodPartitionResult:
    """Materialise the minimal threshold partition by subtree descent.

    A member cube at or above the threshold is subdivided into its member
    children; a child falling below it is emitted.  Termination relies on the
    decay of level suprema and is fenced by ``max_depth``.
    """
    ev = _as_evaluator(spec)
    t = _as_threshold(threshold)
    if exact is None:
        exact = t.exact is not None and ev.supports_exact()
    depth = max_depth if max_depth is not None else default_max_depth(ev.spec)
    summary, cubes = _stream_summary(
        ev, grid, t, exact=exact, collect=True, max_depth=depth, max_cubes=max_cubes
    )
    cubes = sorted(cubes, key=lambda c: (c.level, c.coords))
    return GoodPartitionResult(
        t,
        Partition(tuple(cubes), grid),
        summary.count,
        summary.max_value,
        summary.level_histogram,
        summary.warning,
    )


# ---------------------------------------------------------------------------
# Count growth exponent


@dataclass(frozen=True)
class EntropyEstimate:
    """Growth data of the partition count along an x-schedule."""

    xs: tuple[Fraction, ...]
    counts: tuple[int, ...]
    ratios: tuple[float, ...]  # log2 count / log2 x
    ratio_max: float
    ratio_min: float
    slope: float
    window: int


def entropy_estimate(spec, grid: GridScheme, xs, *, window: float = 0.5) -> EntropyEstimate:
    """Partition counts at thresholds 1/x and their growth exponent.

    Reports both tail-window extrema of log(count)/log(x) and a least-squares
    slope over the tail; the extrema surrogate limsup/liminf behaviour, the
    slope cancels multiplicative constants.
    """
    if len(xs) < 3:
        raise ConfigError("x schedule needs at least 3 points")
    xfs = [Fraction(x) if not isinstance(x, Fraction) else x for x in xs]
    if any(b <= a for a, b in zip(xfs, xfs[1:])):
        raise ConfigError("x schedule must be strictly increasing")
    ev = _as_evaluator(spec)
    j0 = _grid_root_max(ev, grid)
    counts = []
    ratios = []
    for x in xfs:
        t = Value(-log2_fraction(x), 1 / x)
        if not value_lt(t, j0):
            raise ConfigError(f"x={x} is not above 1/(root value)")
        m = threshold_summary(ev, grid, t).count
        counts.append(m)
        ratios.append(log2_int(m) / log2_fraction(x))
    tail = tail_window(list(zip(xfs, counts, ratios)), window)
    slope = fit_slope(
        [log2_fraction(x) for x, _, _ in tail], [log2_int(c) for _, c, _ in tail]
    )
    tail_ratios = [r for _, _, r in tail]
    return EntropyEstimate(
        tuple(xfs),
        tuple(counts),
        tuple(ratios),
        max(tail_ratios),
        min(tail_ratios),
        slope,
        len(tail),
    )


# ---------------------------------------------------------------------------
# Dual problem: smallest achievable maximum under a cardinality budget


@dataclass(frozen=True)
class DualResult:
    budget: int
    value: Value
    witness_threshold: Value
    witness_count: int


@dataclass(frozen=True)
class DualSweepResult:
    budgets: tuple[int, ...]
    results: tuple[DualResult | None, ...]  # None where the budget is infeasible
    notes: tuple[str, ...]
    ratio_max: float
    ratio_min: float
    slope: float


def _grid_root_max(ev: Evaluator, grid: GridScheme, guard_levels: int = 512) -> Value:
    best = ZERO
    exact = ev.supports_exact()
    level = 0
    while level <= guard_levels:
        for root in grid_roots(grid, level):
            best = value_max(best, ev.value(root, exact))
        if grid.roots_only_at_zero:
            return best
        level += 1
        if not best.is_zero and ev.sup_level_log2(level) <= best.log2 + 1e-12:
            return best
    raise GuardError("root value sweep exceeded level guard")


def dual_value(
    spec,
    grid: GridScheme,
    budget: int,
    *,
    bisect_iters: int = 60,
    max_depth: int | None = None,
) -> DualResult:
    """Smallest maximum value over threshold partitions of cardinality <= budget.

    Monotone bisection on the threshold locates the neighbourhood; an exact
    descent through the partition's own value breakpoints then lands on the
    optimum, so results are exact whenever the spec has an exact channel.
    """
    if budget < 1:
        raise ConfigError("budget must be a positive integer")
    ev = _as_evaluator(spec)
    depth = max_depth if max_depth is not None else default_max_depth(ev.spec)
    exact = ev.supports_exact()
    j0 = _grid_root_max(ev, grid)
    if j0.is_zero:
        raise ConfigError("function vanishes on every root; dual problem is void")

    def summarize(t: Value, use_exact: bool) -> PartitionSummary:
        return threshold_summary(ev, grid, t, exact=use_exact, max_depth=depth)

    coarsest = summarize(j0, exact)
    if coarsest.count > budget:
        raise BudgetError(
            f"budget {budget} below the minimum achievable cardinality {coarsest.count}"
        )

    # Exponential search for an infeasible threshold below the feasible one.
    hi_log, feas, feas_t = j0.log2, coarsest, j0
    step = 1.0
    lo_log = hi_log - step
    infeasible_found = False
    for _ in range(200):
        s = summarize(Value(lo_log), False)
        if s.count > budget:
            infeasible_found = True
            break
        feas, feas_t, hi_log = s, Value(lo_log), lo_log
        step *= 2.0
        lo_log = hi_log - step
    if infeasible_found:
        for _ in range(bisect_iters):
            mid = (lo_log + hi_log) / 2.0
            s = summarize(Value(mid), False)
            if s.count <= budget:
                feas, feas_t, hi_log = s, Value(mid), mid
            else:
                lo_log = mid
    # Exact descent: the next finer partition in the family splits exactly
    # the cubes attaining the current maximum.
    cur = summarize(feas_t, exact)
    cur_t = feas_t
    for _ in range(100_000):
        m = cur.max_value
        if m.is_zero:
            break
        nxt = summarize(m, exact)
        if nxt.count <= budget:
            cur, cur_t = nxt, m
        else:
            break
    else:
        raise GuardError("breakpoint descent did not terminate")
    return DualResult(budget, cur.max_value, cur_t, cur.count)


def dual_sweep(spec, grid: GridScheme, budgets, *, window: float = 0.5, **kwargs) -> DualSweepResult:
    """Dual values over a budget schedule with decay-exponent estimates."""
    budgets = [int(n) for n in budgets]
    if any(b <= a for a, b in zip(budgets, budgets[1:])):
        raise ConfigError("budget schedule must be strictly increasing")
    ev = _as_evaluator(spec)
    results: list[DualResult | None] = []
    notes: list[str] = []
    for n in budgets:
        try:
            results.append(dual_value(ev, grid, n, **kwargs))
        except BudgetError as exc:
            results.append(None)
            notes.append(f"budget {n}: {exc}")
    pts = [
        (n, r.value.log2)
        for n, r in zip(budgets, results)
        if r is not None and not r.value.is_zero
    ]
    if len(pts) >= 2:
        tail = tail_window(pts, window)
        ratios = [lv / log2_int(n) for n, lv in tail]
        slope = fit_slope([log2_int(n) for n, _ in tail], [lv for _, lv in tail])
        ratio_max, ratio_min = max(ratios), min(ratios)
    else:
        slope = ratio_max = ratio_min = math.nan
    return DualSweepResult(
        tuple(budgets), tuple(results), tuple(notes), ratio_max, ratio_min, slope
    )


def decay_exponent_estimate(budgets, values_log2, *, window: float = 0.5):
    """Window extrema and slope of log(value)/log(budget) for a decay series."""
    pts = [(n, lv) for n, lv in zip(budgets, values_log2) if lv != NEG_INF]
    if len(pts) < 3:
        raise ConfigError("need at least 3 finite points")
    tail = tail_window(pts, window)
    ratios = [lv / log2_int(n) for n, lv in tail]
    slope = fit_slope([log2_int(n) for n, _ in tail], [lv for _, lv in tail])
    return max(ratios), min(ratios), slope


# ---------------------------------------------------------------------------
# Exhaustive oracles (tiny instances, exact arithmetic)


def brute_force_min_partition(
    spec, threshold, max_depth: int
) -> tuple[int, Partition]:
    """Exact minimum cardinality over all dyadic partitions below a threshold.

    Exhaustive keep-or-split recursion over the full depth-limited tree; no
    reliance on monotonicity or on the adaptive construction.
    """
    ev = _as_evaluator(spec)
    d = ev.dimension
    if max_depth * d > 16:
        raise GuardError("brute force limited to max_depth * dimension <= 16")
    t = _as_threshold(threshold)
    exact = t.exact is not None and ev.supports_exact()

    def rec(cube: CubeId):
        v = ev.value(cube, exact)
        best = (1, [cube]) if value_lt(v, t) else None
        if cube.level < max_depth:
            total, parts = 0, []
            for child in cube.children():
                sub = rec(child)
                if sub is None:
                    parts = None
                    break
                total += sub[0]
                parts.extend(sub[1])
            if parts is not None and (best is None or total < best[0]):
                best = (total, parts)
        return best

    result = rec(unit_cube(d))
    if result is None:
        raise ConfigError(f"no partition below the threshold within depth {max_depth}")
    count, cubes = result
    return count, Partition(tuple(sorted(cubes, key=lambda c: (c.level, c.coords))), classical_grid(d))


def brute_force_dual_values(spec, budgets, max_depth: int) -> list[Fraction | None]:
    """Exact dual optima over ALL depth-limited dyadic partitions, per budget.

    For each candidate value v (every cube value in the tree) the minimal
    cardinality of a partition with maximum <= v is computed bottom-up; the
    dual optimum for a budget is the smallest feasible candidate.
    """
    ev = _as_evaluator(spec)
    d = ev.dimension
    if max_depth * d > 16:
        raise GuardError("brute force limited to max_depth * dimension <= 16")
    if not ev.supports_exact():
        raise ConfigError("dual oracle needs an exact value channel")

    cubes_by_level: list[list[CubeId]] = [[unit_cube(d)]]
    for _ in range(max_depth):
        cubes_by_level.append([c for parent in cubes_by_level[-1] for c in parent.children()])
    values: dict[CubeId, Fraction] = {}
    for level in cubes_by_level:
        for cube in level:
            values[cube] = ev.value(cube, True).exact
    candidates = sorted({v for v in values.values() if v > 0})

    INF = float("inf")

    def min_cards(v: Fraction) -> dict[CubeId, float]:
        mc: dict[CubeId, float] = {}
        for level in reversed(cubes_by_level):
            for cube in level:
                if values[cube] <= v:
                    mc[cube] = 1
                elif cube.level == max_depth:
                    mc[cube] = INF
                else:
                    mc[cube] = sum(mc[c] for c in cube.children())
        return mc

    root = unit_cube(d)
    feasible = [(v, min_cards(v)[root]) for v in candidates]
    out: list[Fraction | None] = []
    for budget in budgets:
        best = None
        for v, cards in feasible:
            if cards <= budget:
                best = v
                break
        out.append(best)
    return out


# ---------------------------------------------------------------------------
# Birman-Solomjak subdivision


@dataclass(frozen=True)
class BSTrajectory:
    a: Fraction
    counts: tuple[int, ...]
    maxima: tuple[Value, ...]
    cubes: tuple[CubeId, ...] | None  # final partition when materialised


def birman_solomjak(
    spec_j,
    a,
    steps: int,
    *,
    initial: list[CubeId] | None = None,
    max_cubes: int = 4_000_000,
) -> BSTrajectory:
    """Iterated elementary extensions splitting near-maximal weighted cubes.

    The driving functional is J(Q) * vol(Q)^a for a superadditive J; at each
    step every cube within 2^(-da) of the current partition maximum is split
    into its 2^d children.  Runs on value classes for closed-form J (counts
    stay exact big integers), else on explicit cube lists.
    """
    af = Fraction(a) if not isinstance(a, Fraction) else a
    if af <= 0:
        raise ConfigError("the volume exponent a must be positive")
    if steps < 0:
        raise ConfigError("steps must be nonnegative")
    weighted = VolumeWeight(spec_j, af, Fraction(1))
    ev = Evaluator(weighted)
    d = ev.dimension
    exact = ev.supports_exact()
    shift = af * d  # the split rule threshold is max / 2^(da)

    def split_threshold(eta: Value) -> Value:
        ex = None
        if eta.exact is not None and shift.denominator == 1:
            ex = eta.exact / (1 << int(shift))
        return Value(eta.log2 - float(shift), ex)

    root = unit_cube(d)
    model = class_model(ev) if initial is None else None
    counts: list[int] = []
    maxima: list[Value] = []
    if model is not None:
        states: dict = {(0, model.root): 1}
        zero_cubes = 0  # zero-valued cubes never split and never carry the max
        for k in range(steps + 1):
            values = {key: model.value(key[1], key[0], exact) for key in states}
            eta = ZERO
            for v in values.values():
                if not v.is_zero:
                    eta = value_max(eta, v)
            counts.append(sum(states.values()) + zero_cubes)
            maxima.append(eta)
            if k == steps:
                break
            theta = split_threshold(eta)
            nxt: dict = {}
            for (level, state), cnt in states.items():
                if not value_lt(values[(level, state)], theta):
                    kids, zero_mult = model.children(state, level + 1)
                    zero_cubes += cnt * zero_mult
                    for child, mult in kids:
                        key = (level + 1, child)
                        nxt[key] = nxt.get(key, 0) + cnt * mult
                else:
                    nxt[(level, state)] = nxt.get((level, state), 0) + cnt
            states = nxt
            if sum(states.values()) + zero_cubes > max_cubes:
                raise GuardError("subdivision exceeded the cube guard")
        _assert_nonincreasing(maxima)
        return BSTrajectory(af, tuple(counts), tuple(maxima), None)

    cubes = list(initial) if initial is not None else [root]
    report = validate_partition(Partition(tuple(cubes), classical_grid(d)))
    if not report.is_partition_of_unit:
        raise ConfigError("initial cube list is not a partition of the unit cube")
    vals = [ev.value(c, exact) for c in cubes]
    for k in range(steps + 1):
        eta = ZERO
        for v in vals:
            if not v.is_zero:
                eta = value_max(eta, v)
        counts.append(len(cubes))
        maxima.append(eta)
        if k == steps:
            break
        theta = split_threshold(eta)
        nxt_cubes: list[CubeId] = []
        nxt_vals: list[Value] = []
        for cube, v in zip(cubes, vals):
            if not value_lt(v, theta):
                for child in cube.children():
                    nxt_cubes.append(child)
                    nxt_vals.append(ev.value(child, exact))
            else:
                nxt_cubes.append(cube)
                nxt_vals.append(v)
        cubes, vals = nxt_cubes, nxt_vals
        if len(cubes) > max_cubes:
            raise GuardError("subdivision exceeded the cube guard")
    _assert_nonincreasing(maxima)
    return BSTrajectory(af, tuple(counts), tuple(maxima), tuple(cubes))


def _assert_nonincreasing(maxima: list[Value]) -> None:
    for prev, cur in zip(maxima, maxima[1:]):
        if cur.log2 > prev.log2 + 1e-12:
            raise AssertionError("partition maxima increased during subdivision")


@dataclass(frozen=True)
class BSBoundCheck:
    products_log2: tuple[float, ...]  # log2 of max * (N_k - N_0)^(1+a), k >= 1
    measured_constant: float
    tail_decreasing: bool


def bs_bound_check(trajectory: BSTrajectory, *, j_total=1, epsilon=1.0) -> BSBoundCheck:
    """Measured constant of the subdivision bound.

    sup_k  max_k * (N_k - N_0)^(1+a) / (epsilon^min(1,a) * J_total),
    with the empty supremum reported as 0.
    """
    a = float(trajectory.a)
    n0 = trajectory.counts[0]
    jt = as_value(j_total)
    eps_pow = float(epsilon) ** min(1.0, a)
    prods = []
    for nk, eta in zip(trajectory.counts[1:], trajectory.maxima[1:]):
        if nk <= n0 or eta.is_zero:
            continue
        prods.append(eta.log2 + (1.0 + a) * log2_int(nk - n0))
    if not prods:
        return BSBoundCheck((), 0.0, True)
    measured = max(2.0**p for p in prods) / (eps_pow * 2.0**jt.log2)
    tail = tail_window(prods, 0.5)
    decreasing = all(b <= a_ + 1e-12 for a_, b in zip(tail, tail[1:]))
    return BSBoundCheck(tuple(prods), measured, decreasing)
