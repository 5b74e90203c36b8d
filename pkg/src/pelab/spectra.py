"""Level power sums, critical moments, coarse counting and inequality reports.

All limsup/liminf-type quantities get finite-level surrogates: extrema over
the tail window of the level range, reported next to least-squares slopes.
Slopes cancel multiplicative constants (the polynomial prefactors that bias
single-level ratios), window extrema keep liminf/limsup behaviour visible;
summaries state which one they use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

from .adaptive import dual_sweep, entropy_estimate, threshold_summary
from .cubes import GridScheme, classical_grid
from .evaluate import Evaluator
from .numerics import (
    NEG_INF,
    ConfigError,
    Value,
    fit_slope,
    log2_int,
    tail_window,
)
from .specs import (
    MEASURE_LEAVES,
    PowerSpec,
    ProductSpec,
    Spec,
    VolumeWeight,
)


def _as_evaluator(spec) -> Evaluator:
    return spec if isinstance(spec, Evaluator) else Evaluator(spec)


@dataclass(frozen=True)
class SpectrumTable:
    """A tabulated series with strictly increasing abscissae (first column)."""

    kind: str
    columns: tuple[str, ...]
    rows: tuple[tuple, ...]
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        absc = [row[0] for row in self.rows]
        if any(b <= a for a, b in zip(absc, absc[1:])):
            raise ConfigError(f"{self.kind} table abscissae must be strictly increasing")


# ---------------------------------------------------------------------------
# Partition function and its zero


def tau_n(spec, grid: GridScheme, n: int, q) -> float:
    """Normalised log2 of the level power sum: log2(sum values^q) / n.

    Zero-valued cubes are dropped (the 0^0 = 0 convention at q = 0); an empty
    positive level yields -inf.
    """
    if n < 1:
        raise ConfigError("tau_n needs n >= 1")
    ev = _as_evaluator(spec)
    s = ev.tau_sum_log2(n, q, grid)
    return s / n if s != NEG_INF else NEG_INF


def tau_table(spec, grid: GridScheme, levels, qs) -> SpectrumTable:
    ev = _as_evaluator(spec)
    qs = sorted(qs)
    levels = sorted(levels)
    rows = tuple(
        (q, *(tau_n(ev, grid, n, q) for n in levels)) for q in qs
    )
    cols = ("q", *(f"tau_n{n}" for n in levels))
    return SpectrumTable("tau", cols, rows, {"levels": list(levels)})


def q_zero(spec, grid: GridScheme, n: int, tol: float = 1e-9) -> float:
    """The unique zero of tau_n, by monotone bisection.

    Requires the level maximum to sit strictly below 1 (so tau_n decreases
    strictly) and tau_n(0) >= 0.
    """
    ev = _as_evaluator(spec)
    sup = ev.sup_level_log2(n, grid)
    if sup >= 0:
        raise ConfigError(f"level {n} carries values >= 1; tau_n has no bracketed zero")
    if sup == NEG_INF:
        raise ConfigError(f"level {n} has no positive cubes")
    t0 = tau_n(ev, grid, n, Fraction(0))
    if t0 < 0:
        raise ConfigError(f"tau_n(0) < 0 at level {n}")
    if t0 <= tol:
        return 0.0
    hi = 1.0
    while tau_n(ev, grid, n, hi) >= 0:
        hi *= 2.0
        if hi > 2.0**40:
            raise ConfigError(f"no sign change found for tau_n at level {n}")
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        f = tau_n(ev, grid, n, mid)
        if f > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-15:
            break
    q = 0.5 * (lo + hi)
    if abs(tau_n(ev, grid, n, q)) > tol:
        raise ConfigError(f"bisection stalled above tolerance at level {n}")
    return q


# ---------------------------------------------------------------------------
# Coarse multifractal counting


def _coarse_threshold(n: int, alpha: float) -> Value:
    shift = Fraction(alpha) * n
    exact = None
    if shift.denominator == 1:
        e = int(shift)
        exact = Fraction(1, 1 << e) if e >= 0 else Fraction(1 << -e)
    return Value(-float(alpha) * n, exact)


def coarse_count(spec, grid: GridScheme, n: int, alpha: float) -> int:
    """Number of level-n members with value >= 2^(-alpha n), as written (weak)."""
    if alpha <= 0:
        raise ConfigError("alpha must be positive")
    ev = _as_evaluator(spec)
    thr = _coarse_threshold(n, alpha)
    if grid.kind == "classical":
        groups = ev.level_groups(n)
        if groups is not None:
            total = 0
            for log2v, count, exact in groups:
                if exact is not None and thr.exact is not None:
                    if exact >= thr.exact:
                        total += count
                elif log2v >= thr.log2:
                    total += count
            return total
    return sum(1 for _, v in ev.iter_level_values(grid, n) if v.log2 >= thr.log2)


def nalpha_table(spec, grid: GridScheme, levels, alphas) -> SpectrumTable:
    ev = _as_evaluator(spec)
    levels = sorted(levels)
    alphas = sorted(alphas)
    rows = tuple(
        (n, *(coarse_count(ev, grid, n, a) for a in alphas)) for n in levels
    )
    cols = ("n", *(f"N_alpha_{a:g}" for a in alphas))
    return SpectrumTable("nalpha", cols, rows, {"alphas": list(alphas)})


@dataclass(frozen=True)
class CoarseDimensions:
    """Optimised coarse counting exponents over an alpha grid.

    Per alpha the count exponent log2+(N)/n is summarised by window extrema
    and by a tail slope restricted to positive counts; the upper optimised
    dimension takes max(window max, clipped slope)/alpha (the slope removes
    the polynomial prefactor bias of finite levels), the lower one stays with
    the faithful window minimum (zero-count levels enter as 0, as defined).
    """

    alphas: tuple[float, ...]
    levels: tuple[int, ...]
    counts: tuple[tuple[int, ...], ...]  # [alpha][level index]
    upper: float
    lower: float
    upper_alpha: float
    lower_alpha: float
    per_alpha: tuple[dict, ...]


def coarse_dimensions(
    spec, grid: GridScheme, levels, alphas, *, window: float = 0.5
) -> CoarseDimensions:
    ev = _as_evaluator(spec)
    levels = sorted(levels)
    alphas = sorted(alphas)
    d = ev.dimension
    # One grouped sweep per level, shared across the whole alpha grid.
    sorted_groups: list[list[tuple[float, int]]] = []
    for n in levels:
        groups = ev.level_groups(n)
        if groups is None:
            groups = [(v.log2, 1, None) for _, v in ev.iter_level_values(grid, n)]
        pairs = sorted(((lv, c) for lv, c, _ in groups), reverse=True)
        acc = 0
        prefix = []
        for lv, c in pairs:
            acc += c
            prefix.append((lv, acc))
        sorted_groups.append(prefix)

    counts_by_alpha: list[tuple[int, ...]] = []
    per_alpha: list[dict] = []
    upper = lower = NEG_INF
    upper_alpha = lower_alpha = math.nan
    for alpha in alphas:
        counts = []
        for n, prefix in zip(levels, sorted_groups):
            thr = -alpha * n
            total = 0
            for lv, acc in prefix:
                if lv >= thr:
                    total = acc
                else:
                    break
            counts.append(total)
        counts_by_alpha.append(tuple(counts))
        ratios = [log2_int(c) / n if c > 0 else 0.0 for n, c in zip(levels, counts)]
        tail = tail_window(list(zip(levels, counts, ratios)), window)
        rmax = max(r for _, _, r in tail)
        rmin = min(r for _, _, r in tail)
        pos = [(n, c) for n, c, _ in tail if c > 0]
        if len(pos) >= 2:
            slope = fit_slope([n for n, _ in pos], [log2_int(c) for _, c in pos])
            slope = min(max(slope, 0.0), float(d))
        else:
            slope = rmax
        stats = {"alpha": alpha, "ratio_max": rmax, "ratio_min": rmin, "slope": slope}
        per_alpha.append(stats)
        up = max(rmax, slope) / alpha
        low = rmin / alpha
        if up > upper:
            upper, upper_alpha = up, alpha
        if low > lower:
            lower, lower_alpha = low, alpha
    return CoarseDimensions(
        tuple(alphas),
        tuple(levels),
        tuple(counts_by_alpha),
        upper,
        lower,
        upper_alpha,
        lower_alpha,
        tuple(per_alpha),
    )


def minkowski_estimate(spec, grid: GridScheme, levels, *, window: float = 0.5) -> float:
    """Upper box-counting exponent from positive-cube counts.

    With three or more levels the estimate is the tail slope of log2(count)
    against the level, which cancels the multiplicative constant that biases
    single-level ratios; otherwise the window max of tau_n(0) is returned.
    """
    ev = _as_evaluator(spec)
    levels = sorted(levels)
    ratios = [tau_n(ev, grid, n, Fraction(0)) for n in levels]
    finite = [(n, r) for n, r in zip(levels, ratios) if r != NEG_INF]
    if len(finite) >= 3:
        tail = tail_window(finite, window)
        return fit_slope([n for n, _ in tail], [n * r for n, r in tail])
    if not finite:
        return NEG_INF
    return max(tail_window([r for _, r in finite], window))


# ---------------------------------------------------------------------------
# Critical exponents


@dataclass(frozen=True)
class CriticalExponents:
    levels: tuple[int, ...]
    q_series: tuple[float, ...]
    q_upper: float  # window max of the per-level zeros
    q_lower: float  # window min
    dim_infinity: float
    tau0: float
    tau1: float
    minkowski_upper: float
    coarse: CoarseDimensions
    kappa_diagnostic: dict


def critical_exponents(
    spec,
    grid: GridScheme,
    levels,
    alphas=None,
    *,
    window: float = 0.5,
    zero_tol: float = 1e-9,
) -> CriticalExponents:
    """Per-level zeros of tau_n with window summaries and companion estimates."""
    ev = _as_evaluator(spec)
    levels = sorted(levels)
    if not levels:
        raise ConfigError("level range is empty")
    q_series = [q_zero(ev, grid, n, zero_tol) for n in levels]
    tail_q = tail_window(q_series, window)
    q_upper, q_lower = max(tail_q), min(tail_q)
    sups = [ev.sup_level_log2(n, grid) for n in levels]
    dim_inf = min(-s / n for n, s in tail_window(list(zip(levels, sups)), window))
    tau0 = max(tail_window([tau_n(ev, grid, n, Fraction(0)) for n in levels], window))
    tau1 = max(tail_window([tau_n(ev, grid, n, Fraction(1)) for n in levels], window))
    if alphas is None:
        # The optimising alpha sits at or above the decay exponent of the
        # level maxima; anchor the grid there (exactly, for grid-aligned
        # specs) and fan out to four times it.
        base = max(dim_inf, 1e-3)
        alphas = sorted({base * (0.875 + k * 0.125) for k in range(26)})
    coarse = coarse_dimensions(ev, grid, levels, alphas, window=window)
    kappa = _kappa_diagnostic(ev, grid, levels, q_upper)
    return CriticalExponents(
        tuple(levels),
        tuple(q_series),
        q_upper,
        q_lower,
        dim_inf,
        tau0,
        tau1,
        tau0,
        coarse,
        kappa,
    )


def _kappa_diagnostic(ev: Evaluator, grid: GridScheme, levels, q_crit: float, delta: float = 0.1) -> dict:
    """Partial-sum trend of sum values^q across levels, just below/above the
    critical moment.  Convergent above, divergent below is the healthy sign."""
    out: dict = {"delta": delta}
    for label, q in (("above", q_crit + delta), ("below", q_crit - delta)):
        if q < 0:
            out[label] = None
            continue
        terms = [ev.tau_sum_log2(n, q, grid) for n in levels]
        trend = terms[-1] - terms[len(terms) // 2]
        out[label] = {"q": q, "last_term_log2": terms[-1], "trend": trend,
                      "converging": trend < 0}
    healthy = True
    if out.get("above"):
        healthy &= out["above"]["converging"]
    if out.get("below"):
        healthy &= not out["below"]["converging"]
    out["consistent"] = healthy
    return out


# ---------------------------------------------------------------------------
# Shifted partition function (subdifferential bracket)


@dataclass(frozen=True)
class ShiftedTauProfile:
    offsets: tuple[float, ...]
    c_values: tuple[float, ...]  # window max of tau_n(q_n + offset) per offset
    q_lower: float
    slope_left: float  # one-sided secant of c at 0 from the negative side
    slope_right: float
    bracket_lower: float  # (right/left slope ratio) * q_lower
    bracket_upper: float


def shifted_tau_profile(
    spec,
    grid: GridScheme,
    levels,
    offsets=None,
    *,
    window: float = 0.5,
    zero_tol: float = 1e-9,
) -> ShiftedTauProfile:
    """Window max of tau_n evaluated at its own zero plus an offset grid.

    One-sided secants at the innermost offsets (default spacing 1/64)
    estimate the subdifferential endpoints at 0; with the window min of the
    per-level zeros they yield the lower-dimension bracket
    (right/left) * q_lower <= optimised lower coarse dimension <= q_lower.
    """
    ev = _as_evaluator(spec)
    levels = sorted(levels)
    if offsets is None:
        offsets = sorted({k / 64 for k in range(-8, 9)})
    offsets = sorted(offsets)
    if 0.0 not in offsets:
        offsets = sorted(offsets + [0.0])
    zeros = [q_zero(ev, grid, n, zero_tol) for n in levels]
    window_pairs = tail_window(list(zip(levels, zeros)), window)
    q_lower = min(q for _, q in window_pairs)
    c_values = []
    for off in offsets:
        vals = [
            tau_n(ev, grid, n, qn + off)
            for n, qn in window_pairs
            if qn + off >= 0
        ]
        c_values.append(max(vals) if vals else math.nan)
    h = min(o for o in offsets if o > 0)
    c0 = c_values[offsets.index(0.0)]
    c_left = c_values[offsets.index(-h)] if -h in offsets else math.nan
    c_right = c_values[offsets.index(h)]
    slope_left = (c0 - c_left) / h
    slope_right = (c_right - c0) / h
    bracket_lower = (slope_right / slope_left) * q_lower if slope_left != 0 else math.nan
    return ShiftedTauProfile(
        tuple(offsets),
        tuple(c_values),
        q_lower,
        slope_left,
        slope_right,
        bracket_lower,
        q_lower,
    )


# ---------------------------------------------------------------------------
# Consolidated inequality report


@dataclass(frozen=True)
class CheckResult:
    name: str
    relation: str
    lhs: float
    rhs: float
    passed: bool | None  # None marks an unavailable entry
    note: str = ""


@dataclass(frozen=True)
class BoundsReport:
    checks: tuple[CheckResult, ...]
    estimates: dict
    tolerance: float

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks if c.passed is not None)


def _power_shape(spec: Spec) -> Fraction | None:
    """Exponent s when the spec is measure^s for a plain measure, else None."""

    def is_measure(node) -> bool:
        if isinstance(node, MEASURE_LEAVES):
            return True
        if isinstance(node, ProductSpec):
            return is_measure(node.left) and is_measure(node.right)
        return False

    if isinstance(spec, PowerSpec) and is_measure(spec.inner):
        return spec.exponent
    if is_measure(spec):
        return Fraction(1)
    return None


def bounds_report(
    spec,
    grid: GridScheme,
    *,
    levels,
    xs,
    alphas=None,
    budgets=None,
    tol: float = 0.05,
    window: float = 0.5,
) -> BoundsReport:
    """Run every estimator and emit the pairwise inequality verdicts.

    Estimator conventions: the count growth exponent uses the tail slope
    (constants cancel); the lower estimates use faithful window minima.  All
    comparisons carry the configured tolerance; entries whose prerequisites
    fail are reported as unavailable rather than failed.
    """
    ev = _as_evaluator(spec)
    ce = critical_exponents(ev, grid, levels, alphas, window=window)
    ent = entropy_estimate(ev, grid, xs, window=window)
    checks: list[CheckResult] = []

    def check(name, relation, lhs, rhs, passed, note=""):
        checks.append(CheckResult(name, relation, lhs, rhs, passed, note))

    f_upper, f_lower = ce.coarse.upper, ce.coarse.lower
    # Upper count exponent: tail slope (constants cancel).  Lower: the window
    # minimum, capped by the slope because exact-dyadic breakpoints bias
    # single ratios upward, never the regression.
    h_upper, h_lower = ent.slope, min(ent.ratio_min, ent.slope)
    q_est = ce.q_upper
    check("coarse_lower<=count_lower", "<=", f_lower, h_lower, f_lower <= h_lower + tol)
    check("count_lower<=count_upper", "<=", h_lower, h_upper, h_lower <= h_upper + tol)
    check("count_upper==critical", "==", h_upper, q_est, abs(h_upper - q_est) <= tol)
    check("coarse_upper==critical", "==", f_upper, q_est, abs(f_upper - q_est) <= tol)
    kd = ce.kappa_diagnostic
    check(
        "summability_diagnostic",
        "~",
        float(kd["consistent"]),
        1.0,
        bool(kd["consistent"]),
        "partial sums converge above / diverge below the critical moment",
    )

    if budgets is not None:
        sweep = dual_sweep(ev, grid, budgets, window=window)
        if math.isnan(sweep.slope):
            check("dual_decay==-1/critical", "==", math.nan, math.nan, None, "sweep infeasible")
        else:
            target = -1.0 / q_est if q_est > 0 else math.nan
            check(
                "dual_decay==-1/critical",
                "==",
                sweep.slope,
                target,
                abs(sweep.slope - target) <= tol,
            )
    else:
        sweep = None
        check("dual_decay==-1/critical", "==", math.nan, math.nan, None, "no budgets given")

    dim_inf, tau0, tau1 = ce.dim_infinity, ce.tau0, ce.tau1
    d = float(ev.dimension)
    dM = ce.minkowski_upper
    if q_est >= 1.0 - tol:
        if tau0 - tau1 > 0 and dim_inf > 0:
            chain = [
                ("geom1.a", tau0 / (tau0 - tau1), q_est),
                ("geom1.b", q_est, (dim_inf + tau1) / dim_inf),
                ("geom1.c", (dim_inf + tau1) / dim_inf, tau0 / dim_inf),
                ("geom1.d", tau0 / dim_inf, dM / dim_inf),
                ("geom1.e", dM / dim_inf, d / dim_inf),
            ]
            for name, lhs, rhs in chain:
                check(name, "<=", lhs, rhs, lhs <= rhs + tol)
        else:
            check("geom1", "<=", math.nan, math.nan, None, "degenerate denominators")
    if q_est <= 1.0 + tol:
        if tau0 - tau1 > 0 and dim_inf > 0 and dM - tau1 > 0:
            chain = [
                ("geom2.a", (dim_inf + tau1) / dim_inf, q_est),
                ("geom2.b", q_est, tau0 / (tau0 - tau1)),
                ("geom2.c", tau0 / (tau0 - tau1), dM / (dM - tau1)),
            ]
            for name, lhs, rhs in chain:
                check(name, "<=", lhs, rhs, lhs <= rhs + tol)
        else:
            check("geom2", "<=", math.nan, math.nan, None, "degenerate denominators")

    if isinstance(ev.spec, VolumeWeight) and ev.spec.a > 0 and ev.spec.b == 1:
        inner_tau0 = max(
            tail_window(
                [tau_n(Evaluator(ev.spec.inner), grid, n, Fraction(0)) for n in sorted(levels)],
                window,
            )
        )
        bound = inner_tau0 / (inner_tau0 + float(ev.spec.a) * d)
        check("weighted_critical_bound", "<=", q_est, bound, q_est <= bound + tol)

    s = _power_shape(ev.spec)
    if s is not None:
        expected = 1.0 / float(s)
        check("power_critical==1/s", "==", q_est, expected, abs(q_est - expected) <= tol)
        check("power_slope==1/s", "==", ent.slope, expected, abs(ent.slope - expected) <= tol)

    estimates = {
        "q_upper": ce.q_upper,
        "q_lower": ce.q_lower,
        "dim_infinity": dim_inf,
        "tau0": tau0,
        "tau1": tau1,
        "minkowski_upper": dM,
        "coarse_upper": f_upper,
        "coarse_lower": f_lower,
        "count_slope": ent.slope,
        "count_ratio_max": ent.ratio_max,
        "count_ratio_min": ent.ratio_min,
    }
    if sweep is not None and not math.isnan(sweep.slope):
        estimates["dual_slope"] = sweep.slope
    return BoundsReport(tuple(checks), estimates, tol)


def format_bounds_report(report: BoundsReport) -> str:
    lines = []
    for c in report.checks:
        if c.passed is None:
            status = "UNAVAILABLE"
        else:
            status = "PASS" if c.passed else "FAIL"
        lines.append(
            f"{status:11s} {c.name}: {c.lhs:.6g} {c.relation} {c.rhs:.6g}"
            + (f"  ({c.note})" if c.note else "")
        )
    lines.append(f"tolerance: {report.tolerance}")
    lines.append("overall: " + ("PASS" if report.all_passed else "FAIL"))
    return "\n".join(lines)
