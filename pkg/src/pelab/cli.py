"""Command-line interface.

Subcommands cover partition construction, level spectra, coarse multifractal
counts, the dual budget sweep, the iterated subdivision, the consolidated
inequality report, and re-rendering of stored partitions.  Exit codes:
0 success, 1 a verdict check failed, 2 configuration error, 3 resource guard.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from fractions import Fraction
from pathlib import Path

from . import emit
from .adaptive import (
    adaptive_partition,
    birman_solomjak,
    bs_bound_check,
    dual_sweep,
    entropy_estimate,
)
from .cubes import GridScheme, classical_grid, interior_grid
from .evaluate import Evaluator, positive_grid
from .numerics import BudgetError, ConfigError, GuardError, PelabError, as_value
from .spectra import (
    SpectrumTable,
    bounds_report,
    critical_exponents,
    format_bounds_report,
    nalpha_table,
    q_zero,
    tau_table,
)
from .specs import parse_spec

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_GUARD = 3


def _env_default(name: str, fallback):
    return os.environ.get(f"PELAB_{name}", fallback)


def _load_spec(path: str):
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read spec file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"spec file {path} is not valid JSON: {exc}") from exc
    return parse_spec(doc)


def _make_grid(name: str, spec) -> GridScheme:
    d = spec.dimension
    if name == "classical":
        return classical_grid(d)
    if name == "interior":
        return interior_grid(d)
    if name == "positive":
        return positive_grid(Evaluator(spec))
    raise ConfigError(f"unknown grid scheme {name!r}")


def _parse_int_range(text: str) -> list[int]:
    """"4:20" or "4:20:2" (inclusive) or "1,2,5"."""
    if "," in text:
        return [int(x) for x in text.split(",") if x.strip()]
    parts = text.split(":")
    if len(parts) == 1:
        return [int(parts[0])]
    lo, hi = int(parts[0]), int(parts[1])
    step = int(parts[2]) if len(parts) > 2 else 1
    if step <= 0 or hi < lo:
        raise ConfigError(f"bad range {text!r}")
    return list(range(lo, hi + 1, step))


def _parse_float_grid(text: str) -> list[float]:
    if "," in text:
        return [float(x) for x in text.split(",") if x.strip()]
    parts = text.split(":")
    if len(parts) == 1:
        return [float(parts[0])]
    lo, hi = float(parts[0]), float(parts[1])
    step = float(parts[2]) if len(parts) > 2 else 1.0
    if step <= 0 or hi < lo:
        raise ConfigError(f"bad grid {text!r}")
    out = []
    x = lo
    while x <= hi + 1e-12:
        out.append(round(x, 12))
        x += step
    return out


def _positive(name: str, value: float) -> float:
    if value <= 0:
        raise ConfigError(f"{name} must be positive")
    return value


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _add_common(sub, *, needs_spec=True):
    if needs_spec:
        sub.add_argument("--spec", required=True, help="measure/function spec JSON file")
        sub.add_argument(
            "--grid",
            default=_env_default("GRID", "classical"),
            choices=["classical", "interior", "positive"],
            help="cube family to run over",
        )
    sub.add_argument("--out", default=_env_default("OUT", "out"), help="output directory")
    sub.add_argument("--tol", type=float, default=float(_env_default("TOL", "0.05")))
    sub.add_argument("--seed", type=int, default=int(_env_default("SEED", "0")),
                     help="seed for sampling-based diagnostics")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pelab", description=__doc__)
    sp = p.add_subparsers(dest="command", required=True)

    c = sp.add_parser("partition", help="build threshold partitions, emit JSON and SVG")
    _add_common(c)
    c.add_argument("--threshold", action="append", required=True,
                   help="threshold t (repeatable); value below which cubes are kept")
    c.set_defaults(func=cmd_partition)

    c = sp.add_parser("spectra", help="level power-sum tables and critical moments")
    _add_common(c)
    c.add_argument("--levels", default="1:20", help="level range lo:hi[:step]")
    c.add_argument("--q-grid", default="0:3:0.25")
    c.set_defaults(func=cmd_spectra)

    c = sp.add_parser("multifractal", help="coarse counts and optimised dimensions")
    _add_common(c)
    c.add_argument("--levels", default="4:24:4")
    c.add_argument("--alpha-grid", default=None)
    c.set_defaults(func=cmd_multifractal)

    c = sp.add_parser("dual", help="smallest achievable maxima under budgets")
    _add_common(c)
    c.add_argument("--budget", default="8,16,32,64,128,256,512,1024",
                   help="comma list or lo:hi:step of cardinality budgets")
    c.set_defaults(func=cmd_dual)

    c = sp.add_parser("bs", help="iterated near-maximal subdivision trajectory")
    _add_common(c)
    c.add_argument("--a", default="1", help="volume exponent a > 0")
    c.add_argument("--steps", type=int, default=10)
    c.add_argument("--epsilon", type=float, default=1.0)
    c.set_defaults(func=cmd_bs)

    c = sp.add_parser("bounds", help="consolidated inequality report (exit 1 on FAIL)")
    _add_common(c)
    c.add_argument("--levels", default="8,12,16,24,32,48,64,96,128")
    c.add_argument("--alpha-grid", default=None)
    c.add_argument("--x-grid", default="10:34:2", help="exponents k for x = 2^k")
    c.add_argument("--budget", default="8,16,32,64,128,256,512,1024,2048,4096")
    c.set_defaults(func=cmd_bounds)

    c = sp.add_parser("render", help="re-render stored partition JSON files to SVG")
    _add_common(c, needs_spec=False)
    c.add_argument("--spec", required=False, help="spec file (needed for predicate grids)")
    c.add_argument("--partitions", nargs="+", required=True)
    c.set_defaults(func=cmd_render)
    return p


def cmd_partition(args) -> int:
    spec = _load_spec(args.spec)
    grid = _make_grid(args.grid, spec)
    ev = Evaluator(spec)
    out = _out_dir(args)
    thresholds = [as_value(t) for t in args.threshold]
    if any(b.log2 >= a.log2 for a, b in zip(thresholds, thresholds[1:])):
        raise ConfigError("thresholds must be strictly decreasing")
    results = []
    for i, t in enumerate(thresholds):
        res = adaptive_partition(ev, grid, t)
        emit.write_json(emit.partition_record(res, ev), out / f"partition_{i:03d}.json")
        results.append(res)
        print(f"threshold {2.0**t.log2:g}: {res.count} cubes")
    if spec.dimension == 2:
        lums = emit.layer_luminances(len(results))
        layers = [(list(r.partition.cubes), lum) for r, lum in zip(results, lums)]
        (out / "partitions.svg").write_text(emit.render_svg(layers), encoding="utf-8")
        print(f"wrote {out / 'partitions.svg'}")
    return EXIT_OK


def cmd_spectra(args) -> int:
    spec = _load_spec(args.spec)
    grid = _make_grid(args.grid, spec)
    ev = Evaluator(spec)
    out = _out_dir(args)
    levels = _parse_int_range(args.levels)
    qs = _parse_float_grid(args.q_grid)
    emit.write_csv(tau_table(ev, grid, levels, qs), out / "tau.csv")
    ce = critical_exponents(ev, grid, levels)
    zeros = SpectrumTable(
        "tau",
        ("n", "q_zero"),
        tuple((n, qv) for n, qv in zip(ce.levels, ce.q_series)),
    )
    emit.write_csv(zeros, out / "q_zero.csv")
    emit.write_json(
        {
            "q_upper": ce.q_upper,
            "q_lower": ce.q_lower,
            "dim_infinity": ce.dim_infinity,
            "tau0": ce.tau0,
            "tau1": ce.tau1,
            "coarse_upper": ce.coarse.upper,
            "coarse_lower": ce.coarse.lower,
            "kappa_diagnostic": ce.kappa_diagnostic,
        },
        out / "critical.json",
    )
    print(f"q critical estimate: {ce.q_upper:.6f} (window min {ce.q_lower:.6f})")
    return EXIT_OK


def cmd_multifractal(args) -> int:
    spec = _load_spec(args.spec)
    grid = _make_grid(args.grid, spec)
    ev = Evaluator(spec)
    out = _out_dir(args)
    levels = _parse_int_range(args.levels)
    ce = critical_exponents(ev, grid, levels,
                            _parse_float_grid(args.alpha_grid) if args.alpha_grid else None)
    emit.write_csv(
        nalpha_table(ev, grid, levels, list(ce.coarse.alphas)), out / "nalpha.csv"
    )
    emit.write_json(
        {
            "alphas": list(ce.coarse.alphas),
            "upper": ce.coarse.upper,
            "lower": ce.coarse.lower,
            "upper_alpha": ce.coarse.upper_alpha,
            "lower_alpha": ce.coarse.lower_alpha,
            "per_alpha": list(ce.coarse.per_alpha),
        },
        out / "coarse.json",
    )
    print(f"coarse dimensions: upper {ce.coarse.upper:.6f}, lower {ce.coarse.lower:.6f}")
    return EXIT_OK


def cmd_dual(args) -> int:
    spec = _load_spec(args.spec)
    grid = _make_grid(args.grid, spec)
    out = _out_dir(args)
    budgets = _parse_int_range(args.budget)
    sweep = dual_sweep(spec, grid, budgets)
    rows = []
    for n, r in zip(sweep.budgets, sweep.results):
        if r is None:
            continue
        rows.append((n, r.value.log2, r.witness_threshold.log2, r.witness_count))
    table = SpectrumTable(
        "gamma", ("budget", "value_log2", "witness_threshold_log2", "witness_count"),
        tuple(rows),
    )
    emit.write_csv(table, out / "dual.csv")
    emit.write_json(
        {
            "ratio_max": sweep.ratio_max,
            "ratio_min": sweep.ratio_min,
            "slope": sweep.slope,
            "notes": list(sweep.notes),
        },
        out / "dual.json",
    )
    for note in sweep.notes:
        print(note, file=sys.stderr)
    print(f"decay slope: {sweep.slope:.6f}")
    return EXIT_OK


def cmd_bs(args) -> int:
    spec = _load_spec(args.spec)
    if args.grid != "classical":
        raise ConfigError("the subdivision runs on the classical grid")
    out = _out_dir(args)
    a = Fraction(args.a)
    traj = birman_solomjak(spec, a, args.steps)
    table = SpectrumTable(
        "bs",
        ("k", "count", "max_log2"),
        tuple((k, n, m.log2) for k, (n, m) in enumerate(zip(traj.counts, traj.maxima))),
    )
    emit.write_csv(table, out / "bs.csv")
    check = bs_bound_check(traj, epsilon=args.epsilon)
    emit.write_json(
        {
            "a": str(a),
            "counts": list(traj.counts),
            "maxima_log2": [m.log2 for m in traj.maxima],
            "products_log2": list(check.products_log2),
            "measured_constant": check.measured_constant,
            "tail_decreasing": check.tail_decreasing,
        },
        out / "bs.json",
    )
    print(f"measured constant: {check.measured_constant:.6g}")
    return EXIT_OK


def cmd_bounds(args) -> int:
    spec = _load_spec(args.spec)
    grid = _make_grid(args.grid, spec)
    out = _out_dir(args)
    levels = _parse_int_range(args.levels)
    xs = [2**k for k in _parse_int_range(args.x_grid)]
    budgets = _parse_int_range(args.budget)
    alphas = _parse_float_grid(args.alpha_grid) if args.alpha_grid else None
    report = bounds_report(
        spec, grid, levels=levels, xs=xs, alphas=alphas, budgets=budgets, tol=args.tol
    )
    text = format_bounds_report(report)
    (out / "bounds.txt").write_text(text + "\n", encoding="utf-8")
    emit.write_json(
        {
            "tolerance": report.tolerance,
            "all_passed": report.all_passed,
            "estimates": report.estimates,
            "checks": [
                {
                    "name": c.name,
                    "relation": c.relation,
                    "lhs": c.lhs,
                    "rhs": c.rhs,
                    "passed": c.passed,
                    "note": c.note,
                }
                for c in report.checks
            ],
        },
        out / "bounds.json",
    )
    print(text)
    return EXIT_OK if report.all_passed else EXIT_CHECK_FAILED


def cmd_render(args) -> int:
    spec = _load_spec(args.spec) if args.spec else None
    out = Path(args.out)
    docs = [json.loads(Path(p).read_text(encoding="utf-8")) for p in args.partitions]
    docs.sort(key=lambda doc: -doc["threshold_log2"])
    parts = [emit.partition_from_record(doc, spec) for doc in docs]
    lums = emit.layer_luminances(len(parts))
    layers = [(list(p.cubes), lum) for p, lum in zip(parts, lums)]
    if out.suffix != ".svg":
        out.mkdir(parents=True, exist_ok=True)
        out = out / "partitions.svg"
    out.write_text(emit.render_svg(layers), encoding="utf-8")
    print(f"wrote {out}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except GuardError as exc:
        print(f"resource guard: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except (ConfigError, BudgetError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PelabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
