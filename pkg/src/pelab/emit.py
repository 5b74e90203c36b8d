"""Deterministic emitters: canonical JSON, CSV tables, SVG partition renders.

Payload files carry no timestamps and fixed key/column orders, so identical
configurations produce byte-identical outputs.
"""

from __future__ import annotations

import json
from fractions import Fraction
from pathlib import Path

from .adaptive import GoodPartitionResult
from .cubes import CubeId, GridScheme, Partition, classical_grid, interior_grid
from .evaluate import Evaluator, positive_grid
from .numerics import ConfigError
from .spectra import SpectrumTable


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=True) + "\n"


def write_json(obj, path) -> None:
    Path(path).write_text(canonical_json(obj), encoding="utf-8")


def write_csv(table: SpectrumTable, path) -> None:
    lines = [",".join(table.columns)]
    for row in table.rows:
        lines.append(",".join(_csv_cell(x) for x in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _csv_cell(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


# ---------------------------------------------------------------------------
# Partition JSON


def partition_record(result: GoodPartitionResult, evaluator: Evaluator) -> dict:
    cubes = []
    for cube in result.partition.cubes:
        cubes.append(
            {
                "level": cube.level,
                "coords": list(cube.coords),
                "value_log2": evaluator.value(cube).log2,
            }
        )
    rec = {
        "grid": {"kind": result.partition.grid.kind, "dimension": result.partition.grid.dimension,
                 "name": str(result.partition.grid)},
        "threshold_log2": result.threshold.log2,
        "count": result.count,
        "max_value_log2": result.max_value.log2,
        "level_histogram": {str(k): v for k, v in result.level_histogram},
        "cubes": cubes,
    }
    if result.threshold.exact is not None:
        rec["threshold"] = str(result.threshold.exact)
    if result.warning:
        rec["warning"] = result.warning
    return rec


def partition_from_record(doc: dict, spec=None) -> Partition:
    """Rebuild a Partition from its JSON record.

    Predicate grids (such as the positive-cube grid) need the spec they were
    bound to; pass it to reconstruct them.
    """
    grid_doc = doc["grid"]
    d = int(grid_doc["dimension"])
    kind = grid_doc["kind"]
    name = grid_doc.get("name", kind)
    if kind == "classical":
        grid: GridScheme = classical_grid(d)
    elif kind == "interior":
        grid = interior_grid(d)
    elif name == "positive" and spec is not None:
        grid = positive_grid(Evaluator(spec))
    else:
        raise ConfigError(f"cannot rebuild grid {name!r} without its spec")
    cubes = tuple(
        CubeId(int(c["level"]), tuple(int(k) for k in c["coords"])) for c in doc["cubes"]
    )
    return Partition(cubes, grid)


# ---------------------------------------------------------------------------
# SVG rendering (two-dimensional partitions)

DEFAULT_LUMINANCE = (0.85, 0.55, 0.1)


def layer_luminances(n_layers: int) -> tuple[float, ...]:
    if n_layers <= 3:
        return DEFAULT_LUMINANCE[:n_layers]
    lo, hi = DEFAULT_LUMINANCE[-1], DEFAULT_LUMINANCE[0]
    return tuple(hi - (hi - lo) * k / (n_layers - 1) for k in range(n_layers))


def _gray(luminance: float) -> str:
    v = max(0, min(255, round(luminance * 255)))
    return f"#{v:02x}{v:02x}{v:02x}"


def render_svg(layers: list[tuple[list[CubeId], float]], size: int = 1024) -> str:
    """Render stacked cube layers; earlier layers are painted first.

    Each layer is (cubes, luminance).  Pass coarser partitions first with
    lighter luminances so finer, darker layers overlay them.
    """
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">',
        f'<rect x="0" y="0" width="{size}" height="{size}" fill="#ffffff"/>',
    ]
    for cubes, lum in layers:
        fill = _gray(lum)
        parts.append(f'<g fill="{fill}">')
        for cube in cubes:
            if cube.dimension != 2:
                raise ConfigError("SVG rendering needs two-dimensional cubes")
            side = size / (1 << cube.level)
            x = cube.coords[0] * side
            # Flip the second axis: SVG y grows downward.
            y = size - (cube.coords[1] + 1) * side
            parts.append(
                f'<rect x="{x:.3f}" y="{y:.3f}" width="{side:.3f}" height="{side:.3f}"/>'
            )
        parts.append("</g>")
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
