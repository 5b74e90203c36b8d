"""Dyadic cubes, grid schemes and partition validation.

A level-n cube is the half-open box prod_i [k_i 2^-n, (k_i+1) 2^-n) inside the
unit cube.  All quantities computed downstream depend only on the subdivision
tree, so the half-open face convention is fixed once and for all here.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterator

from .numerics import ConfigError, GuardError

# Full-level enumeration refuses beyond this many coordinate bits; deeper
# cubes remain representable (Python ints are unbounded).
ENUM_LEVEL_BITS = 62
# Streaming level sweeps (value enumeration) use a tighter budget.
STREAM_LEVEL_BITS = 26
STREAM_VISIT_GUARD = 8_000_000


@dataclass(frozen=True)
class CubeId:
    """A dyadic cube: level n and integer grid coordinates (k_1, ..., k_d)."""

    level: int
    coords: tuple[int, ...]

    def __post_init__(self):
        if self.level < 0:
            raise ConfigError("cube level must be nonnegative")
        if not self.coords:
            raise ConfigError("cube needs at least one coordinate")
        top = 1 << self.level
        for k in self.coords:
            if not 0 <= k < top:
                raise ConfigError(f"coordinate {k} out of range at level {self.level}")

    @property
    def dimension(self) -> int:
        return len(self.coords)

    def parent(self) -> CubeId | None:
        if self.level == 0:
            return None
        return CubeId(self.level - 1, tuple(k >> 1 for k in self.coords))

    def child(self, rank: int) -> CubeId:
        """Child by lexicographic rank in 0..2^d-1 (offset bits, first axis high)."""
        d = self.dimension
        off = tuple((rank >> (d - 1 - i)) & 1 for i in range(d))
        return CubeId(self.level + 1, tuple(2 * k + o for k, o in zip(self.coords, off)))

    def children(self) -> list[CubeId]:
        return [self.child(r) for r in range(1 << self.dimension)]

    def digit_ranks(self) -> Iterator[int]:
        """Child ranks along the path from the unit cube down to this cube."""
        d, n = self.dimension, self.level
        for step in range(n - 1, -1, -1):
            yield sum(((k >> step) & 1) << (d - 1 - i) for i, k in enumerate(self.coords))

    def ancestor(self, level: int) -> CubeId:
        if level > self.level:
            raise ConfigError("ancestor level deeper than cube level")
        shift = self.level - level
        return CubeId(level, tuple(k >> shift for k in self.coords))

    def contains(self, other: CubeId) -> bool:
        if other.level < self.level or other.dimension != self.dimension:
            return False
        return other.ancestor(self.level) == self

    def volume(self) -> Fraction:
        return Fraction(1, 1 << (self.level * self.dimension))

    @property
    def volume_log2(self) -> int:
        return -self.level * self.dimension

    def as_text(self) -> str:
        return f"{self.level}:" + ",".join(str(k) for k in self.coords)

    @classmethod
    def from_text(cls, text: str) -> CubeId:
        try:
            lvl, ks = text.split(":")
            return cls(int(lvl), tuple(int(k) for k in ks.split(",")))
        except (ValueError, ConfigError) as exc:
            raise ConfigError(f"bad cube text {text!r}") from exc


def unit_cube(dimension: int) -> CubeId:
    return CubeId(0, (0,) * dimension)


def iter_level(dimension: int, level: int) -> Iterator[CubeId]:
    """All cubes of a level, lexicographic.  Guarded against blowup."""
    if level * dimension > STREAM_LEVEL_BITS:
        raise GuardError(
            f"level enumeration needs 2^{level * dimension} cubes "
            f"(guard: {STREAM_LEVEL_BITS} bits)"
        )
    side = range(1 << level)
    for coords in itertools.product(side, repeat=dimension):
        yield CubeId(level, coords)


# ---------------------------------------------------------------------------
# Grid schemes


@dataclass(frozen=True, eq=False)
class GridScheme:
    """The sub-family of dyadic cubes an analysis runs over.

    kind "classical" admits every cube; "interior" admits cubes whose closure
    avoids the unit-cube boundary; "predicate" delegates to a callable that
    must be closed under taking children of a member.  ``roots_only_at_zero``
    declares that members form subtrees hanging off level-0 roots, which lets
    traversals skip root discovery at deeper levels.
    """

    dimension: int
    kind: str
    name: str = ""
    member_fn: Callable[[CubeId], bool] | None = None
    roots_fn: Callable[[int], Iterator[CubeId]] | None = None
    roots_only_at_zero: bool = False

    def __str__(self) -> str:
        return self.name or self.kind


def classical_grid(dimension: int) -> GridScheme:
    return GridScheme(dimension, "classical", "classical", roots_only_at_zero=True)


def interior_grid(dimension: int) -> GridScheme:
    return GridScheme(dimension, "interior", "interior")


def predicate_grid(
    dimension: int,
    member: Callable[[CubeId], bool],
    roots: Callable[[int], Iterator[CubeId]] | None = None,
    name: str = "predicate",
    roots_only_at_zero: bool = False,
) -> GridScheme:
    return GridScheme(dimension, "predicate", name, member, roots, roots_only_at_zero)


def is_member(cube: CubeId, grid: GridScheme) -> bool:
    if cube.dimension != grid.dimension:
        raise ConfigError("cube dimension does not match grid dimension")
    if grid.kind == "classical":
        return True
    if grid.kind == "interior":
        if cube.level < 2:
            return False
        top = (1 << cube.level) - 2
        return all(1 <= k <= top for k in cube.coords)
    return bool(grid.member_fn(cube))


def children_in_grid(cube: CubeId, grid: GridScheme) -> list[CubeId]:
    """Member children of a cube, in lexicographic coordinate order."""
    if grid.kind == "classical":
        return cube.children()
    return [c for c in cube.children() if is_member(c, grid)]


def _interior_roots(dimension: int, level: int) -> Iterator[CubeId]:
    # A member is a root iff its parent leaves the admissible range, which at
    # level >= 2 pins at least one coordinate to the inner shell {1, 2^n - 2}.
    if level < 2:
        return
    top = (1 << level) - 2
    shell = (1,) if top == 1 else (1, top)
    count_roots = top**dimension - max(0, top - 2) ** dimension
    if count_roots > 4_000_000:
        raise GuardError(f"interior root shell too large at level {level}")

    def rec(prefix: tuple[int, ...], used_shell: bool):
        i = len(prefix)
        if i == dimension:
            if used_shell:
                yield CubeId(level, prefix)
            return
        # The last coordinate must take a shell value if none did before.
        candidates = shell if (i == dimension - 1 and not used_shell) else range(1, top + 1)
        for k in candidates:
            yield from rec(prefix + (k,), used_shell or k in shell)

    yield from rec((), False)


def grid_roots(grid: GridScheme, level: int) -> list[CubeId]:
    """Level members whose parent is not a member (subtree entry points)."""
    if level < 0:
        raise ConfigError("root level must be nonnegative")
    if grid.kind == "classical":
        return [unit_cube(grid.dimension)] if level == 0 else []
    if grid.kind == "interior":
        return list(_interior_roots(grid.dimension, level))
    if grid.roots_fn is not None:
        return list(grid.roots_fn(level))
    if grid.roots_only_at_zero:
        root = unit_cube(grid.dimension)
        return [root] if level == 0 and is_member(root, grid) else []
    out = []
    for cube in iter_level(grid.dimension, level):
        if is_member(cube, grid):
            par = cube.parent()
            if par is None or not is_member(par, grid):
                out.append(cube)
    return out


def iter_members_at_level(grid: GridScheme, level: int) -> Iterator[CubeId]:
    """Stream grid members of one level by descending member subtrees."""
    for root_level in range(level + 1):
        for root in grid_roots(grid, root_level):
            stack = [root]
            while stack:
                cube = stack.pop()
                if cube.level == level:
                    yield cube
                else:
                    stack.extend(reversed(children_in_grid(cube, grid)))


# ---------------------------------------------------------------------------
# Partitions


@dataclass(frozen=True)
class Partition:
    cubes: tuple[CubeId, ...]
    grid: GridScheme


@dataclass(frozen=True)
class PartitionReport:
    disjoint: bool
    overlap_witness: tuple[CubeId, CubeId] | None
    all_members: bool
    total_volume: Fraction
    covers_unit: bool

    @property
    def is_partition_of_unit(self) -> bool:
        return self.disjoint and self.covers_unit


def validate_partition(partition: Partition) -> PartitionReport:
    """Check pairwise disjointness, membership and exact coverage.

    Volume bookkeeping is exact integer arithmetic on scaled coordinates:
    a level-n cube contributes 2^((L-n)d) cells of the finest level L.
    """
    cubes = partition.cubes
    grid = partition.grid
    d = grid.dimension
    all_members = all(is_member(c, grid) for c in cubes)

    by_level: dict[int, set[tuple[int, ...]]] = {}
    witness = None
    for cube in sorted(cubes, key=lambda c: (c.level, c.coords)):
        for lvl in sorted(by_level):
            if lvl > cube.level:
                break
            anc = cube.ancestor(lvl).coords
            if anc in by_level[lvl]:
                witness = (CubeId(lvl, anc), cube)
                break
        if witness:
            break
        by_level.setdefault(cube.level, set()).add(cube.coords)
    disjoint = witness is None

    if cubes:
        finest = max(c.level for c in cubes)
        cells = sum(1 << ((finest - c.level) * d) for c in cubes)
        total = Fraction(cells, 1 << (finest * d))
    else:
        total = Fraction(0)
    covers = disjoint and total == 1
    return PartitionReport(disjoint, witness, all_members, total, covers)
