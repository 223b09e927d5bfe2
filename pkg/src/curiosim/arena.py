"""Grid-map arenas: loading, free-space and raycast queries, patrol counts.

Arena files are UTF-8 text. Lines starting with '%' are comments and blank
lines are skipped. The first payload line is `arena <width> <height>
<cell_size>`, followed by exactly <height> rows of exactly <width> characters
from {'#', '.', 'S'}: '#' wall, '.' free, 'S' free + start position (cell
center, heading 0 = +x axis). Exactly one 'S'; the outer border must be all
walls.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import engine

WALL = 1
FREE = 0


class ArenaError(ValueError):
    """Raised for malformed arena files; message names the offending line."""


@dataclass
class Arena:
    """Closed grid world. Immutable after loading; safe to share."""

    width: int
    height: int
    cell_size: float
    cells: np.ndarray  # (height, width) uint8, WALL/FREE
    start_pose: tuple  # (x, y, heading)

    @property
    def free_mask(self):
        return self.cells == FREE

    @property
    def diagonal(self):
        """World-units diagonal; the 'maximally novel' sentinel distance."""
        return math.hypot(self.width * self.cell_size, self.height * self.cell_size)

    def cell_of(self, p):
        """(col, row) of the cell containing world point p (floor convention)."""
        return (
            int(math.floor(p[0] / self.cell_size)),
            int(math.floor(p[1] / self.cell_size)),
        )

    def new_patrol_grid(self):
        return PatrolGrid(
            counts=np.zeros((self.height, self.width), dtype=np.int64),
            free=self.free_mask,
            cell_size=self.cell_size,
        )


@dataclass
class PatrolGrid:
    """Per-cell visit counts over the arena grid. Owned by one episode;
    merge after episodes finish to aggregate."""

    counts: np.ndarray  # (height, width) int, wall cells stay 0
    free: np.ndarray = field(repr=False)  # boolean mask of free cells
    cell_size: float = 1.0

    def total(self):
        return int(self.counts.sum())

    def merged(self, other):
        """New grid with summed counts; both grids must share the arena."""
        if self.counts.shape != other.counts.shape:
            raise ValueError("cannot merge patrol grids of different arenas")
        return PatrolGrid(counts=self.counts + other.counts, free=self.free, cell_size=self.cell_size)

    def copy(self):
        return PatrolGrid(counts=self.counts.copy(), free=self.free, cell_size=self.cell_size)


def load_arena(text):
    """Parse arena file content into an Arena.

    Raises ArenaError naming the 1-based line number for malformed headers,
    ragged rows, bad characters, start-marker problems, or an open border.
    """
    rows = []
    header = None
    header_line = 0
    row_lines = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip("\n")
        if not line.strip() or line.lstrip().startswith("%"):
            continue
        if header is None:
            header = line
            header_line = lineno
        else:
            rows.append(line)
            row_lines.append(lineno)

    if header is None:
        raise ArenaError("line 1: missing 'arena <width> <height> <cell_size>' header")
    parts = header.split()
    if len(parts) != 4 or parts[0] != "arena":
        raise ArenaError(f"line {header_line}: malformed header {header!r}")
    try:
        width, height = int(parts[1]), int(parts[2])
        cell_size = float(parts[3])
    except ValueError:
        raise ArenaError(f"line {header_line}: malformed header {header!r}") from None
    if width < 3 or height < 3:
        raise ArenaError(f"line {header_line}: arena must be at least 3x3, got {width}x{height}")
    if cell_size <= 0:
        raise ArenaError(f"line {header_line}: cell_size must be positive, got {cell_size}")
    if len(rows) != height:
        raise ArenaError(f"line {header_line}: expected {height} map rows, found {len(rows)}")

    cells = np.zeros((height, width), dtype=np.uint8)
    start = None
    for r, (line, lineno) in enumerate(zip(rows, row_lines)):
        if len(line) != width:
            raise ArenaError(f"line {lineno}: ragged row, expected {width} characters, got {len(line)}")
        for c, ch in enumerate(line):
            if ch == "#":
                cells[r, c] = WALL
            elif ch == ".":
                cells[r, c] = FREE
            elif ch == "S":
                cells[r, c] = FREE
                if start is not None:
                    raise ArenaError(f"line {lineno}: multiple start markers")
                start = (c, r)
            else:
                raise ArenaError(f"line {lineno}: invalid character {ch!r}")

    if start is None:
        raise ArenaError(f"line {row_lines[-1]}: missing start marker 'S'")
    border_bad = (
        cells[0, :].min() == FREE
        or cells[-1, :].min() == FREE
        or cells[:, 0].min() == FREE
        or cells[:, -1].min() == FREE
    )
    if border_bad:
        raise ArenaError(f"line {row_lines[0]}: open border, outer rows/columns must be all '#'")

    start_pose = (
        (start[0] + 0.5) * cell_size,
        (start[1] + 0.5) * cell_size,
        0.0,
    )
    return Arena(width=width, height=height, cell_size=cell_size, cells=cells, start_pose=start_pose)


def load_arena_file(path):
    with open(path, encoding="utf-8") as fh:
        return load_arena(fh.read())


def is_free(arena, p):
    """True iff world point p falls inside a free cell.

    Points outside the grid are not free; boundary points resolve by the
    floor convention, i.e. they belong to the higher-index cell.
    """
    col = math.floor(p[0] / arena.cell_size)
    row = math.floor(p[1] / arena.cell_size)
    if col < 0 or col >= arena.width or row < 0 or row >= arena.height:
        return False
    return arena.cells[int(row), int(col)] == FREE


def raycast(arena, origin, angle, max_range):
    """Distance to the first wall boundary along the ray, clamped to max_range.

    Exact grid traversal, deterministic. Raises ValueError if the origin is
    not in free space (caller bug) or max_range is not positive.
    """
    if max_range <= 0:
        raise ValueError(f"max_range must be positive, got {max_range}")
    if not is_free(arena, origin):
        raise ValueError(f"raycast origin {origin} is not in free space")
    return engine.raycast(
        arena.cells, arena.cell_size, float(origin[0]), float(origin[1]), float(angle), float(max_range)
    )


def record_visit(grid, p):
    """Increment the count of the cell containing p; returns the grid."""
    col = int(math.floor(p[0] / grid.cell_size))
    row = int(math.floor(p[1] / grid.cell_size))
    grid.counts[row, col] += 1
    return grid


def free_cells_connected(arena):
    """Flood fill from the start cell; True iff every free cell is reachable."""
    from collections import deque

    start_col, start_row = arena.cell_of(arena.start_pose[:2])
    seen = np.zeros_like(arena.cells, dtype=bool)
    queue = deque([(start_row, start_col)])
    seen[start_row, start_col] = True
    while queue:
        r, c = queue.popleft()
        for dr, dc in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            nr, nc = r + dr, c + dc
            if 0 <= nr < arena.height and 0 <= nc < arena.width:
                if not seen[nr, nc] and arena.cells[nr, nc] == FREE:
                    seen[nr, nc] = True
                    queue.append((nr, nc))
    return bool((seen | (arena.cells == WALL)).all())
