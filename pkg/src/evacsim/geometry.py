"""Grid/world geometry helpers shared by every other module.

Conventions: cell coordinates are (x, y) with x = column and y = row, row 0
at the top of the blueprint text.  World coordinates are meters, y grows
downward (screen convention), so compass North is -y.
"""

from __future__ import annotations

import math

Cell = tuple[int, int]
Vec = tuple[float, float]

SQRT2 = math.sqrt(2.0)

# The 8 canonical compass directions as unit vectors.
COMPASS: dict[str, Vec] = {
    "N": (0.0, -1.0),
    "NE": (SQRT2 / 2, -SQRT2 / 2),
    "E": (1.0, 0.0),
    "SE": (SQRT2 / 2, SQRT2 / 2),
    "S": (0.0, 1.0),
    "SW": (-SQRT2 / 2, SQRT2 / 2),
    "W": (-1.0, 0.0),
    "NW": (-SQRT2 / 2, -SQRT2 / 2),
}

ORTH_STEPS: tuple[Cell, ...] = ((1, 0), (-1, 0), (0, 1), (0, -1))
DIAG_STEPS: tuple[Cell, ...] = ((1, 1), (1, -1), (-1, 1), (-1, -1))
ALL_STEPS: tuple[Cell, ...] = ORTH_STEPS + DIAG_STEPS


def norm(v: Vec) -> float:
    return math.hypot(v[0], v[1])


def normalize(v: Vec) -> Vec | None:
    """Unit vector in the direction of v, or None for the zero vector."""
    n = math.hypot(v[0], v[1])
    if n < 1e-12:
        return None
    return (v[0] / n, v[1] / n)


def dot(a: Vec, b: Vec) -> float:
    return a[0] * b[0] + a[1] * b[1]


def cell_center(cell: Cell, cell_size: float) -> Vec:
    return ((cell[0] + 0.5) * cell_size, (cell[1] + 0.5) * cell_size)


def cell_of(pos: Vec, cell_size: float) -> Cell:
    return (int(pos[0] // cell_size), int(pos[1] // cell_size))


def supercover_line(a: Cell, b: Cell) -> list[Cell]:
    """All grid cells touched by the segment between the centers of a and b.

    Unlike Bresenham this includes *both* cells when the segment passes
    exactly through a corner, so a diagonal ray cannot slip between two
    diagonally-touching walls.  The traversal is canonicalized (endpoints
    swapped into lexicographic order) so the touched set is symmetric.
    """
    if a == b:
        return [a]
    if b < a:
        a, b = b, a
    (x0, y0), (x1, y1) = a, b
    dx = x1 - x0
    dy = y1 - y0
    nx, ny = abs(dx), abs(dy)
    sx = 1 if dx > 0 else -1
    sy = 1 if dy > 0 else -1

    cells = [(x0, y0)]
    x, y = x0, y0
    ix = iy = 0
    while ix < nx or iy < ny:
        # Compare the next x- and y-boundary crossing times of the ray,
        # scaled by 2*nx*ny to stay in integers: (ix+0.5)/nx vs (iy+0.5)/ny.
        tx = (2 * ix + 1) * ny
        ty = (2 * iy + 1) * nx
        if tx == ty:
            # Corner crossing: include both orthogonally-adjacent cells.
            cells.append((x + sx, y))
            cells.append((x, y + sy))
            x += sx
            y += sy
            ix += 1
            iy += 1
        elif tx < ty:
            x += sx
            ix += 1
        else:
            y += sy
            iy += 1
        cells.append((x, y))
    return cells
