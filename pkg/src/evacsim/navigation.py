"""Floor fields to exits, sign guidance, and herding for lost agents."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

from .errors import UnknownExitError
from .geometry import Cell, Vec, cell_center, cell_of, dot, normalize
from .scenario import GridMap, line_of_sight

INF = math.inf


def _canonical_distance(n_orth: int, n_diag: int, cell_size: float) -> float:
    # Distances are always derived from step counts through this one
    # expression, so equal paths produce bit-identical floats no matter in
    # which order a search relaxes them.
    return n_orth * cell_size + n_diag * (cell_size * math.sqrt(2.0))


@dataclass(frozen=True)
class FloorField:
    """Per-cell geodesic distance in meters to the nearest goal cell.

    Unreachable cells hold +inf.  Orthogonal steps cost cell_size, diagonal
    steps cell_size*sqrt(2); diagonals never cut wall corners.
    """

    width: int
    height: int
    cell_size: float
    distances: tuple[float, ...]  # row-major
    exit_ids: frozenset[int]

    def distance_at(self, cell: Cell) -> float:
        return self.distances[cell[1] * self.width + cell[0]]

    def descend_from(self, gmap: GridMap, cell: Cell) -> Cell | None:
        """Walkable neighbor with the smallest distance, if strictly better."""
        best = None
        best_d = self.distance_at(cell)
        for n in gmap.walkable_neighbors(cell):
            d = self.distance_at(n)
            if d < best_d:
                best, best_d = n, d
        return best


def compute_floor_field(
    gmap: GridMap,
    exit_ids: set[int] | frozenset[int],
    blocked: set[Cell] | frozenset[Cell] = frozenset(),
) -> FloorField:
    """Multi-source shortest-path distances from the cells of the given
    exits over walkable cells.  Cells in `blocked` (e.g. burning cells) are
    treated as walls.
    """
    if not exit_ids:
        raise UnknownExitError("exit_ids must be nonempty")
    goals: list[Cell] = []
    for exit_id in sorted(exit_ids):
        e = gmap.exit_by_id(exit_id)
        if e is None:
            raise UnknownExitError(f"no exit with id {exit_id}")
        goals.extend(e.cells)

    size = gmap.width * gmap.height
    steps = [(-1, -1)] * size  # (n_orth, n_diag), -1 marks unreached
    dist = [INF] * size

    def idx(c: Cell) -> int:
        return c[1] * gmap.width + c[0]

    def passable(c: Cell) -> bool:
        return gmap.is_walkable(c) and c not in blocked

    heap: list[tuple[float, int, int, Cell]] = []
    for g in goals:
        if not passable(g):
            continue
        steps[idx(g)] = (0, 0)
        dist[idx(g)] = 0.0
        heapq.heappush(heap, (0.0, 0, 0, g))

    while heap:
        d, n_orth, n_diag, cell = heapq.heappop(heap)
        i = idx(cell)
        if d > dist[i]:
            continue
        x, y = cell
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                if dx == 0 and dy == 0:
                    continue
                n = (x + dx, y + dy)
                if not passable(n):
                    continue
                if dx != 0 and dy != 0:
                    # No corner cutting past walls or fire.
                    if not (passable((x + dx, y)) and passable((x, y + dy))):
                        continue
                    cand = (n_orth, n_diag + 1)
                else:
                    cand = (n_orth + 1, n_diag)
                cd = _canonical_distance(cand[0], cand[1], gmap.cell_size)
                j = idx(n)
                if cd < dist[j]:
                    dist[j] = cd
                    steps[j] = cand
                    heapq.heappush(heap, (cd, cand[0], cand[1], n))

    return FloorField(
        width=gmap.width,
        height=gmap.height,
        cell_size=gmap.cell_size,
        distances=tuple(dist),
        exit_ids=frozenset(exit_ids),
    )


def visible_signs(
    gmap: GridMap,
    agent_pos: Vec,
    smoke=None,
    vision_range: float = INF,
    opacity_coeff: float = 0.0,
) -> list[tuple[float, Vec]]:
    """(distance, pointed_direction) of every visible sign, nearest first.

    A sign is visible when it is within min(vision_range, its own
    visibility_range) meters and line_of_sight holds through walls and
    smoke from the agent's cell to the sign's cell.
    """
    agent_cell = cell_of(agent_pos, gmap.cell_size)
    out: list[tuple[float, Vec]] = []
    for sign in gmap.signs:
        sx, sy = cell_center(sign.cell, gmap.cell_size)
        d = math.hypot(sx - agent_pos[0], sy - agent_pos[1])
        if d > min(vision_range, sign.visibility_range):
            continue
        if not line_of_sight(gmap, agent_cell, sign.cell, smoke, opacity_coeff):
            continue
        out.append((d, sign.pointed_direction))
    out.sort(key=lambda t: t[0])
    return out


def visible_sign_direction(
    gmap: GridMap,
    agent_pos: Vec,
    smoke=None,
    vision_range: float = INF,
    opacity_coeff: float = 0.0,
) -> Vec | None:
    """Pointed direction of the nearest visible sign, or None."""
    found = visible_signs(gmap, agent_pos, smoke, vision_range, opacity_coeff)
    return found[0][1] if found else None


def herding_direction(
    agent,
    neighbors,
    radius: float,
    gmap: GridMap | None = None,
    smoke=None,
    opacity_coeff: float = 0.0,
) -> Vec | None:
    """Normalized mean heading of Evacuating neighbors within radius.

    None when no such neighbor exists or the headings cancel out.
    Headings are each neighbor's unit velocity; stationary neighbors
    contribute nothing.  With a map, only neighbors actually visible
    through walls and smoke count.
    """
    sx = sy = 0.0
    found = False
    agent_cell = None if gmap is None else cell_of((agent.x, agent.y), gmap.cell_size)
    for other in neighbors:
        # Duck-typed on phase name to keep this module free of an agents
        # import (agents imports navigation).
        if other.id == agent.id or other.phase.name != "EVACUATING":
            continue
        if math.hypot(other.x - agent.x, other.y - agent.y) > radius:
            continue
        heading = normalize((other.vx, other.vy))
        if heading is None:
            continue
        if gmap is not None and not line_of_sight(
            gmap, agent_cell, cell_of((other.x, other.y), gmap.cell_size), smoke, opacity_coeff
        ):
            continue
        found = True
        sx += heading[0]
        sy += heading[1]
    if not found:
        return None
    return normalize((sx, sy))


def direction_along_field(gmap: GridMap, field: FloorField, pos: Vec) -> Vec | None:
    """Unit vector from pos toward the best descending neighbor cell of the
    floor field, or None at a goal cell / unreachable cell."""
    cell = cell_of(pos, gmap.cell_size)
    if field.distance_at(cell) == 0.0:
        return None
    target = field.descend_from(gmap, cell)
    if target is None:
        return None
    tx, ty = cell_center(target, gmap.cell_size)
    return normalize((tx - pos[0], ty - pos[1]))


def sign_direction_open(gmap: GridMap, pos: Vec, direction: Vec) -> bool:
    """Whether walking `direction` from pos is not immediately wall-blocked
    (the neighbor cell one step that way is walkable).  Used to skip signs
    an agent is pressed against the end wall of."""
    cell = cell_of(pos, gmap.cell_size)
    step = (cell[0] + round(direction[0]), cell[1] + round(direction[1]))
    return gmap.is_walkable(step)
