"""Building blueprints: parsing, validation, and geometric queries.

A blueprint is an ASCII grid (one character per cell) followed by a `---`
separator and a line-oriented metadata block:

    #########
    #P..0..E#
    #########
    ---
    cell_size 0.5
    room lobby 1 1 7 1
    sign 0 E 6.0
    exit 1 7,1
    player_start 1 1

Grid symbols: `#` wall, `.` floor, `D` door, `E` exit, `P` spawn cell,
and sign anchor cells (walkable floor) named by a digit `0`-`9` or a
lowercase letter `a`-`z`.  Metadata directives:

    cell_size <meters>                     (optional, default 0.5)
    room <name> <x> <y> <w> <h>            named rectangular region
    sign <anchor> <dir> <range_m>          dir is one of N NE E SE S SW W NW
    exit <id> <x,y> [<x,y> ...]            group exit cells into one exit
    player_start <x> <y>                   (optional, default: first spawn cell)

Exit cells not covered by an `exit` directive are grouped automatically:
each connected component of `E` cells becomes one exit, ids continuing
after the highest explicit id in row-major discovery order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .errors import (
    BlueprintSyntaxError,
    MetadataError,
    NoExitError,
    NoSpawnError,
    OutOfBoundsError,
)
from .geometry import ALL_STEPS, COMPASS, ORTH_STEPS, Cell, Vec, supercover_line

DEFAULT_CELL_SIZE = 0.5  # meters per cell side


class CellKind(Enum):
    WALL = "#"
    FLOOR = "."
    DOOR = "D"
    EXIT = "E"

    @property
    def walkable(self) -> bool:
        return self is not CellKind.WALL


@dataclass(frozen=True)
class SignDef:
    cell: Cell
    pointed_direction: Vec  # one of the 8 compass unit vectors
    visibility_range: float  # meters


@dataclass(frozen=True)
class ExitDef:
    id: int
    cells: tuple[Cell, ...]


@dataclass(frozen=True)
class Room:
    name: str
    x: int
    y: int
    w: int
    h: int

    def contains(self, cell: Cell) -> bool:
        return self.x <= cell[0] < self.x + self.w and self.y <= cell[1] < self.y + self.h

    def cells(self) -> list[Cell]:
        return [(x, y) for y in range(self.y, self.y + self.h) for x in range(self.x, self.x + self.w)]


@dataclass(frozen=True)
class GridMap:
    width: int
    height: int
    cell_size: float
    cells: tuple[CellKind, ...]  # row-major
    exits: tuple[ExitDef, ...]
    signs: tuple[SignDef, ...]
    rooms: tuple[Room, ...]
    spawn_cells: tuple[Cell, ...]
    player_start: Cell

    def in_bounds(self, cell: Cell) -> bool:
        return 0 <= cell[0] < self.width and 0 <= cell[1] < self.height

    def kind_at(self, cell: Cell) -> CellKind:
        return self.cells[cell[1] * self.width + cell[0]]

    def is_walkable(self, cell: Cell) -> bool:
        return self.in_bounds(cell) and self.kind_at(cell).walkable

    def walkable_neighbors(self, cell: Cell) -> list[Cell]:
        """8-connected walkable neighbors; diagonals only when both flanking
        orthogonal cells are walkable (no corner cutting)."""
        x, y = cell
        out = []
        for dx, dy in ALL_STEPS:
            n = (x + dx, y + dy)
            if not self.is_walkable(n):
                continue
            if dx != 0 and dy != 0:
                if not (self.is_walkable((x + dx, y)) and self.is_walkable((x, y + dy))):
                    continue
            out.append(n)
        return out

    def exit_by_id(self, exit_id: int) -> ExitDef | None:
        for e in self.exits:
            if e.id == exit_id:
                return e
        return None

    def exit_cells(self) -> set[Cell]:
        return {c for e in self.exits for c in e.cells}

    def room_of(self, cell: Cell) -> Room | None:
        for room in self.rooms:
            if room.contains(cell):
                return room
        return None

    def spawn_rooms(self) -> set[str]:
        """Names of rooms containing at least one spawn cell (excluded from
        fire ignition so the drill is always well-posed)."""
        names = set()
        for room in self.rooms:
            if any(room.contains(c) for c in self.spawn_cells):
                names.add(room.name)
        return names

    def with_cells(self, cells: tuple[CellKind, ...]) -> "GridMap":
        """Copy of this map with a replacement cell array (used for the
        practice-room door masking)."""
        return GridMap(
            width=self.width,
            height=self.height,
            cell_size=self.cell_size,
            cells=cells,
            exits=self.exits,
            signs=self.signs,
            rooms=self.rooms,
            spawn_cells=self.spawn_cells,
            player_start=self.player_start,
        )


_GRID_SYMBOLS = {"#": CellKind.WALL, ".": CellKind.FLOOR, "D": CellKind.DOOR, "E": CellKind.EXIT, "P": CellKind.FLOOR}


def parse_blueprint(text: str) -> GridMap:
    """Parse and validate a blueprint document into a GridMap."""
    lines = text.split("\n")
    grid_lines: list[str] = []
    meta_lines: list[str] = []
    in_meta = False
    for line in lines:
        if not in_meta and line.strip() == "---":
            in_meta = True
            continue
        (meta_lines if in_meta else grid_lines).append(line)
    while grid_lines and not grid_lines[-1].strip():
        grid_lines.pop()
    while grid_lines and not grid_lines[0].strip():
        grid_lines.pop(0)
    if not grid_lines:
        raise BlueprintSyntaxError("blueprint has no grid section")

    width = len(grid_lines[0])
    height = len(grid_lines)
    cells: list[CellKind] = []
    spawn_cells: list[Cell] = []
    sign_anchors: dict[str, Cell] = {}
    for y, row in enumerate(grid_lines):
        if len(row) != width:
            raise BlueprintSyntaxError(f"ragged row {y}: expected {width} cells, got {len(row)}")
        for x, ch in enumerate(row):
            if ch in _GRID_SYMBOLS:
                cells.append(_GRID_SYMBOLS[ch])
                if ch == "P":
                    spawn_cells.append((x, y))
            elif ch.isdigit() or ch.islower():
                if ch in sign_anchors:
                    raise BlueprintSyntaxError(f"duplicate sign anchor '{ch}' at ({x},{y})")
                sign_anchors[ch] = (x, y)
                cells.append(CellKind.FLOOR)
            else:
                raise BlueprintSyntaxError(f"unknown symbol {ch!r} at row {y} col {x}")

    exit_cells = {(i % width, i // width) for i, k in enumerate(cells) if k is CellKind.EXIT}
    if not exit_cells:
        raise NoExitError("blueprint has no exit cell")
    if not spawn_cells:
        raise NoSpawnError("blueprint has no spawn cell")

    cell_size = DEFAULT_CELL_SIZE
    rooms: list[Room] = []
    signs: list[SignDef] = []
    explicit_exits: list[ExitDef] = []
    player_start: Cell | None = None

    def bounds_check(cell: Cell, what: str) -> None:
        if not (0 <= cell[0] < width and 0 <= cell[1] < height):
            raise MetadataError(f"{what} {cell} is out of bounds")

    for lineno, raw in enumerate(meta_lines, start=height + 2):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        key = parts[0]
        try:
            if key == "cell_size":
                cell_size = float(parts[1])
                if cell_size <= 0:
                    raise MetadataError(f"line {lineno}: cell_size must be positive")
            elif key == "room":
                name, x, y, w, h = parts[1], int(parts[2]), int(parts[3]), int(parts[4]), int(parts[5])
                if w <= 0 or h <= 0 or x < 0 or y < 0 or x + w > width or y + h > height:
                    raise MetadataError(f"line {lineno}: room {name!r} rectangle out of bounds")
                if any(r.name == name for r in rooms):
                    raise MetadataError(f"line {lineno}: duplicate room name {name!r}")
                rooms.append(Room(name, x, y, w, h))
            elif key == "sign":
                anchor, direction, rng = parts[1], parts[2], float(parts[3])
                if anchor not in sign_anchors:
                    raise MetadataError(f"line {lineno}: sign anchor '{anchor}' not present in grid")
                if direction not in COMPASS:
                    raise MetadataError(f"line {lineno}: bad sign direction {direction!r}")
                if rng <= 0:
                    raise MetadataError(f"line {lineno}: sign range must be positive")
                signs.append(SignDef(sign_anchors[anchor], COMPASS[direction], rng))
            elif key == "exit":
                exit_id = int(parts[1])
                ecells = []
                for token in parts[2:]:
                    x_s, y_s = token.split(",")
                    c = (int(x_s), int(y_s))
                    bounds_check(c, "exit cell")
                    if c not in exit_cells:
                        raise MetadataError(f"line {lineno}: {c} is not an E cell")
                    ecells.append(c)
                if not ecells:
                    raise MetadataError(f"line {lineno}: exit {exit_id} lists no cells")
                if any(e.id == exit_id for e in explicit_exits):
                    raise MetadataError(f"line {lineno}: duplicate exit id {exit_id}")
                explicit_exits.append(ExitDef(exit_id, tuple(ecells)))
            elif key == "player_start":
                player_start = (int(parts[1]), int(parts[2]))
                bounds_check(player_start, "player_start")
            else:
                raise MetadataError(f"line {lineno}: unknown directive {key!r}")
        except (IndexError, ValueError) as exc:
            raise MetadataError(f"line {lineno}: malformed {key!r} directive: {raw.strip()!r}") from exc

    described = {s.cell for s in signs}
    for ch, cell in sign_anchors.items():
        if cell not in described:
            raise MetadataError(f"sign anchor '{ch}' at {cell} has no sign directive")

    exits = _group_exits(exit_cells, explicit_exits, width)
    if player_start is None:
        player_start = spawn_cells[0]

    gmap = GridMap(
        width=width,
        height=height,
        cell_size=cell_size,
        cells=tuple(cells),
        exits=tuple(exits),
        signs=tuple(signs),
        rooms=tuple(rooms),
        spawn_cells=tuple(spawn_cells),
        player_start=player_start,
    )
    _validate(gmap)
    return gmap


def _group_exits(exit_cells: set[Cell], explicit: list[ExitDef], width: int) -> list[ExitDef]:
    exits = list(explicit)
    covered = {c for e in explicit for c in e.cells}
    remaining = exit_cells - covered
    next_id = max((e.id for e in exits), default=0) + 1
    for start in sorted(remaining, key=lambda c: (c[1], c[0])):
        if start not in remaining:
            continue
        # Flood-fill one 8-connected component of ungrouped exit cells.
        component = []
        stack = [start]
        remaining.discard(start)
        while stack:
            c = stack.pop()
            component.append(c)
            for dx, dy in ALL_STEPS:
                n = (c[0] + dx, c[1] + dy)
                if n in remaining:
                    remaining.discard(n)
                    stack.append(n)
        exits.append(ExitDef(next_id, tuple(sorted(component, key=lambda c: (c[1], c[0])))))
        next_id += 1
    exits.sort(key=lambda e: e.id)
    return exits


def _validate(gmap: GridMap) -> None:
    ids = [e.id for e in gmap.exits]
    if len(ids) != len(set(ids)):
        raise MetadataError("duplicate exit ids")
    for e in gmap.exits:
        for c in e.cells:
            if gmap.kind_at(c) is not CellKind.EXIT:
                raise MetadataError(f"exit {e.id} cell {c} is not an E cell")
            on_boundary = c[0] in (0, gmap.width - 1) or c[1] in (0, gmap.height - 1)
            near_wall = any(
                gmap.in_bounds((c[0] + dx, c[1] + dy)) and gmap.kind_at((c[0] + dx, c[1] + dy)) is CellKind.WALL
                for dx, dy in ORTH_STEPS
            )
            if not (on_boundary or near_wall):
                raise MetadataError(f"exit cell {c} is neither on the boundary nor a gap in a wall")
        if len(e.cells) > 1 and not _connected(set(e.cells)):
            raise MetadataError(f"exit {e.id} cells are not contiguous")
    for c in gmap.spawn_cells:
        if not gmap.is_walkable(c):
            raise MetadataError(f"spawn cell {c} is not walkable")
    for s in gmap.signs:
        if not gmap.is_walkable(s.cell):
            raise MetadataError(f"sign cell {s.cell} is not walkable")
    if not gmap.is_walkable(gmap.player_start):
        raise MetadataError(f"player_start {gmap.player_start} is not walkable")


def _connected(cells: set[Cell]) -> bool:
    start = next(iter(cells))
    seen = {start}
    stack = [start]
    while stack:
        c = stack.pop()
        for dx, dy in ALL_STEPS:
            n = (c[0] + dx, c[1] + dy)
            if n in cells and n not in seen:
                seen.add(n)
                stack.append(n)
    return seen == cells


def serialize_blueprint(gmap: GridMap) -> str:
    """Render a GridMap back to blueprint text; parse(serialize(m)) == m."""
    grid = [[gmap.kind_at((x, y)).value for x in range(gmap.width)] for y in range(gmap.height)]
    for c in gmap.spawn_cells:
        grid[c[1]][c[0]] = "P"
    anchors = "0123456789abcdefghijklmnopqrstuvwxyz"
    digit_of: dict[Cell, str] = {}
    for i, s in enumerate(gmap.signs):
        digit_of[s.cell] = anchors[i]
        grid[s.cell[1]][s.cell[0]] = anchors[i]

    dir_name = {v: k for k, v in COMPASS.items()}
    lines = ["".join(row) for row in grid]
    lines.append("---")
    lines.append(f"cell_size {gmap.cell_size}")
    for room in gmap.rooms:
        lines.append(f"room {room.name} {room.x} {room.y} {room.w} {room.h}")
    for s in gmap.signs:
        lines.append(f"sign {digit_of[s.cell]} {dir_name[s.pointed_direction]} {s.visibility_range}")
    for e in gmap.exits:
        cells = " ".join(f"{x},{y}" for x, y in e.cells)
        lines.append(f"exit {e.id} {cells}")
    lines.append(f"player_start {gmap.player_start[0]} {gmap.player_start[1]}")
    return "\n".join(lines) + "\n"


def line_of_sight(
    gmap: GridMap,
    src: Cell,
    dst: Cell,
    smoke: "SmokeLookup | None" = None,
    opacity_coeff: float = 0.0,
) -> bool:
    """True iff dst is visible from src: the supercover ray between the two
    cell centers crosses no wall, and accumulated smoke optical depth (cell
    density x cell_size x opacity_coeff, summed over touched cells) stays
    below 1.0.

    `smoke` is anything indexable by cell returning a density in [0, 1]
    (a HazardField works); None means clear air.
    """
    if not gmap.in_bounds(src) or not gmap.in_bounds(dst):
        raise OutOfBoundsError(f"line_of_sight endpoints {src}->{dst} out of bounds")
    if src == dst:
        return True
    depth = 0.0
    for cell in supercover_line(src, dst):
        if gmap.kind_at(cell) is CellKind.WALL:
            return False
        if smoke is not None and opacity_coeff > 0.0:
            depth += smoke.density_at(cell) * gmap.cell_size * opacity_coeff
    return depth < 1.0


class SmokeLookup:
    """Protocol-ish duck type: anything with density_at(cell) -> float."""

    def density_at(self, cell: Cell) -> float:  # pragma: no cover - interface stub
        raise NotImplementedError
