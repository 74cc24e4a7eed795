"""Fire ignition and spread, smoke diffusion, and harm to agents.

Fire is a probabilistic-contact cellular automaton on walkable cells; smoke
is explicit neighbor diffusion in symmetric flux form, so with zero
emission total smoke mass can never grow.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, replace

import numpy as np

from .errors import NoRoomsError
from .geometry import ORTH_STEPS, Cell
from .scenario import GridMap


@dataclass(frozen=True)
class HazardParams:
    p_spread: float = 0.05  # per-second ignition probability per orthogonal neighbor
    smoke_emission: float = 0.1  # density/second added to burning cells
    smoke_diffusion: float = 0.2  # per-step mixing coefficient
    harm_threshold: float = 0.6  # smoke density above which health decays
    harm_rate: float = 5.0  # health/second in dense smoke
    fire_harm_rate: float = 50.0  # health/second standing on a burning cell


@dataclass(frozen=True, eq=False)  # ndarray field: identity equality only
class HazardField:
    burning: frozenset[Cell]
    smoke: np.ndarray  # shape (height, width), densities in [0, 1]; treat as immutable
    ignition_room: str
    ignition_tick: int
    cell_size: float

    def density_at(self, cell: Cell) -> float:
        return float(self.smoke[cell[1], cell[0]])

    def is_burning(self, cell: Cell) -> bool:
        return cell in self.burning


def empty_field(gmap: GridMap) -> HazardField:
    return HazardField(
        burning=frozenset(),
        smoke=np.zeros((gmap.height, gmap.width)),
        ignition_room="",
        ignition_tick=0,
        cell_size=gmap.cell_size,
    )


def ignite_random_room(gmap: GridMap, rng: random.Random, tick: int = 0) -> HazardField:
    """Start a fire on one walkable cell of a room chosen uniformly among
    rooms without spawn cells (the drill must be survivable from spawn)."""
    spawn_rooms = gmap.spawn_rooms()
    candidates = [r for r in gmap.rooms if r.name not in spawn_rooms]
    candidates = [r for r in candidates if any(gmap.is_walkable(c) for c in r.cells())]
    if not candidates:
        raise NoRoomsError("no ignitable room (every room is a spawn room or has no walkable cell)")
    room = rng.choice(candidates)
    walkable = [c for c in room.cells() if gmap.is_walkable(c)]
    cell = rng.choice(walkable)
    return HazardField(
        burning=frozenset([cell]),
        smoke=np.zeros((gmap.height, gmap.width)),
        ignition_room=room.name,
        ignition_tick=tick,
        cell_size=gmap.cell_size,
    )


def step_fire(
    hazard: HazardField,
    gmap: GridMap,
    params: HazardParams,
    dt: float,
    rng: random.Random,
) -> HazardField:
    """Each non-burning walkable orthogonal neighbor of a burning cell
    ignites with probability 1-(1-p_spread)^dt.  The burning set only
    grows."""
    if params.p_spread <= 0.0 or not hazard.burning:
        return hazard
    p_step = 1.0 - (1.0 - params.p_spread) ** dt
    candidates: set[Cell] = set()
    for x, y in hazard.burning:
        for dx, dy in ORTH_STEPS:
            n = (x + dx, y + dy)
            if gmap.is_walkable(n) and n not in hazard.burning:
                candidates.add(n)
    ignited = [c for c in sorted(candidates) if rng.random() < p_step]
    if not ignited:
        return hazard
    return replace(hazard, burning=hazard.burning | frozenset(ignited))


def _walkable_mask(gmap: GridMap) -> np.ndarray:
    mask = np.zeros((gmap.height, gmap.width), dtype=bool)
    for y in range(gmap.height):
        for x in range(gmap.width):
            mask[y, x] = gmap.is_walkable((x, y))
    return mask


# Cache per-map masks: GridMaps are immutable, and the mask loop is the
# only per-cell Python iteration in the smoke step.
_MASK_CACHE: dict[int, tuple[GridMap, np.ndarray]] = {}


def walkable_mask(gmap: GridMap) -> np.ndarray:
    entry = _MASK_CACHE.get(id(gmap))
    if entry is not None and entry[0] is gmap:
        return entry[1]
    mask = _walkable_mask(gmap)
    _MASK_CACHE[id(gmap)] = (gmap, mask)
    return mask


def step_smoke(hazard: HazardField, gmap: GridMap, params: HazardParams, dt: float) -> HazardField:
    """Diffuse smoke between walkable orthogonal neighbors and add emission
    on burning cells, clamping every density to [0, 1].

    The exchange term is flux-form: each walkable pair (a, b) exchanges
    (D/4)*(rho_b - rho_a), which conserves mass exactly (clamping at 1 can
    only remove it).  Walls hold zero and exchange nothing.
    """
    mask = walkable_mask(gmap)
    rho = hazard.smoke
    d4 = params.smoke_diffusion / 4.0
    new = rho.copy()
    if d4 > 0.0:
        # Shifted neighbor views; pairs with a wall on either side drop out.
        for axis, shift in ((0, 1), (0, -1), (1, 1), (1, -1)):
            nbr = np.roll(rho, shift, axis=axis)
            nbr_mask = np.roll(mask, shift, axis=axis)
            # np.roll wraps around; sever the wrapped edge.
            edge = np.zeros_like(mask)
            if axis == 0:
                edge[0 if shift == 1 else -1, :] = True
            else:
                edge[:, 0 if shift == 1 else -1] = True
            valid = mask & nbr_mask & ~edge
            new += np.where(valid, d4 * (nbr - rho), 0.0)
    if params.smoke_emission > 0.0 and hazard.burning:
        for x, y in hazard.burning:
            new[y, x] += params.smoke_emission * dt
    np.clip(new, 0.0, 1.0, out=new)
    new[~mask] = 0.0
    return replace(hazard, smoke=new)


def apply_harm(hazard: HazardField, agent, params: HazardParams, dt: float):
    """Decrement the agent's health in dense smoke or on fire, in place;
    returns the same agent.  At zero health the agent becomes
    Incapacitated (mobility 0)."""
    if agent.phase.terminal:
        return agent
    cell = agent.cell(hazard.cell_size)
    damage = 0.0
    if hazard.density_at(cell) > params.harm_threshold:
        damage += params.harm_rate * dt
    if hazard.is_burning(cell):
        damage += params.fire_harm_rate * dt
    if damage > 0.0:
        agent.health = max(0.0, agent.health - damage)
        if agent.health <= 0.0:
            agent.incapacitate()
    return agent
