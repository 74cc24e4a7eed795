"""Agent attribute model, behavior state machine, and the two movement
backends (social forces and cellular automata).

The attribute set follows the usual evacuation-behaviour breakdown: state
(position, health, mobility), speed, vision, reaction time, collaboration,
insistence, and building knowledge.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, replace
from enum import Enum

from .errors import OvercrowdedError
from .geometry import COMPASS, Cell, Vec, cell_center, cell_of, dot, normalize
from .navigation import FloorField, direction_along_field, sign_direction_open, visible_signs
from .scenario import GridMap


class Phase(Enum):
    NORMAL = "normal"
    EVACUATING = "evacuating"
    ESCAPED = "escaped"
    INCAPACITATED = "incapacitated"

    @property
    def terminal(self) -> bool:
        return self in (Phase.ESCAPED, Phase.INCAPACITATED)


@dataclass(frozen=True)
class AgentProfile:
    max_speed: float = 1.3  # m/s
    vision_range: float = 12.0  # meters
    reaction_time: float = 2.0  # seconds from alarm to evacuating
    collaboration: float = 0.0  # probability of helping an eligible neighbor
    insistence: float = 0.3  # probability of keeping the current goal per decision step
    knowledge: float = 1.0  # per-exit probability of knowing that exit
    body_radius: float = 0.25  # meters
    mass: float = 80.0  # kg

    def validate(self) -> None:
        for name in ("collaboration", "insistence", "knowledge"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0,1], got {v}")
        for name in ("max_speed", "vision_range", "body_radius", "mass"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.reaction_time < 0:
            raise ValueError("reaction_time must be >= 0")


@dataclass(frozen=True)
class ForceParams:
    # Canonical social-force constants for the pedestrian model family.
    repulsion_strength: float = 2000.0  # N, pair repulsion at body contact
    repulsion_falloff: float = 0.08  # m, e-folding distance of the repulsion
    relaxation_time: float = 0.5  # s, driving-term tau
    wall_range: float = 1.0  # m, walls farther than this are ignored


# Goals ---------------------------------------------------------------------


@dataclass(frozen=True)
class ExitGoal:
    exit_id: int


@dataclass(frozen=True)
class SignGoal:
    direction: Vec


@dataclass(frozen=True)
class HerdGoal:
    direction: Vec


@dataclass(frozen=True)
class WanderGoal:
    direction: Vec


Goal = ExitGoal | SignGoal | HerdGoal | WanderGoal


@dataclass
class AgentState:
    id: int
    profile: AgentProfile
    x: float
    y: float
    vx: float = 0.0
    vy: float = 0.0
    health: float = 100.0
    phase: Phase = Phase.NORMAL
    goal: Goal | None = None
    known_exits: frozenset[int] = frozenset()
    helping: int | None = None
    partner_speed: float | None = None  # partner's max_speed while paired
    move_credit: float = 0.0  # cellular-automaton backend only
    blocked: bool = False  # last movement step made no progress

    @property
    def pos(self) -> Vec:
        return (self.x, self.y)

    def cell(self, cell_size: float) -> Cell:
        return cell_of((self.x, self.y), cell_size)

    def incapacitate(self) -> None:
        if not self.phase.terminal:
            self.phase = Phase.INCAPACITATED
            self.vx = self.vy = 0.0

    def copy(self) -> "AgentState":
        return replace(self)


@dataclass(frozen=True)
class ProfileDistribution:
    """Sampling ranges for NPC profiles; scalars are fixed values."""

    max_speed: tuple[float, float] = (1.0, 1.5)
    reaction_time: tuple[float, float] = (1.0, 10.0)
    vision_range: float = 12.0
    collaboration: float = 0.0
    insistence: float = 0.3
    knowledge: float = 1.0
    body_radius: float = 0.25
    mass: float = 80.0

    def sample(self, rng: random.Random) -> AgentProfile:
        return AgentProfile(
            max_speed=rng.uniform(*self.max_speed),
            vision_range=self.vision_range,
            reaction_time=rng.uniform(*self.reaction_time),
            collaboration=self.collaboration,
            insistence=self.insistence,
            knowledge=self.knowledge,
            body_radius=self.body_radius,
            mass=self.mass,
        )


def sample_known_exits(gmap: GridMap, knowledge: float, rng: random.Random) -> frozenset[int]:
    """Each exit is known independently with probability `knowledge`."""
    return frozenset(e.id for e in gmap.exits if rng.random() < knowledge)


def sample_population(
    gmap: GridMap,
    count: int,
    distribution: ProfileDistribution,
    rng: random.Random,
    first_id: int = 0,
    exclude_cells: frozenset[Cell] = frozenset(),
) -> list[AgentState]:
    """Spawn `count` agents on distinct spawn cells, phase Normal, health
    100, known exits sampled per the profile's knowledge."""
    free = [c for c in gmap.spawn_cells if c not in exclude_cells]
    if count > len(free):
        raise OvercrowdedError(f"{count} agents requested but only {len(free)} spawn cells free")
    chosen = rng.sample(free, count)
    agents = []
    for i, cell in enumerate(chosen):
        profile = distribution.sample(rng)
        cx, cy = cell_center(cell, gmap.cell_size)
        agents.append(
            AgentState(
                id=first_id + i,
                profile=profile,
                x=cx,
                y=cy,
                known_exits=sample_known_exits(gmap, profile.knowledge, rng),
            )
        )
    return agents


# Phase machine -------------------------------------------------------------


def update_phase(agent: AgentState, gmap: GridMap, alarm_tick: int, now_tick: int, dt: float) -> None:
    """Advance the Normal -> Evacuating -> Escaped part of the phase DFA.

    Normal agents start evacuating once the alarm has been ringing for at
    least their reaction time; evacuating agents on an exit cell escape.
    Terminal phases absorb.
    """
    if agent.phase is Phase.NORMAL:
        if (now_tick - alarm_tick) * dt >= agent.profile.reaction_time:
            agent.phase = Phase.EVACUATING
    if agent.phase is Phase.EVACUATING:
        if agent.cell(gmap.cell_size) in gmap.exit_cells():
            agent.phase = Phase.ESCAPED
            agent.vx = agent.vy = 0.0


# Goal decision -------------------------------------------------------------


def decide_goal(
    agent: AgentState,
    gmap: GridMap,
    fields: dict[int, FloorField],
    smoke,
    neighbors: list[AgentState],
    rng: random.Random,
    opacity_coeff: float = 0.5,
) -> Goal:
    """Choose the agent's goal for the next decision interval.

    With probability `insistence` the current goal is kept (a blocked agent
    always re-evaluates).  On re-evaluation the priority is: nearest known
    exit by floor field, then a visible sign, then herding behind
    evacuating neighbors, then seeded wandering.
    """
    from .navigation import herding_direction  # local to avoid import cycle at module load

    if agent.goal is not None and not agent.blocked and rng.random() < agent.profile.insistence:
        return agent.goal

    # 1. Known exits: pick the reachable one nearest by floor field.
    best: tuple[float, int] | None = None
    cell = agent.cell(gmap.cell_size)
    for exit_id in sorted(agent.known_exits):
        f = fields.get(exit_id)
        if f is None:
            continue
        d = f.distance_at(cell)
        if math.isinf(d):
            continue  # fire cut this exit off; treat as unknown
        if best is None or d < best[0]:
            best = (d, exit_id)
    if best is not None:
        return ExitGoal(best[1])

    # 2. Nearest visible emergency sign whose direction is not immediately
    # wall-blocked from here.
    for _, sign_dir in visible_signs(gmap, agent.pos, smoke, agent.profile.vision_range, opacity_coeff):
        if sign_direction_open(gmap, agent.pos, sign_dir):
            return SignGoal(sign_dir)

    # 3. Herd behind evacuating neighbors in sight.
    herd = herding_direction(
        agent, neighbors, agent.profile.vision_range, gmap, smoke, opacity_coeff
    )
    if herd is not None:
        return HerdGoal(herd)

    # 4. Wander a random walkable compass direction.
    return WanderGoal(_wander_direction(agent, gmap, rng))


def _wander_direction(agent: AgentState, gmap: GridMap, rng: random.Random) -> Vec:
    names = sorted(COMPASS)
    open_dirs = [COMPASS[n] for n in names if sign_direction_open(gmap, agent.pos, COMPASS[n])]
    if not open_dirs:
        return COMPASS[rng.choice(names)]
    return rng.choice(open_dirs)


def goal_direction(
    agent: AgentState,
    gmap: GridMap,
    fields: dict[int, FloorField],
) -> Vec | None:
    """Current walking direction implied by the agent's goal."""
    goal = agent.goal
    if goal is None:
        return None
    if isinstance(goal, ExitGoal):
        f = fields.get(goal.exit_id)
        if f is None:
            return None
        return direction_along_field(gmap, f, agent.pos)
    return goal.direction


# Social-force backend ------------------------------------------------------


def pair_repulsion(a: AgentState, b: AgentState, params: ForceParams) -> Vec:
    """Repulsive force (N) exerted on a by b: A*exp((r_a+r_b-d)/B) along
    the line between centers.  Equals A exactly at body contact."""
    dx = a.x - b.x
    dy = a.y - b.y
    d = math.hypot(dx, dy)
    if d < 1e-9:
        return (0.0, 0.0)  # coincident centers: direction undefined
    magnitude = params.repulsion_strength * math.exp(
        (a.profile.body_radius + b.profile.body_radius - d) / params.repulsion_falloff
    )
    return (magnitude * dx / d, magnitude * dy / d)


def nearest_wall(gmap: GridMap, pos: Vec, search_range: float) -> tuple[float, Vec] | None:
    """Distance and outward unit normal to the nearest wall surface within
    search_range meters, or None."""
    s = gmap.cell_size
    cx, cy = cell_of(pos, s)
    r = int(math.ceil(search_range / s)) + 1
    best: tuple[float, Vec] | None = None
    for yy in range(cy - r, cy + r + 1):
        for xx in range(cx - r, cx + r + 1):
            cell = (xx, yy)
            if gmap.in_bounds(cell) and gmap.is_walkable(cell):
                continue
            # Distance from pos to this wall cell's rectangle.
            nx = min(max(pos[0], xx * s), (xx + 1) * s)
            ny = min(max(pos[1], yy * s), (yy + 1) * s)
            d = math.hypot(pos[0] - nx, pos[1] - ny)
            if d > search_range:
                continue
            if best is None or d < best[0]:
                away = normalize((pos[0] - nx, pos[1] - ny))
                if away is None:
                    continue  # inside the wall; resolved by position rejection
                best = (d, away)
    return best


def wall_repulsion(gmap: GridMap, agent: AgentState, params: ForceParams) -> Vec:
    """Wall force of the same exponential form, using distance to the
    nearest wall surface."""
    hit = nearest_wall(gmap, agent.pos, params.wall_range)
    if hit is None:
        return (0.0, 0.0)
    d, away = hit
    magnitude = params.repulsion_strength * math.exp(
        (agent.profile.body_radius - d) / params.repulsion_falloff
    )
    return (magnitude * away[0], magnitude * away[1])


def step_social_force(
    agent: AgentState,
    desired_dir: Vec | None,
    neighbors: list[AgentState],
    gmap: GridMap,
    params: ForceParams,
    dt: float,
) -> None:
    """One Euler step of the social-force model, in place.

    acceleration = (desired_velocity - velocity)/tau
                 + sum of pair repulsions / mass
                 + wall repulsion / mass
    Speed is clamped to max_speed and the position update is rejected into
    walkable space on wall penetration.
    """
    speed_cap = effective_max_speed(agent)
    if desired_dir is None:
        desired = (0.0, 0.0)
    else:
        desired = (desired_dir[0] * speed_cap, desired_dir[1] * speed_cap)

    inv_tau = 1.0 / params.relaxation_time
    ax = (desired[0] - agent.vx) * inv_tau
    ay = (desired[1] - agent.vy) * inv_tau

    inv_mass = 1.0 / agent.profile.mass
    for other in neighbors:
        if other.id == agent.id or other.phase is Phase.ESCAPED:
            continue
        fx, fy = pair_repulsion(agent, other, params)
        ax += fx * inv_mass
        ay += fy * inv_mass
    wx, wy = wall_repulsion(gmap, agent, params)
    ax += wx * inv_mass
    ay += wy * inv_mass

    vx = agent.vx + ax * dt
    vy = agent.vy + ay * dt
    speed = math.hypot(vx, vy)
    if speed > speed_cap and speed > 0.0:
        vx *= speed_cap / speed
        vy *= speed_cap / speed

    nx = agent.x + vx * dt
    ny = agent.y + vy * dt
    moved = _resolve_walkable(gmap, agent.x, agent.y, nx, ny)
    agent.blocked = moved == (agent.x, agent.y) and (vx != 0.0 or vy != 0.0)
    agent.x, agent.y = moved
    agent.vx, agent.vy = vx, vy


def _resolve_walkable(gmap: GridMap, ox: float, oy: float, nx: float, ny: float) -> Vec:
    """Reject a position update that would land in a wall, sliding along
    the axis that is still free."""
    s = gmap.cell_size
    if gmap.is_walkable(cell_of((nx, ny), s)):
        return (nx, ny)
    if gmap.is_walkable(cell_of((nx, oy), s)):
        return (nx, oy)
    if gmap.is_walkable(cell_of((ox, ny), s)):
        return (ox, ny)
    return (ox, oy)


# Cellular-automaton backend ------------------------------------------------


def step_cellular_automaton(
    agent: AgentState,
    desired_dir: Vec | None,
    occupancy: set[Cell],
    field: FloorField | None,
    gmap: GridMap,
    rng: random.Random,
    dt: float,
) -> None:
    """One lattice step, in place.  The agent accrues move credit at
    max_speed*dt/cell_size per tick and spends 1 credit on an orthogonal
    move, sqrt(2) on a diagonal one, keeping speed direction-independent.

    With an exit goal the agent walks down the floor field; with a
    direction goal it picks the unoccupied neighbor most aligned with the
    direction.  Ties break by seeded uniform choice; a blocked agent stays
    put with credit capped at 1.
    """
    s = gmap.cell_size
    cell = agent.cell(s)
    speed_cap = effective_max_speed(agent)
    agent.move_credit += speed_cap * dt / s
    agent.blocked = False
    if agent.move_credit < 1.0:
        agent.vx = agent.vy = 0.0
        return

    candidates: list[tuple[float, float, Cell]] = []  # (score, cost, cell)
    for n in gmap.walkable_neighbors(cell):
        if n in occupancy:
            continue
        cost = 1.0 if (n[0] == cell[0] or n[1] == cell[1]) else math.sqrt(2.0)
        if field is not None:
            score = field.distance_at(n)
        elif desired_dir is not None:
            step_v = normalize((n[0] - cell[0], n[1] - cell[1]))
            score = -dot(desired_dir, step_v)  # most aligned first
        else:
            continue
        candidates.append((score, cost, n))

    if field is not None:
        here = field.distance_at(cell)
        candidates = [c for c in candidates if c[0] < here]
    else:
        candidates = [c for c in candidates if c[0] < -1e-9]  # forward progress only

    if not candidates:
        agent.blocked = True
        agent.move_credit = min(agent.move_credit, 1.0)
        agent.vx = agent.vy = 0.0
        return

    best_score = min(c[0] for c in candidates)
    best = [c for c in candidates if c[0] == best_score]
    _, cost, target = best[0] if len(best) == 1 else best[rng.randrange(len(best))]
    if agent.move_credit < cost:
        # Diagonal move still charging up; wait without being "blocked".
        agent.vx = agent.vy = 0.0
        return
    agent.move_credit -= cost
    tx, ty = cell_center(target, s)
    # Report pace, not the instantaneous lattice jump, so |v| <= max_speed.
    heading = normalize((tx - agent.x, ty - agent.y))
    if heading is not None:
        agent.vx = heading[0] * speed_cap
        agent.vy = heading[1] * speed_cap
    agent.x, agent.y = tx, ty


# Collaboration -------------------------------------------------------------


def helping_eligible(agent: AgentState, other: AgentState) -> bool:
    """A neighbor qualifies for help when incapacitated, or evacuating at
    half the would-be helper's pace or less."""
    if other.phase is Phase.INCAPACITATED:
        return True
    return (
        other.phase is Phase.EVACUATING
        and other.profile.max_speed <= 0.5 * agent.profile.max_speed
    )


def apply_collaboration(
    agent: AgentState,
    neighbors: list[AgentState],
    gmap: GridMap,
    rng: random.Random,
    smoke=None,
    opacity_coeff: float = 0.5,
) -> AgentState | None:
    """Maybe pair the agent with a visible help-eligible neighbor; returns
    the partner on a new pairing, else None.  A pair moves at half the
    slower member's pace toward the helper's goal and dissolves at the
    exit."""
    if agent.phase is not Phase.EVACUATING or agent.helping is not None:
        return None
    if agent.profile.collaboration <= 0.0:
        return None
    from .scenario import line_of_sight

    cell = agent.cell(gmap.cell_size)
    for other in sorted(neighbors, key=lambda a: a.id):
        if other.id == agent.id or other.helping is not None:
            continue
        if not helping_eligible(agent, other):
            continue
        d = math.hypot(other.x - agent.x, other.y - agent.y)
        if d > agent.profile.vision_range:
            continue
        if not line_of_sight(gmap, cell, other.cell(gmap.cell_size), smoke, opacity_coeff):
            continue
        if rng.random() < agent.profile.collaboration:
            agent.helping = other.id
            other.helping = agent.id
            agent.partner_speed = other.profile.max_speed
            other.partner_speed = agent.profile.max_speed
            return other
    return None


def dissolve_pair(agent: AgentState, other: AgentState) -> None:
    agent.helping = other.helping = None
    agent.partner_speed = other.partner_speed = None


def effective_max_speed(agent: AgentState) -> float:
    """Walking pace cap: half the slower partner's max speed when paired."""
    if agent.partner_speed is not None:
        return 0.5 * min(agent.profile.max_speed, agent.partner_speed)
    return agent.profile.max_speed
