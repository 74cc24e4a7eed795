"""Deterministic simulation loop coupling the map, hazard, navigation and
agent modules; event timeline; terminal census.

One Simulation instance has one logical owner and is mutated only through
step().  Snapshots are immutable values safe to hand elsewhere.  The
(map, config) pair fully determines the event log: every random draw comes
from per-subsystem streams split off the config seed by fixed labels, so
adding draws to one subsystem never perturbs another.
"""

from __future__ import annotations

import hashlib
import math
import random
import zlib
from dataclasses import dataclass, field
from enum import Enum

from .agents import (
    AgentProfile,
    AgentState,
    ExitGoal,
    ForceParams,
    Goal,
    HerdGoal,
    Phase,
    ProfileDistribution,
    SignGoal,
    WanderGoal,
    apply_collaboration,
    decide_goal,
    dissolve_pair,
    goal_direction,
    sample_known_exits,
    sample_population,
    step_cellular_automaton,
    step_social_force,
    update_phase,
)
from .errors import SimEndedError
from .geometry import Cell, Vec, cell_center, normalize
from .hazard import HazardField, HazardParams, apply_harm, ignite_random_room, step_fire, step_smoke
from .navigation import FloorField, compute_floor_field
from .scenario import GridMap

# Pair repulsion at 2 m separation is ~4e-6 N; beyond that neighbors are
# skipped entirely.
FORCE_CUTOFF = 2.0

# Rebuild floor fields (fire cells as walls) whenever the burning set has
# grown by this many cells since the last build.
FIELD_REBUILD_GROWTH = 10

OPACITY_COEFF = 0.5  # optical-depth coefficient shared by every LOS query


class Backend(Enum):
    CELLULAR_AUTOMATON = "ca"
    SOCIAL_FORCE = "force"


class Outcome(Enum):
    ALL_RESOLVED = "all_resolved"
    TIMEOUT = "timeout"
    ABORTED = "aborted"


@dataclass(frozen=True)
class PlayerSpec:
    """Synthetic or human-controlled player joining the NPC population.

    `controlled` players take their walking direction from external inputs
    passed to step(); uncontrolled ones behave like NPCs (used by headless
    cohort runs)."""

    profile: AgentProfile = AgentProfile(reaction_time=0.0)
    start: Cell | None = None  # None: the map's player_start
    controlled: bool = False


@dataclass(frozen=True)
class SimConfig:
    dt: float = 0.05  # seconds per tick
    backend: Backend = Backend.CELLULAR_AUTOMATON
    seed: int = 0
    npc_count: int = 30
    max_sim_time: float = 300.0  # seconds
    hazard: HazardParams = HazardParams()
    force: ForceParams = ForceParams()
    profiles: ProfileDistribution = ProfileDistribution()
    player: PlayerSpec | None = None

    def validate(self) -> None:
        if not 0.0 < self.dt <= 0.1:
            raise ValueError(f"dt must be in (0, 0.1], got {self.dt}")
        if self.max_sim_time <= 0:
            raise ValueError("max_sim_time must be positive")
        if self.npc_count < 0:
            raise ValueError("npc_count must be >= 0")


def config_digest(config: SimConfig) -> str:
    """Stable digest of a config; dataclass reprs are deterministic."""
    return hashlib.sha256(repr(config).encode()).hexdigest()[:16]


# Events --------------------------------------------------------------------


@dataclass(frozen=True)
class Ignition:
    room: str


@dataclass(frozen=True)
class Alarm:
    pass


@dataclass(frozen=True)
class AgentEscaped:
    agent_id: int
    time: float  # seconds since alarm


@dataclass(frozen=True)
class AgentIncapacitated:
    agent_id: int


@dataclass(frozen=True)
class GoalChanged:
    agent_id: int
    goal: Goal


@dataclass(frozen=True)
class SimEnded:
    reason: Outcome


Event = Ignition | Alarm | AgentEscaped | AgentIncapacitated | GoalChanged | SimEnded


def _format_goal(goal: Goal) -> str:
    if isinstance(goal, ExitGoal):
        return f"exit:{goal.exit_id}"
    kind = {SignGoal: "sign", HerdGoal: "herd", WanderGoal: "wander"}[type(goal)]
    return f"{kind}:{goal.direction[0]!r},{goal.direction[1]!r}"


def format_event(tick: int, event: Event) -> str:
    """One canonical line per event; the replay test hashes these."""
    if isinstance(event, Ignition):
        body = f"ignition room={event.room}"
    elif isinstance(event, Alarm):
        body = "alarm"
    elif isinstance(event, AgentEscaped):
        body = f"escaped id={event.agent_id} t={event.time!r}"
    elif isinstance(event, AgentIncapacitated):
        body = f"incapacitated id={event.agent_id}"
    elif isinstance(event, GoalChanged):
        body = f"goal id={event.agent_id} {_format_goal(event.goal)}"
    elif isinstance(event, SimEnded):
        body = f"sim_ended reason={event.reason.value}"
    else:  # pragma: no cover - exhaustive above
        raise TypeError(f"unknown event {event!r}")
    return f"{tick} {body}"


@dataclass
class EventLog:
    entries: list[tuple[int, Event]] = field(default_factory=list)

    def append(self, tick: int, event: Event) -> None:
        if self.entries and tick < self.entries[-1][0]:
            raise ValueError("event ticks must be non-decreasing")
        self.entries.append((tick, event))

    def lines(self) -> list[str]:
        return [format_event(t, e) for t, e in self.entries]

    def digest(self) -> str:
        return hashlib.sha256("\n".join(self.lines()).encode()).hexdigest()

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)


# Simulation ----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Snapshot:
    tick: int
    agents: tuple[AgentState, ...]
    hazard: HazardField
    alarm_active: bool
    elapsed_since_alarm: float


def _substream(seed: int, label: str) -> random.Random:
    return random.Random(seed ^ zlib.crc32(label.encode("ascii")))


class Simulation:
    """Tick-stepped drill: fire ignites and the alarm rings at tick 0,
    agents react, navigate and escape (or not)."""

    def __init__(self, gmap: GridMap, config: SimConfig):
        config.validate()
        self.gmap = gmap
        self.config = config
        self.tick = 0
        self.alarm_tick = 0
        self.events = EventLog()
        self.ended: Outcome | None = None
        self.egress_times: dict[int, float] = {}

        self._rng_ignite = _substream(config.seed, "hazard.ignite")
        self._rng_fire = _substream(config.seed, "hazard.fire")
        self._rng_profiles = _substream(config.seed, "agents.profiles")
        self._rng_decide = _substream(config.seed, "agents.decide")
        self._rng_move = _substream(config.seed, "agents.move")
        self._rng_collab = _substream(config.seed, "agents.collab")

        player_cell = None
        self.player_id: int | None = None
        if config.player is not None:
            player_cell = config.player.start or gmap.player_start
        self.agents = sample_population(
            gmap,
            config.npc_count,
            config.profiles,
            self._rng_profiles,
            exclude_cells=frozenset([player_cell]) if player_cell else frozenset(),
        )
        if config.player is not None:
            profile = config.player.profile
            px, py = cell_center(player_cell, gmap.cell_size)
            self.player_id = config.npc_count
            self.agents.append(
                AgentState(
                    id=self.player_id,
                    profile=profile,
                    x=px,
                    y=py,
                    known_exits=sample_known_exits(gmap, profile.knowledge, self._rng_profiles),
                )
            )
        self.initial_population = len(self.agents)

        self.hazard = ignite_random_room(gmap, self._rng_ignite, tick=0)
        self.events.append(0, Ignition(self.hazard.ignition_room))
        self.events.append(0, Alarm())

        self.fields: dict[int, FloorField] = {}
        self._burning_at_build = -1
        self._maybe_rebuild_fields(force=True)

        self._decision_interval = max(1, round(1.0 / config.dt))
        self._player_input: Vec = (0.0, 0.0)
        self._check_census()
        if self._all_terminal():
            self._end(Outcome.ALL_RESOLVED)

    # -- queries

    @property
    def elapsed_since_alarm(self) -> float:
        return (self.tick - self.alarm_tick) * self.config.dt

    def agent_by_id(self, agent_id: int) -> AgentState:
        return self.agents[agent_id]  # ids are list positions by construction

    @property
    def player(self) -> AgentState | None:
        return None if self.player_id is None else self.agents[self.player_id]

    def snapshot(self) -> Snapshot:
        return Snapshot(
            tick=self.tick,
            agents=tuple(a.copy() for a in self.agents),
            hazard=self.hazard,
            alarm_active=True,
            elapsed_since_alarm=self.elapsed_since_alarm,
        )

    # -- stepping

    def step(self, player_input: Vec | None = None) -> Snapshot:
        """Advance one tick and return the new snapshot.

        Raises SimEndedError once the simulation has terminated."""
        self.advance(player_input)
        return self.snapshot()

    def advance(self, player_input: Vec | None = None) -> None:
        """step() without materializing a snapshot (batch-run fast path)."""
        if self.ended is not None:
            raise SimEndedError(f"simulation ended ({self.ended.value})")
        cfg = self.config
        dt = cfg.dt
        if player_input is not None:
            self._player_input = player_input
        self.tick += 1

        # 1. Hazard: fire spread then smoke transport.
        self.hazard = step_fire(self.hazard, self.gmap, cfg.hazard, dt, self._rng_fire)
        self.hazard = step_smoke(self.hazard, self.gmap, cfg.hazard, dt)
        self._maybe_rebuild_fields()

        # 2. Phase machine: reaction-time transitions (escapes detected
        # after movement, below).
        for agent in self.agents:
            if agent.phase is Phase.NORMAL:
                update_phase(agent, self.gmap, self.alarm_tick, self.tick, dt)

        # 3. Goal decisions at 1 Hz (and immediately on becoming goalless).
        decide_now = self.tick % self._decision_interval == 0
        for agent in self.agents:
            if agent.phase is not Phase.EVACUATING or self._is_controlled(agent):
                continue
            if not (decide_now or agent.goal is None):
                continue
            new_goal = decide_goal(
                agent,
                self.gmap,
                self.fields,
                self.hazard,
                self.agents,
                self._rng_decide,
                opacity_coeff=OPACITY_COEFF,
            )
            if new_goal != agent.goal:
                agent.goal = new_goal
                self.events.append(self.tick, GoalChanged(agent.id, new_goal))
            if agent.profile.collaboration > 0.0 and decide_now:
                apply_collaboration(
                    agent, self.agents, self.gmap, self._rng_collab, self.hazard, OPACITY_COEFF
                )

        # 4. Movement.
        if cfg.backend is Backend.CELLULAR_AUTOMATON:
            self._move_cellular(dt)
        else:
            self._move_force(dt)

        # 5. Harm, then escape detection.
        for agent in self.agents:
            was_terminal = agent.phase.terminal
            apply_harm(self.hazard, agent, cfg.hazard, dt)
            if agent.phase is Phase.INCAPACITATED and not was_terminal:
                self.events.append(self.tick, AgentIncapacitated(agent.id))
                self._dissolve_partner(agent)
        exit_cells = self.gmap.exit_cells()
        for agent in self.agents:
            if agent.phase is Phase.EVACUATING and agent.cell(self.gmap.cell_size) in exit_cells:
                agent.phase = Phase.ESCAPED
                agent.vx = agent.vy = 0.0
                t = self.elapsed_since_alarm
                self.egress_times[agent.id] = t
                self.events.append(self.tick, AgentEscaped(agent.id, t))
                self._dissolve_partner(agent)

        self._check_census()
        if self._all_terminal():
            self._end(Outcome.ALL_RESOLVED)
        elif self.elapsed_since_alarm >= cfg.max_sim_time:
            self._end(Outcome.TIMEOUT)

    # -- internals

    def _is_controlled(self, agent: AgentState) -> bool:
        return (
            self.player_id is not None
            and agent.id == self.player_id
            and self.config.player.controlled
        )

    def _desired_direction(self, agent: AgentState) -> Vec | None:
        if self._is_controlled(agent):
            return normalize(self._player_input)
        return goal_direction(agent, self.gmap, self.fields)

    def _move_cellular(self, dt: float) -> None:
        s = self.gmap.cell_size
        occupancy = {a.cell(s) for a in self.agents if a.phase is not Phase.ESCAPED}
        for agent in self.agents:  # ascending id: deterministic cell claims
            if agent.phase is not Phase.EVACUATING:
                continue
            here = agent.cell(s)
            occupancy.discard(here)
            goal = agent.goal
            fld = None
            desired = None
            if not self._is_controlled(agent) and isinstance(goal, ExitGoal):
                fld = self.fields.get(goal.exit_id)
            else:
                desired = self._desired_direction(agent)
            step_cellular_automaton(agent, desired, occupancy, fld, self.gmap, self._rng_move, dt)
            occupancy.add(agent.cell(s))

    def _move_force(self, dt: float) -> None:
        # Forces read a frozen copy of this tick's states, so update order
        # inside the loop cannot matter.
        frozen = [a.copy() for a in self.agents if a.phase is not Phase.ESCAPED]
        for agent in self.agents:
            if agent.phase is not Phase.EVACUATING:
                continue
            neighbors = [
                b
                for b in frozen
                if b.id != agent.id and math.hypot(b.x - agent.x, b.y - agent.y) <= FORCE_CUTOFF
            ]
            step_social_force(
                agent, self._desired_direction(agent), neighbors, self.gmap, self.config.force, dt
            )

    def _dissolve_partner(self, agent: AgentState) -> None:
        if agent.helping is not None:
            dissolve_pair(agent, self.agent_by_id(agent.helping))

    def _maybe_rebuild_fields(self, force: bool = False) -> None:
        grown = len(self.hazard.burning) - self._burning_at_build
        if not force and grown < FIELD_REBUILD_GROWTH:
            return
        blocked = frozenset(self.hazard.burning)
        self.fields = {
            e.id: compute_floor_field(self.gmap, {e.id}, blocked) for e in self.gmap.exits
        }
        self._burning_at_build = len(self.hazard.burning)

    def _check_census(self) -> None:
        escaped = incapacitated = inside = 0
        for a in self.agents:
            if a.phase is Phase.ESCAPED:
                escaped += 1
            elif a.phase is Phase.INCAPACITATED:
                incapacitated += 1
            else:
                inside += 1
        total = escaped + incapacitated + inside
        assert total == self.initial_population, (
            f"census broken at tick {self.tick}: {total} != {self.initial_population}"
        )

    def _all_terminal(self) -> bool:
        return all(a.phase.terminal for a in self.agents)

    def _end(self, reason: Outcome) -> None:
        self.ended = reason
        self.events.append(self.tick, SimEnded(reason))


def init_simulation(gmap: GridMap, config: SimConfig) -> Simulation:
    """Construct the simulation: population spawned, fire ignited, alarm
    rung at tick 0, floor fields precomputed."""
    return Simulation(gmap, config)


def run_to_completion(gmap: GridMap, config: SimConfig, session_id: str = "", group=None):
    """Step until every agent is terminal or max_sim_time elapses; returns
    the finished SessionRecord."""
    from .experiment import SessionRecord  # record type lives with the analytics

    sim = Simulation(gmap, config)
    while sim.ended is None:
        sim.advance()
    player_time = None
    npc_times = []
    for agent_id, t in sorted(sim.egress_times.items()):
        if sim.player_id is not None and agent_id == sim.player_id:
            player_time = t
        else:
            npc_times.append(t)
    return SessionRecord(
        session_id=session_id or f"run-{config.seed}",
        group=group,
        seed=config.seed,
        config_digest=config_digest(config),
        player_egress_time=player_time,
        npc_egress_times=tuple(npc_times),
        npc_total=config.npc_count,
        events=sim.events,
        outcome=sim.ended,
    )
