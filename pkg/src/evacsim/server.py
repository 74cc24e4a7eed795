"""Interactive drill hosting: one live simulation per connected player.

Wire protocol (JSON text frames over a websocket at /ws):

    client -> server   hello{questionnaire[, seed, repeat]}, start,
                       input{seq, move}, bye
    server -> client   welcome{session_id, group, map}, state{...},
                       end{outcome, egress_time}, error{error}

A session walks Practice -> Live -> Finished.  Practice runs the player
alone inside the start room (all other cells masked to walls) with no
fire, alarm, or timer.  Live owns a full Simulation with a controlled
player.  Every state message is filtered through the fog-of-war check:
only entities inside the player's vision range with a clear sight line
through walls and smoke are included.
"""

from __future__ import annotations

import asyncio
import json
import logging
import math
import random
import threading
from dataclasses import replace
from enum import Enum

import numpy as np
from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from .agents import (
    AgentProfile,
    AgentState,
    Phase,
    step_cellular_automaton,
    step_social_force,
)
from .engine import (
    OPACITY_COEFF,
    Backend,
    Outcome,
    PlayerSpec,
    SimConfig,
    Simulation,
    config_digest,
)
from .errors import UnknownSessionError, WrongPhaseError
from .experiment import SessionRecord, append_record, classify_group
from .geometry import Cell, Vec, cell_center
from .hazard import HazardField
from .scenario import CellKind, GridMap, line_of_sight

log = logging.getLogger("evacsim.server")

STATE_RATE_HZ = 20.0


class SessionPhase(Enum):
    QUESTIONNAIRE = "questionnaire"
    PRACTICE = "practice"
    LIVE = "live"
    FINISHED = "finished"


# Static map + fog of war ----------------------------------------------------


def encode_map(gmap: GridMap) -> dict:
    """The welcome payload: grid cells run-length encoded per row as
    <count><char> runs, rows joined by '/'."""
    rows = []
    for y in range(gmap.height):
        runs = []
        run_ch = ""
        run_n = 0
        for x in range(gmap.width):
            ch = gmap.kind_at((x, y)).value
            if ch == run_ch:
                run_n += 1
            else:
                if run_n:
                    runs.append(f"{run_n}{run_ch}")
                run_ch, run_n = ch, 1
        runs.append(f"{run_n}{run_ch}")
        rows.append("".join(runs))
    return {
        "width": gmap.width,
        "height": gmap.height,
        "cell_size": gmap.cell_size,
        "cells": "/".join(rows),
    }


def practice_map(gmap: GridMap, start: Cell) -> GridMap:
    """Everything beyond the start room masked to walls, so controls can be
    tried without exploring the building."""
    room = next((r for r in gmap.rooms if r.contains(start)), None)
    if room is None:
        return gmap
    cells = list(gmap.cells)
    for y in range(gmap.height):
        for x in range(gmap.width):
            if not room.contains((x, y)):
                cells[y * gmap.width + x] = CellKind.WALL
    return replace(gmap, cells=tuple(cells))


def entity_visible(
    gmap: GridMap,
    player: AgentState,
    target: Cell,
    smoke: HazardField | None,
    max_range: float | None = None,
) -> bool:
    """The server-side fog-of-war check: inside the player's vision range
    (or the tighter max_range) with an unobstructed sight line."""
    limit = player.profile.vision_range
    if max_range is not None:
        limit = min(limit, max_range)
    cx, cy = cell_center(target, gmap.cell_size)
    if math.hypot(cx - player.x, cy - player.y) > limit:
        return False
    return line_of_sight(
        gmap, player.cell(gmap.cell_size), target, smoke=smoke, opacity_coeff=OPACITY_COEFF
    )


def build_state(
    gmap: GridMap,
    phase: SessionPhase,
    player: AgentState,
    agents,
    hazard: HazardField | None,
    alarm_active: bool,
    elapsed: float,
    tick: int,
) -> dict:
    visible_agents = []
    for a in agents:
        if a.id == player.id or a.phase is Phase.ESCAPED:
            continue
        if entity_visible(gmap, player, a.cell(gmap.cell_size), hazard):
            visible_agents.append(
                {"id": a.id, "x": a.x, "y": a.y, "vx": a.vx, "vy": a.vy,
                 "phase": a.phase.value}
            )
    fire = []
    smoke_cells = []
    if hazard is not None:
        for cell in sorted(hazard.burning):
            if entity_visible(gmap, player, cell, hazard):
                fire.append([cell[0], cell[1]])
        for row, col in np.argwhere(hazard.smoke > 0.0):
            cell = (int(col), int(row))
            if entity_visible(gmap, player, cell, hazard):
                smoke_cells.append([cell[0], cell[1], float(hazard.smoke[row, col])])
    signs = []
    for sign in gmap.signs:
        # same cap navigation applies: the sign's own legibility range
        if entity_visible(gmap, player, sign.cell, hazard, max_range=sign.visibility_range):
            dx, dy = sign.pointed_direction
            signs.append({"x": sign.cell[0], "y": sign.cell[1], "direction": [dx, dy]})
    return {
        "type": "state",
        "tick": tick,
        "phase": phase.value,
        "player": {
            "id": player.id,
            "x": player.x,
            "y": player.y,
            "vx": player.vx,
            "vy": player.vy,
            "health": player.health,
            "phase": player.phase.value,
        },
        "visible_agents": visible_agents,
        "visible_fire_cells": fire,
        "visible_smoke": smoke_cells,
        "visible_signs": signs,
        "alarm_active": alarm_active,
        "elapsed_since_alarm": elapsed,
    }


def clamp_move(move) -> Vec:
    """Inputs live in [-1,1]^2 with at most unit magnitude; the server
    enforces both so clients cannot buy speed."""
    try:
        mx = min(1.0, max(-1.0, float(move[0])))
        my = min(1.0, max(-1.0, float(move[1])))
    except (TypeError, ValueError, IndexError):
        return (0.0, 0.0)
    n = math.hypot(mx, my)
    if n > 1.0:
        return (mx / n, my / n)
    return (mx, my)


# Sessions -------------------------------------------------------------------


class Session:
    """One player's progression through Practice -> Live -> Finished."""

    def __init__(
        self,
        session_id: str,
        gmap: GridMap,
        config: SimConfig,
        frequent_gamer: bool,
        building_knowledge: bool,
        repeat: bool = False,
    ):
        self.id = session_id
        self.gmap = gmap
        self.group = classify_group(frequent_gamer, building_knowledge)
        self.repeat = repeat
        spec = config.player or PlayerSpec(profile=AgentProfile(reaction_time=0.0))
        self.config = replace(config, player=replace(spec, controlled=True))
        self.phase = SessionPhase.PRACTICE
        start = spec.start or gmap.player_start
        self._practice_map = practice_map(gmap, start)
        px, py = cell_center(start, gmap.cell_size)
        self._practice_player = AgentState(
            id=0, profile=spec.profile, x=px, y=py, phase=Phase.EVACUATING
        )
        self._practice_rng = random.Random(self.config.seed)
        self.sim: Simulation | None = None
        self.last_seq = -1
        self.stale_inputs = 0
        self.move: Vec = (0.0, 0.0)
        self.record: SessionRecord | None = None
        self.history: list[tuple] | None = None  # (state, player, agents, hazard, map)

    def start_live(self) -> None:
        if self.phase is not SessionPhase.PRACTICE:
            raise WrongPhaseError(f"start only applies in practice, not {self.phase.value}")
        self.sim = Simulation(self.gmap, self.config)
        self.move = (0.0, 0.0)
        self.phase = SessionPhase.LIVE

    def apply_input(self, seq, move) -> bool:
        """Record the latest intent; stale sequence numbers are dropped.
        Returns whether the input was accepted."""
        if self.phase not in (SessionPhase.PRACTICE, SessionPhase.LIVE):
            raise WrongPhaseError(f"input in phase {self.phase.value}")
        try:
            seq = int(seq)
        except (TypeError, ValueError):
            seq = -1
        if seq <= self.last_seq:
            self.stale_inputs += 1
            return False
        self.last_seq = seq
        self.move = clamp_move(move)
        return True

    def tick_once(self) -> None:
        if self.phase is SessionPhase.PRACTICE:
            self._practice_step()
        elif self.phase is SessionPhase.LIVE and self.sim.ended is None:
            self.sim.advance(self.move)

    def _practice_step(self) -> None:
        agent = self._practice_player
        if self.config.backend is Backend.CELLULAR_AUTOMATON:
            step_cellular_automaton(
                agent, self.move, set(), None, self._practice_map,
                self._practice_rng, self.config.dt,
            )
        else:
            step_social_force(
                agent, self.move, [], self._practice_map, self.config.force, self.config.dt
            )

    @property
    def player_terminal(self) -> bool:
        if self.phase is not SessionPhase.LIVE:
            return False
        return self.sim.player.phase.terminal or self.sim.ended is not None

    def state_message(self) -> dict:
        if self.phase is SessionPhase.PRACTICE:
            args = (self._practice_map, SessionPhase.PRACTICE, self._practice_player,
                    (), None, False, 0.0, 0)
        elif self.phase is SessionPhase.LIVE:
            sim = self.sim
            args = (self.gmap, SessionPhase.LIVE, sim.player, sim.agents,
                    sim.hazard, True, sim.elapsed_since_alarm, sim.tick)
        else:
            raise WrongPhaseError(f"no state in phase {self.phase.value}")
        state = build_state(*args)
        if self.history is not None:
            gmap_used, _, player, agents = args[0], args[1], args[2], args[3]
            self.history.append(
                (state, player.copy(), tuple(a.copy() for a in agents), args[4], gmap_used)
            )
        return state

    def finalize(self) -> SessionRecord:
        """Freeze the session into its record.  The first call decides;
        every later call returns the same object (terminal immutability)."""
        if self.record is not None:
            return self.record
        if self.sim is None:
            self.record = SessionRecord(
                session_id=self.id,
                group=self.group,
                seed=self.config.seed,
                config_digest=config_digest(self.config),
                player_egress_time=None,
                npc_egress_times=(),
                npc_total=self.config.npc_count,
                outcome=Outcome.ABORTED,
                repeat=self.repeat,
            )
        else:
            sim = self.sim
            if sim.player.phase.terminal or sim.ended is not None:
                # the drill reached its verdict; run the NPCs out so the
                # record carries an honest outcome and full egress list
                while sim.ended is None:
                    sim.advance()
                outcome = sim.ended
            else:
                outcome = Outcome.ABORTED
            npc_times = tuple(
                t for aid, t in sorted(sim.egress_times.items()) if aid != sim.player_id
            )
            self.record = SessionRecord(
                session_id=self.id,
                group=self.group,
                seed=self.config.seed,
                config_digest=config_digest(self.config),
                player_egress_time=sim.egress_times.get(sim.player_id),
                npc_egress_times=npc_times,
                npc_total=self.config.npc_count,
                outcome=outcome,
                events=sim.events,
                repeat=self.repeat,
            )
        self.phase = SessionPhase.FINISHED
        return self.record


class SessionManager:
    """Owns sessions and the single append point for the shared log file."""

    def __init__(self, gmap: GridMap, config: SimConfig, log_path=None,
                 record_history: bool = False):
        self.gmap = gmap
        self.config = config
        self.log_path = log_path
        self.record_history = record_history
        self.sessions: dict[str, Session] = {}
        self._next = 1
        self._log_lock = threading.Lock()

    def create_session(self, frequent_gamer: bool, building_knowledge: bool,
                       repeat: bool = False, seed: int | None = None) -> Session:
        config = self.config if seed is None else replace(self.config, seed=int(seed))
        sid = f"s{self._next}"
        self._next += 1
        session = Session(sid, self.gmap, config, frequent_gamer, building_knowledge, repeat)
        if self.record_history:
            session.history = []
        self.sessions[sid] = session
        log.info("session %s created (group %s)", sid, session.group.value)
        return session

    def get(self, session_id: str) -> Session:
        try:
            return self.sessions[session_id]
        except KeyError:
            raise UnknownSessionError(session_id) from None

    def finalize(self, session_id: str) -> SessionRecord:
        session = self.get(session_id)
        fresh = session.record is None
        record = session.finalize()
        if fresh and self.log_path is not None:
            with self._log_lock:
                append_record(record, self.log_path)
        return record


# Transport ------------------------------------------------------------------


def create_app(gmap: GridMap, config: SimConfig | None = None, log_path=None,
               paced: bool = True, record_history: bool = False) -> FastAPI:
    """The websocket application.  paced=False advances the simulation one
    tick per accepted input instead of on a wall clock, which makes the
    protocol fully deterministic for scripted clients and tests."""
    config = config or SimConfig()
    app = FastAPI()
    manager = SessionManager(gmap, config, log_path, record_history)
    app.state.manager = manager

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket):
        await ws.accept()
        session: Session | None = None
        hellos = 0
        send_lock = asyncio.Lock()
        tasks: list[asyncio.Task] = []

        async def send(payload: dict) -> None:
            async with send_lock:
                await ws.send_text(json.dumps(payload))

        async def send_state() -> None:
            await send(session.state_message())

        async def finish() -> None:
            current = asyncio.current_task()
            for task in tasks:
                if task is not current:  # self-cancel would abort the end frame
                    task.cancel()
            tasks.clear()
            record = manager.finalize(session.id)
            await send({
                "type": "end",
                "outcome": record.outcome.value,
                "egress_time": record.player_egress_time,
            })

        async def ticker() -> None:
            # wall-clock pacing: one tick per dt of real time
            loop = asyncio.get_running_loop()
            t0 = loop.time()
            n = 0
            while session.phase in (SessionPhase.PRACTICE, SessionPhase.LIVE):
                session.tick_once()
                n += 1
                if session.player_terminal:
                    await finish()
                    return
                await asyncio.sleep(max(0.0, t0 + n * config.dt - loop.time()))

        async def broadcaster() -> None:
            while session.phase in (SessionPhase.PRACTICE, SessionPhase.LIVE):
                await send_state()
                await asyncio.sleep(1.0 / STATE_RATE_HZ)

        try:
            while True:
                raw = await ws.receive_text()
                try:
                    msg = json.loads(raw)
                except json.JSONDecodeError:
                    await send({"type": "error", "error": "unparseable message"})
                    continue
                mtype = msg.get("type")

                if mtype == "hello":
                    if session is not None and session.phase is not SessionPhase.FINISHED:
                        await send({"type": "error", "error": "wrong_phase: session active"})
                        continue
                    q = msg.get("questionnaire") or {}
                    if "frequent_gamer" not in q or "building_knowledge" not in q:
                        await send({"type": "error",
                                    "error": "questionnaire needs frequent_gamer"
                                             " and building_knowledge"})
                        continue
                    hellos += 1
                    session = manager.create_session(
                        bool(q["frequent_gamer"]),
                        bool(q["building_knowledge"]),
                        repeat=bool(msg.get("repeat", False)) or hellos > 1,
                        seed=msg.get("seed"),
                    )
                    await send({
                        "type": "welcome",
                        "session_id": session.id,
                        "group": session.group.value,
                        "map": encode_map(gmap),
                    })
                    await send_state()
                    if paced:
                        tasks.append(asyncio.create_task(ticker()))
                        tasks.append(asyncio.create_task(broadcaster()))
                elif session is None:
                    await send({"type": "error", "error": "hello first"})
                elif mtype == "start":
                    try:
                        session.start_live()
                    except WrongPhaseError as exc:
                        await send({"type": "error", "error": f"wrong_phase: {exc}"})
                        continue
                    await send_state()  # first live state: elapsed 0
                elif mtype == "input":
                    if session.phase is SessionPhase.FINISHED:
                        await send({"type": "error", "error": "wrong_phase: finished"})
                        continue
                    accepted = session.apply_input(msg.get("seq", -1), msg.get("move", (0, 0)))
                    if not paced:
                        if accepted:
                            session.tick_once()
                        # exactly one reply per input: the end frame replaces
                        # the state frame on the terminal tick
                        if session.player_terminal:
                            await finish()
                        else:
                            await send_state()
                elif mtype == "bye":
                    # ends the session, not the connection: a fresh hello
                    # may follow for a (flagged) repeat run
                    await finish()
                else:
                    await send({"type": "error", "error": f"unknown type {mtype!r}"})
        except WebSocketDisconnect:
            pass
        finally:
            for task in tasks:
                task.cancel()
            if session is not None and session.record is None:
                manager.finalize(session.id)

    return app
