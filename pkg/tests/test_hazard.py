import random
from dataclasses import replace

import numpy as np
import pytest

from evacsim.agents import AgentProfile, AgentState, Phase
from evacsim.errors import NoRoomsError
from evacsim.hazard import (
    HazardParams,
    apply_harm,
    empty_field,
    ignite_random_room,
    step_fire,
    step_smoke,
)
from evacsim.scenario import parse_blueprint

THREE_ROOMS = """\
###############
#PP#....#....E#
###############
---
room sp 1 1 2 1
room a 4 1 4 1
room b 9 1 4 1
"""

FIRE_CORRIDOR = "#" * 40 + "\n" + "#P" + "." * 36 + "E#" + "\n" + "#" * 40 + "\n"


def burning_at(gmap, *cells):
    return replace(empty_field(gmap), burning=frozenset(cells))


def test_ignite_forced_room(mini_map):
    hz = ignite_random_room(mini_map, random.Random(0))
    assert hz.ignition_room == "east"
    [cell] = hz.burning
    assert mini_map.is_walkable(cell)
    assert mini_map.room_of(cell).name == "east"
    assert not hz.smoke.any()


def test_ignite_records_tick(mini_map):
    hz = ignite_random_room(mini_map, random.Random(0), tick=7)
    assert hz.ignition_tick == 7


def test_ignite_two_rooms_uniform():
    gmap = parse_blueprint(THREE_ROOMS)
    rng = random.Random(42)
    counts = {"a": 0, "b": 0}
    for _ in range(10_000):
        counts[ignite_random_room(gmap, rng).ignition_room] += 1
    assert counts["a"] + counts["b"] == 10_000
    assert 4800 <= counts["a"] <= 5200


def test_ignite_only_spawn_room():
    text = "#####\n#P.E#\n#####\n---\nroom only 1 1 2 1\n"
    gmap = parse_blueprint(text)
    with pytest.raises(NoRoomsError):
        ignite_random_room(gmap, random.Random(0))


def test_ignite_no_rooms_at_all():
    gmap = parse_blueprint("#####\n#P.E#\n#####\n")
    with pytest.raises(NoRoomsError):
        ignite_random_room(gmap, random.Random(0))


def test_fire_zero_spread(mini_map):
    hz = burning_at(mini_map, (7, 2))
    out = step_fire(hz, mini_map, HazardParams(p_spread=0.0), 1.0, random.Random(0))
    assert out is hz


def test_fire_nothing_burning(mini_map):
    hz = empty_field(mini_map)
    out = step_fire(hz, mini_map, HazardParams(p_spread=1.0), 1.0, random.Random(0))
    assert out is hz


def test_fire_certain_spread(mini_map):
    # (7,2) is open floor in the east room: all 4 orthogonal neighbors
    # ignite when p_spread is 1.
    hz = burning_at(mini_map, (7, 2))
    out = step_fire(hz, mini_map, HazardParams(p_spread=1.0), 1.0, random.Random(0))
    assert out.burning == {(7, 2), (6, 2), (8, 2), (7, 1), (7, 3)}


def test_fire_does_not_enter_walls(mini_map):
    hz = burning_at(mini_map, (6, 1))  # against the north wall and the divider
    out = step_fire(hz, mini_map, HazardParams(p_spread=1.0), 1.0, random.Random(0))
    for cell in out.burning:
        assert mini_map.is_walkable(cell)


def test_fire_monotone(mini_map):
    params = HazardParams(p_spread=0.3)
    rng = random.Random(5)
    hz = burning_at(mini_map, (7, 2))
    for _ in range(30):
        nxt = step_fire(hz, mini_map, params, 0.5, rng)
        assert hz.burning <= nxt.burning
        hz = nxt


def test_fire_deterministic(mini_map):
    params = HazardParams(p_spread=0.3)
    a = step_fire(burning_at(mini_map, (7, 2)), mini_map, params, 1.0, random.Random(9))
    b = step_fire(burning_at(mini_map, (7, 2)), mini_map, params, 1.0, random.Random(9))
    assert a.burning == b.burning


def test_fire_front_advance_monte_carlo():
    # 1-wide corridor, p_spread 0.5, dt 1: the front moves one cell per
    # step with probability exactly 0.5, so the mean advance per step over
    # 1000 seeds must land within 5% of 0.5.
    gmap = parse_blueprint(FIRE_CORRIDOR)
    params = HazardParams(p_spread=0.5)
    steps = 25
    total = 0
    for seed in range(1000):
        rng = random.Random(seed)
        hz = burning_at(gmap, (1, 1))
        for _ in range(steps):
            hz = step_fire(hz, gmap, params, 1.0, rng)
        total += max(x for x, _ in hz.burning) - 1
    mean_advance = total / (1000 * steps)
    assert 0.475 <= mean_advance <= 0.525


def test_fire_dt_exponent_monte_carlo():
    # p_spread 0.75 over dt 2 -> per-step probability 1-(0.25)^2 = 0.9375.
    gmap = parse_blueprint(FIRE_CORRIDOR)
    params = HazardParams(p_spread=0.75)
    lit = 0
    for seed in range(1000):
        hz = step_fire(burning_at(gmap, (1, 1)), gmap, params, 2.0, random.Random(seed))
        lit += len(hz.burning) - 1
    assert lit / 1000 == pytest.approx(0.9375, abs=0.03)


def test_smoke_uniform_fixed_point(mini_map):
    from evacsim.hazard import walkable_mask

    hz = empty_field(mini_map)
    smoke = np.where(walkable_mask(mini_map), 0.3, 0.0)
    hz = replace(hz, smoke=smoke)
    out = step_smoke(hz, mini_map, HazardParams(smoke_emission=0.0), 1.0)
    assert np.array_equal(out.smoke, smoke)


def test_smoke_emission_only(mini_map):
    hz = burning_at(mini_map, (7, 2))
    params = HazardParams(smoke_emission=0.2, smoke_diffusion=0.0)
    out = step_smoke(hz, mini_map, params, 1.0)
    assert out.density_at((7, 2)) == pytest.approx(0.2)
    others = out.smoke.copy()
    others[2, 7] = 0.0
    assert not others.any()


def test_smoke_fills_sealed_room():
    # 3x3 room with no opening; the exit cell sits outside it in the wall
    gmap = parse_blueprint("######\n#...##\n#P..##\n#...#E\n######\n")
    hz = burning_at(gmap, (2, 2))
    params = HazardParams(smoke_emission=0.5, smoke_diffusion=0.2)
    for _ in range(1000):
        hz = step_smoke(hz, gmap, params, 1.0)
    room = [(x, y) for y in range(1, 4) for x in range(1, 4)]
    # the whole room saturates (the last float ulp can round back down, so
    # exact 1.0 everywhere is not reachable)
    assert all(hz.density_at(c) >= 1.0 - 1e-9 for c in room)
    assert hz.density_at((2, 2)) == 1.0
    # the sealed exit cell never receives smoke
    assert hz.density_at((5, 3)) == 0.0


def test_smoke_mass_never_grows_without_emission(corridor_map):
    from evacsim.hazard import walkable_mask

    rng = np.random.default_rng(3)
    smoke = np.where(
        walkable_mask(corridor_map),
        rng.uniform(0.0, 1.0, (corridor_map.height, corridor_map.width)),
        0.0,
    )
    hz = replace(empty_field(corridor_map), smoke=smoke)
    params = HazardParams(smoke_emission=0.0, smoke_diffusion=0.35)
    mass = hz.smoke.sum()
    for _ in range(50):
        hz = step_smoke(hz, corridor_map, params, 1.0)
        new_mass = hz.smoke.sum()
        assert new_mass <= mass + 1e-9
        assert hz.smoke.min() >= 0.0
        assert hz.smoke.max() <= 1.0
        mass = new_mass


def test_smoke_stays_off_walls(mini_map):
    hz = burning_at(mini_map, (7, 2))
    params = HazardParams(smoke_emission=1.0, smoke_diffusion=0.4)
    for _ in range(20):
        hz = step_smoke(hz, mini_map, params, 1.0)
    from evacsim.hazard import walkable_mask

    assert not hz.smoke[~walkable_mask(mini_map)].any()


def _agent_at(x, y, health=100.0, phase=Phase.NORMAL):
    return AgentState(id=0, profile=AgentProfile(), x=x, y=y, health=health, phase=phase)


def test_harm_clear_air(mini_map):
    hz = empty_field(mini_map)
    agent = _agent_at(0.75, 0.75)
    out = apply_harm(hz, agent, HazardParams(), 1.0)
    assert out.health == 100.0
    assert out.phase is Phase.NORMAL


def test_harm_threshold_is_strict(mini_map):
    hz = empty_field(mini_map)
    hz.smoke[1, 1] = 0.6
    agent = _agent_at(0.75, 0.75)
    apply_harm(hz, agent, HazardParams(harm_threshold=0.6), 1.0)
    assert agent.health == 100.0


def test_harm_dense_smoke(mini_map):
    hz = empty_field(mini_map)
    hz.smoke[1, 1] = 1.0
    agent = _agent_at(0.75, 0.75)
    apply_harm(hz, agent, HazardParams(harm_rate=5.0), 2.0)
    assert agent.health == pytest.approx(90.0)


def test_harm_clamps_and_incapacitates(mini_map):
    hz = empty_field(mini_map)
    hz.smoke[1, 1] = 1.0
    agent = _agent_at(0.75, 0.75, health=3.0)
    apply_harm(hz, agent, HazardParams(harm_rate=5.0), 1.0)
    assert agent.health == 0.0
    assert agent.phase is Phase.INCAPACITATED


def test_harm_fire_and_smoke_stack(mini_map):
    hz = burning_at(mini_map, (1, 1))
    hz.smoke[1, 1] = 1.0
    agent = _agent_at(0.75, 0.75)
    apply_harm(hz, agent, HazardParams(harm_rate=5.0, fire_harm_rate=50.0), 0.1)
    assert agent.health == pytest.approx(100.0 - 0.5 - 5.0)


def test_harm_skips_terminal(mini_map):
    hz = burning_at(mini_map, (1, 1))
    agent = _agent_at(0.75, 0.75, phase=Phase.ESCAPED)
    apply_harm(hz, agent, HazardParams(), 1.0)
    assert agent.health == 100.0
    assert agent.phase is Phase.ESCAPED
