import importlib.resources

import pytest

from evacsim.scenario import parse_blueprint

# Two-room strip: spawn room west, ignitable room east, exit in the east
# wall.  Small enough to hand-check distances.
MINI_BLUEPRINT = """\
############
#P...#....E#
#P...D.....#
#P...#.....#
############
---
cell_size 0.5
room west 1 1 4 3
room east 6 1 4 3
player_start 1 1
"""

# One open room, sign midway pointing at the exit.
LOBBY_BLUEPRINT = """\
#########
#P..0..E#
#########
---
cell_size 0.5
room lobby 1 1 6 1
sign 0 E 6.0
exit 1 7,1
player_start 1 1
"""


@pytest.fixture
def mini_map():
    return parse_blueprint(MINI_BLUEPRINT)


@pytest.fixture
def lobby_map():
    return parse_blueprint(LOBBY_BLUEPRINT)


@pytest.fixture(scope="session")
def dei_map():
    text = (importlib.resources.files("evacsim") / "data" / "dei_like.map").read_text()
    return parse_blueprint(text)


def corridor_blueprint(width=44, height=8, spawn_cols=12):
    """Open corridor: spawn block west, full-height exit column east, and a
    2x2 closet room in the southeast for the ignition point."""
    rows = []
    for y in range(height):
        if y in (0, height - 1):
            rows.append("#" * width)
            continue
        row = ["#"]
        for x in range(1, width - 1):
            row.append("P" if x <= spawn_cols else ".")
        row.append("E")
        rows.append("".join(row))
    meta = "\n".join(
        [
            "---",
            "cell_size 0.5",
            f"room bay 1 1 {spawn_cols} {height - 2}",
            f"room closet {width - 4} {height - 3} 2 2",
            "player_start 1 1",
        ]
    )
    return "\n".join(rows) + "\n" + meta + "\n"


@pytest.fixture(scope="session")
def corridor_map():
    return parse_blueprint(corridor_blueprint())
