"""Exit codes, structured output, and artifact determinism of the CLI."""

import json

import pytest
from conftest import MINI_BLUEPRINT

from evacsim.cli import load_map, main
from evacsim.experiment import GroupLabel, import_records

FIXTURE_LOG = "src/evacsim/data/table2_fixture.csv"


def run_cli(argv, capsys):
    try:
        code = main(argv)
    except SystemExit as exc:
        code = exc.code if exc.code is not None else 0
    out, err = capsys.readouterr()
    return code, out, err


def summary_fields(out):
    """Parse the `summary k=v ...` line into a dict."""
    line = [l for l in out.splitlines() if l.startswith("summary ")][0]
    return dict(part.split("=", 1) for part in line.split()[1:])


class TestRun:
    def test_structured_summary(self, tmp_path, capsys):
        scenario = tmp_path / "mini.map"
        scenario.write_text(MINI_BLUEPRINT)
        code, out, _ = run_cli(
            ["run", str(scenario), "--seed", "3", "--npcs", "2", "--dt", "0.1"], capsys
        )
        assert code == 0
        fields = summary_fields(out)
        assert fields["session_id"] == "run-3"
        assert fields["outcome"] == "all_resolved"
        assert fields["total"] == "2"
        assert int(fields["events"]) > 0

    def test_same_seed_byte_identical_artifacts(self, tmp_path, capsys):
        outs = []
        for name in ("a", "b"):
            out_csv = tmp_path / f"{name}.csv"
            code, _, _ = run_cli(
                ["run", "dei_like.map", "--seed", "7", "--npcs", "10",
                 "--dt", "0.1", "--out", str(out_csv)],
                capsys,
            )
            assert code == 0
            events = (tmp_path / f"{name}.events" / "run-7.events.json").read_bytes()
            outs.append((out_csv.read_bytes(), events))
        assert outs[0] == outs[1]

    def test_both_backends_complete(self, capsys):
        for backend in ("ca", "force"):
            code, out, _ = run_cli(
                ["run", "dei_like.map", "--seed", "3", "--npcs", "6",
                 "--dt", "0.1", "--backend", backend],
                capsys,
            )
            assert code == 0
            assert summary_fields(out)["outcome"] == "all_resolved"

    def test_missing_file_exit_2(self, capsys):
        code, _, err = run_cli(["run", "no_such_place.map"], capsys)
        assert code == 2
        assert "no_such_place.map" in err

    def test_malformed_blueprint_exit_2(self, tmp_path, capsys):
        bad = tmp_path / "bad.map"
        bad.write_text("####\n#..#\n####\n")  # no exit, no spawn
        code, _, err = run_cli(["run", str(bad)], capsys)
        assert code == 2
        assert "error:" in err

    def test_invalid_dt_exit_1(self, tmp_path, capsys):
        scenario = tmp_path / "mini.map"
        scenario.write_text(MINI_BLUEPRINT)
        code, _, err = run_cli(["run", str(scenario), "--dt", "0.2"], capsys)
        assert code == 1
        assert "dt" in err

    def test_bundled_name_fallback(self):
        gmap = load_map("dei_like.map")
        assert len(gmap.exits) == 2


class TestCohort:
    def test_rows_and_summary(self, tmp_path, capsys):
        out_csv = tmp_path / "cohort.csv"
        code, out, _ = run_cli(
            ["cohort", "dei_like.map", "--group", "B", "--runs", "2",
             "--seed", "4", "--out", str(out_csv)],
            capsys,
        )
        assert code == 0
        fields = summary_fields(out)
        assert fields["group"] == "B"
        assert fields["runs"] == "2"
        records = import_records(out_csv)
        assert [r.session_id for r in records] == ["B-4", "B-5"]
        assert all(r.group is GroupLabel.B for r in records)
        for r in records:
            payload = json.loads(
                (tmp_path / "cohort.events" / f"{r.session_id}.events.json").read_text()
            )
            assert payload["session_id"] == r.session_id
            assert payload["events"]

    def test_unknown_group_exit_1(self, capsys):
        code, _, err = run_cli(["cohort", "dei_like.map", "--group", "X"], capsys)
        assert code == 1
        assert "invalid choice" in err

    def test_group_is_required(self, capsys):
        code, _, err = run_cli(["cohort", "dei_like.map"], capsys)
        assert code == 1
        assert "--group" in err


class TestAnalyze:
    def test_reference_fixture_means(self, capsys):
        code, out, _ = run_cli(["analyze", FIXTURE_LOG], capsys)
        assert code == 0
        lines = out.splitlines()
        assert lines[0] == "group n mean_egress_s"
        assert lines[1:5] == ["A 8 23.9", "B 6 43.9", "C 5 58.0", "D 11 145.1"]
        fields = summary_fields(out)
        assert fields["records"] == "30"
        assert fields["groups"] == "4"

    def test_header_only_log(self, tmp_path, capsys):
        log = tmp_path / "empty.csv"
        log.write_text(
            "session_id,group,seed,outcome,player_egress_s,npc_escaped,npc_total\n"
        )
        code, out, _ = run_cli(["analyze", str(log)], capsys)
        assert code == 0
        assert summary_fields(out)["groups"] == "0"

    def test_corrupt_row_cited(self, tmp_path, capsys):
        log = tmp_path / "corrupt.csv"
        rows = [
            "session_id,group,seed,outcome,player_egress_s,npc_escaped,npc_total",
            "p1,A,1,all_resolved,10.0,0,0",
            "p2,A,2,all_resolved,11.0,0,0",
            "p3,B,3,all_resolved,40.0,0,0",
            "p4,B,oops,all_resolved,41.0,0,0",
        ]
        log.write_text("\n".join(rows) + "\n")
        code, _, err = run_cli(["analyze", str(log)], capsys)
        assert code == 1
        assert "row 5" in err

    def test_unfinished_sessions_skipped(self, tmp_path, capsys):
        log = tmp_path / "mixed.csv"
        rows = [
            "session_id,group,seed,outcome,player_egress_s,npc_escaped,npc_total",
            "p1,A,1,all_resolved,10.0,0,0",
            "p2,A,2,timeout,,0,0",
        ]
        log.write_text("\n".join(rows) + "\n")
        code, out, _ = run_cli(["analyze", str(log)], capsys)
        assert code == 0
        fields = summary_fields(out)
        assert fields["records"] == "2"
        assert fields["used"] == "1"
        assert "A 1 10.0" in out.splitlines()


class TestParsing:
    def test_no_subcommand_exit_1(self, capsys):
        code, _, err = run_cli([], capsys)
        assert code == 1
        assert "evacsim" in err

    def test_unknown_flag_exit_1(self, capsys):
        code, _, _ = run_cli(["run", "dei_like.map", "--turbo"], capsys)
        assert code == 1

    def test_bad_backend_choice_exit_1(self, capsys):
        code, _, err = run_cli(["run", "x.map", "--backend", "warp"], capsys)
        assert code == 1
        assert "invalid choice" in err

    def test_help_exits_0(self, capsys):
        code, out, _ = run_cli(["--help"], capsys)
        assert code == 0
        for sub in ("run", "cohort", "analyze", "serve"):
            assert sub in out

    @pytest.mark.parametrize(
        "sub,flags",
        [
            ("run", ["--seed", "--npcs", "--backend", "--dt", "--max-time", "--out"]),
            ("cohort", ["--group", "--runs", "--seed", "--npcs", "--backend",
                        "--dt", "--max-time", "--out"]),
            ("analyze", []),
            ("serve", ["--port", "--seed", "--npcs", "--backend", "--dt",
                       "--max-time", "--out"]),
        ],
    )
    def test_help_lists_every_flag(self, sub, flags, capsys):
        code, out, _ = run_cli([sub, "--help"], capsys)
        assert code == 0
        for flag in flags:
            assert flag in out

    def test_log_env_var_accepted(self, tmp_path, capsys, monkeypatch):
        monkeypatch.setenv("EVACSIM_LOG", "DEBUG")
        code, out, _ = run_cli(["analyze", FIXTURE_LOG], capsys)
        assert code == 0
        assert "A 8 23.9" in out
