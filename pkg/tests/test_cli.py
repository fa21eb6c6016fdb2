import csv
import json

import pytest

import cli.commands as commands
from cli.commands import (
    COMPARE_FILE,
    EVENTS_FILE,
    EXIT_INVARIANT,
    EXIT_IO,
    EXIT_OK,
    EXIT_USAGE,
    EXIT_VALIDATION,
    REPORT_CSV_FILE,
    REPORT_JSON_FILE,
    compare_command,
    compare_rows,
    run_command,
    validate_command,
)
from cli.reports import format_cell
from core.config import dump_scenario, load_scenario
from core.engine import InvariantViolation
from core.metrics import CSV_COLUMNS
from main import main


def _read_csv(path):
    with open(path, newline="", encoding="utf-8") as f:
        return list(csv.DictReader(f))


def test_run_writes_every_output(scenario_file, tmp_path):
    assert run_command(str(scenario_file)) == EXIT_OK
    out = tmp_path / "out"
    for name in (EVENTS_FILE, REPORT_JSON_FILE, REPORT_CSV_FILE):
        assert (out / name).exists()
    rows = _read_csv(out / REPORT_CSV_FILE)
    assert len(rows) == 1
    assert list(rows[0]) == list(CSV_COLUMNS)
    report = json.loads((out / REPORT_JSON_FILE).read_text(encoding="utf-8"))
    assert rows[0]["run_id"] == report["run_id"]
    assert rows[0]["policy"] == "PULL_RL"


def test_reruns_are_byte_identical(scenario_file, tmp_path):
    first, second = tmp_path / "first", tmp_path / "second"
    assert run_command(str(scenario_file), out_dir=str(first)) == EXIT_OK
    assert run_command(str(scenario_file), out_dir=str(second)) == EXIT_OK
    for name in (EVENTS_FILE, REPORT_JSON_FILE, REPORT_CSV_FILE):
        assert (first / name).read_bytes() == (second / name).read_bytes()


def test_seed_override_changes_the_run(scenario_file, tmp_path):
    assert run_command(str(scenario_file), out_dir=str(tmp_path / "a")) == EXIT_OK
    assert run_command(str(scenario_file), seed=5, out_dir=str(tmp_path / "b")) == EXIT_OK
    a = json.loads((tmp_path / "a" / REPORT_JSON_FILE).read_text(encoding="utf-8"))
    b = json.loads((tmp_path / "b" / REPORT_JSON_FILE).read_text(encoding="utf-8"))
    assert b["seed"] == 5
    assert a["run_id"] != b["run_id"]
    assert (tmp_path / "a" / EVENTS_FILE).read_bytes() != (tmp_path / "b" / EVENTS_FILE).read_bytes()


def test_invalid_scenario_exits_with_validation_code(tmp_path, caplog):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"horizon": -5, "mode": "push"}), encoding="utf-8")
    assert run_command(str(path)) == EXIT_VALIDATION
    assert validate_command(str(path)) == EXIT_VALIDATION
    assert "horizon" in caplog.text and "policy" in caplog.text


def test_io_failures_exit_with_io_code(scenario_file, tmp_path):
    assert run_command(str(tmp_path / "absent.json")) == EXIT_IO
    blocker = tmp_path / "blocker"
    blocker.write_text("not a directory", encoding="utf-8")
    assert run_command(str(scenario_file), out_dir=str(blocker / "out")) == EXIT_IO


def test_invariant_violation_exits_with_invariant_code(scenario_file, monkeypatch):
    def broken(cfg):
        raise InvariantViolation("global_conservation", "lost a request")

    monkeypatch.setattr(commands, "run", broken)
    assert run_command(str(scenario_file)) == EXIT_INVARIANT


def test_compare_table_layout(scenario_file, tmp_path):
    out = tmp_path / "cmp"
    code = compare_command(str(scenario_file), ["pull_rl", "RR", "lc"], [1, 2], out_dir=str(out))
    assert code == EXIT_OK
    rows = _read_csv(out / COMPARE_FILE)
    assert len(rows) == 6 + 3
    assert [(r["policy"], r["seed"]) for r in rows[:6]] == [
        ("PULL_RL", "1"), ("PULL_RL", "2"), ("RR", "1"), ("RR", "2"), ("LC", "1"), ("LC", "2"),
    ]
    means = rows[6:]
    assert [r["policy"] for r in means] == ["PULL_RL", "RR", "LC"]
    assert all(r["run_id"] == "mean" and r["seed"] == "" for r in means)
    assert [r["mode"] for r in means] == ["pull_rl", "push", "push"]


def test_compare_means_recompute_from_rows(scenario_file, tmp_path):
    out = tmp_path / "cmp"
    assert compare_command(str(scenario_file), ["RR", "WRR"], [1, 2, 3], out_dir=str(out)) == EXIT_OK
    rows = _read_csv(out / COMPARE_FILE)
    for policy in ("RR", "WRR"):
        runs = [r for r in rows if r["policy"] == policy and r["run_id"] != "mean"]
        mean = next(r for r in rows if r["policy"] == policy and r["run_id"] == "mean")
        for column in ("throughput", "rt_mean", "completed", "skew"):
            expected = sum(float(r[column]) for r in runs) / len(runs)
            assert float(mean[column]) == pytest.approx(expected, rel=1e-5)


def test_compare_shares_run_ids_with_single_runs(scenario_file, tmp_path):
    assert run_command(str(scenario_file), seed=2, out_dir=str(tmp_path / "single")) == EXIT_OK
    single = json.loads((tmp_path / "single" / REPORT_JSON_FILE).read_text(encoding="utf-8"))
    assert compare_command(str(scenario_file), ["pull_rl", "RR"], [2], out_dir=str(tmp_path / "cmp")) == EXIT_OK
    rows = _read_csv(tmp_path / "cmp" / COMPARE_FILE)
    assert rows[0]["run_id"] == single["run_id"]


def test_comparing_a_policy_with_itself_gives_identical_rows(small_scenario):
    rows = compare_rows(small_scenario, ["RR", "rr"], [4])
    assert rows[0] == rows[1]


def test_each_listed_policy_gets_its_own_mean_row(scenario_file, tmp_path):
    out = tmp_path / "cmp"
    assert compare_command(str(scenario_file), ["RR", "rr"], [1, 2], out_dir=str(out)) == EXIT_OK
    rows = _read_csv(out / COMPARE_FILE)
    assert len(rows) == 4 + 2
    means = rows[4:]
    assert [(r["policy"], r["run_id"]) for r in means] == [("RR", "mean"), ("RR", "mean")]
    assert means[0] == means[1]


def test_compare_needs_two_policies(scenario_file):
    assert compare_command(str(scenario_file), ["RR"], [1]) == EXIT_USAGE
    assert compare_command(str(scenario_file), ["RR", "LC"], []) == EXIT_USAGE


def test_compare_rejects_unknown_policy(scenario_file, tmp_path):
    code = compare_command(str(scenario_file), ["RR", "FASTEST"], [1], out_dir=str(tmp_path / "cmp"))
    assert code == EXIT_VALIDATION
    assert not (tmp_path / "cmp" / COMPARE_FILE).exists()


def test_parallel_compare_matches_sequential(small_scenario):
    sequential = compare_rows(small_scenario, ["pull_rl", "WLC"], [1, 2], jobs=1)
    parallel = compare_rows(small_scenario, ["pull_rl", "WLC"], [1, 2], jobs=2)
    assert parallel == sequential


def test_validate_prints_the_normalized_scenario(scenario_file, capsys):
    assert validate_command(str(scenario_file)) == EXIT_OK
    assert capsys.readouterr().out == dump_scenario(load_scenario(scenario_file))


def test_main_dispatches_subcommands(scenario_file, tmp_path):
    assert main(["validate", "--scenario", str(scenario_file)]) == EXIT_OK
    assert main(["run", "--scenario", str(scenario_file), "--seed", "3",
                 "--out", str(tmp_path / "m")]) == EXIT_OK
    assert main(["compare", "--scenario", str(scenario_file), "--policies", "RR,LC",
                 "--seeds", "1-2", "--out", str(tmp_path / "c")]) == EXIT_OK
    assert len(_read_csv(tmp_path / "c" / COMPARE_FILE)) == 4 + 2


@pytest.mark.parametrize("argv", [
    [],
    ["run"],
    ["launch", "--scenario", "x.json"],
    ["compare", "--scenario", "x.json", "--policies", "RR,LC", "--seeds", "one"],
    ["run", "--scenario", "x.json", "--seed", "-1"],
])
def test_usage_errors_exit_with_code_two(argv):
    with pytest.raises(SystemExit) as info:
        main(argv)
    assert info.value.code == EXIT_USAGE


def test_unexpected_errors_exit_with_code_one(scenario_file, monkeypatch):
    import main as entry

    def explode(*args):
        raise RuntimeError("boom")

    monkeypatch.setattr(entry, "validate_command", explode)
    assert entry.main(["validate", "--scenario", str(scenario_file)]) == 1


@pytest.mark.parametrize("value, text", [
    (None, ""),
    (True, "true"),
    (False, "false"),
    (3, "3"),
    (0.1234567, "0.123457"),
    (2.0, "2"),
    (1e-7, "1e-07"),
    ("RR", "RR"),
])
def test_format_cell(value, text):
    assert format_cell(value) == text
