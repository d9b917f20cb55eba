import csv
import io
import json

import pytest

from dronesched import bench
from dronesched.bench import (
    CSV_COLUMNS,
    ConfigError,
    ExperimentConfig,
    config_from_dict,
    load_config,
    rows_to_csv,
    run_experiment,
    worker_count,
)
from dronesched.cli import main
from dronesched.instance import parse_instance
from dronesched.render import render_schedule_grid
from dronesched.schedule import Hover, Schedule, parse_schedule, validate_schedule


def grid_rows(text):
    lines = text.splitlines()
    return {ln.split("|")[0].strip(): ln.split("|")[1] for ln in lines[2:]}, lines[0]


def cells(row, width):
    return [row[i:i + width].strip() for i in range(0, len(row), width)]


def test_render_tiny1(tiny1, tiny1_round_trip):
    rows, header = grid_rows(render_schedule_grid(tiny1, tiny1_round_trip))
    width = len(header.split("|")[1]) // 5
    n0 = cells(rows["n0"].ljust(5 * width), width)
    n1 = cells(rows["n1"].ljust(5 * width), width)
    assert n1 == ["", "", "0*", "", ""]
    assert n0 == ["0", "", "", "", "0"]


def test_render_all_hover_and_missed(tiny1):
    text = render_schedule_grid(tiny1, Schedule.of([[Hover(0)] * 5]))
    rows, header = grid_rows(text)
    width = len(header.split("|")[1]) // 5
    assert cells(rows["n0"], width) == ["0"] * 5
    assert cells(rows["n1"].ljust(5 * width), width) == ["", "", "!", "", ""]


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_cli_pipeline(tmp_path, capsys):
    inst, sched = tmp_path / "small.json", tmp_path / "sched.txt"
    code, _, _ = run(["gen", "--nodes", 7, "--horizon", 12, "--agents", 5, "--demand", 0.15,
                      "--travel", "1:3", "--seed", 1, "-o", inst], capsys)
    assert code == 0 and inst.exists()
    code, out, _ = run(["greedy", inst, "--threshold", 50, "--seed", 0, "-o", sched], capsys)
    assert code == 0
    summary = json.loads(out)
    code, out, _ = run(["validate", inst, sched], capsys)
    assert code == 0
    report = json.loads(out)
    assert report["valid"] and report["covered"] == summary["covered"]

    exact_sched = tmp_path / "exact.txt"
    code, out, _ = run(["exact", inst, "-o", exact_sched], capsys)
    assert code == 0
    assert json.loads(out)["covered"] >= summary["covered"]
    assert run(["validate", inst, exact_sched], capsys)[0] == 0

    code, out, _ = run(["show", inst, sched], capsys)
    assert code == 0 and out.splitlines()[2].startswith("n0")


def test_cli_greedy_to_stdout(tmp_path, capsys):
    inst = tmp_path / "i.json"
    run(["gen", "--nodes", 3, "--horizon", 8, "--agents", 2, "-o", inst], capsys)
    code, out, err = run(["greedy", inst], capsys)
    assert code == 0
    parsed = parse_instance(inst.read_text())
    validate_schedule(parsed, parse_schedule(out, parsed))
    assert "covered" in json.loads(err)


def test_cli_exact_capacity(tmp_path, capsys):
    inst = tmp_path / "large.json"
    run(["gen", "--nodes", 20, "--horizon", 100, "--agents", 3, "-o", inst], capsys)
    code, _, err = run(["exact", inst, "--max-masks", 2000], capsys)
    assert code == 3 and "coverage masks" in err


def test_cli_errors(tmp_path, capsys):
    assert run(["gen", "--bogus"], capsys)[0] == 1
    assert run([], capsys)[0] == 1
    code, _, err = run(["greedy", tmp_path / "missing.json"], capsys)
    assert code == 1 and "cannot read" in err
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(["greedy", bad], capsys)[0] == 1
    assert run(["gen", "--nodes", 3, "--horizon", 8, "--agents", 1, "--travel", "x"], capsys)[0] == 1

    inst = tmp_path / "t.json"
    run(["gen", "--nodes", 2, "--horizon", 5, "--agents", 1, "--seed", 3, "-o", inst], capsys)
    sched = tmp_path / "s.txt"
    run(["greedy", inst, "-o", sched], capsys)
    doc = json.loads(sched.read_text())
    traj = doc["agents"][0]
    # hover at node 0 then node 1 on consecutive steps: a teleport
    traj[1], traj[2] = {"s": "h", "n": 0}, {"s": "h", "n": 1}
    sched.write_text(json.dumps(doc))
    code, _, err = run(["validate", inst, sched], capsys)
    assert code == 2 and "invalid schedule" in err


def test_cli_export_lp(tmp_path, capsys):
    inst, lp = tmp_path / "i.json", tmp_path / "m.lp"
    run(["gen", "--nodes", 2, "--horizon", 5, "--agents", 1, "-o", inst], capsys)
    assert run(["export-lp", inst, "-o", lp], capsys)[0] == 0
    assert lp.read_text().splitlines()[1] == "Maximize"
    assert (tmp_path / "m.lp.map").read_text().startswith("# mode=repaired")
    assert run(["export-lp", inst, "-o", lp, "--mu", "0.5"], capsys)[0] == 1
    assert run(["export-lp", inst, "-o", lp, "--mode", "literal", "--map", tmp_path / "x"], capsys)[0] == 0
    assert (tmp_path / "x").exists()


SMALL_CFG = {
    "experiment": "exp2", "nodes": [4], "horizon": [8], "agents": [1, 2],
    "demand_fraction": [0.3], "seeds": [0, 1, 2], "threshold": 10,
    "solvers": ["greedy", "exact"],
}


def strip_time(text):
    return [r[:-1] for r in csv.reader(io.StringIO(text))]


def test_bench_exp2_rows():
    rows = run_experiment(config_from_dict(SMALL_CFG), workers=1)
    text = rows_to_csv(rows)
    assert text.splitlines()[0] == ",".join(CSV_COLUMNS)
    per_seed = [r for r in rows if r["seed"] is not None]
    assert len(per_seed) == 2 * 3 * 2
    by_key = {(r["agents"], r["seed"], r["solver"]): r for r in per_seed}
    for (a, s, solver), r in by_key.items():
        if solver == "greedy":
            e = by_key[(a, s, "exact")]
            assert r["ratio"] <= 1
            if e["covered"]:
                assert r["ratio"] == r["covered"] / e["covered"]
        else:
            assert r["ratio"] in (1.0, None)
    aggs = [r["status"] for r in rows if r["seed"] is None]
    assert aggs == ["mean", "min", "max"] * 4
    assert "nan" not in text.lower()


def test_bench_parallel_matches_serial():
    cfg = config_from_dict(SMALL_CFG)
    assert strip_time(rows_to_csv(run_experiment(cfg, workers=1))) == \
        strip_time(rows_to_csv(run_experiment(cfg, workers=2)))


def test_bench_cli(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(dict(SMALL_CFG, experiment="exp1", solvers=["greedy"])))
    out = tmp_path / "out.csv"
    assert run(["bench", cfg, "-o", out], capsys)[0] == 0
    rows = list(csv.DictReader(io.StringIO(out.read_text())))
    assert all(r["solver"] == "greedy" for r in rows)
    ok = [r for r in rows if r["seed"]]
    assert all(float(r["ratio"]) == int(r["covered"]) / int(r["total"]) for r in ok)
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"experiment": "exp9"}))
    assert run(["bench", bad], capsys)[0] == 1


@pytest.mark.parametrize("patch", [
    {"experiment": "nope"},
    {"nodes": []},
    {"solvers": ["cplex"]},
    {"threshold": 0},
    {"travel": [0, 2]},
    {"nodes": [20]},  # exact not admitted at this scale
    {"bogus": 1},
])
def test_config_validation(patch):
    with pytest.raises(ConfigError):
        config_from_dict(dict(SMALL_CFG, **patch))


def test_load_config_errors():
    with pytest.raises(ConfigError):
        load_config("[1, 2]")
    with pytest.raises(ConfigError):
        load_config("{")
    assert isinstance(load_config(json.dumps(SMALL_CFG)), ExperimentConfig)


def test_worker_count(monkeypatch):
    monkeypatch.setenv(bench.THREADS_ENV, "3")
    assert worker_count() == 3
    monkeypatch.setenv(bench.THREADS_ENV, "0")
    assert worker_count() >= 1
    monkeypatch.setenv(bench.THREADS_ENV, "many")
    with pytest.raises(ConfigError):
        worker_count()
    monkeypatch.setenv(bench.THREADS_ENV, "-1")
    with pytest.raises(ConfigError):
        worker_count()
