"""Experiment harness: grids of generated instances, solved and tabulated as CSV."""

from __future__ import annotations

import csv
import io
import itertools
import json
import os
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

from .exact import DEFAULT_MAX_MASKS, DEFAULT_TIMEOUT, CapacityError, SolverTimeout, exact_solve
from .greedy import DEFAULT_THRESHOLD, greedy_solve
from .instance import generate_instance
from .schedule import validate_schedule

EXPERIMENTS = ("exp1", "exp2", "exp3")
SOLVERS = ("greedy", "exact")
CSV_COLUMNS = (
    "experiment", "solver", "nodes", "horizon", "agents", "demand_fraction", "seed",
    "covered", "total", "ratio", "trips", "status", "wall_ms",
)
# grid bounds beyond which the exact solver is not admitted
EXACT_LIMITS = {"nodes": 8, "horizon": 15, "agents": 5}
THREADS_ENV = "DRONESCHED_THREADS"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    nodes: tuple[int, ...]
    horizon: tuple[int, ...]
    agents: tuple[int, ...]
    demand_fraction: tuple[float, ...]
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    threshold: int = DEFAULT_THRESHOLD
    solvers: tuple[str, ...] = ("greedy",)
    travel: tuple[int, int] = (1, 3)
    greedy_seed: int = 0
    exact_timeout: float = DEFAULT_TIMEOUT
    exact_max_masks: int = DEFAULT_MAX_MASKS

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"experiment must be one of {EXPERIMENTS}, got {self.experiment!r}")
        for name in ("nodes", "horizon", "agents", "demand_fraction", "seeds", "solvers"):
            if not getattr(self, name):
                raise ConfigError(f"{name} grid must not be empty")
        bad = [s for s in self.solvers if s not in SOLVERS]
        if bad:
            raise ConfigError(f"unknown solvers {bad}; expected a subset of {SOLVERS}")
        if self.threshold < 1:
            raise ConfigError("threshold must be >= 1")
        if len(self.travel) != 2 or not 1 <= self.travel[0] <= self.travel[1]:
            raise ConfigError(f"travel must be [min, max] with 1 <= min <= max, got {self.travel}")
        if "exact" in self.solvers:
            for key, limit in EXACT_LIMITS.items():
                if max(getattr(self, key)) > limit:
                    raise ConfigError(
                        f"exact solver admitted only for {key} <= {limit}, "
                        f"grid reaches {max(getattr(self, key))}"
                    )


def config_from_dict(d: dict) -> ExperimentConfig:
    if not isinstance(d, dict):
        raise ConfigError("config must be a JSON object")
    known = set(ExperimentConfig.__dataclass_fields__)
    unknown = set(d) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    kw = {}
    for k, v in d.items():
        kw[k] = tuple(v) if isinstance(v, list) else v
    try:
        return ExperimentConfig(**kw)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(text: str) -> ExperimentConfig:
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed config JSON: {exc}") from exc
    return config_from_dict(d)


def worker_count() -> int:
    raw = os.environ.get(THREADS_ENV, "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    if n < 0:
        raise ConfigError(f"{THREADS_ENV} must be >= 0")
    return n or (os.cpu_count() or 1)


def _run_point(args) -> list[dict]:
    cfg, nodes, horizon, agents, frac, seed = args
    inst = generate_instance(nodes, horizon, agents, frac, cfg.travel[0], cfg.travel[1], seed)
    out = []
    for solver in cfg.solvers:
        rec = {"solver": solver, "covered": None, "trips": None, "status": "ok", "wall_ms": None}
        t0 = time.perf_counter()
        try:
            if solver == "greedy":
                res = greedy_solve(inst, cfg.threshold, cfg.greedy_seed)
            else:
                res = exact_solve(inst, max_masks=cfg.exact_max_masks, timeout=cfg.exact_timeout)
        except CapacityError:
            rec["status"] = "capacity"
        except SolverTimeout:
            rec["status"] = "timeout"
        else:
            rec["wall_ms"] = (time.perf_counter() - t0) * 1000.0
            validate_schedule(inst, res.schedule)
            rec["covered"], rec["trips"] = res.covered, res.trips
        out.append(rec)
    base = {
        "experiment": cfg.experiment, "nodes": nodes, "horizon": horizon,
        "agents": agents, "demand_fraction": frac, "seed": seed, "total": inst.total_demand,
    }
    exact_cov = next((r["covered"] for r in out if r["solver"] == "exact"), None)
    rows = []
    for rec in out:
        row = dict(base, **rec)
        if cfg.experiment == "exp2":
            ref = exact_cov
        else:
            ref = inst.total_demand
        row["ratio"] = rec["covered"] / ref if rec["covered"] is not None and ref else None
        rows.append(row)
    return rows


def _aggregate(rows: list[dict]) -> list[dict]:
    out = []
    for label, fn in (("mean", statistics.fmean), ("min", min), ("max", max)):
        agg = {k: rows[0][k] for k in ("experiment", "solver", "nodes", "horizon",
                                        "agents", "demand_fraction")}
        agg["seed"] = None
        agg["status"] = label
        for k in ("covered", "total", "ratio", "trips", "wall_ms"):
            vals = [r[k] for r in rows if r[k] is not None]
            agg[k] = fn(vals) if vals else None
        out.append(agg)
    return out


def run_experiment(cfg: ExperimentConfig, workers: int | None = None) -> list[dict]:
    """Solve every grid point and seed; per-run rows followed by mean/min/max rows.

    Rows are returned in a fixed order independent of ``workers``.
    """
    tasks = [
        (cfg, n, h, a, f, s)
        for n, h, a, f in itertools.product(cfg.nodes, cfg.horizon, cfg.agents, cfg.demand_fraction)
        for s in cfg.seeds
    ]
    workers = worker_count() if workers is None else workers
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_point, tasks))
    else:
        results = [_run_point(t) for t in tasks]

    solver_rank = {s: i for i, s in enumerate(SOLVERS)}
    detail = sorted(
        (r for rows in results for r in rows),
        key=lambda r: (r["nodes"], r["horizon"], r["agents"], r["demand_fraction"],
                       r["seed"], solver_rank[r["solver"]]),
    )
    groups: dict[tuple, list[dict]] = {}
    for r in detail:
        key = (r["nodes"], r["horizon"], r["agents"], r["demand_fraction"], r["solver"])
        groups.setdefault(key, []).append(r)
    final = []
    for key in sorted(groups, key=lambda k: (k[:4], solver_rank[k[4]])):
        final += groups[key]
        final += _aggregate(groups[key])
    return final


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def rows_to_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow([_cell(r[c]) for c in CSV_COLUMNS])
    return buf.getvalue()
