"""Seeded benchmark campaigns over sweeps of uncertainty level or obstacle
count, producing the raw per-run rows and the normalized summary behind the
planner comparison figures.
"""

from __future__ import annotations

import csv
import hashlib
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace

import numpy as np

from . import metrics
from .planner import PlannerConfig, UnsafeEndpointError, interpolate_path, plan
from .scene import random_sphere_scene
from .scenefile import BenchmarkSpec, load_scene

RAW_FIELDS = (
    "schema",
    "method",
    "sweep_value",
    "run",
    "seed",
    "status",
    "cost",
    "plan_time",
    "check_time",
    "n_checks",
)
SUMMARY_FIELDS = (
    "schema",
    "method",
    "sweep_value",
    "n_runs",
    "n_success",
    "mean_cost",
    "std_cost",
    "normalized_mean_cost",
    "mean_plan_time",
    "mean_check_time",
)


def derive_seed(master_seed: int, *parts) -> int:
    """Stable 63-bit seed from the master seed and cell coordinates.

    Hash-derived so adding methods or sweep points never perturbs the seeds
    of existing cells.
    """
    text = "|".join([str(master_seed)] + [repr(p) for p in parts])
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little") >> 1


def _cell_scene(spec: BenchmarkSpec, base_scene, base_cfg, value, run, master_seed):
    """Scene and config for one benchmark cell.

    The scene seed deliberately omits the method so all methods face the
    identical environment in a given (value, run) cell.
    """
    if spec.sweep_variable == "dtilde":
        d_stop = value / (1.0 - base_cfg.delta)
        sigma = value / 2.0
        return base_scene.with_uncertainty(d_stop=d_stop, sigma=sigma)
    scene_rng = np.random.default_rng(derive_seed(master_seed, "scene", value, run))
    d_stop = spec.obstacle_dtilde / (1.0 - base_cfg.delta)
    sigma = spec.obstacle_dtilde / 2.0
    return random_sphere_scene(
        base_scene,
        count=int(value),
        radius=spec.obstacle_radius,
        d_stop=d_stop,
        sigma=sigma,
        rng=scene_rng,
        keep_clear=spec.obstacle_keep_clear,
    )


def run_cell(spec: BenchmarkSpec, base_scene, base_cfg, method, value, run, master_seed):
    """Execute one planning run and return its raw CSV row."""
    scene = _cell_scene(spec, base_scene, base_cfg, value, run, master_seed)
    seed = derive_seed(master_seed, method, value, run)
    cfg = replace(base_cfg, seed=seed)
    field_ = None
    if method == "scenario" and spec.scenario_backend == "raster":
        # rasterization stands in for the perception stage and is kept
        # outside the timed planning call
        field_ = scene.analytic_field().rasterize(spec.raster_cell_size)
    row = {
        "schema": 1,
        "method": method,
        "sweep_value": value,
        "run": run,
        "seed": seed,
        "status": "ok",
        "cost": float("nan"),
        "plan_time": float("nan"),
        "check_time": float("nan"),
        "n_checks": 0,
    }
    try:
        t0 = time.perf_counter()
        result = plan(scene, cfg, checker=method, field_=field_)
        wall = time.perf_counter() - t0
    except UnsafeEndpointError as exc:
        row["status"] = f"unsafe_{exc.which}"
        return row
    row["plan_time"] = wall
    row["check_time"] = result.check_time
    row["n_checks"] = result.n_checks
    if not result.success:
        row["status"] = result.status
        return row
    resampled = interpolate_path(result, spec.k_resample)
    row["cost"] = metrics.path_cost(resampled, cfg.r)
    return row


def run_benchmark(spec: BenchmarkSpec, master_seed: int = 0, threads: int = 1,
                  progress=None):
    """Run every (method, sweep value, run) cell; returns (raw, summary) rows.

    Failures are recorded as rows with a non-ok status and the campaign
    continues.  Output ordering is independent of scheduling.
    """
    base_scene, base_cfg = load_scene(spec.scene_path)
    for key, val in spec.overrides.items():
        base_cfg = replace(base_cfg, **{key: val})
    cells = [
        (method, value, run)
        for method in spec.methods
        for value in spec.sweep_values
        for run in range(spec.runs)
    ]

    def work(cell):
        method, value, run = cell
        row = run_cell(spec, base_scene, base_cfg, method, value, run, master_seed)
        if progress is not None:
            progress(row)
        return row

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(work, cells))
    else:
        rows = [work(c) for c in cells]
    rows.sort(key=lambda r: (r["method"], r["sweep_value"], r["run"]))
    return rows, summarize(rows)


def summarize(rows) -> list:
    """Per-cell summary re-derived from raw rows (means, std, normalization)."""
    costs = {}
    times = {}
    check_times = {}
    for r in rows:
        key = (r["method"], r["sweep_value"])
        costs.setdefault(key, []).append(r["cost"])
        if np.isfinite(r["plan_time"]):
            times.setdefault(key, []).append(r["plan_time"])
            check_times.setdefault(key, []).append(r["check_time"])
    summary = metrics.normalized_costs(costs)
    for row in summary:
        key = (row["method"], row["sweep_value"])
        row["schema"] = 1
        row["mean_plan_time"] = float(np.mean(times.get(key, [np.nan])))
        row["mean_check_time"] = float(np.mean(check_times.get(key, [np.nan])))
    return summary


def write_csv(path, rows, fieldnames) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(fieldnames), extrasaction="ignore")
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


def read_csv(path) -> list:
    with open(path, "r", newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))
