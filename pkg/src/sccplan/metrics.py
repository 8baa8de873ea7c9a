"""Calibration metrics over probability rasters, path-cost summaries, and the
Monte-Carlo trajectory safety validator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import RobotShape, SampleRegion, sample_region_uniform
from .planner import TrackingErrorModel, _line_cost_arr
from .velocity import Trajectory

NLL_EPS = 1e-7
RELIABILITY_BINS = 10


@dataclass(eq=False)
class LabeledRaster:
    """Predicted free probabilities paired with binary ground truth
    (1 = free, 0 = obstacle)."""

    prediction: np.ndarray
    truth: np.ndarray

    def __post_init__(self):
        self.prediction = np.asarray(self.prediction, dtype=float)
        self.truth = np.asarray(self.truth)
        if self.prediction.shape != self.truth.shape:
            raise ValueError("prediction and truth dims differ")
        if self.prediction.size == 0:
            raise ValueError("empty raster")
        if np.any(self.prediction < 0) or np.any(self.prediction > 1):
            raise ValueError("prediction values must lie in [0, 1]")
        if not np.all(np.isin(self.truth, (0, 1))):
            raise ValueError("truth labels must be binary")
        self.truth = self.truth.astype(float)


@dataclass(eq=False)
class ReliabilityDiagram:
    """Ten confidence bins over [0.5, 1]; accuracy is NaN for empty bins."""

    edges: np.ndarray  # 11 edges from 0.5 to 1.0
    mean_confidence: np.ndarray
    accuracy: np.ndarray
    count: np.ndarray


def _hard_labels(prediction: np.ndarray) -> np.ndarray:
    # threshold 0.5, ties resolved toward free
    return (prediction >= 0.5).astype(float)


def pixel_accuracy(lr: LabeledRaster) -> float:
    return float(np.mean(_hard_labels(lr.prediction) == lr.truth))


def mean_iou(lr: LabeledRaster) -> float:
    """Mean intersection-over-union of the free and obstacle classes.

    A class absent from both prediction and truth contributes IoU 1.
    """
    pred = _hard_labels(lr.prediction)
    ious = []
    for cls in (0.0, 1.0):
        p = pred == cls
        t = lr.truth == cls
        union = np.sum(p | t)
        ious.append(1.0 if union == 0 else float(np.sum(p & t)) / union)
    return float(np.mean(ious))


def brier_score(lr: LabeledRaster) -> float:
    return float(np.mean((lr.prediction - lr.truth) ** 2))


def nll(lr: LabeledRaster) -> float:
    p = np.clip(lr.prediction, NLL_EPS, 1.0 - NLL_EPS)
    return float(-np.mean(lr.truth * np.log(p) + (1.0 - lr.truth) * np.log(1.0 - p)))


def reliability(lr: LabeledRaster) -> ReliabilityDiagram:
    """Bin cells by confidence max(p, 1-p) into ten equal bins over [0.5, 1).

    Per bin: mean confidence and the accuracy of the hard-thresholded class.
    The top bin is closed so fully confident predictions are counted.
    """
    conf = np.maximum(lr.prediction, 1.0 - lr.prediction).ravel()
    correct = (_hard_labels(lr.prediction) == lr.truth).ravel()
    edges = 0.5 + 0.05 * np.arange(RELIABILITY_BINS + 1)
    idx = np.clip(((conf - 0.5) / 0.05).astype(int), 0, RELIABILITY_BINS - 1)
    count = np.bincount(idx, minlength=RELIABILITY_BINS)
    mean_conf = np.full(RELIABILITY_BINS, np.nan)
    acc = np.full(RELIABILITY_BINS, np.nan)
    for b in range(RELIABILITY_BINS):
        mask = idx == b
        if count[b]:
            mean_conf[b] = float(np.mean(conf[mask]))
            acc[b] = float(np.mean(correct[mask]))
    return ReliabilityDiagram(edges=edges, mean_confidence=mean_conf, accuracy=acc, count=count)


def path_cost(poses: np.ndarray, r: float) -> float:
    """Total path cost: sum of per-segment line costs."""
    poses = np.asarray(poses, dtype=float)
    if len(poses) < 2:
        return 0.0
    return float(np.sum(_line_cost_arr(poses[:-1], poses[1:], r)))


def normalized_costs(costs_by_cell: dict) -> list:
    """Summarize a benchmark sweep: mean/std per cell, normalized by the
    global maximum mean cost.

    ``costs_by_cell`` maps (method, sweep_value) to a list of per-run costs
    (NaN entries mark failed runs and are ignored in the statistics).
    Returns rows sorted by method then sweep value.
    """
    rows = []
    means = {}
    for (method, value), costs in costs_by_cell.items():
        arr = np.asarray(list(costs), dtype=float)
        ok = arr[np.isfinite(arr)]
        mean = float(np.mean(ok)) if len(ok) else math.nan
        std = float(np.std(ok, ddof=1)) if len(ok) > 1 else 0.0
        means[(method, value)] = mean
        rows.append(
            {
                "method": method,
                "sweep_value": value,
                "n_runs": len(arr),
                "n_success": int(len(ok)),
                "mean_cost": mean,
                "std_cost": std,
            }
        )
    finite = [m for m in means.values() if math.isfinite(m)]
    max_mean = max(finite) if finite else math.nan
    for row in rows:
        row["normalized_mean_cost"] = (
            row["mean_cost"] / max_mean if math.isfinite(row["mean_cost"]) and max_mean else math.nan
        )
    rows.sort(key=lambda r: (r["method"], r["sweep_value"]))
    return rows


@dataclass
class ViolationReport:
    n_samples: int
    n_violations: int

    @property
    def fraction(self) -> float:
        return self.n_violations / self.n_samples if self.n_samples else 0.0


def monte_carlo_validate(
    field_,
    trajectory: Trajectory,
    shape: RobotShape,
    gamma_tilde: TrackingErrorModel,
    delta: float,
    n_trials: int,
    rng,
    samples_per_pose: int = 8,
) -> ViolationReport:
    """Simulate executions under the tracking-error bound and count unsafe
    region points.

    Each trial perturbs every knot position by a uniform-in-ball offset of
    magnitude at most the error bound at that knot's speed (the worst case
    admitted by the bound), samples points occupied by the robot there, and
    reports the fraction with free probability below 1 - delta.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    poses = trajectory.poses
    n_knots = len(poses)
    radii = np.asarray(gamma_tilde(trajectory.v), dtype=float)

    total = n_trials * n_knots
    # uniform directions scaled by r * u^(1/3): uniform in the ball
    dirs = rng.normal(size=(total, 3))
    dirs /= np.maximum(np.linalg.norm(dirs, axis=1, keepdims=True), 1e-300)
    mags = np.repeat(radii[None, :], n_trials, axis=0).ravel() * rng.random(total) ** (
        1.0 / 3.0
    )
    offsets = dirs * mags[:, None]

    base = sample_region_uniform(SampleRegion(shape, 0.0), total * samples_per_pose, rng)
    base = base.reshape(total, samples_per_pose, 3)
    phi = np.tile(poses[:, 3], n_trials)
    c, s = np.cos(phi)[:, None], np.sin(phi)[:, None]
    centers = np.tile(poses[:, :3], (n_trials, 1)) + offsets
    world = np.empty_like(base)
    world[:, :, 0] = c * base[:, :, 0] - s * base[:, :, 1] + centers[:, 0:1]
    world[:, :, 1] = s * base[:, :, 0] + c * base[:, :, 1] + centers[:, 1:2]
    world[:, :, 2] = base[:, :, 2] + centers[:, 2:3]

    p_free = field_.query(world.reshape(-1, 3))
    n_viol = int(np.sum(p_free < 1.0 - delta))
    return ViolationReport(n_samples=len(p_free), n_violations=n_viol)
