"""Experiment runner: oracle-vs-accelerated comparisons, sweeps, and I/O.

Every experiment runs the oracle (full evaluation at every step) and the
configured accelerated pipeline on identical seeded inputs, then reports
evaluation counts and relative-L2 errors against the oracle trajectory.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .core import SeededRng, gaussian, relative_l2
from .flow_model import FUSION_MODES, SamplerConfig, build_model
from .predictor import PredictorConfig
from .windows import plan_windows, run_long

CSV_HEADER = ["mode", "K", "n", "alpha", "T", "L", "l", "v",
              "evals", "predicted", "wall_ms", "rel_err_final", "rel_err_mean"]

TRAJECTORY_SCHEMA_VERSION = 1


class TrajectoryFormatError(ValueError):
    """Malformed or truncated trajectory file."""


class TrajectoryVersionError(ValueError):
    """Trajectory file written with an unsupported schema version."""


@dataclass
class ExperimentConfig:
    seed: int = 0
    layers: int = 4
    width: int = 32
    frame_shape: tuple = (8, 8)
    cond_dim: int = 8
    steps: int = 50            # T
    frames: int = 16           # L
    window: int = 16           # l
    overlap: int = 5           # v
    anchor_spacing: int = 5    # K
    order: int = 3             # n
    alpha: float = 1.5
    dynamics_enabled: bool = True
    fusion: str = "ours"
    repetitions: int = 1
    out_path: str | None = None

    def validate(self):
        checks = [
            ("layers", self.layers >= 2, "must be >= 2"),
            ("width", self.width >= 2, "must be >= 2"),
            ("steps", self.steps >= 1, "must be >= 1"),
            ("frames", self.frames >= 1, "must be >= 1"),
            ("window", 0 < self.overlap < self.window <= self.frames,
             "must satisfy 0 < overlap < window <= frames"),
            ("anchor_spacing", self.anchor_spacing >= 1, "must be >= 1"),
            ("order", self.order >= 0, "must be >= 0"),
            ("alpha", 0.5 <= self.alpha <= 1.5, "must lie in [0.5, 1.5]"),
            ("fusion", self.fusion in FUSION_MODES, f"must be one of {FUSION_MODES}"),
            ("repetitions", self.repetitions >= 1, "must be >= 1"),
        ]
        for name, ok, msg in checks:
            if not ok:
                raise ValueError(f"{name}: {msg}")

    @classmethod
    def from_dict(cls, values: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(values) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        if "frame_shape" in values:
            values = dict(values, frame_shape=tuple(values["frame_shape"]))
        return cls(**values)

    @property
    def mode_label(self) -> str:
        return self.fusion if self.dynamics_enabled else self.fusion + "-nodyn"


@dataclass
class MetricsReport:
    mode: str
    anchor_spacing: int
    order: int
    alpha: float
    steps: int
    frames: int
    window: int
    overlap: int
    full_eval_count: int       # per window
    predicted_step_count: int  # per window
    wall_clock_ms: float
    rel_err_final: float
    rel_err_mean: float
    per_step_errors: list = field(default_factory=list)
    trajectory: list | None = None  # accelerated trajectory of the last rep

    def csv_row(self) -> list:
        return [self.mode, self.anchor_spacing, self.order, self.alpha,
                self.steps, self.frames, self.window, self.overlap,
                self.full_eval_count, self.predicted_step_count,
                repr(self.wall_clock_ms), repr(self.rel_err_final), repr(self.rel_err_mean)]


def run_experiment(cfg: ExperimentConfig, keep_trajectory: bool = False) -> MetricsReport:
    """Oracle + accelerated runs on the same seeded inputs, averaged over reps."""
    cfg.validate()
    plan = plan_windows(cfg.frames, cfg.window, cfg.overlap)
    pcfg = PredictorConfig(cfg.anchor_spacing, cfg.order, cfg.alpha, cfg.dynamics_enabled)

    finals, means = [], []
    per_step = np.zeros(cfg.steps)
    wall_ms = 0.0
    evals_per_window = None
    last_traj = None
    for rep in range(cfg.repetitions):
        seed = cfg.seed + rep
        model = build_model(seed, cfg.layers, cfg.width,
                            latent_dim=int(np.prod(cfg.frame_shape)),
                            cond_dim=cfg.cond_dim, fusion_mode=cfg.fusion)
        inputs = SeededRng(seed + 1)
        z_T = gaussian((cfg.frames,) + tuple(cfg.frame_shape), inputs)
        cond = gaussian((cfg.frames, cfg.cond_dim), inputs)
        scfg = SamplerConfig(steps=cfg.steps, seed=seed)

        oracle_traj, _ = run_long(model, z_T, cond, plan, scfg, None)
        start = time.perf_counter()
        accel_traj, evals_per_window = run_long(model, z_T, cond, plan, scfg, pcfg)
        wall_ms += (time.perf_counter() - start) * 1e3

        errs = [relative_l2(a, o) for a, o in zip(accel_traj[1:], oracle_traj[1:])]
        per_step += np.asarray(errs)
        finals.append(errs[-1])
        means.append(float(np.mean(errs)))
        last_traj = accel_traj

    per_step /= cfg.repetitions
    full_evals = evals_per_window[0]
    assert all(e == full_evals for e in evals_per_window)
    assert full_evals == math.ceil(cfg.steps / cfg.anchor_spacing)
    return MetricsReport(
        mode=cfg.mode_label,
        anchor_spacing=cfg.anchor_spacing, order=cfg.order, alpha=cfg.alpha,
        steps=cfg.steps, frames=cfg.frames, window=cfg.window, overlap=cfg.overlap,
        full_eval_count=full_evals,
        predicted_step_count=cfg.steps - full_evals,
        wall_clock_ms=wall_ms,
        rel_err_final=float(np.mean(finals)),
        rel_err_mean=float(np.mean(means)),
        per_step_errors=per_step.tolist(),
        trajectory=last_traj if keep_trajectory else None,
    )


GRID_KEYS = {"K": "anchor_spacing", "n": "order", "dynamics": "dynamics_enabled", "fusion": "fusion"}


def ablation_sweep(base: ExperimentConfig, grid: dict, jobs: int = 1) -> list[MetricsReport]:
    """One report per grid cell, sorted by (mode, K, n).

    ``grid`` maps a subset of {K, n, dynamics, fusion} to value lists.
    """
    if not grid:
        raise ValueError("empty ablation grid")
    unknown = set(grid) - set(GRID_KEYS)
    if unknown:
        raise ValueError(f"unknown grid keys: {sorted(unknown)}")
    keys = sorted(grid)
    cells = [dict(zip(keys, combo)) for combo in itertools.product(*(grid[k] for k in keys))]

    def run_cell(cell):
        cfg = replace(base, **{GRID_KEYS[k]: v for k, v in cell.items()})
        try:
            return run_experiment(cfg)
        except Exception as exc:
            raise RuntimeError(f"grid cell {cell} failed: {exc}") from exc

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            reports = list(pool.map(run_cell, cells))
    else:
        reports = [run_cell(c) for c in cells]
    reports.sort(key=lambda r: (r.mode, r.anchor_spacing, r.order))
    return reports


def reports_to_csv(reports: list[MetricsReport]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for report in reports:
        writer.writerow(report.csv_row())
    return buf.getvalue()


def dump_trajectory(trajectory: list, path: str):
    """Write latents as versioned JSON; float64 values round-trip bitwise."""
    doc = {
        "version": TRAJECTORY_SCHEMA_VERSION,
        "tensors": [
            {"shape": list(np.asarray(z).shape), "data": np.asarray(z, dtype=np.float64).ravel().tolist()}
            for z in trajectory
        ],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_trajectory(path: str) -> list:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise TrajectoryFormatError(f"malformed trajectory file: {exc}") from exc
    if not isinstance(doc, dict) or "version" not in doc:
        raise TrajectoryFormatError("missing version field")
    if doc["version"] != TRAJECTORY_SCHEMA_VERSION:
        raise TrajectoryVersionError(f"unsupported version {doc['version']!r}")
    try:
        return [np.asarray(t["data"], dtype=np.float64).reshape(t["shape"]) for t in doc["tensors"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise TrajectoryFormatError(f"bad tensor record: {exc}") from exc
