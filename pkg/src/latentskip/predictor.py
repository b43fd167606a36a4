"""Adaptive latent prediction: anchor cache, finite differences, dynamics.

Full model evaluations happen only at anchor steps spaced ``anchor_spacing``
apart; between anchors, per-layer outputs are extrapolated from the cached
history with a truncated Taylor series whose derivatives are approximated
by iterated finite differences. Two scalar correctors adapt the series:
``scale_s`` tracks how fast the latents currently change versus average,
``layer_weight`` tracks each layer's derivative magnitude versus the
cross-layer average.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import EPS
from .flow_model import LayerOutputs, euler_step


@dataclass
class PredictorConfig:
    anchor_spacing: int = 5     # full evaluations every this many steps (K)
    max_order: int = 3          # highest finite-difference order kept (n)
    alpha: float = 1.5          # exponent of the variation-rate corrector
    dynamics_enabled: bool = True

    def __post_init__(self):
        if self.anchor_spacing < 1:
            raise ValueError("anchor_spacing must be >= 1")
        if self.max_order < 0:
            raise ValueError("max_order must be >= 0")
        if not 0.5 <= self.alpha <= 1.5:
            raise ValueError("alpha must lie in [0.5, 1.5]")


class SigmaHistory:
    """Per-anchor latent variation rates and their running mean."""

    def __init__(self):
        self.sigmas: list[float] = []

    def record(self, sigma: float):
        self.sigmas.append(float(sigma))

    @property
    def newest(self) -> float:
        return self.sigmas[-1]

    @property
    def average(self) -> float:
        return float(np.mean(self.sigmas)) if self.sigmas else 0.0


class AnchorCache:
    """Ring buffer of the newest max_order+1 anchor evaluations.

    Entries are kept in push order; consecutive anchor steps must be spaced
    exactly ``spacing`` apart, in a consistent direction.
    """

    def __init__(self, spacing: int, capacity: int):
        self.spacing = spacing
        self.capacity = capacity
        self.entries: list[tuple[int, LayerOutputs]] = []

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def newest_step(self) -> int:
        return self.entries[-1][0]

    @property
    def newest(self) -> LayerOutputs:
        return self.entries[-1][1]

    def push(self, step: int, outputs: LayerOutputs, hist: SigmaHistory | None = None):
        if self.entries:
            delta = step - self.newest_step
            if abs(delta) != self.spacing:
                raise ValueError("anchor spacing violated")
            if len(self.entries) >= 2 and delta != self.entries[-1][0] - self.entries[-2][0]:
                raise ValueError("anchor spacing violated")
            if hist is not None:
                prev_final = self.newest.final
                sigma = float(np.linalg.norm(outputs.final - prev_final)) / self.spacing
                hist.record(sigma)
        self.entries.append((step, outputs))
        if len(self.entries) > self.capacity:
            self.entries.pop(0)


def difference_rows(values: list) -> list:
    """Iterated forward differences of a newest-first value sequence.

    Returns [d0, d1, ..., dm] where d0 is the newest value and
    d_i = d_{i-1}(one step older) - d_{i-1}(newest).
    """
    rows = [np.asarray(v, dtype=np.float64) for v in values]
    out = [rows[0]]
    while len(rows) > 1:
        rows = [rows[j + 1] - rows[j] for j in range(len(rows) - 1)]
        out.append(rows[0])
    return out


@dataclass
class DiffTable:
    """Per-layer finite differences at the newest anchor, orders 0..max."""

    per_layer: list  # per_layer[l][i] = i-th difference at layer l

    @property
    def max_order(self) -> int:
        return len(self.per_layer[0]) - 1

    def layer_count(self) -> int:
        return len(self.per_layer)


def finite_differences(cache: AnchorCache) -> DiffTable:
    """Build the difference table from the cached anchors, newest as base."""
    if not cache.entries:
        raise ValueError("empty anchor cache")
    layer_count = len(cache.newest)
    per_layer = []
    for l in range(layer_count):
        newest_first = [outputs.per_layer[l] for _, outputs in reversed(cache.entries)]
        per_layer.append(difference_rows(newest_first))
    return DiffTable(per_layer)


def scale_s(hist: SigmaHistory, alpha: float) -> float:
    """Variation-rate corrector (sigma_newest / sigma_avg)^alpha; 1 pre-warmup."""
    if not hist.sigmas:
        return 1.0
    return (hist.newest / max(hist.average, EPS)) ** alpha


def layer_weight(table: DiffTable, layer: int, order: int) -> float:
    """1/sqrt of the layer's difference magnitude over the cross-layer mean."""
    if order > table.max_order:
        raise ValueError(f"order {order} not present in difference table")
    mags = [float(np.mean(np.abs(diffs[order]))) for diffs in table.per_layer]
    r = mags[layer] / max(float(np.mean(mags)), EPS)
    return 1.0 / math.sqrt(max(r, EPS))


def predict(cache: AnchorCache, table: DiffTable, hist: SigmaHistory,
            k: int, cfg: PredictorConfig) -> LayerOutputs:
    """Extrapolate all layer outputs k steps past the newest anchor.

    Per layer: f(a) + sum_{i=1..m} diff_i * (-k)^i / (i! * K^i * w_i * s),
    with m capped by both max_order and the cached history. The correctors
    stay neutral while the cache is still warming up.
    """
    if not 1 <= k <= cfg.anchor_spacing - 1:
        raise ValueError(f"k must lie in [1, {cfg.anchor_spacing - 1}]")
    if not cache.entries:
        raise ValueError("empty anchor cache")
    m = min(cfg.max_order, len(cache) - 1)
    warmed = len(cache) >= cfg.max_order + 1 and bool(hist.sigmas)
    use_dynamics = cfg.dynamics_enabled and warmed
    s = scale_s(hist, cfg.alpha) if use_dynamics else 1.0
    spacing = cfg.anchor_spacing
    predicted = []
    for l, diffs in enumerate(table.per_layer):
        acc = diffs[0].copy()
        for i in range(1, m + 1):
            w = layer_weight(table, l, i) if use_dynamics else 1.0
            acc += diffs[i] * (-k) ** i / (math.factorial(i) * spacing ** i * w * s)
        predicted.append(acc)
    return LayerOutputs(predicted, cache.newest.shape)


def is_anchor_step(step_index: int, cfg: PredictorConfig) -> bool:
    """Anchors sit every anchor_spacing steps, starting at the first step."""
    return step_index % cfg.anchor_spacing == 0


def sample_accelerated(model, z_T: np.ndarray, cond, sampler_cfg, predictor_cfg: PredictorConfig):
    """Euler sampling with full evaluations only at anchor steps.

    Returns (trajectory, evals); evals == ceil(steps / anchor_spacing).
    """
    ts = sampler_cfg.timesteps()
    state = PredictorState(predictor_cfg)
    z = np.array(z_T, dtype=np.float64)
    trajectory = [z.copy()]
    for j in range(sampler_cfg.steps):
        out = state.step(model, z, float(ts[j]), cond, j)
        z = euler_step(z, out.final, float(ts[j] - ts[j + 1]))
        trajectory.append(z.copy())
    return trajectory, state.evals


class PredictorState:
    """Anchor cache + dynamics bookkeeping for one sampling stream.

    Window schedulers keep one instance per context window; the sampling
    loop above keeps a single one.
    """

    def __init__(self, cfg: PredictorConfig):
        self.cfg = cfg
        self.cache = AnchorCache(cfg.anchor_spacing, cfg.max_order + 1)
        self.hist = SigmaHistory()
        self.table: DiffTable | None = None
        self.evals = 0

    def step(self, model, z: np.ndarray, t: float, cond, step_index: int) -> LayerOutputs:
        if is_anchor_step(step_index, self.cfg):
            out = model.eval(z, t, cond)
            self.evals += 1
            self.cache.push(step_index, out, self.hist)
            self.table = finite_differences(self.cache)
            return out
        k = step_index - self.cache.newest_step
        return predict(self.cache, self.table, self.hist, k, self.cfg)
