"""Weighted sliding windows over long latent sequences.

Long sequences are denoised as overlapping context windows. At every
denoising step each window advances independently (oracle eval or
accelerated prediction), then its leading overlap frames are blended with
the previous window's trailing frames under a linear 0..1 ramp.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .flow_model import euler_step
from .predictor import PredictorConfig, PredictorState


@dataclass(frozen=True)
class WindowPlan:
    total: int           # full sequence length (frames)
    window: int          # window length
    overlap: int         # shared frames between consecutive windows
    spans: tuple         # ((start, end), ...) covering [0, total)


def plan_windows(total: int, window: int, overlap: int) -> WindowPlan:
    """Slide a window of ``window`` frames, advancing by window - overlap.

    The final span is clamped to end exactly at ``total``, so it may share
    more than ``overlap`` frames with its predecessor.
    """
    if not 0 < overlap < window:
        raise ValueError("overlap must satisfy 0 < overlap < window")
    if window > total:
        raise ValueError("window must not exceed the total length")
    spans = []
    s, e = 0, min(window, total)
    spans.append((s, e))
    while e < total:
        s = s + (window - overlap)
        e = min(s + window, total)
        spans.append((s, e))
    return WindowPlan(total, window, overlap, tuple(spans))


def blend_weights(overlap: int) -> np.ndarray:
    """Linear ramp 0..1 inclusive; frame 0 keeps the previous window."""
    if overlap < 2:
        raise ValueError("overlap must be >= 2 for a 0..1 ramp")
    return np.linspace(0.0, 1.0, overlap)


def blend_overlap(prev_tail: np.ndarray, cur_head: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Convex per-frame mix: w*current + (1-w)*previous."""
    if prev_tail.shape != cur_head.shape or prev_tail.shape[0] != len(weights):
        raise ValueError("overlap length mismatch")
    w = weights.reshape((len(weights),) + (1,) * (cur_head.ndim - 1))
    return w * cur_head + (1.0 - w) * prev_tail


def run_long(model, z_T_full: np.ndarray, cond_full, plan: WindowPlan,
             sampler_cfg, predictor_cfg: PredictorConfig | None = None):
    """Denoise a length-L sequence window by window with per-step blending.

    Within each step, windows are advanced left to right from the previous
    step's state; each window's head overlap is blended against the previous
    window's pre-blend tail from the same step. The first window and the
    first step skip blending. Returns (trajectory, evals_per_window).
    """
    z = np.array(z_T_full, dtype=np.float64)
    if z.shape[0] != plan.total:
        raise ValueError(f"latent has {z.shape[0]} frames, plan expects {plan.total}")
    cond_full = np.asarray(cond_full, dtype=np.float64)
    per_frame_cond = cond_full.ndim == 2 and cond_full.shape[0] == plan.total

    states = None
    if predictor_cfg is not None:
        states = [PredictorState(predictor_cfg) for _ in plan.spans]

    ts = sampler_cfg.timesteps()
    v = plan.overlap
    weights = blend_weights(v) if len(plan.spans) > 1 else None
    trajectory = [z.copy()]
    oracle_evals = [0] * len(plan.spans)
    for j in range(sampler_cfg.steps):
        t, dt = float(ts[j]), float(ts[j] - ts[j + 1])
        new_z = z.copy()
        prev_tail = None
        for wi, (s, e) in enumerate(plan.spans):
            zi = z[s:e]
            condi = cond_full[s:e] if per_frame_cond else cond_full
            if states is None:
                out = model.eval(zi, t, condi)
                oracle_evals[wi] += 1
            else:
                out = states[wi].step(model, zi, t, condi, j)
            stepped = euler_step(zi, out.final, dt)
            cur_tail = stepped[-v:].copy()  # pre-blend tail for the next window
            if wi > 0 and j > 0:
                stepped = stepped.copy()
                stepped[:v] = blend_overlap(prev_tail, stepped[:v], weights)
            new_z[s:e] = stepped
            prev_tail = cur_tail
        z = new_z
        trajectory.append(z.copy())
    evals_per_window = [st.evals for st in states] if states is not None else oracle_evals
    return trajectory, evals_per_window
