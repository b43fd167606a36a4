"""Layered toy denoiser, rectified-flow process, losses, and the oracle sampler.

The model is a small tanh MLP applied independently per frame. It is smooth
in the timestep, so finite-difference extrapolation of its outputs behaves
like it would on a real layered denoiser, at desk scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import SeededRng
from .norm_fusion import fuse_streams

FUSION_MODES = ("baseline-add", "pure-norm", "centralization", "ours")


@dataclass
class LayerOutputs:
    """Per-layer activations of one model evaluation.

    ``per_layer[i]`` has shape (frames, layer_width); the last layer maps
    back to the frame feature width so ``final`` is a velocity with the
    input latent's shape.
    """

    per_layer: list  # list[np.ndarray], length == layer_count
    shape: tuple     # latent shape the final output reshapes to

    @property
    def final(self) -> np.ndarray:
        return self.per_layer[-1].reshape(self.shape)

    def __len__(self) -> int:
        return len(self.per_layer)


@dataclass
class SamplerConfig:
    steps: int = 50
    seed: int = 0
    # Optional explicit schedule (length steps+1, strictly decreasing,
    # from 1 to 0). Default: uniform t_j = j/steps, descending.
    schedule: list | None = None

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if self.schedule is not None:
            ts = np.asarray(self.schedule, dtype=np.float64)
            if len(ts) != self.steps + 1 or not np.all(np.diff(ts) < 0):
                raise ValueError("schedule must be strictly decreasing with steps+1 entries")

    def timesteps(self) -> np.ndarray:
        if self.schedule is not None:
            return np.asarray(self.schedule, dtype=np.float64)
        return np.linspace(1.0, 0.0, self.steps + 1)


@dataclass
class MaskPair:
    face: np.ndarray
    lip: np.ndarray

    def __post_init__(self):
        for m in (self.face, self.lip):
            if np.min(m) < 0.0 or np.max(m) > 1.0:
                raise ValueError("mask elements must lie in [0, 1]")


@dataclass
class ToyModel:
    """Deterministic layered denoiser surrogate.

    Layer m computes h_m = tanh(A_m h_{m-1} + b_m + t*c_m + cond_m) where
    cond_m fuses an image-conditioning stream and a portrait-conditioning
    stream according to ``fusion_mode``. Applied per frame; the last layer
    returns to the frame feature width so the final output is a velocity.
    """

    layer_count: int
    width: int
    latent_dim: int
    cond_dim: int
    fusion_mode: str = "baseline-add"
    weights: list = field(default_factory=list)  # per layer: dict(A, b, c, P_img, P_p)

    def eval(self, z: np.ndarray, t: float, cond: np.ndarray) -> LayerOutputs:
        z = np.asarray(z, dtype=np.float64)
        frames, h = self._as_frames(z)
        cond2d = self._cond_frames(cond, frames)
        outs = []
        for w in self.weights:
            s_img = cond2d @ w["P_img"].T
            s_p = cond2d @ w["P_p"].T
            h = np.tanh(h @ w["A"].T + w["b"] + t * w["c"] + fuse_streams(s_img, s_p, self.fusion_mode))
            outs.append(h)
        return LayerOutputs(outs, z.shape)

    __call__ = eval

    def _as_frames(self, z: np.ndarray):
        if z.ndim > 1 and int(np.prod(z.shape[1:])) == self.latent_dim:
            return z.shape[0], z.reshape(z.shape[0], self.latent_dim)
        if z.size == self.latent_dim:
            return 1, z.reshape(1, self.latent_dim)
        raise ValueError(f"latent of shape {z.shape} incompatible with frame width {self.latent_dim}")

    def _cond_frames(self, cond: np.ndarray, frames: int) -> np.ndarray:
        cond = np.asarray(cond, dtype=np.float64)
        if cond.ndim == 1:
            cond = np.broadcast_to(cond, (frames, self.cond_dim))
        if cond.shape != (frames, self.cond_dim):
            raise ValueError(f"cond of shape {cond.shape} incompatible with ({frames}, {self.cond_dim})")
        return cond


def build_model(seed: int, layer_count: int = 4, width: int = 32,
                latent_dim: int = 64, cond_dim: int = 8,
                fusion_mode: str = "baseline-add") -> ToyModel:
    """Draw all weights from a single seeded stream, scaled by 1/sqrt(width)."""
    if layer_count < 2 or width < 2:
        raise ValueError("layer_count and width must both be >= 2")
    if fusion_mode not in FUSION_MODES:
        raise ValueError(f"unknown fusion mode {fusion_mode!r}")
    rng = SeededRng(seed)
    scale = 1.0 / math.sqrt(width)
    weights = []
    for m in range(layer_count):
        in_dim = latent_dim if m == 0 else width
        out_dim = latent_dim if m == layer_count - 1 else width
        weights.append({
            "A": rng.normal((out_dim, in_dim)) * scale,
            "b": rng.normal(out_dim) * scale,
            "c": rng.normal(out_dim) * scale,
            "P_img": rng.normal((out_dim, cond_dim)) * scale,
            "P_p": rng.normal((out_dim, cond_dim)) * scale,
        })
    return ToyModel(layer_count, width, latent_dim, cond_dim, fusion_mode, weights)


def forward_diffuse(x0: np.ndarray, x1: np.ndarray, t: float) -> np.ndarray:
    """Rectified-flow forward interpolation (1-t)*x0 + t*x1."""
    if x0.shape != x1.shape:
        raise ValueError("shape mismatch")
    if not 0.0 <= t <= 1.0:
        raise ValueError("t must lie in [0, 1]")
    return (1.0 - t) * x0 + t * x1


def velocity_loss(pred: np.ndarray, x0: np.ndarray, x1: np.ndarray) -> float:
    """MSE between the predicted velocity and the true velocity x1 - x0."""
    if pred.shape != x0.shape or x0.shape != x1.shape:
        raise ValueError("shape mismatch")
    return float(np.mean((pred - (x1 - x0)) ** 2))


def masked_recon_loss(z_gt: np.ndarray, z_eps: np.ndarray, masks: MaskPair) -> float:
    """Reconstruction MSE with face/lip regions up-weighted by (1 + face + lip)."""
    if z_gt.shape != z_eps.shape or masks.face.shape != z_gt.shape or masks.lip.shape != z_gt.shape:
        raise ValueError("shape mismatch")
    return float(np.mean(((z_gt - z_eps) * (1.0 + masks.face + masks.lip)) ** 2))


def euler_step(z: np.ndarray, v: np.ndarray, dt: float) -> np.ndarray:
    """Advance the latent from t to t-dt with constant velocity v."""
    if z.shape != v.shape:
        raise ValueError("shape mismatch")
    if dt <= 0:
        raise ValueError("dt must be positive")
    return z - dt * v


def sample_full(model, z_T: np.ndarray, cond: np.ndarray, cfg: SamplerConfig):
    """Non-accelerated sampler: evaluate the model at every step (the oracle).

    Returns (trajectory, evals): steps+1 latents ending at the sample, and
    the number of full model evaluations (== steps).
    """
    ts = cfg.timesteps()
    z = np.array(z_T, dtype=np.float64)
    trajectory = [z.copy()]
    for j in range(cfg.steps):
        out = model.eval(z, float(ts[j]), cond)
        z = euler_step(z, out.final, float(ts[j] - ts[j + 1]))
        trajectory.append(z.copy())
    return trajectory, cfg.steps
