"""Analytic receptive field and an empirical perturbation probe."""

from __future__ import annotations

import numpy as np

from ..numerics import Tensor, no_grad
from .config import ModelConfig
from .tasnet import SeparationModel, model_blocks


def rf_window(config: ModelConfig) -> tuple[int, int]:
    """Frames to the left and right of an output frame that can influence it.

    Only convolutional blocks count; "same" padding puts ``span // 2`` of each
    kernel span on the left.
    """
    left = right = 0
    for blk in model_blocks(config):
        if blk.kind == "conv":
            span = (config.kernel - 1) * blk.dilation
            left += span // 2
            right += span - span // 2
    return left, right


def receptive_field(config: ModelConfig) -> tuple[int, float]:
    """``(frames, seconds)`` spanned by the convolutional blocks.

    frames = 1 + sum_b (P - 1) * 2^(b mod X); seconds = ((frames - 1) * hop + L_BL) / fs.
    Global-context blocks are not counted; see :func:`has_global_context`.
    """
    left, right = rf_window(config)
    frames = 1 + left + right
    seconds = ((frames - 1) * config.enc_hop + config.enc_window) / config.sample_rate_hz
    return frames, seconds


def has_global_context(config: ModelConfig) -> bool:
    return config.gc_kind != "none"


def empirical_rf_probe(
    model: SeparationModel,
    t_out: int,
    n_frames: int,
    delta: float = 1.0,
    seed: int = 0,
    threshold: float = 1e-9,
) -> list[int]:
    """Input frames whose perturbation moves the mask logits at ``t_out`` by more than ``threshold``.

    Works on encoder-frame inputs directly; every frame is perturbed in its
    own batch entry, so one forward pass covers the whole sequence.
    Requires frame-wise normalization (global normalization couples all frames).
    """
    if model.config.norm_mode != "frame":
        raise ValueError("the perturbation probe needs norm_mode='frame'")
    if not 0 <= t_out < n_frames:
        raise ValueError(f"t_out {t_out} outside [0, {n_frames})")
    rng = np.random.default_rng(seed)
    n = model.config.n_enc_channels
    base = rng.uniform(0.0, 1.0, (n, n_frames))
    direction = rng.uniform(0.5, 1.5, n)
    batch = np.repeat(base[None], n_frames + 1, axis=0)
    for j in range(n_frames):
        batch[j + 1, :, j] += delta * direction
    with no_grad():
        logits = model.masker_logits(Tensor(batch)).numpy()[..., t_out]
    change = np.abs(logits[1:] - logits[0]).reshape(n_frames, -1).max(axis=1)
    return [int(j) for j in np.nonzero(change > threshold)[0]]
