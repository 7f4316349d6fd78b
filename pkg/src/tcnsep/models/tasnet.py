"""Encoder / mask estimator / decoder separation model."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..mixsim.audio import AudioClip
from ..numerics import Tensor, no_grad, ops
from . import blocks as B
from .config import GCSpec, ModelConfig
from .dualpath import dual_path_forward


@dataclass(frozen=True)
class BlockSpec:
    kind: str  # conv | gru | transformer
    name: str
    dilation: int | None = None


def dilation_schedule(config: ModelConfig) -> list[int]:
    x = config.blocks_per_stack
    return [2 ** (b % x) for b in range(config.n_blocks)]


def build_masker(config: ModelConfig) -> list[BlockSpec]:
    """Plain TCN block list with dilation ``2 ** (b mod X)``."""
    return [BlockSpec("conv", f"block{b}", d) for b, d in enumerate(dilation_schedule(config))]


def insert_gc_block(blocks: list[BlockSpec], spec: GCSpec) -> list[BlockSpec]:
    """Replace block p by a GRU block, or insert a transformer block before it."""
    if spec.kind in ("none", "dualpath"):
        return list(blocks)
    if not 0 <= spec.position < len(blocks):
        raise ValueError(f"global-context position {spec.position} outside [0, {len(blocks)})")
    out = list(blocks)
    if spec.kind == "gru":
        out[spec.position] = BlockSpec("gru", f"gru{spec.position}")
    elif spec.kind == "transformer":
        out.insert(spec.position, BlockSpec("transformer", f"transformer{spec.position}"))
    else:
        raise ValueError(f"unknown global-context kind {spec.kind!r}")
    return out


def model_blocks(config: ModelConfig) -> list[BlockSpec]:
    if config.gc_kind == "dualpath":
        return []
    return insert_gc_block(build_masker(config), config.gc)


class SeparationModel:
    """Parameters plus forward pass for one :class:`ModelConfig`.

    Block ``b`` draws its initial weights from a stream keyed by
    ``(seed, b)``, so configurations that differ only in one block share all
    other initial weights.
    """

    def __init__(self, config: ModelConfig, seed: int = 0):
        self.config = config
        self.seed = seed
        self.blocks = model_blocks(config)
        self.params: dict[str, Tensor] = {}
        self._init_params()

    # -- parameters --------------------------------------------------------
    def _rng(self, *key: int) -> np.random.Generator:
        return np.random.default_rng([self.seed, *key])

    def _add(self, prefix: str, group: dict[str, Tensor]) -> None:
        for k, v in group.items():
            v.name = f"{prefix}.{k}"
            self.params[v.name] = v

    def _init_params(self) -> None:
        c = self.config
        n, b, h, lbl = c.n_enc_channels, c.bottleneck_channels, c.conv_channels, c.enc_window
        leaf = B._leaf
        rng = self._rng(10_000)
        self._add("encoder", {"w": leaf(rng.standard_normal((n, 1, lbl)) / math.sqrt(lbl))})
        rng = self._rng(10_001)
        self._add("decoder", {"w": leaf(rng.standard_normal((n, 1, lbl)) / math.sqrt(n))})
        rng = self._rng(10_002)
        self._add("masker.in", {"norm_g": leaf(np.ones(n)), "norm_b": leaf(np.zeros(n)),
                                "w": leaf(rng.standard_normal((b, n)) / math.sqrt(n)), "b": leaf(np.zeros(b))})
        for blk in self.blocks:
            if blk.kind == "conv":
                slot = int(blk.name[len("block"):])
                self._add(blk.name, B.init_conv_block(self._rng(slot), b, h, c.kernel))
            elif blk.kind == "gru":
                self._add(blk.name, B.init_gru_block(self._rng(c.gc_position, 1), b, h, c.gru_update_bias))
            else:
                self._add(blk.name, B.init_transformer_block(self._rng(c.gc_position, 2), b, c.gc_ffn_dim))
        if c.gc_kind == "dualpath":
            for layer in range(c.gc_layers):
                for part, code in (("intra", 3), ("inter", 4)):
                    self._add(f"dualpath{layer}.{part}", B.init_transformer_block(self._rng(layer, code), b, c.gc_ffn_dim))
        rng = self._rng(10_003)
        self._add("masker.out", {"act": leaf(np.full(1, 0.25)),
                                 "w": leaf(rng.standard_normal((c.num_speakers * n, b)) / math.sqrt(b)),
                                 "b": leaf(np.zeros(c.num_speakers * n))})

    def parameters(self) -> list[Tensor]:
        return list(self.params.values())

    def group(self, prefix: str) -> dict[str, Tensor]:
        cut = len(prefix) + 1
        return {k[cut:]: v for k, v in self.params.items() if k.startswith(prefix + ".")}

    def num_parameters(self) -> int:
        return int(sum(p.size for p in self.params.values()))

    def state(self) -> dict[str, np.ndarray]:
        return {k: v.data.copy() for k, v in self.params.items()}

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        if set(state) != set(self.params):
            missing = sorted(set(self.params) - set(state))
            extra = sorted(set(state) - set(self.params))
            raise ValueError(f"parameter sets differ (missing {missing[:3]}, unexpected {extra[:3]})")
        for k, v in state.items():
            self.params[k].assign(v)

    # -- forward -----------------------------------------------------------
    def masker_logits(self, frames: Tensor) -> Tensor:
        """Mask pre-activations ``(..., C, N, F)`` from encoder frames ``(..., N, F)``."""
        c = self.config
        p = self.group("masker.in")
        y = B.norm(frames, p["norm_g"], p["norm_b"], c.norm_mode)
        y = B.pointwise(y, p["w"], p["b"])
        for blk in self.blocks:
            if blk.kind == "conv":
                y = B.conv_block_forward(y, self.group(blk.name), blk.dilation, c.norm_mode)
            elif blk.kind == "gru":
                y = B.gru_block_forward(y, self.group(blk.name), c.norm_mode)
            else:
                y = B.transformer_block_forward(y, self.group(blk.name), c.gc_heads)
        if c.gc_kind == "dualpath":
            layers = [(self.group(f"dualpath{i}.intra"), self.group(f"dualpath{i}.inter")) for i in range(c.gc_layers)]
            y = dual_path_forward(y, layers, c.gc_heads, c.gc_chunk_size)
        p = self.group("masker.out")
        out = B.pointwise(ops.prelu(y, p["act"]), p["w"], p["b"])
        return ops.reshape(out, out.shape[:-2] + (c.num_speakers, c.n_enc_channels, out.shape[-1]))

    def masks(self, frames: Tensor) -> Tensor:
        logits = self.masker_logits(frames)
        return ops.relu(logits) if self.config.mask_activation == "relu" else ops.sigmoid(logits)

    def __call__(self, x) -> Tensor:
        return separate_tensor(self, x)


def encode(model: SeparationModel, x) -> Tensor:
    """Strided convolution + ReLU: ``(..., L_x) -> (..., N, F)``, F = (L_x - L_BL) // hop + 1."""
    x = ops.as_tensor(_samples(x))
    c = model.config
    if x.shape[-1] < c.enc_window:
        raise ValueError(f"signal of {x.shape[-1]} samples is shorter than the encoder window {c.enc_window}")
    x = ops.reshape(x, x.shape[:-1] + (1, x.shape[-1]))
    return ops.relu(ops.conv1d(x, model.params["encoder.w"], stride=c.enc_hop))


def decode(model: SeparationModel, frames) -> Tensor:
    """Transposed convolution: ``(..., N, F) -> (..., (F - 1) hop + L_BL)``."""
    frames = ops.as_tensor(frames)
    w = model.params["decoder.w"]
    out = ops.transposed_conv1d(frames, w, stride=model.config.enc_hop)
    return ops.reshape(out, out.shape[:-2] + (out.shape[-1],))


def _samples(x):
    s = getattr(x, "samples", None)
    return s if s is not None else x


def padded_length(config: ModelConfig, length: int) -> int:
    """Smallest length >= ``length`` that the encoder frames without remainder."""
    lbl, hop = config.enc_window, config.enc_hop
    if length <= lbl:
        return lbl
    return lbl + math.ceil((length - lbl) / hop) * hop


def separate_tensor(model: SeparationModel, x, masks_fn=None) -> Tensor:
    """Estimates ``(..., C, L_x)`` for mixtures ``(..., L_x)``.

    The mixture is zero padded to a whole number of frames and the decoded
    signals are trimmed back to ``L_x``.
    """
    x = ops.as_tensor(_samples(x))
    length = x.shape[-1]
    target = padded_length(model.config, length)
    if target != length:
        x = ops.pad_last(x, 0, target - length)
    frames = encode(model, x)
    masks = (masks_fn or model.masks)(frames)
    lead = frames.shape[:-2]
    masked = ops.mul(masks, ops.reshape(frames, lead + (1,) + frames.shape[-2:]))
    out = decode(model, masked)
    return ops.getitem(out, (Ellipsis, slice(0, length)))


def separate(model: SeparationModel, x) -> list:
    """Separate one mixture clip into ``C`` clips of the same length."""
    rate = getattr(x, "sample_rate_hz", model.config.sample_rate_hz)
    with no_grad():
        est = separate_tensor(model, x).numpy()
    return [AudioClip(e, rate) for e in est]
