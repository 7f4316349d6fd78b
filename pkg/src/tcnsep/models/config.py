"""Model hyperparameters."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

GC_KINDS = ("none", "gru", "transformer", "dualpath")


@dataclass(frozen=True)
class GCSpec:
    """Global-context block: kind plus the fields that kind uses."""

    kind: str = "none"
    position: int = 0
    heads: int = 4
    ffn_dim: int = 128
    chunk_size: int = 16
    layers: int = 1


@dataclass(frozen=True)
class ModelConfig:
    n_enc_channels: int = 64  # N
    enc_window: int = 16  # L_BL, samples
    enc_hop: int = 8
    bottleneck_channels: int = 32  # B
    conv_channels: int = 64  # H
    kernel: int = 3  # P
    blocks_per_stack: int = 4  # X
    repeats: int = 2  # R
    num_speakers: int = 2  # C
    norm_mode: str = "global"
    mask_activation: str = "relu"
    sample_rate_hz: int = 8000
    gc_kind: str = "none"
    gc_position: int = 0
    gc_heads: int = 4
    gc_ffn_dim: int = 128
    gc_chunk_size: int = 16
    gc_layers: int = 1
    # update-gate bias at init; positive values make the GRU block retain
    # long-range state instead of forgetting it within a few frames
    gru_update_bias: float = 2.0

    def __post_init__(self):
        positive = (
            "n_enc_channels", "enc_window", "enc_hop", "bottleneck_channels", "conv_channels",
            "kernel", "blocks_per_stack", "repeats", "num_speakers", "sample_rate_hz",
        )
        for name in positive:
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.enc_hop > self.enc_window:
            raise ValueError(f"enc_hop ({self.enc_hop}) must not exceed enc_window ({self.enc_window})")
        if self.norm_mode not in ("global", "frame"):
            raise ValueError(f"norm_mode must be 'global' or 'frame', got {self.norm_mode!r}")
        if self.mask_activation not in ("relu", "sigmoid"):
            raise ValueError(f"mask_activation must be 'relu' or 'sigmoid', got {self.mask_activation!r}")
        if self.gc_kind not in GC_KINDS:
            raise ValueError(f"gc_kind must be one of {GC_KINDS}, got {self.gc_kind!r}")
        if self.gc_kind in ("gru", "transformer") and not 0 <= self.gc_position < self.n_blocks:
            raise ValueError(f"gc_position {self.gc_position} outside [0, {self.n_blocks})")
        if self.gc_kind == "gru" and self.conv_channels % 2:
            raise ValueError("conv_channels must be even for the bidirectional GRU block")
        if self.gc_kind in ("transformer", "dualpath"):
            if self.gc_heads < 1 or self.bottleneck_channels % self.gc_heads:
                raise ValueError(
                    f"bottleneck_channels ({self.bottleneck_channels}) must be divisible by gc_heads ({self.gc_heads})"
                )
            if self.gc_ffn_dim < 1:
                raise ValueError("gc_ffn_dim must be positive")
        if self.gc_kind == "dualpath":
            if self.gc_chunk_size < 2 or self.gc_chunk_size % 2:
                raise ValueError(f"gc_chunk_size must be even and >= 2, got {self.gc_chunk_size}")
            if self.gc_layers < 1:
                raise ValueError("gc_layers must be positive")

    @property
    def n_blocks(self) -> int:
        return self.repeats * self.blocks_per_stack

    @property
    def gc(self) -> GCSpec:
        return GCSpec(self.gc_kind, self.gc_position, self.gc_heads, self.gc_ffn_dim, self.gc_chunk_size, self.gc_layers)

    def with_gc(self, spec: GCSpec) -> "ModelConfig":
        return dataclasses.replace(
            self,
            gc_kind=spec.kind,
            gc_position=spec.position,
            gc_heads=spec.heads,
            gc_ffn_dim=spec.ffn_dim,
            gc_chunk_size=spec.chunk_size,
            gc_layers=spec.layers,
        )

    def replace(self, **changes) -> "ModelConfig":
        return dataclasses.replace(self, **changes)


def toy_config(**changes) -> ModelConfig:
    return ModelConfig(**changes)


def conv_tasnet_config(**changes) -> ModelConfig:
    """Full-size TCN separator (X=8 blocks, R=3 repeats)."""
    base = dict(
        n_enc_channels=512, enc_window=16, enc_hop=8, bottleneck_channels=128, conv_channels=512,
        kernel=3, blocks_per_stack=8, repeats=3,
    )
    base.update(changes)
    return ModelConfig(**base)


PRESETS = {"toy": toy_config, "conv_tasnet": conv_tasnet_config}
