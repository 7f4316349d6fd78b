"""TasNet-style separation models with a dilated TCN mask estimator."""

from .blocks import conv_block_forward, gru_block_forward, transformer_block_forward, zero_output_projection
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .config import GC_KINDS, PRESETS, GCSpec, ModelConfig, conv_tasnet_config, toy_config
from .dualpath import chunk, dual_path_forward, overlap_add, swap_chunk_axes
from .receptive import empirical_rf_probe, has_global_context, receptive_field, rf_window
from .tasnet import (
    BlockSpec,
    SeparationModel,
    build_masker,
    decode,
    dilation_schedule,
    encode,
    insert_gc_block,
    model_blocks,
    padded_length,
    separate,
    separate_tensor,
)

__all__ = [name for name in dir() if not name.startswith("_")]
