"""Chunking with 50% overlap, overlap-add, and the dual-path transformer stack."""

from __future__ import annotations

import numpy as np

from ..numerics import Tensor, ops
from .blocks import Params, transformer_block_forward


def _check_chunk(k: int) -> int:
    if k < 2 or k % 2:
        raise ValueError(f"chunk size must be even and >= 2, got {k}")
    return k // 2


def chunk_layout(length: int, k: int) -> tuple[int, int, int]:
    """``(left_pad, right_pad, n_chunks)`` for a sequence of ``length`` frames.

    Padding by one hop on the left and at least one hop on the right puts
    every original frame in exactly two chunks.
    """
    hop = _check_chunk(k)
    gap = (hop - length % hop) % hop
    right = hop + gap
    padded = length + hop + right
    return hop, right, padded // hop - 1


def chunk(y, k: int) -> Tensor:
    """``(..., B, L) -> (..., B, K, S)`` overlapping chunks (hop ``K/2``, zero padded)."""
    y = ops.as_tensor(y)
    left, right, n = chunk_layout(y.shape[-1], k)
    padded = ops.pad_last(y, left, right)
    idx = np.arange(k)[:, None] + (k // 2) * np.arange(n)[None, :]
    return ops.getitem(padded, (Ellipsis, idx))


def _overlap_sum(chunks: Tensor) -> Tensor:
    k = chunks.shape[-2]
    hop = k // 2
    first = ops.pad_last(ops.getitem(chunks, (Ellipsis, slice(0, hop), slice(None))), 0, 1)
    second = ops.pad_last(ops.getitem(chunks, (Ellipsis, slice(hop, k), slice(None))), 1, 0)
    blocks = ops.swapaxes(ops.add(first, second), -1, -2)  # (..., B, S+1, hop)
    return ops.reshape(blocks, blocks.shape[:-2] + (blocks.shape[-2] * hop,))


def overlap_count(length: int, k: int) -> np.ndarray:
    left, _, n = chunk_layout(length, k)
    ones = Tensor(np.ones((1, k, n)))
    return _overlap_sum(ones).data[0, left : left + length]


def overlap_add(chunks, length: int) -> Tensor:
    """Inverse of ``chunk``: sum overlapping halves, divide by the overlap count, trim."""
    chunks = ops.as_tensor(chunks)
    k = chunks.shape[-2]
    left, _, n = chunk_layout(length, k)
    if chunks.shape[-1] != n:
        raise ValueError(f"expected {n} chunks for length {length} and K={k}, got {chunks.shape[-1]}")
    total = _overlap_sum(chunks)
    trimmed = ops.getitem(total, (Ellipsis, slice(left, left + length)))
    return ops.div(trimmed, overlap_count(length, k))


def _permute_last3(t: Tensor, order: tuple[int, int, int]) -> Tensor:
    lead = list(range(t.ndim - 3))
    return ops.transpose(t, lead + [t.ndim - 3 + o for o in order])


def intra_to_seq(c: Tensor) -> Tensor:
    """``(..., B, K, S) -> (..., S, B, K)``: sequence over positions within a chunk."""
    return _permute_last3(c, (2, 0, 1))


def seq_to_chunks_intra(t: Tensor) -> Tensor:
    return _permute_last3(t, (1, 2, 0))


def swap_chunk_axes(c: Tensor) -> Tensor:
    """``(..., B, K, S) <-> (..., K, B, S)``; applying it twice is the identity."""
    return _permute_last3(c, (1, 0, 2))


def dual_path_forward(y, layers: list[tuple[Params, Params]], heads: int, k: int) -> Tensor:
    """Alternate intra-chunk and inter-chunk transformer layers, then overlap-add."""
    y = ops.as_tensor(y)
    length = y.shape[-1]
    c = chunk(y, k)
    for intra, inter in layers:
        c = seq_to_chunks_intra(transformer_block_forward(intra_to_seq(c), intra, heads))
        c = swap_chunk_axes(transformer_block_forward(swap_chunk_axes(c), inter, heads))
    return overlap_add(c, length)
