"""Masker building blocks on ``(..., channels, frames)`` tensors.

Every block is a residual map ``y -> y + f(y)`` whose last projection is a
separate parameter, so zeroing that projection turns the block into the
identity.
"""

from __future__ import annotations

import math

import numpy as np

from ..numerics import Tensor, ops

Params = dict[str, Tensor]


def pointwise(x: Tensor, w: Tensor, b: Tensor | None = None) -> Tensor:
    """1x1 convolution: ``w (out, in)`` applied to ``x (..., in, F)``."""
    out = ops.matmul(w, x)
    if b is not None:
        out = ops.add(out, ops.reshape(b, (b.shape[0], 1)))
    return out


def norm(x: Tensor, gain: Tensor, bias: Tensor, mode: str) -> Tensor:
    if mode == "global":
        return ops.global_layer_norm(x, gain, bias)
    return ops.frame_layer_norm(x, gain, bias)


def sinusoidal_encoding(dim: int, frames: int) -> np.ndarray:
    """``(dim, frames)`` sinusoidal position table."""
    pos = np.arange(frames)[None, :]
    i = np.arange(dim)[:, None]
    rate = 1.0 / 10000.0 ** ((i - i % 2) / dim)
    angle = pos * rate
    return np.where(i % 2 == 0, np.sin(angle), np.cos(angle))


# ---------------------------------------------------------------- init

def _normal(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    return rng.standard_normal(shape) / math.sqrt(fan_in)


def _leaf(arr) -> Tensor:
    return Tensor(arr, requires_grad=True)


def init_conv_block(rng: np.random.Generator, b: int, h: int, p: int) -> Params:
    return {
        "in_w": _leaf(_normal(rng, (h, b), b)),
        "in_b": _leaf(np.zeros(h)),
        "act1": _leaf(np.full(1, 0.25)),
        "norm1_g": _leaf(np.ones(h)),
        "norm1_b": _leaf(np.zeros(h)),
        "dw_w": _leaf(_normal(rng, (h, p), p)),
        "dw_b": _leaf(np.zeros(h)),
        "act2": _leaf(np.full(1, 0.25)),
        "norm2_g": _leaf(np.ones(h)),
        "norm2_b": _leaf(np.zeros(h)),
        "out_w": _leaf(_normal(rng, (b, h), h)),
        "out_b": _leaf(np.zeros(b)),
    }


def conv_block_forward(y: Tensor, p: Params, dilation: int, mode: str) -> Tensor:
    """``y + DSConv(norm(PReLU(PConv(y))))``, DSConv = D-Conv, PReLU, norm, P-Conv."""
    h = pointwise(y, p["in_w"], p["in_b"])
    h = norm(ops.prelu(h, p["act1"]), p["norm1_g"], p["norm1_b"], mode)
    h = ops.depthwise_conv1d(h, p["dw_w"], p["dw_b"], dilation=dilation, pad="same")
    h = norm(ops.prelu(h, p["act2"]), p["norm2_g"], p["norm2_b"], mode)
    return ops.add(y, pointwise(h, p["out_w"], p["out_b"]))


def _init_gru(rng: np.random.Generator, d_in: int, hid: int, update_bias: float) -> Params:
    bound = 1.0 / math.sqrt(hid)
    b_ih = rng.uniform(-bound, bound, 3 * hid)
    b_ih[hid : 2 * hid] += update_bias
    return {
        "w_ih": _leaf(rng.uniform(-bound, bound, (3 * hid, d_in))),
        "w_hh": _leaf(rng.uniform(-bound, bound, (3 * hid, hid))),
        "b_ih": _leaf(b_ih),
        "b_hh": _leaf(rng.uniform(-bound, bound, 3 * hid)),
    }


def init_gru_block(rng: np.random.Generator, b: int, h: int, update_bias: float) -> Params:
    params = {
        "in_w": _leaf(_normal(rng, (h, b), b)),
        "in_b": _leaf(np.zeros(h)),
        "act": _leaf(np.full(1, 0.25)),
        "norm_g": _leaf(np.ones(h)),
        "norm_b": _leaf(np.zeros(h)),
    }
    for direction in ("fwd", "bwd"):
        for k, v in _init_gru(rng, h, h // 2, update_bias).items():
            params[f"{direction}_{k}"] = v
    params["out_w"] = _leaf(_normal(rng, (b, h), h))
    params["out_b"] = _leaf(np.zeros(b))
    return params


def gru_block_forward(y: Tensor, p: Params, mode: str) -> Tensor:
    """``y + PConv_out(BiGRU(norm(PReLU(PConv_in(y)))))`` with H/2 units per direction."""
    h = pointwise(y, p["in_w"], p["in_b"])
    h = norm(ops.prelu(h, p["act"]), p["norm_g"], p["norm_b"], mode)
    seq = ops.swapaxes(h, -1, -2)  # (..., F, H)
    fwd = {k: p[f"fwd_{k}"] for k in ("w_ih", "w_hh", "b_ih", "b_hh")}
    bwd = {k: p[f"bwd_{k}"] for k in ("w_ih", "w_hh", "b_ih", "b_hh")}
    out = ops.swapaxes(ops.bigru_forward(seq, fwd, bwd), -1, -2)
    return ops.add(y, pointwise(out, p["out_w"], p["out_b"]))


def init_transformer_block(rng: np.random.Generator, d: int, ffn: int) -> Params:
    p = {"norm1_g": _leaf(np.ones(d)), "norm1_b": _leaf(np.zeros(d))}
    for k in ("q", "k", "v", "o"):
        p[f"w_{k}"] = _leaf(_normal(rng, (d, d), d))
        p[f"b_{k}"] = _leaf(np.zeros(d))
    p.update(
        norm2_g=_leaf(np.ones(d)),
        norm2_b=_leaf(np.zeros(d)),
        ffn1_w=_leaf(_normal(rng, (ffn, d), d)),
        ffn1_b=_leaf(np.zeros(ffn)),
        ffn2_w=_leaf(_normal(rng, (d, ffn), ffn)),
        ffn2_b=_leaf(np.zeros(d)),
    )
    return p


def transformer_block_forward(y: Tensor, p: Params, heads: int) -> Tensor:
    """Pre-norm encoder layer over frames; channels are the model dimension.

    Positions are encoded by adding a sinusoidal table to the attention input
    only, so the residual path carries ``y`` unchanged.
    """
    d, frames = y.shape[-2], y.shape[-1]
    a = ops.add(ops.frame_layer_norm(y, p["norm1_g"], p["norm1_b"]), sinusoidal_encoding(d, frames))
    seq = ops.swapaxes(a, -1, -2)  # (..., F, D)
    att = ops.multihead_attention(seq, seq, seq, heads, {k: p[k] for k in p if k[:2] in ("w_", "b_")})
    z = ops.add(y, ops.swapaxes(att, -1, -2))
    f = ops.relu(pointwise(ops.frame_layer_norm(z, p["norm2_g"], p["norm2_b"]), p["ffn1_w"], p["ffn1_b"]))
    return ops.add(z, pointwise(f, p["ffn2_w"], p["ffn2_b"]))


def zero_output_projection(p: Params, kind: str) -> None:
    """Zero the parameters that feed the residual sum (turns the block into identity)."""
    names = {"conv": ("out_w", "out_b"), "gru": ("out_w", "out_b"), "transformer": ("w_o", "b_o", "ffn2_w", "ffn2_b")}[kind]
    for n in names:
        p[n].assign(np.zeros(p[n].shape))
