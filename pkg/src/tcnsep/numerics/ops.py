"""Differentiable operations on :class:`Tensor`.

Every op accepts arbitrary leading (batch) dimensions unless noted. Layouts
follow the separation models: feature maps are ``(..., channels, frames)``,
sequences for recurrent/attention layers are ``(..., frames, features)``.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .tensor import Tensor

Padding = str  # "none" | "same"


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


# ---------------------------------------------------------------- elementwise

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def bw(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return Tensor._from_op(a.data + b.data, (a, b), bw)


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def bw(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return Tensor._from_op(a.data - b.data, (a, b), bw)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)

    def bw(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return Tensor._from_op(a.data * b.data, (a, b), bw)


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if np.any(b.data == 0):
        raise ZeroDivisionError("division by a tensor containing zeros")

    def bw(g):
        ga = g / b.data
        gb = -g * a.data / (b.data * b.data)
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

    return Tensor._from_op(a.data / b.data, (a, b), bw)


def neg(a) -> Tensor:
    a = as_tensor(a)
    return Tensor._from_op(-a.data, (a,), lambda g: (-g,))


def power(a, p: float) -> Tensor:
    a = as_tensor(a)

    def bw(g):
        return (g * p * a.data ** (p - 1),)

    return Tensor._from_op(a.data ** p, (a,), bw)


def exp(a) -> Tensor:
    a = as_tensor(a)
    out = np.exp(a.data)
    return Tensor._from_op(out, (a,), lambda g: (g * out,))


def log(a) -> Tensor:
    a = as_tensor(a)
    if np.any(a.data <= 0):
        raise ValueError("log of non-positive value")
    return Tensor._from_op(np.log(a.data), (a,), lambda g: (g / a.data,))


def log10(a) -> Tensor:
    a = as_tensor(a)
    if np.any(a.data <= 0):
        raise ValueError("log10 of non-positive value")
    scale = 1.0 / math.log(10.0)
    return Tensor._from_op(np.log10(a.data), (a,), lambda g: (g * scale / a.data,))


def sqrt(a) -> Tensor:
    a = as_tensor(a)
    if np.any(a.data < 0):
        raise ValueError("sqrt of negative value")
    out = np.sqrt(a.data)
    return Tensor._from_op(out, (a,), lambda g: (g * 0.5 / out,))


def tanh(a) -> Tensor:
    a = as_tensor(a)
    out = np.tanh(a.data)
    return Tensor._from_op(out, (a,), lambda g: (g * (1.0 - out * out),))


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # split by sign so exp never overflows
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    out = _sigmoid(a.data)
    return Tensor._from_op(out, (a,), lambda g: (g * out * (1.0 - out),))


def relu(a) -> Tensor:
    a = as_tensor(a)
    mask = a.data > 0
    return Tensor._from_op(a.data * mask, (a,), lambda g: (g * mask,))


def prelu(x, slope) -> Tensor:
    """Parametric ReLU with one slope per channel (axis -2) or a single slope.

    ``slope`` has shape ``(C,)`` for ``x`` of shape ``(..., C, L)``, or ``(1,)``.
    """
    x, slope = as_tensor(x), as_tensor(slope)
    if slope.ndim != 1:
        raise ValueError("prelu slope must be one-dimensional")
    if x.ndim >= 2:
        a = slope.data[:, None]
    else:
        a = slope.data
    try:
        np.broadcast_shapes(a.shape, x.shape)
    except ValueError as exc:
        raise ValueError(f"prelu slope {slope.shape} does not fit input {x.shape}") from exc
    neg_mask = x.data < 0
    out = np.where(neg_mask, a * x.data, x.data)

    def bw(g):
        gx = np.where(neg_mask, a * g, g)
        ga = _unbroadcast(np.where(neg_mask, g * x.data, 0.0), a.shape).reshape(slope.shape)
        return gx, ga

    return Tensor._from_op(out, (x, slope), bw)


def clip(a, lo: float, hi: float) -> Tensor:
    """Clamp values; the gradient is zero where clamping is active."""
    a = as_tensor(a)
    inside = (a.data >= lo) & (a.data <= hi)
    return Tensor._from_op(np.clip(a.data, lo, hi), (a,), lambda g: (g * inside,))


# ---------------------------------------------------------------- reductions

def _norm_axes(axis, ndim):
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(ax % ndim for ax in axis)


def sum(a, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001
    a = as_tensor(a)
    axes = _norm_axes(axis, a.ndim)
    out = a.data.sum(axis=axes, keepdims=keepdims)

    def bw(g):
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (np.broadcast_to(g, a.shape).copy(),)

    return Tensor._from_op(out, (a,), bw)


def mean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    axes = _norm_axes(axis, a.ndim)
    n = int(np.prod([a.shape[ax] for ax in axes]))
    return mul(sum(a, axes, keepdims), 1.0 / n)


# ---------------------------------------------------------------- shape ops

def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    return Tensor._from_op(a.data.reshape(shape), (a,), lambda g: (g.reshape(a.shape),))


def transpose(a, axes: Sequence[int] | None = None) -> Tensor:
    a = as_tensor(a)
    if axes is None:
        axes = tuple(reversed(range(a.ndim)))
    axes = tuple(ax % a.ndim for ax in axes)
    inverse = tuple(np.argsort(axes))
    return Tensor._from_op(np.transpose(a.data, axes), (a,), lambda g: (np.transpose(g, inverse),))


def swapaxes(a, ax1: int, ax2: int) -> Tensor:
    a = as_tensor(a)
    axes = list(range(a.ndim))
    axes[ax1], axes[ax2] = axes[ax2], axes[ax1]
    return transpose(a, axes)


def getitem(a, index) -> Tensor:
    a = as_tensor(a)
    out = a.data[index]

    def bw(g):
        full = np.zeros_like(a.data)
        np.add.at(full, index, g)
        return (full,)

    return Tensor._from_op(out, (a,), bw)


def concat(tensors: Sequence, axis: int = 0) -> Tensor:
    ts = [as_tensor(t) for t in tensors]
    axis = axis % ts[0].ndim
    sizes = [t.shape[axis] for t in ts]
    bounds = np.cumsum([0] + sizes)

    def bw(g):
        return tuple(
            np.take(g, np.arange(bounds[i], bounds[i + 1]), axis=axis) for i in range(len(ts))
        )

    return Tensor._from_op(np.concatenate([t.data for t in ts], axis=axis), ts, bw)


def stack(tensors: Sequence, axis: int = 0) -> Tensor:
    ts = [as_tensor(t) for t in tensors]
    out = np.stack([t.data for t in ts], axis=axis)
    ax = axis % out.ndim

    def bw(g):
        return tuple(np.take(g, i, axis=ax) for i in range(len(ts)))

    return Tensor._from_op(out, ts, bw)


def pad_last(a, left: int, right: int) -> Tensor:
    """Zero-pad the last axis."""
    a = as_tensor(a)
    if left == 0 and right == 0:
        return a
    width = [(0, 0)] * (a.ndim - 1) + [(left, right)]
    n = a.shape[-1]
    return Tensor._from_op(np.pad(a.data, width), (a,), lambda g: (g[..., left:left + n],))


# ---------------------------------------------------------------- linear algebra

def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ValueError("matmul operands must be at least 2-D")

    def bw(g):
        ga = g @ np.swapaxes(b.data, -1, -2)
        gb = np.swapaxes(a.data, -1, -2) @ g
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

    return Tensor._from_op(a.data @ b.data, (a, b), bw)


def linear(x, weight, bias=None) -> Tensor:
    """``x @ weight.T + bias`` over the last axis; weight is ``(out, in)``."""
    y = matmul(x, transpose(weight))
    return add(y, bias) if bias is not None else y


def softmax(a, axis: int = -1) -> Tensor:
    a = as_tensor(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def bw(g):
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

    return Tensor._from_op(out, (a,), bw)


# ---------------------------------------------------------------- convolutions

def _span(kernel: int, dilation: int) -> int:
    return (kernel - 1) * dilation + 1


def _same_pad(kernel: int, dilation: int) -> tuple[int, int]:
    total = (kernel - 1) * dilation
    return total // 2, total - total // 2


def conv1d(x, w, bias=None, dilation: int = 1, pad: Padding = "none", stride: int = 1) -> Tensor:
    """Dilated (and optionally strided) 1-D cross-correlation.

    ``x``: ``(..., C_in, L)``; ``w``: ``(C_out, C_in, P)``; ``bias``: ``(C_out,)``.
    ``pad="same"`` splits ``(P-1)*dilation`` zeros symmetrically (extra zero on
    the right) and requires ``stride == 1``.
    """
    x, w = as_tensor(x), as_tensor(w)
    if w.ndim != 3:
        raise ValueError(f"conv1d weight must be (C_out, C_in, P), got {w.shape}")
    if x.ndim < 2 or x.shape[-2] != w.shape[1]:
        raise ValueError(f"conv1d input channels {x.shape} do not match weight {w.shape}")
    if dilation < 1 or stride < 1:
        raise ValueError("dilation and stride must be >= 1")
    c_out, c_in, k = w.shape
    if pad == "same":
        if stride != 1:
            raise ValueError("'same' padding requires stride 1")
        left, right = _same_pad(k, dilation)
    elif pad == "none":
        left = right = 0
    else:
        raise ValueError(f"unknown padding mode {pad!r}")
    length = x.shape[-1]
    span = _span(k, dilation)
    padded_len = length + left + right
    if padded_len < span:
        raise ValueError(f"input length {length} shorter than dilated kernel span {span}")
    out_len = (padded_len - span) // stride + 1

    xp = np.pad(x.data, [(0, 0)] * (x.ndim - 1) + [(left, right)]) if (left or right) else x.data
    lead = x.shape[:-2]
    if k == 1 and stride == 1:
        cols = xp
        w2 = w.data[:, :, 0]
    else:
        taps = [xp[..., j * dilation: j * dilation + (out_len - 1) * stride + 1: stride] for j in range(k)]
        cols = np.stack(taps, axis=-2).reshape(*lead, c_in * k, out_len)
        w2 = w.data.reshape(c_out, c_in * k)
    out = w2 @ cols
    inputs = (x, w)
    if bias is not None:
        bias = as_tensor(bias)
        out = out + bias.data[:, None]
        inputs = (x, w, bias)

    def bw(g):
        g2 = g.reshape(-1, c_out, out_len)
        c2 = cols.reshape(-1, cols.shape[-2], out_len)
        gw = np.einsum("bol,bkl->ok", g2, c2).reshape(w.shape)
        gcols = w2.T @ g
        if k == 1 and stride == 1:
            gxp = gcols
        else:
            gcols = gcols.reshape(*lead, c_in, k, out_len)
            gxp = np.zeros(xp.shape)
            for j in range(k):
                gxp[..., j * dilation: j * dilation + (out_len - 1) * stride + 1: stride] += gcols[..., j, :]
        gx = gxp[..., left:left + length]
        grads = [gx, gw]
        if bias is not None:
            grads.append(g2.sum(axis=(0, 2)))
        return grads

    return Tensor._from_op(out, inputs, bw)


def depthwise_conv1d(x, w, bias=None, dilation: int = 1, pad: Padding = "none") -> Tensor:
    """Channel-separable dilated convolution; ``w`` is ``(C, P)``."""
    x, w = as_tensor(x), as_tensor(w)
    if w.ndim != 2:
        raise ValueError(f"depthwise weight must be (C, P), got {w.shape}")
    if x.ndim < 2 or x.shape[-2] != w.shape[0]:
        raise ValueError(f"depthwise input {x.shape} does not match weight {w.shape}")
    if dilation < 1:
        raise ValueError("dilation must be >= 1")
    _, k = w.shape
    if pad == "same":
        left, right = _same_pad(k, dilation)
    elif pad == "none":
        left = right = 0
    else:
        raise ValueError(f"unknown padding mode {pad!r}")
    length = x.shape[-1]
    span = _span(k, dilation)
    if length + left + right < span:
        raise ValueError(f"input length {length} shorter than dilated kernel span {span}")
    out_len = length + left + right - span + 1
    xp = np.pad(x.data, [(0, 0)] * (x.ndim - 1) + [(left, right)]) if (left or right) else x.data
    out = np.zeros(x.shape[:-1] + (out_len,))
    for j in range(k):
        out += w.data[:, j, None] * xp[..., j * dilation: j * dilation + out_len]
    inputs = (x, w)
    if bias is not None:
        bias = as_tensor(bias)
        out += bias.data[:, None]
        inputs = (x, w, bias)

    def bw(g):
        gxp = np.zeros(xp.shape)
        gw = np.empty(w.shape)
        red = tuple(range(g.ndim - 2)) + (g.ndim - 1,)
        for j in range(k):
            sl = slice(j * dilation, j * dilation + out_len)
            gxp[..., sl] += w.data[:, j, None] * g
            gw[:, j] = (g * xp[..., sl]).sum(axis=red)
        grads = [gxp[..., left:left + length], gw]
        if bias is not None:
            grads.append(g.sum(axis=red))
        return grads

    return Tensor._from_op(out, inputs, bw)


def transposed_conv1d(x, w, bias=None, stride: int = 1) -> Tensor:
    """Strided transposed convolution (overlap-add of scaled kernels).

    ``x``: ``(..., C_in, L)``; ``w``: ``(C_in, C_out, P)``. Output length is
    ``(L - 1) * stride + P``. For the same ``w`` this is the adjoint of
    ``conv1d(., w, stride=stride)`` mapping ``C_out`` to ``C_in`` channels.
    """
    x, w = as_tensor(x), as_tensor(w)
    if w.ndim != 3:
        raise ValueError(f"transposed conv weight must be (C_in, C_out, P), got {w.shape}")
    if x.ndim < 2 or x.shape[-2] != w.shape[0]:
        raise ValueError(f"transposed conv input {x.shape} does not match weight {w.shape}")
    if stride < 1:
        raise ValueError("stride must be >= 1")
    c_in, c_out, k = w.shape
    length = x.shape[-1]
    out_len = (length - 1) * stride + k
    lead = x.shape[:-2]
    w2 = w.data.reshape(c_in, c_out * k)
    # (..., C_out*P, L): contribution of each frame to each kernel tap
    contrib = np.swapaxes(w2, 0, 1) @ x.data
    contrib = contrib.reshape(*lead, c_out, k, length)
    out = np.zeros(lead + (c_out, out_len))
    for j in range(k):
        out[..., j: j + (length - 1) * stride + 1: stride] += contrib[..., j, :]
    inputs = (x, w)
    if bias is not None:
        bias = as_tensor(bias)
        out += bias.data[:, None]
        inputs = (x, w, bias)

    def bw(g):
        taps = [g[..., j: j + (length - 1) * stride + 1: stride] for j in range(k)]
        gcontrib = np.stack(taps, axis=-2).reshape(*lead, c_out * k, length)
        gx = w2 @ gcontrib
        gw = np.einsum(
            "bil,bkl->ik",
            x.data.reshape(-1, c_in, length),
            gcontrib.reshape(-1, c_out * k, length),
        ).reshape(w.shape)
        grads = [gx, gw]
        if bias is not None:
            grads.append(g.reshape(-1, c_out, out_len).sum(axis=(0, 2)))
        return grads

    return Tensor._from_op(out, inputs, bw)


# ---------------------------------------------------------------- normalization

def _normalize(x: Tensor, gain: Tensor, bias: Tensor, axes: tuple[int, ...], eps: float) -> Tensor:
    if gain.shape != (x.shape[-2],) or bias.shape != (x.shape[-2],):
        raise ValueError(f"norm gain/bias must be ({x.shape[-2]},), got {gain.shape}/{bias.shape}")
    mu = x.data.mean(axis=axes, keepdims=True)
    centered = x.data - mu
    var = (centered * centered).mean(axis=axes, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv
    out = gain.data[:, None] * xhat + bias.data[:, None]
    red = tuple(range(x.ndim - 2)) + (x.ndim - 1,)

    def bw(g):
        gg = (g * xhat).sum(axis=red)
        gb = g.sum(axis=red)
        gxhat = g * gain.data[:, None]
        gx = inv * (
            gxhat
            - gxhat.mean(axis=axes, keepdims=True)
            - xhat * (gxhat * xhat).mean(axis=axes, keepdims=True)
        )
        return gx, gg, gb

    return Tensor._from_op(out, (x, gain, bias), bw)


def global_layer_norm(x, gain, bias, eps: float = 1e-8) -> Tensor:
    """Normalize jointly over channels and frames of each ``(C, L)`` map."""
    x, gain, bias = as_tensor(x), as_tensor(gain), as_tensor(bias)
    if x.ndim < 2:
        raise ValueError("global_layer_norm expects (..., C, L)")
    return _normalize(x, gain, bias, (x.ndim - 2, x.ndim - 1), eps)


def frame_layer_norm(x, gain, bias, eps: float = 1e-8) -> Tensor:
    """Normalize over channels independently at every frame."""
    x, gain, bias = as_tensor(x), as_tensor(gain), as_tensor(bias)
    if x.ndim < 2:
        raise ValueError("frame_layer_norm expects (..., C, L)")
    return _normalize(x, gain, bias, (x.ndim - 2,), eps)


# ---------------------------------------------------------------- recurrent

def _gru_recurrence(xp: Tensor, w_hh: Tensor, b_hh: Tensor) -> Tensor:
    """Run the GRU recurrence over pre-projected inputs ``xp`` (..., L, 3H).

    Gate order along the last axis is (reset, update, candidate).
    """
    lead = xp.shape[:-2]
    steps, three_h = xp.shape[-2:]
    hid = three_h // 3
    xs = xp.data.reshape(-1, steps, three_h)
    batch = xs.shape[0]
    whh = w_hh.data
    bhh = b_hh.data
    h = np.zeros((batch, hid))
    hs = np.empty((batch, steps, hid))
    rs = np.empty((batch, steps, hid))
    zs = np.empty((batch, steps, hid))
    ns = np.empty((batch, steps, hid))
    hns = np.empty((batch, steps, hid))
    whh_t = whh.T
    for t in range(steps):
        gh = h @ whh_t + bhh
        gx = xs[:, t]
        r = _sigmoid(gx[:, :hid] + gh[:, :hid])
        z = _sigmoid(gx[:, hid:2 * hid] + gh[:, hid:2 * hid])
        hn = gh[:, 2 * hid:]
        n = np.tanh(gx[:, 2 * hid:] + r * hn)
        h = (1.0 - z) * n + z * h
        rs[:, t], zs[:, t], ns[:, t], hns[:, t], hs[:, t] = r, z, n, hn, h

    def bw(g):
        g = g.reshape(batch, steps, hid)
        gxs = np.empty_like(xs)
        gwhh = np.zeros_like(whh)
        gbhh = np.zeros_like(bhh)
        dh_next = np.zeros((batch, hid))
        for t in range(steps - 1, -1, -1):
            r, z, n, hn = rs[:, t], zs[:, t], ns[:, t], hns[:, t]
            h_prev = hs[:, t - 1] if t > 0 else np.zeros((batch, hid))
            dh = g[:, t] + dh_next
            dn = dh * (1.0 - z)
            dz = dh * (h_prev - n)
            dn_pre = dn * (1.0 - n * n)
            dr = dn_pre * hn
            dr_pre = dr * r * (1.0 - r)
            dz_pre = dz * z * (1.0 - z)
            dgh = np.concatenate([dr_pre, dz_pre, dn_pre * r], axis=1)
            gxs[:, t] = np.concatenate([dr_pre, dz_pre, dn_pre], axis=1)
            gwhh += dgh.T @ h_prev
            gbhh += dgh.sum(axis=0)
            dh_next = dh * z + dgh @ whh
        return gxs.reshape(xp.shape), gwhh, gbhh

    return Tensor._from_op(hs.reshape(*lead, steps, hid), (xp, w_hh, b_hh), bw)


def flip(a, axis: int) -> Tensor:
    a = as_tensor(a)
    return Tensor._from_op(np.flip(a.data, axis=axis).copy(), (a,), lambda g: (np.flip(g, axis=axis).copy(),))


def gru_forward(x, params: dict, direction: str = "fwd") -> Tensor:
    """Single-layer GRU over ``x`` of shape ``(..., L, D_in)`` with ``h_0 = 0``.

    ``params`` holds ``w_ih (3H, D_in)``, ``w_hh (3H, H)``, ``b_ih (3H,)``,
    ``b_hh (3H,)`` with gates stacked as (reset, update, candidate):

        r = sigmoid(W_ir x + b_ir + W_hr h + b_hr)
        z = sigmoid(W_iz x + b_iz + W_hz h + b_hz)
        n = tanh(W_in x + b_in + r * (W_hn h + b_hn))
        h' = (1 - z) * n + z * h

    With ``direction="bwd"`` the sequence is processed last-to-first and the
    hidden states are returned in the original time order.
    """
    x = as_tensor(x)
    w_ih, w_hh, b_ih, b_hh = (as_tensor(params[k]) for k in ("w_ih", "w_hh", "b_ih", "b_hh"))
    three_h = w_ih.shape[0]
    if three_h % 3 or w_ih.ndim != 2:
        raise ValueError(f"w_ih must be (3H, D_in), got {w_ih.shape}")
    hid = three_h // 3
    if w_ih.shape[1] != x.shape[-1]:
        raise ValueError(f"w_ih expects {w_ih.shape[1]} input features, got {x.shape[-1]}")
    if w_hh.shape != (three_h, hid) or b_ih.shape != (three_h,) or b_hh.shape != (three_h,):
        raise ValueError("GRU parameter shapes do not match")
    if direction not in ("fwd", "bwd"):
        raise ValueError(f"direction must be 'fwd' or 'bwd', got {direction!r}")
    seq_axis = x.ndim - 2
    if direction == "bwd":
        x = flip(x, seq_axis)
    xp = linear(x, w_ih, b_ih)
    h = _gru_recurrence(xp, w_hh, b_hh)
    if direction == "bwd":
        h = flip(h, seq_axis)
    return h


def bigru_forward(x, fwd_params: dict, bwd_params: dict) -> Tensor:
    """Concatenate forward and (time-realigned) backward hidden states."""
    return concat([gru_forward(x, fwd_params, "fwd"), gru_forward(x, bwd_params, "bwd")], axis=-1)


# ---------------------------------------------------------------- attention

def multihead_attention(q, k, v, heads: int, params: dict) -> Tensor:
    """Scaled dot-product attention over ``(..., L, D)`` inputs.

    ``params``: ``w_q, w_k, w_v, w_o`` of shape ``(D, D)`` and matching
    biases ``b_q, b_k, b_v, b_o``. Heads split ``D`` into ``D // heads``.
    """
    q, k, v = as_tensor(q), as_tensor(k), as_tensor(v)
    dim = q.shape[-1]
    if heads < 1 or dim % heads:
        raise ValueError(f"model dimension {dim} is not divisible by {heads} heads")
    dh = dim // heads

    def split(t: Tensor) -> Tensor:
        t = reshape(t, t.shape[:-1] + (heads, dh))
        return swapaxes(t, -2, -3)  # (..., heads, L, dh)

    qh = split(linear(q, params["w_q"], params["b_q"]))
    kh = split(linear(k, params["w_k"], params["b_k"]))
    vh = split(linear(v, params["w_v"], params["b_v"]))
    scores = mul(matmul(qh, swapaxes(kh, -1, -2)), 1.0 / math.sqrt(dh))
    att = softmax(scores, axis=-1)
    ctx = swapaxes(matmul(att, vh), -2, -3)
    ctx = reshape(ctx, ctx.shape[:-2] + (dim,))
    return linear(ctx, params["w_o"], params["b_o"])


# ---------------------------------------------------------------- operator binding

def _bind() -> None:
    T = Tensor
    T.__add__ = lambda a, b: add(a, b)
    T.__radd__ = lambda a, b: add(b, a)
    T.__sub__ = lambda a, b: sub(a, b)
    T.__rsub__ = lambda a, b: sub(b, a)
    T.__mul__ = lambda a, b: mul(a, b)
    T.__rmul__ = lambda a, b: mul(b, a)
    T.__truediv__ = lambda a, b: div(a, b)
    T.__rtruediv__ = lambda a, b: div(b, a)
    T.__neg__ = lambda a: neg(a)
    T.__pow__ = lambda a, p: power(a, p)
    T.__matmul__ = lambda a, b: matmul(a, b)
    T.__getitem__ = lambda a, idx: getitem(a, idx)
    T.sum = lambda a, axis=None, keepdims=False: sum(a, axis, keepdims)
    T.mean = lambda a, axis=None, keepdims=False: mean(a, axis, keepdims)
    T.reshape = lambda a, *shape: reshape(a, shape[0] if len(shape) == 1 else shape)
    T.transpose = lambda a, axes=None: transpose(a, axes)
    T.T = property(lambda a: transpose(a))


_bind()
