"""SI-SDR, permutation-invariant training loss and improvement scores."""

from __future__ import annotations

import itertools
import math
import operator
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .numerics import Tensor, ops

CLAMP_DB = 120.0
_TINY = 1e-300


def _as_array(x) -> np.ndarray:
    if isinstance(x, Tensor):
        return x.data
    samples = getattr(x, "samples", None)
    return np.asarray(samples if samples is not None else x, dtype=np.float64)


def _exact_ints(x: np.ndarray) -> list[int]:
    """Integers proportional to ``x`` by one common power of two (exact)."""
    mant, expo = np.frexp(x)
    mant = (mant * 2.0 ** 53).astype(np.int64)
    expo = expo.astype(np.int64) - 53
    nz = mant != 0
    if not nz.any():
        return [0] * x.size
    base = int(expo[nz].min())
    shift = np.where(nz, expo - base, 0)
    return [m << s for m, s in zip(mant.tolist(), shift.tolist())]


def _centered(vals: list[int]) -> list[int]:
    # n * (x - mean(x)), kept in integers
    n = len(vals)
    total = sum(vals)
    return [n * v - total for v in vals]


def _dot(a: list[int], b: list[int]) -> int:
    return sum(map(operator.mul, a, b))


def si_sdr(est, ref) -> float:
    """Scale-invariant SDR in dB, clamped to +-120 dB.

    Both signals are zero-meaned. The energy ratio
    ``|<e,r>|^2 / (|e|^2 |r|^2 - <e,r>^2)`` is formed with exact integer
    arithmetic on the float inputs and reduced before the final logarithm, so
    ``si_sdr(a * est, ref) == si_sdr(est, ref)`` bit for bit whenever
    ``a * est`` is exactly representable.
    """
    e = _as_array(est).reshape(-1)
    r = _as_array(ref).reshape(-1)
    if e.shape != r.shape:
        raise ValueError(f"length mismatch: estimate {e.size} vs reference {r.size}")
    if not (np.isfinite(e).all() and np.isfinite(r).all()):
        raise ValueError("non-finite samples")
    ri = _centered(_exact_ints(r))
    rr = _dot(ri, ri)
    if rr == 0:
        raise ValueError("reference has zero energy after mean removal")
    ei = _centered(_exact_ints(e))
    er = _dot(ei, ri)
    ee = _dot(ei, ei)
    num = er * er
    den = ee * rr - num
    if num == 0:
        return -CLAMP_DB
    if den <= 0:
        return CLAMP_DB
    ratio = Fraction(num, den)
    if ratio > 10 ** (CLAMP_DB / 10):
        return CLAMP_DB
    if ratio < 10 ** (-CLAMP_DB / 10):
        return -CLAMP_DB
    return 10.0 * math.log10(float(ratio))


def si_sdr_tensor(est, ref) -> Tensor:
    """Differentiable SI-SDR over the last axis (float path, clamped).

    ``est`` is a tensor ``(..., L)``; ``ref`` is a constant broadcastable to it.
    """
    est = ops.as_tensor(est)
    ref = _as_array(ref)
    r = ref - ref.mean(axis=-1, keepdims=True)
    rr = np.sum(r * r, axis=-1, keepdims=True)
    if np.any(rr == 0):
        raise ValueError("reference has zero energy after mean removal")
    e = ops.sub(est, ops.mean(est, axis=-1, keepdims=True))
    alpha = ops.div(ops.sum(ops.mul(e, r), axis=-1, keepdims=True), rr)
    target = ops.mul(alpha, r)
    noise = ops.sub(target, e)
    t_energy = ops.sum(ops.mul(target, target), axis=-1)
    n_energy = ops.sum(ops.mul(noise, noise), axis=-1)
    ratio = ops.div(ops.add(t_energy, _TINY), ops.add(n_energy, _TINY))
    return ops.clip(ops.mul(ops.log10(ratio), 10.0), -CLAMP_DB, CLAMP_DB)


def _check_sets(est_shape, ref_shape) -> int:
    if est_shape[-2:] != ref_shape[-2:] or est_shape[:-2] != ref_shape[:-2]:
        raise ValueError(f"estimate set {est_shape} does not match reference set {ref_shape}")
    return est_shape[-2]


def _stack(clips) -> np.ndarray | Tensor:
    if isinstance(clips, (Tensor, np.ndarray)):
        return clips
    return np.stack([_as_array(c) for c in clips])


def upit_loss(est, ref):
    """Utterance-level PIT loss ``-(1/C) max_perm sum_c si_sdr(est[perm[c]], ref[c])``.

    ``est``: ``(C, L)`` or ``(M, C, L)`` (tensor, array or list of clips);
    ``ref`` likewise. Batched input averages over ``M``. Returns the scalar loss
    tensor and the chosen permutation (a list of permutations when batched).
    """
    est = ops.as_tensor(_stack(est))
    ref = _as_array(_stack(ref))
    c = _check_sets(est.shape, ref.shape)
    batched = est.ndim == 3
    if not batched:
        est = ops.reshape(est, (1,) + est.shape)
        ref = ref[None]
    # pair[m, i, j] = si_sdr(est_i, ref_j)
    pair = si_sdr_tensor(ops.reshape(est, (est.shape[0], c, 1, est.shape[-1])), ref[:, None, :, :])
    perms = list(itertools.permutations(range(c)))
    ref_idx = np.arange(c)
    totals = np.stack([pair.data[:, list(p), ref_idx].sum(axis=-1) for p in perms], axis=-1)
    best = totals.argmax(axis=-1)
    select = np.zeros(pair.shape)
    for m, b in enumerate(best):
        select[m, list(perms[b]), ref_idx] = 1.0
    per_item = ops.sum(ops.mul(pair, select), axis=(1, 2))
    loss = ops.mul(ops.mean(per_item), -1.0 / c)
    chosen = [perms[b] for b in best]
    return loss, (chosen if batched else chosen[0])


def best_permutation(est, ref) -> tuple[tuple[int, ...], list[float]]:
    """Exhaustive search with the exact metric; returns (perm, per-speaker dB)."""
    est = _as_array(_stack(est))
    ref = _as_array(_stack(ref))
    c = _check_sets(est.shape, ref.shape)
    table = [[si_sdr(est[i], ref[j]) for j in range(c)] for i in range(c)]
    best_perm, best_total = None, -math.inf
    for perm in itertools.permutations(range(c)):
        total = math.fsum(table[perm[j]][j] for j in range(c))
        if total > best_total:
            best_perm, best_total = perm, total
    return best_perm, [table[best_perm[j]][j] for j in range(c)]


@dataclass
class SeparationScore:
    si_sdr_db: list[float]
    permutation: tuple[int, ...]
    mean_si_sdr_db: float
    delta_si_sdr_db: float | None = None


def score_separation(est, ref, mix=None) -> SeparationScore:
    perm, per = best_permutation(est, ref)
    mean = math.fsum(per) / len(per)
    delta = None
    if mix is not None:
        m = _as_array(mix)
        refs = _as_array(_stack(ref))
        base = math.fsum(si_sdr(m, r) for r in refs) / len(refs)
        delta = mean - base
    return SeparationScore(per, perm, mean, delta)


def delta_si_sdr(est, ref, mix) -> float:
    """Best-permutation mean SI-SDR minus the mixture's mean SI-SDR."""
    return score_separation(est, ref, mix).delta_si_sdr_db


def rms(x) -> float:
    x = _as_array(x)
    return float(np.sqrt(np.mean(x * x)))


def rms_ratio(far, direct) -> float:
    """RMS(far) / RMS(direct), the scalar the RMS-SDR helpers expect."""
    d = rms(direct)
    if d == 0:
        raise ValueError("direct signal has zero RMS")
    return rms(far) / d


def rms_sdr(ratio: float) -> float:
    """Linear SDR from an RMS ratio: ``1 / (ratio - 1)``."""
    if ratio == 1:
        raise ValueError("RMS ratio of exactly 1 is a pole of the RMS SDR")
    return 1.0 / (ratio - 1.0)


def rms_sdr_db(ratio: float) -> float:
    """``20 log10(1 / (ratio - 1))``; defined for ratios above 1."""
    lin = rms_sdr(ratio)
    if lin <= 0:
        raise ValueError(f"RMS SDR is non-positive for ratio {ratio}; no dB value")
    return 20.0 * math.log10(lin)


__all__ = [
    "CLAMP_DB",
    "SeparationScore",
    "best_permutation",
    "delta_si_sdr",
    "rms",
    "rms_ratio",
    "rms_sdr",
    "rms_sdr_db",
    "score_separation",
    "si_sdr",
    "si_sdr_tensor",
    "upit_loss",
]
