"""Per-signal operations of the mixture model: reverberation, gains, alignment."""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np
from scipy import signal as sps

from .audio import AudioClip, Rir

# amplitude decay rate that gives -60 dB of energy after rt60 seconds
_LN_1E3 = math.log(1000.0)


def apply_rir(s: AudioClip, h: Rir) -> AudioClip:
    """Convolve ``s`` with ``h``; the output keeps the length of ``s``."""
    if s.sample_rate_hz != h.sample_rate_hz:
        raise ValueError(f"sample-rate mismatch: clip {s.sample_rate_hz} Hz vs RIR {h.sample_rate_hz} Hz")
    n = len(s)
    taps = h.taps[:n]
    out = sps.oaconvolve(s.samples, taps) if taps.size > 64 else np.convolve(s.samples, taps)
    return s.with_samples(out[:n])


def decay_envelope(n: int, rt60_s: float, sample_rate_hz: int) -> np.ndarray:
    t = np.arange(n) / sample_rate_hz
    return np.exp(-_LN_1E3 * t / rt60_s)


def synth_rir(rt60_s: float, length_s: float, seed, sample_rate_hz: int = 8000, tail_energy: float = 0.5) -> Rir:
    """Exponentially decaying white-noise RIR with a unit direct-path tap.

    The amplitude envelope falls by 60 dB of energy every ``rt60_s`` seconds.
    The tail (taps after the first) is scaled to total energy ``tail_energy``.
    ``rt60_s <= 0`` yields a unit impulse.
    """
    if length_s <= 0:
        raise ValueError("RIR length must be positive")
    n = max(1, int(round(length_s * sample_rate_hz)))
    taps = np.zeros(n)
    if rt60_s > 0 and n > 1:
        rng = np.random.default_rng(seed)
        tail = rng.standard_normal(n) * decay_envelope(n, rt60_s, sample_rate_hz)
        tail[0] = 0.0
        energy = float(np.sum(tail * tail))
        if energy > 0:
            taps = tail * math.sqrt(tail_energy / energy)
    taps[0] = 1.0
    return Rir(taps, sample_rate_hz)


def _nonzero_power(clip: AudioClip, name: str) -> float:
    p = clip.power()
    if p == 0:
        raise ValueError(f"{name} has zero power")
    return p


def gain_for_ssr(s1: AudioClip, s2: AudioClip, ssr_db: float) -> float:
    """Gain for ``s2`` such that ``10 log10(P(s1) / P(g s2)) == ssr_db``."""
    p1 = _nonzero_power(s1, "first source")
    p2 = _nonzero_power(s2, "second source")
    return 10.0 ** (-ssr_db / 20.0) * math.sqrt(p1 / p2)


def measured_ssr_db(s1: AudioClip, s2: AudioClip) -> float:
    return 10.0 * math.log10(s1.power() / s2.power())


def noise_gain_for_snr(scaled_sources: Sequence[AudioClip], noise: AudioClip, snr_db: float) -> float:
    """Noise gain that puts the loudest scaled source ``snr_db`` above the noise.

    Powers are measured over the mixture length (the shortest source).
    """
    length = min(len(s) for s in scaled_sources)
    if len(noise) < length:
        raise ValueError(f"noise ({len(noise)} samples) is shorter than the mixture ({length} samples)")
    loudest = max(float(np.mean(s.samples[:length] ** 2)) for s in scaled_sources)
    seg = noise.samples[:length]
    pn = float(np.mean(seg * seg))
    if pn == 0:
        raise ValueError("noise has zero power")
    return math.sqrt(loudest / (pn * 10.0 ** (snr_db / 10.0)))


def sum_sources(scaled_sources: Sequence[AudioClip]) -> np.ndarray:
    length = min(len(s) for s in scaled_sources)
    acc = scaled_sources[0].samples[:length].copy()
    for s in scaled_sources[1:]:
        acc = acc + s.samples[:length]
    return acc


def add_noise_at_snr(mix_sources: Sequence[AudioClip], noise: AudioClip, snr_db: float) -> AudioClip:
    """Sum the scaled sources and add noise at ``snr_db`` vs the loudest one.

    ``snr_db = +inf`` disables the noise.
    """
    if not mix_sources:
        raise ValueError("need at least one source")
    x = sum_sources(mix_sources)
    if math.isinf(snr_db) and snr_db > 0:
        return mix_sources[0].with_samples(x)
    g = noise_gain_for_snr(mix_sources, noise, snr_db)
    return mix_sources[0].with_samples(x + g * noise.samples[: x.size])


def align_by_xcorr(far: AudioClip, direct: AudioClip) -> int:
    """Lag of ``far`` relative to ``direct`` at the cross-correlation peak.

    A copy of ``direct`` delayed by ``d`` samples yields ``d``; shifting
    ``far`` earlier by the result aligns it with ``direct``.
    """
    if not np.any(far.samples) or not np.any(direct.samples):
        raise ValueError("cannot align an all-zero signal")
    xc = sps.correlate(far.samples, direct.samples, mode="full", method="auto")
    lags = sps.correlation_lags(len(far), len(direct), mode="full")
    return int(lags[int(np.argmax(xc))])


def shift(clip: AudioClip, delay: int) -> AudioClip:
    """Delay by ``delay`` samples (negative advances); length kept, zero-filled."""
    x = clip.samples
    out = np.zeros_like(x)
    if delay >= 0:
        if delay < x.size:
            out[delay:] = x[: x.size - delay]
    elif -delay < x.size:
        out[: x.size + delay] = x[-delay:]
    return clip.with_samples(out)


def filter_short_utterances(records: Sequence, word_counts: Sequence[int], min_words: int = 5) -> list:
    """Keep records whose word count is at least ``min_words``."""
    if len(records) != len(word_counts):
        raise ValueError("records and word_counts differ in length")
    return [r for r, n in zip(records, word_counts) if n >= min_words]
