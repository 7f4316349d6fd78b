"""Synthetic source material: speech-like utterances, noise, band-limited sources.

Utterances are sequences of voiced "words" (harmonic complexes with a
speaker-specific pitch and a resonance filter) separated by short pauses.
They only need to look like speech to the mixing pipeline: variable length,
silences, speaker-dependent spectra and a word count.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal as sps

from .audio import AudioClip


@dataclass(frozen=True)
class SpeakerInfo:
    speaker_id: str
    gender: str = ""
    dialect: str = ""
    age: str = ""


@dataclass(frozen=True, eq=False)
class Utterance:
    utt_id: str
    speaker: SpeakerInfo
    words: int | None
    clip: AudioClip


@dataclass(frozen=True)
class VoiceProfile:
    f0_hz: float
    formants_hz: tuple[float, ...]


_DIALECTS = ("north", "south", "east", "west")


def synth_speakers(n: int, rng: np.random.Generator, prefix: str = "spk") -> list[tuple[SpeakerInfo, VoiceProfile]]:
    out = []
    for i in range(n):
        gender = "f" if rng.random() < 0.5 else "m"
        f0 = rng.uniform(170, 260) if gender == "f" else rng.uniform(85, 150)
        formants = tuple(sorted(rng.uniform(lo, hi) for lo, hi in ((300, 900), (900, 2300), (2300, 3400))))
        info = SpeakerInfo(f"{prefix}{i:03d}", gender, _DIALECTS[int(rng.integers(len(_DIALECTS)))], str(int(rng.integers(18, 70))))
        out.append((info, VoiceProfile(f0, formants)))
    return out


def _resonator(formants, fs: int):
    # cascade of 2nd-order peaking sections
    sos = []
    for f in formants:
        b, a = sps.iirpeak(f, Q=4.0, fs=fs)
        sos.append(np.concatenate([b, a]))
    return np.array(sos)


def synth_word(profile: VoiceProfile, duration_s: float, rng: np.random.Generator, fs: int) -> np.ndarray:
    n = max(8, int(duration_s * fs))
    t = np.arange(n) / fs
    # slow pitch contour around the speaker's f0
    f0 = profile.f0_hz * (1.0 + 0.08 * np.sin(2 * np.pi * rng.uniform(2, 5) * t + rng.uniform(0, 2 * np.pi)))
    phase = 2 * np.pi * np.cumsum(f0) / fs
    x = np.zeros(n)
    for k in range(1, int((fs / 2) // profile.f0_hz)):
        x += np.sin(k * phase) / k
    x += 0.05 * rng.standard_normal(n)
    x = sps.sosfilt(_resonator(profile.formants_hz, fs), x)
    env = np.sin(np.pi * np.arange(n) / n) ** 0.5
    return x * env


def synth_utterance(
    profile: VoiceProfile,
    n_words: int,
    rng: np.random.Generator,
    fs: int = 8000,
    word_duration_s: float = 0.25,
) -> AudioClip:
    parts = [np.zeros(int(rng.uniform(0.02, 0.1) * fs) + 1)]
    for _ in range(n_words):
        parts.append(synth_word(profile, word_duration_s * rng.uniform(0.6, 1.6), rng, fs))
        parts.append(np.zeros(int(word_duration_s * rng.uniform(0.1, 0.5) * fs) + 1))
    x = np.concatenate(parts)
    x *= 0.1 / np.sqrt(np.mean(x * x))
    return AudioClip(x, fs)


def synth_noise(n_samples: int, rng: np.random.Generator, fs: int = 8000) -> AudioClip:
    """Low-pass tilted noise with slow level fluctuations."""
    white = rng.standard_normal(n_samples + 512)
    b, a = sps.butter(1, 800, fs=fs)
    tilted = sps.lfilter(b, a, white)[512:] + 0.3 * white[512:]
    t = np.arange(n_samples) / fs
    level = 1.0 + 0.3 * np.sin(2 * np.pi * rng.uniform(0.2, 1.0) * t + rng.uniform(0, 2 * np.pi))
    x = tilted * level
    return AudioClip(0.05 * x / np.sqrt(np.mean(x * x)), fs)


def band_noise(n_samples: int, band_hz: tuple[float, float], rng: np.random.Generator, fs: int = 8000) -> AudioClip:
    """White noise band-passed to ``band_hz`` (edges may be 0 or Nyquist)."""
    lo, hi = band_hz
    nyq = fs / 2
    white = rng.standard_normal(n_samples + 1024)
    if lo <= 0:
        sos = sps.butter(8, hi, btype="lowpass", fs=fs, output="sos")
    elif hi >= nyq:
        sos = sps.butter(8, lo, btype="highpass", fs=fs, output="sos")
    else:
        sos = sps.butter(8, (lo, hi), btype="bandpass", fs=fs, output="sos")
    x = sps.sosfilt(sos, white)[1024:]
    return AudioClip(0.1 * x / np.sqrt(np.mean(x * x)), fs)
