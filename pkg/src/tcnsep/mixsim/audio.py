"""Audio clip containers and mono WAV I/O."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.io import wavfile

DEFAULT_RATE = 8000


@dataclass(frozen=True, eq=False)
class AudioClip:
    """Mono float64 samples at a fixed sample rate."""

    samples: np.ndarray
    sample_rate_hz: int = DEFAULT_RATE

    def __post_init__(self):
        arr = np.array(self.samples, dtype=np.float64)
        if arr.ndim != 1:
            raise ValueError(f"audio clip must be mono (1-D), got shape {arr.shape}")
        if arr.size == 0:
            raise ValueError("audio clip is empty")
        if not np.isfinite(arr).all():
            raise ValueError("audio clip contains non-finite samples")
        if int(self.sample_rate_hz) <= 0:
            raise ValueError("sample rate must be positive")
        arr.flags.writeable = False
        object.__setattr__(self, "samples", arr)
        object.__setattr__(self, "sample_rate_hz", int(self.sample_rate_hz))

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate_hz

    def with_samples(self, samples: np.ndarray) -> "AudioClip":
        return AudioClip(samples, self.sample_rate_hz)

    def power(self) -> float:
        return float(np.mean(self.samples * self.samples))


@dataclass(frozen=True, eq=False)
class Rir:
    """Room impulse response taps."""

    taps: np.ndarray
    sample_rate_hz: int = DEFAULT_RATE

    def __post_init__(self):
        arr = np.array(self.taps, dtype=np.float64)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("RIR taps must be a non-empty 1-D array")
        if not np.isfinite(arr).all():
            raise ValueError("RIR contains non-finite taps")
        if not np.any(arr != 0):
            raise ValueError("RIR needs at least one nonzero tap")
        arr.flags.writeable = False
        object.__setattr__(self, "taps", arr)


class WavFormatError(ValueError):
    pass


def read_wav(path: str | Path) -> AudioClip:
    """Read a mono PCM16 or IEEE float32 RIFF/WAVE file."""
    try:
        rate, data = wavfile.read(str(path))
    except ValueError as exc:
        raise WavFormatError(f"{path}: {exc}") from exc
    if data.ndim != 1:
        raise WavFormatError(f"{path}: multichannel audio ({data.shape[1]} channels) is not supported")
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype == np.float32:
        samples = data.astype(np.float64)
    else:
        raise WavFormatError(f"{path}: unsupported sample format {data.dtype}")
    return AudioClip(samples, rate)


def write_wav(path: str | Path, clip: AudioClip, fmt: str = "float32") -> None:
    """Write ``clip`` as float32 (default) or PCM16 (clipped to [-1, 1))."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "float32":
        data = clip.samples.astype(np.float32)
    elif fmt == "pcm16":
        data = np.clip(np.round(clip.samples * 32768.0), -32768, 32767).astype(np.int16)
    else:
        raise ValueError(f"unknown WAV format {fmt!r}")
    wavfile.write(str(path), clip.sample_rate_hz, data)
