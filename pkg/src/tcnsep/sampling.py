"""Training-signal-length limiting, start-index strategies, batch splitting,
and corpus length statistics."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np
from scipy import special

from .mixsim.audio import AudioClip
from .mixsim.corpus import CorpusConfig, MixtureExample, SourcePool, dynamic_mix

_TSL_GRID_S = (0.5, 0.66, 0.86, 1.13, 1.49, 1.95, 2.56, 3.36, 4.42, 5.8, 7.62, 10.0)
BANDWIDTH_FLOOR_S = 0.01
DENSITY_POINTS = 256
START_MODES = ("random", "fixed")


def tsl_grid() -> list[float]:
    """The twelve training-signal-length limits in seconds, ascending."""
    return list(_TSL_GRID_S)


@dataclass(frozen=True)
class SamplerConfig:
    t_lim_s: float | None = None
    start_mode: str = "random"
    start_sample: int = 1999
    split_factor: int = 1  # D
    dynamic_mixing: bool = False
    seed: int = 0
    batch_size: int = 4  # M, clips per batch before splitting
    sample_rate_hz: int = 8000

    def __post_init__(self):
        if self.t_lim_s is not None and not (math.isfinite(self.t_lim_s) and self.t_lim_s > 0):
            raise ValueError(f"t_lim_s must be positive, got {self.t_lim_s}")
        if self.start_mode not in START_MODES:
            raise ValueError(f"start_mode must be one of {START_MODES}, got {self.start_mode!r}")
        if self.start_sample < 0:
            raise ValueError(f"start_sample must be non-negative, got {self.start_sample}")
        if self.split_factor < 1:
            raise ValueError(f"split_factor must be >= 1, got {self.split_factor}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.sample_rate_hz < 1:
            raise ValueError("sample_rate_hz must be positive")

    @property
    def l_lim(self) -> int | None:
        """Length limit in samples."""
        if self.t_lim_s is None:
            return None
        return max(1, int(round(self.t_lim_s * self.sample_rate_hz)))


# --- cropping --------------------------------------------------------------

def random_window(length: int, l_lim: int | None, rng: np.random.Generator) -> tuple[int, int]:
    """``[start, stop)`` with start uniform on ``{0, ..., max(0, length - l_lim)}``."""
    if l_lim is None or length <= l_lim:
        return 0, length
    start = int(rng.integers(0, length - l_lim + 1))
    return start, start + l_lim


def fixed_window(length: int, l_lim: int | None, start: int = 1999) -> tuple[int, int]:
    """Window from ``start`` when the signal exceeds the limit, else the whole signal."""
    if l_lim is None or length <= l_lim:
        return 0, length
    if start > length - 1:
        raise ValueError(f"start sample {start} lies beyond the last sample {length - 1}")
    return start, start + min(l_lim, length - start)


def _check_limit(l_lim: int | None) -> None:
    if l_lim is not None and l_lim < 1:
        raise ValueError(f"length limit must be >= 1 sample, got {l_lim}")


def crop_random(x: AudioClip, l_lim: int | None, rng: np.random.Generator) -> AudioClip:
    _check_limit(l_lim)
    start, stop = random_window(len(x), l_lim, rng)
    return x.with_samples(x.samples[start:stop])


def crop_fixed(x: AudioClip, l_lim: int | None, start: int = 1999) -> AudioClip:
    _check_limit(l_lim)
    a, b = fixed_window(len(x), l_lim, start)
    return x.with_samples(x.samples[a:b])


def split_batch(batch: np.ndarray, d: int) -> np.ndarray:
    """``(M, ..., L) -> (M*D, ..., L // D)``; segments of one clip stay adjacent.

    The trailing ``L mod D`` samples are dropped.
    """
    if d < 1:
        raise ValueError(f"split factor must be >= 1, got {d}")
    batch = np.asarray(batch)
    seg = batch.shape[-1] // d
    if seg == 0:
        raise ValueError(f"cannot split {batch.shape[-1]} samples into {d} segments")
    kept = batch[..., : seg * d]
    parts = kept.reshape(batch.shape[:-1] + (d, seg))
    # move the segment axis next to the clip axis
    parts = np.moveaxis(parts, -2, 1)
    return parts.reshape((batch.shape[0] * d,) + batch.shape[1:-1] + (seg,))


# --- length statistics -----------------------------------------------------

@dataclass(frozen=True)
class LengthStats:
    n: int
    mean_s: float
    std_s: float
    quartile_edges_s: tuple[float, float, float, float, float]
    quartile_counts: tuple[int, int, int, int]
    bandwidth_s: float
    grid_s: np.ndarray
    density: np.ndarray

    def summary(self) -> str:
        edges = ", ".join(f"{e:.3f}" for e in self.quartile_edges_s)
        counts = ", ".join(str(c) for c in self.quartile_counts)
        return (
            f"signals: {self.n}\n"
            f"mean: {self.mean_s:.4f} s\n"
            f"std: {self.std_s:.4f} s\n"
            f"quartile edges: {edges} s\n"
            f"quartile counts: {counts}\n"
            f"kde bandwidth: {self.bandwidth_s:.4f} s\n"
        )

    def summary_csv(self) -> str:
        rows = ["statistic,value", f"n,{self.n}", f"mean_s,{self.mean_s!r}", f"std_s,{self.std_s!r}",
                f"bandwidth_s,{self.bandwidth_s!r}"]
        rows += [f"q_edge{k}_s,{e!r}" for k, e in enumerate(self.quartile_edges_s)]
        rows += [f"q{k + 1}_count,{c}" for k, c in enumerate(self.quartile_counts)]
        return "\n".join(rows) + "\n"

    def density_csv(self) -> str:
        rows = ["grid,density"]
        rows += [f"{g!r},{d!r}" for g, d in zip(self.grid_s.tolist(), self.density.tolist())]
        return "\n".join(rows) + "\n"


def durations_s(corpus, sample_rate_hz: int | None = None) -> np.ndarray:
    """Signal durations for examples, clips, or plain sample counts."""
    out = []
    for item in corpus:
        if isinstance(item, MixtureExample):
            out.append(item.duration_s)
        elif isinstance(item, AudioClip):
            out.append(item.duration_s)
        else:
            if sample_rate_hz is None:
                raise ValueError("sample counts need a sample rate")
            out.append(int(item) / sample_rate_hz)
    return np.asarray(out, dtype=np.float64)


def quartile_partition(lengths: Sequence[float]) -> list[np.ndarray]:
    """Indices of the four length quartiles, sizes equal to within one.

    Ties are broken by position so the partition is deterministic.
    """
    lengths = np.asarray(lengths, dtype=np.float64)
    if lengths.size < 4:
        raise ValueError(f"need at least 4 signals for quartiles, got {lengths.size}")
    order = np.argsort(lengths, kind="stable")
    return np.array_split(order, 4)


def silverman_bandwidth(x: np.ndarray) -> float:
    n = x.size
    std = float(np.std(x, ddof=1)) if n > 1 else 0.0
    iqr = float(np.subtract(*np.percentile(x, [75, 25])))
    spread = min(std, iqr / 1.34) if iqr > 0 else std
    return max(0.9 * spread * n ** -0.2, BANDWIDTH_FLOOR_S)


def length_stats(corpus, sample_rate_hz: int | None = None) -> LengthStats:
    """Mean, std, length quartiles and a Gaussian kernel density of signal durations."""
    x = durations_s(corpus, sample_rate_hz)
    if x.size == 0:
        raise ValueError("empty corpus")
    bw = silverman_bandwidth(x)
    grid = np.linspace(x.min() - 5 * bw, x.max() + 5 * bw, DENSITY_POINTS)
    # cell averages of the kernel density: exact mass per grid cell, so the
    # integral stays 1 even when the bandwidth is far below the grid spacing.
    # End cells are half width to match the trapezoid weights.
    cuts = np.concatenate([grid[:1], (grid[:-1] + grid[1:]) / 2, grid[-1:]])
    cdf = special.ndtr((cuts[:, None] - x[None, :]) / bw).mean(axis=1)
    density = np.diff(cdf) / np.diff(cuts)
    if x.size >= 4:
        parts = quartile_partition(x)
        counts = tuple(len(p) for p in parts)
        srt = np.sort(x)
        bounds = np.cumsum(counts)[:-1]
        # each inner edge is the first length of the next quartile
        edges = (float(srt[0]), *(float(srt[b]) for b in bounds), float(srt[-1]))
    else:
        counts = (x.size, 0, 0, 0)
        edges = (float(x.min()),) * 4 + (float(x.max()),)
    return LengthStats(
        n=int(x.size),
        mean_s=float(np.mean(x)),
        std_s=float(np.std(x)),
        quartile_edges_s=edges,
        quartile_counts=counts,
        bandwidth_s=bw,
        grid_s=grid,
        density=density,
    )


def quartile_eval(scores: Sequence[float], lengths: Sequence[float]) -> list[float]:
    """Mean score within each length quartile, shortest quartile first."""
    scores = np.asarray(scores, dtype=np.float64)
    lengths = np.asarray(lengths, dtype=np.float64)
    if scores.shape != lengths.shape:
        raise ValueError("scores and lengths differ in shape")
    return [math.fsum(scores[idx]) / len(idx) for idx in quartile_partition(lengths)]


# --- batches ---------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Batch:
    """Aligned training windows.

    ``mixture`` is ``(M*D, L)``; ``refs`` and ``components`` are
    ``(M*D, C, L)``; ``noise`` is ``(M*D, L)`` or ``None``. ``ids`` names the
    mixture each row was cut from and ``windows`` the ``[start, stop)`` crop
    in that mixture before splitting.
    """

    ids: tuple[str, ...]
    windows: tuple[tuple[int, int], ...]
    mixture: np.ndarray
    refs: np.ndarray
    components: np.ndarray
    noise: np.ndarray | None

    @property
    def samples(self) -> int:
        return int(self.mixture.size)


def epoch_order(n: int, seed: int, epoch: int) -> np.ndarray:
    return np.random.default_rng([seed, 7, epoch]).permutation(n)


def _window(config: SamplerConfig, length: int, epoch: int, index: int) -> tuple[int, int]:
    if config.start_mode == "fixed":
        return fixed_window(length, config.l_lim, config.start_sample)
    rng = np.random.default_rng([config.seed, 9, epoch, index])
    return random_window(length, config.l_lim, rng)


def epoch_corpus(
    corpus: Sequence[MixtureExample],
    config: SamplerConfig,
    epoch: int,
    pool: SourcePool | None = None,
    corpus_config: CorpusConfig | None = None,
) -> Sequence[MixtureExample]:
    """The mixtures used in one epoch: ``corpus`` itself, or a fresh dynamic mix."""
    if not config.dynamic_mixing:
        return corpus
    if pool is None or corpus_config is None:
        raise ValueError("dynamic mixing needs a source pool and a corpus config")
    return dynamic_mix(pool, corpus_config, config.seed, epoch, n_mixtures=len(corpus) or None)


def make_batches(
    corpus: Sequence[MixtureExample],
    config: SamplerConfig,
    epoch: int,
    pool: SourcePool | None = None,
    corpus_config: CorpusConfig | None = None,
) -> Iterator[Batch]:
    """Shuffle, crop once per (clip, epoch), batch M clips, split each by D.

    Clips in one batch are cut to the shortest window in that batch, so the
    batch is rectangular. The trailing partial batch is kept.
    """
    examples = epoch_corpus(corpus, config, epoch, pool, corpus_config)
    order = epoch_order(len(examples), config.seed, epoch)
    m = config.batch_size
    for lo in range(0, len(order), m):
        chosen = [int(i) for i in order[lo : lo + m]]
        items = [examples[i] for i in chosen]
        wins = [_window(config, len(ex), epoch, i) for ex, i in zip(items, chosen)]
        width = min(b - a for a, b in wins)
        wins = [(a, a + width) for a, _ in wins]
        mix = np.stack([ex.mixture[a:b] for ex, (a, b) in zip(items, wins)])
        refs = np.stack([ex.refs[:, a:b] for ex, (a, b) in zip(items, wins)])
        comps = np.stack([ex.components[:, a:b] for ex, (a, b) in zip(items, wins)])
        noise = None
        if all(ex.noise is not None for ex in items):
            noise = np.stack([ex.noise[a:b] for ex, (a, b) in zip(items, wins)])
        d = config.split_factor
        if d > 1:
            mix, refs, comps = split_batch(mix, d), split_batch(refs, d), split_batch(comps, d)
            noise = None if noise is None else split_batch(noise, d)
        ids = tuple(ex.example_id for ex in items for _ in range(d))
        yield Batch(ids, tuple(w for w in wins for _ in range(d)), mix, refs, comps, noise)


def epoch_samples(
    corpus: Sequence[MixtureExample],
    config: SamplerConfig,
    epoch: int,
    pool: SourcePool | None = None,
    corpus_config: CorpusConfig | None = None,
) -> int:
    """Mixture samples emitted in one epoch."""
    return sum(b.samples for b in make_batches(corpus, config, epoch, pool, corpus_config))
