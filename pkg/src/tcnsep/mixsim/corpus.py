"""Mixture composition, metadata CSV, corpus generation and dynamic mixing.

Composition of one mixture (min mode)::

    r_c   = s_c * h_c              (optional reverberation, length of s_c)
    L     = min_c (len(r_c) - start_c)
    seg_c = r_c[start_c : start_c + L]
    g_1   = 1, g_c = gain so that P(seg_1) / P(g_c seg_c) hits the SSR
    x     = sum_c g_c seg_c + g_n noise[0 : L]

The CSV row of a mixture holds every number above, so ``render_record``
rebuilds ``x`` bit for bit from the row and the stored source files.
"""

from __future__ import annotations

import csv
import hashlib
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .audio import AudioClip, Rir, read_wav, write_wav
from .signal import align_by_xcorr, apply_rir, filter_short_utterances, gain_for_ssr, noise_gain_for_snr, shift, synth_rir
from .synthetic import SpeakerInfo, Utterance, band_noise, synth_noise, synth_speakers, synth_utterance

CSV_COLUMNS = (
    "mixture_id", "s1_path", "s2_path", "noise_path", "ssr_db", "snr_db",
    "g1", "g2", "g_noise", "s1_start", "s2_start", "length_samples",
    "s1_speaker", "s2_speaker", "s1_gender", "s2_gender",
    "s1_dialect", "s2_dialect", "s1_age", "s2_age",
)
SPLITS = ("train", "dev", "test")
FAR_DIR = "sources/far"
DIRECT_DIR = "sources/dir"


@dataclass(frozen=True)
class MixtureRecord:
    mixture_id: str
    source_paths: tuple[str, ...]
    noise_path: str | None
    ssr_db: float
    snr_db: float | None
    gains: tuple[float, ...]
    g_noise: float | None
    starts: tuple[int, ...]
    length_samples: int
    speakers: tuple[SpeakerInfo | None, ...] = ()

    def __post_init__(self):
        if len(self.gains) != len(self.source_paths) or len(self.starts) != len(self.source_paths):
            raise ValueError("gains, starts and source paths must have one entry per source")
        if not all(math.isfinite(g) and g > 0 for g in self.gains):
            raise ValueError(f"gains must be finite and positive: {self.gains}")
        if any(s < 0 for s in self.starts):
            raise ValueError(f"start offsets must be non-negative: {self.starts}")
        if self.length_samples <= 0:
            raise ValueError("mixture length must be positive")
        if self.g_noise is not None and not (math.isfinite(self.g_noise) and self.g_noise >= 0):
            raise ValueError("noise gain must be finite and non-negative")
        if self.speakers and len(self.speakers) != len(self.source_paths):
            raise ValueError("speaker metadata must have one entry per source")

    @property
    def split(self) -> str:
        return self.mixture_id.split("-", 1)[0]


@dataclass(frozen=True, eq=False)
class MixtureExample:
    """One rendered mixture with its training targets.

    ``components`` are the scaled source contributions that were summed into
    ``mixture``; ``refs`` are the targets (equal to ``components`` unless
    separate direct-path signals exist). Arrays are ``(C, L)``.
    """

    example_id: str
    mixture: np.ndarray
    refs: np.ndarray
    components: np.ndarray
    noise: np.ndarray | None
    sample_rate_hz: int = 8000

    def __len__(self) -> int:
        return self.mixture.size

    @property
    def duration_s(self) -> float:
        return self.mixture.size / self.sample_rate_hz


def compose(segments: Sequence[np.ndarray], gains: Sequence[float], noise_seg: np.ndarray | None, g_noise: float | None):
    """Return ``(x, scaled components, scaled noise)`` in the canonical summation order."""
    scaled = [g * s for g, s in zip(gains, segments)]
    x = scaled[0].copy()
    for s in scaled[1:]:
        x = x + s
    noise = None
    if noise_seg is not None and g_noise is not None:
        noise = g_noise * noise_seg
        x = x + noise
    return x, scaled, noise


def _reverberate(sources, rirs):
    if rirs is None:
        return list(sources)
    if len(rirs) != len(sources):
        raise ValueError("need one RIR (or None) per source")
    return [s if h is None else apply_rir(s, h) for s, h in zip(sources, rirs)]


def make_mixture(
    sources: Sequence[AudioClip],
    ssr_db: float | Sequence[float],
    rirs: Sequence[Rir | None] | None = None,
    noise: AudioClip | None = None,
    snr_db: float | None = None,
    starts: Sequence[int] | None = None,
    directs: Sequence[AudioClip | None] | None = None,
    mode: str = "min",
    mixture_id: str = "mixture",
    source_paths: Sequence[str] | None = None,
    noise_path: str | None = None,
    speakers: Sequence[SpeakerInfo | None] = (),
) -> tuple[AudioClip, list[AudioClip], MixtureRecord]:
    """Mix ``sources`` at the requested SSR (and SNR), truncated to the shortest.

    ``ssr_db`` relates source 1 to every other source (a scalar, or one value
    per source after the first). ``directs`` supply direct-path targets; when
    absent the targets are the scaled dry sources. ``snr_db=None`` or ``+inf``
    disables the noise.
    """
    if mode != "min":
        raise ValueError(f"only min mode is supported, got {mode!r}")
    c = len(sources)
    if c < 2:
        raise ValueError("need at least two sources")
    rate = sources[0].sample_rate_hz
    if any(s.sample_rate_hz != rate for s in sources) or (noise is not None and noise.sample_rate_hz != rate):
        raise ValueError("all clips must share one sample rate")
    ssrs = [float(ssr_db)] * (c - 1) if np.isscalar(ssr_db) else [float(v) for v in ssr_db]
    if len(ssrs) != c - 1:
        raise ValueError("need one SSR per source after the first")
    starts = [0] * c if starts is None else [int(s) for s in starts]
    if len(starts) != c:
        raise ValueError("need one start offset per source")
    reverbed = _reverberate(sources, rirs)
    for s, st in zip(reverbed, starts):
        if st < 0 or st >= len(s):
            raise ValueError(f"start offset {st} outside source of length {len(s)}")
    length = min(len(s) - st for s, st in zip(reverbed, starts))
    segs = [s.samples[st : st + length] for s, st in zip(reverbed, starts)]
    seg_clips = [AudioClip(s, rate) for s in segs]
    gains = [1.0] + [gain_for_ssr(seg_clips[0], seg_clips[k], ssrs[k - 1]) for k in range(1, c)]
    use_noise = noise is not None and snr_db is not None and not (math.isinf(snr_db) and snr_db > 0)
    g_noise = None
    if use_noise:
        scaled = [AudioClip(g * s, rate) for g, s in zip(gains, segs)]
        g_noise = noise_gain_for_snr(scaled, noise, snr_db)
    paths = tuple(source_paths) if source_paths is not None else tuple(f"source{k + 1}" for k in range(c))
    record = MixtureRecord(
        mixture_id=mixture_id,
        source_paths=paths,
        noise_path=(noise_path if use_noise else None),
        ssr_db=ssrs[0],
        snr_db=(float(snr_db) if use_noise else None),
        gains=tuple(gains),
        g_noise=g_noise,
        starts=tuple(starts),
        length_samples=length,
        speakers=tuple(speakers),
    )
    targets = [d if d is not None else s for d, s in zip(directs or [None] * c, sources)]
    ex = render_record(record, reverbed, noise if use_noise else None, targets)
    return AudioClip(ex.mixture, rate), [AudioClip(r, rate) for r in ex.refs], record


def render_record(
    record: MixtureRecord,
    sources: Sequence[AudioClip],
    noise: AudioClip | None = None,
    targets: Sequence[AudioClip | None] | None = None,
) -> MixtureExample:
    """Rebuild a mixture from its record and the (already reverberant) sources."""
    length = record.length_samples
    segs = []
    for s, st in zip(sources, record.starts):
        seg = s.samples[st : st + length]
        if seg.size != length:
            raise ValueError(f"{record.mixture_id}: source too short for the recorded length")
        segs.append(seg)
    noise_seg = None
    if record.g_noise is not None:
        if noise is None:
            raise ValueError(f"{record.mixture_id}: record needs a noise signal")
        if len(noise) < length:
            raise ValueError(f"{record.mixture_id}: noise shorter than the mixture")
        noise_seg = noise.samples[:length]
    x, scaled, scaled_noise = compose(segs, record.gains, noise_seg, record.g_noise)
    refs = []
    for k, g in enumerate(record.gains):
        tgt = targets[k] if targets is not None and targets[k] is not None else None
        if tgt is None:
            refs.append(scaled[k])
        else:
            seg = tgt.samples[record.starts[k] : record.starts[k] + length]
            if seg.size != length:
                raise ValueError(f"{record.mixture_id}: target too short for the recorded length")
            refs.append(g * seg)
    return MixtureExample(record.mixture_id, x, np.stack(refs), np.stack(scaled), scaled_noise, sources[0].sample_rate_hz)


# --- metadata CSV ---------------------------------------------------------

def _fmt_float(v: float | None) -> str:
    return "" if v is None else repr(float(v))


def _parse_float(s: str) -> float | None:
    return None if s == "" else float(s)


def record_to_row(rec: MixtureRecord) -> dict[str, str]:
    if len(rec.source_paths) != 2:
        raise ValueError("the metadata CSV holds two-speaker mixtures only")
    row = {
        "mixture_id": rec.mixture_id,
        "s1_path": rec.source_paths[0],
        "s2_path": rec.source_paths[1],
        "noise_path": rec.noise_path or "",
        "ssr_db": _fmt_float(rec.ssr_db),
        "snr_db": _fmt_float(rec.snr_db),
        "g1": _fmt_float(rec.gains[0]),
        "g2": _fmt_float(rec.gains[1]),
        "g_noise": _fmt_float(rec.g_noise),
        "s1_start": str(rec.starts[0]),
        "s2_start": str(rec.starts[1]),
        "length_samples": str(rec.length_samples),
    }
    speakers = rec.speakers or (None, None)
    for k, spk in enumerate(speakers, 1):
        row[f"s{k}_speaker"] = spk.speaker_id if spk else ""
        row[f"s{k}_gender"] = spk.gender if spk else ""
        row[f"s{k}_dialect"] = spk.dialect if spk else ""
        row[f"s{k}_age"] = spk.age if spk else ""
    return row


def row_to_record(row: dict[str, str]) -> MixtureRecord:
    missing = [c for c in CSV_COLUMNS if c not in row]
    if missing:
        raise ValueError(f"metadata row lacks columns: {', '.join(missing)}")
    speakers = []
    for k in (1, 2):
        sid = row[f"s{k}_speaker"]
        speakers.append(SpeakerInfo(sid, row[f"s{k}_gender"], row[f"s{k}_dialect"], row[f"s{k}_age"]) if sid else None)
    return MixtureRecord(
        mixture_id=row["mixture_id"],
        source_paths=(row["s1_path"], row["s2_path"]),
        noise_path=row["noise_path"] or None,
        ssr_db=float(row["ssr_db"]),
        snr_db=_parse_float(row["snr_db"]),
        gains=(float(row["g1"]), float(row["g2"])),
        g_noise=_parse_float(row["g_noise"]),
        starts=(int(row["s1_start"]), int(row["s2_start"])),
        length_samples=int(row["length_samples"]),
        speakers=tuple(speakers) if any(speakers) else (),
    )


def records_to_csv(records: Sequence[MixtureRecord]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for rec in records:
        writer.writerow(record_to_row(rec))
    return buf.getvalue()


def write_metadata(path: str | Path, records: Sequence[MixtureRecord]) -> None:
    Path(path).write_text(records_to_csv(records), encoding="utf-8")


def read_metadata(path: str | Path) -> list[MixtureRecord]:
    with open(path, newline="", encoding="utf-8") as fh:
        return [row_to_record(row) for row in csv.DictReader(fh)]


# --- corpus on disk -------------------------------------------------------

@dataclass
class CorpusConfig:
    n_train: int = 20
    n_dev: int = 5
    n_test: int = 5
    speakers_train: int = 6
    speakers_dev: int = 2
    speakers_test: int = 2
    utterances_per_speaker: int = 6
    min_words: int = 5
    max_words: int = 12
    word_duration_s: float = 0.25
    sample_rate_hz: int = 8000
    ssr_min_db: float = 0.0
    ssr_max_db: float = 5.0
    noise: bool = False
    snr_min_db: float = -6.0
    snr_max_db: float = 3.0
    n_noise: int = 4
    reverb: bool = True
    rt60_min_s: float = 0.2
    rt60_max_s: float = 0.6
    rir_length_s: float = 0.25
    max_delay_samples: int = 200
    source_dir: str = ""
    write_mixtures: bool = True

    def __post_init__(self):
        if not (math.isfinite(self.ssr_min_db) and math.isfinite(self.ssr_max_db)) or self.ssr_min_db > self.ssr_max_db:
            raise ValueError(f"invalid SSR range [{self.ssr_min_db}, {self.ssr_max_db}] dB")
        if self.noise and (not (math.isfinite(self.snr_min_db) and math.isfinite(self.snr_max_db)) or self.snr_min_db > self.snr_max_db):
            raise ValueError(f"invalid SNR range [{self.snr_min_db}, {self.snr_max_db}] dB")
        for name in ("n_train", "n_dev", "n_test", "max_delay_samples"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        for split in SPLITS:
            if getattr(self, f"n_{split}") > 0 and getattr(self, f"speakers_{split}") < 2:
                raise ValueError(f"speakers_{split} must be at least 2 to form two-speaker mixtures")
        if self.min_words < 0 or self.max_words < 1:
            raise ValueError("word counts must be positive")
        if self.rt60_min_s > self.rt60_max_s or self.rt60_min_s < 0:
            raise ValueError("invalid RT60 range")
        if self.sample_rate_hz <= 0 or self.word_duration_s <= 0 or self.rir_length_s <= 0:
            raise ValueError("sample rate, word duration and RIR length must be positive")
        if self.noise and self.n_noise < 1:
            raise ValueError("n_noise must be at least 1 when noise is enabled")


@dataclass(frozen=True, eq=False)
class PoolItem:
    """A mixable source: the (aligned) far-field clip and its direct-path pair."""

    path: str
    far: AudioClip
    direct: AudioClip | None
    speaker: SpeakerInfo


@dataclass
class SourcePool:
    items: list[PoolItem]
    noises: list[tuple[str, AudioClip]] = field(default_factory=list)

    def by_speaker(self) -> dict[str, list[PoolItem]]:
        out: dict[str, list[PoolItem]] = {}
        for it in self.items:
            out.setdefault(it.speaker.speaker_id, []).append(it)
        return out


def draw_mixture(rng: np.random.Generator, pool: SourcePool, config: CorpusConfig, mixture_id: str):
    """Draw speakers, utterances, SSR, offsets and noise for one mixture."""
    groups = pool.by_speaker()
    names = sorted(groups)
    if len(names) < 2:
        raise ValueError("need at least two speakers to mix")
    pick = rng.choice(len(names), size=2, replace=False)
    items = [groups[names[k]][int(rng.integers(len(groups[names[k]])))] for k in pick]
    ssr = float(rng.uniform(config.ssr_min_db, config.ssr_max_db))
    lens = [len(it.far) for it in items]
    starts = [0, 0]
    longer = int(np.argmax(lens))
    starts[longer] = int(rng.integers(0, lens[longer] - min(lens) + 1))
    noise = noise_path = snr = None
    if config.noise and pool.noises:
        noise_path, noise = pool.noises[int(rng.integers(len(pool.noises)))]
        snr = float(rng.uniform(config.snr_min_db, config.snr_max_db))
    x, refs, rec = make_mixture(
        [it.far for it in items],
        ssr,
        noise=noise,
        snr_db=snr,
        starts=starts,
        directs=[it.direct for it in items],
        mixture_id=mixture_id,
        source_paths=[it.path for it in items],
        noise_path=noise_path,
        speakers=[it.speaker for it in items],
    )
    return x, refs, rec


def _ingest_directory(source_dir: Path, fs: int) -> list[Utterance]:
    """Read ``<dir>/<speaker>/<utt>.wav`` with optional ``<utt>.txt`` transcripts
    and an optional ``speakers.csv`` (speaker,gender,dialect,age)."""
    meta: dict[str, SpeakerInfo] = {}
    table = source_dir / "speakers.csv"
    if table.exists():
        with open(table, newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                sid = row.get("speaker", "")
                meta[sid] = SpeakerInfo(sid, row.get("gender", ""), row.get("dialect", ""), row.get("age", ""))
    utts = []
    for spk_dir in sorted(p for p in source_dir.iterdir() if p.is_dir()):
        info = meta.get(spk_dir.name, SpeakerInfo(spk_dir.name))
        for wav in sorted(spk_dir.glob("*.wav")):
            clip = read_wav(wav)
            if clip.sample_rate_hz != fs:
                raise ValueError(f"{wav}: sample rate {clip.sample_rate_hz} Hz, corpus expects {fs} Hz")
            txt = wav.with_suffix(".txt")
            words = len(txt.read_text(encoding="utf-8").split()) if txt.exists() else None
            utts.append(Utterance(wav.stem, info, words, clip))
    if not utts:
        raise ValueError(f"no WAV files found under {source_dir}")
    return utts


def _synthesize_utterances(config: CorpusConfig, seed: int) -> list[Utterance]:
    n_spk = config.speakers_train + config.speakers_dev + config.speakers_test
    rng = np.random.default_rng([seed, 1])
    utts = []
    for info, profile in synth_speakers(n_spk, rng):
        for u in range(config.utterances_per_speaker):
            # word counts straddle the filter threshold on purpose
            words = int(rng.integers(max(1, config.min_words - 2), config.max_words + 1))
            clip = synth_utterance(profile, words, rng, config.sample_rate_hz, config.word_duration_s)
            utts.append(Utterance(f"{info.speaker_id}_u{u:02d}", info, words, clip))
    return utts


def _far_field(utt: Utterance, config: CorpusConfig, seed: int, index: int) -> AudioClip:
    """Reverberate and delay a dry utterance, then realign it by cross-correlation."""
    if not config.reverb:
        return utt.clip
    rng = np.random.default_rng([seed, 2, index])
    rt60 = float(rng.uniform(config.rt60_min_s, config.rt60_max_s))
    rir = synth_rir(rt60, config.rir_length_s, [seed, 3, index], config.sample_rate_hz)
    delay = int(rng.integers(0, config.max_delay_samples + 1))
    far = shift(apply_rir(utt.clip, rir), delay)
    tau = align_by_xcorr(far, utt.clip)
    return shift(far, -tau)


@dataclass
class CorpusSummary:
    root: Path
    csv_path: Path
    records: list[MixtureRecord]
    checksums: dict[str, str]


def sha256_file(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def build_corpus(config: CorpusConfig, seed: int, root: str | Path) -> CorpusSummary:
    """Generate sources, speaker-disjoint splits, mixtures and ``metadata.csv``.

    Layout under ``root``: ``sources/far`` (aligned far-field clips, the mixing
    inputs), ``sources/dir`` (direct-path targets), ``noise/``, and per
    mixture ``mix/``, ``s1/``, ``s2/`` WAVs when ``write_mixtures`` is set.
    """
    root = Path(root)
    fs = config.sample_rate_hz
    utts = _ingest_directory(Path(config.source_dir), fs) if config.source_dir else _synthesize_utterances(config, seed)
    counts = [u.words if u.words is not None else config.min_words for u in utts]
    utts = filter_short_utterances(utts, counts, config.min_words)

    # speaker-disjoint split assignment
    speakers = sorted({u.speaker.speaker_id for u in utts})
    order = np.random.default_rng([seed, 0]).permutation(len(speakers))
    sizes = [config.speakers_train, config.speakers_dev, config.speakers_test]
    if sum(sizes) > len(speakers):
        raise ValueError(f"need {sum(sizes)} speakers with usable utterances, found {len(speakers)}")
    split_of: dict[str, str] = {}
    pos = 0
    for split, size in zip(SPLITS, sizes):
        for k in order[pos : pos + size]:
            split_of[speakers[k]] = split
        pos += size

    pools = {split: SourcePool([]) for split in SPLITS}
    for index, utt in enumerate(utts):
        split = split_of.get(utt.speaker.speaker_id)
        if split is None:
            continue
        rel = f"{utt.speaker.speaker_id}/{utt.utt_id}.wav"
        far_rel, dir_rel = f"{FAR_DIR}/{rel}", f"{DIRECT_DIR}/{rel}"
        write_wav(root / far_rel, _far_field(utt, config, seed, index))
        write_wav(root / dir_rel, utt.clip)
        # mix from the stored (float32-quantized) audio so the CSV reproduces it
        pools[split].items.append(PoolItem(far_rel, read_wav(root / far_rel), read_wav(root / dir_rel), utt.speaker))

    if config.noise:
        longest = max(len(it.far) for p in pools.values() for it in p.items)
        noises = []
        for k in range(config.n_noise):
            rel = f"noise/noise{k:03d}.wav"
            write_wav(root / rel, synth_noise(longest, np.random.default_rng([seed, 4, k]), fs))
            noises.append((rel, read_wav(root / rel)))
        for p in pools.values():
            p.noises = noises

    records: list[MixtureRecord] = []
    checksums: dict[str, str] = {}
    for split_code, split in enumerate(SPLITS):
        for i in range(getattr(config, f"n_{split}")):
            mid = f"{split}-{i:05d}"
            x, refs, rec = draw_mixture(np.random.default_rng([seed, 5, split_code, i]), pools[split], config, mid)
            records.append(rec)
            if config.write_mixtures:
                write_wav(root / "mix" / f"{mid}.wav", x)
                for k, r in enumerate(refs, 1):
                    write_wav(root / f"s{k}" / f"{mid}.wav", r)
                checksums[mid] = sha256_file(root / "mix" / f"{mid}.wav")
            else:
                checksums[mid] = hashlib.sha256(x.samples.tobytes()).hexdigest()
    csv_path = root / "metadata.csv"
    write_metadata(csv_path, records)
    return CorpusSummary(root, csv_path, records, checksums)


def direct_path_for(path: str) -> str | None:
    if path.startswith(FAR_DIR + "/"):
        return DIRECT_DIR + path[len(FAR_DIR):]
    return None


class CorpusReader:
    """Loads sources referenced by metadata rows (with caching) and renders mixtures."""

    def __init__(self, root: str | Path, use_direct: bool = True):
        self.root = Path(root)
        self.use_direct = use_direct
        self._cache: dict[str, AudioClip] = {}

    def load(self, rel: str) -> AudioClip:
        clip = self._cache.get(rel)
        if clip is None:
            clip = read_wav(self.root / rel)
            self._cache[rel] = clip
        return clip

    def _target(self, rel: str) -> AudioClip | None:
        if not self.use_direct:
            return None
        alt = direct_path_for(rel)
        if alt is None or not (self.root / alt).exists():
            return None
        return self.load(alt)

    def render(self, record: MixtureRecord) -> MixtureExample:
        sources = [self.load(p) for p in record.source_paths]
        noise = self.load(record.noise_path) if record.noise_path else None
        targets = [self._target(p) for p in record.source_paths]
        return render_record(record, sources, noise, targets)

    def pool(self, records: Sequence[MixtureRecord]) -> SourcePool:
        """Source pool of the utterances used by ``records`` (for dynamic mixing)."""
        seen: dict[str, PoolItem] = {}
        noises: dict[str, AudioClip] = {}
        for rec in records:
            speakers = rec.speakers or (None,) * len(rec.source_paths)
            for path, spk in zip(rec.source_paths, speakers):
                if path not in seen:
                    info = spk or SpeakerInfo(Path(path).parent.name)
                    seen[path] = PoolItem(path, self.load(path), self._target(path), info)
            if rec.noise_path:
                noises[rec.noise_path] = self.load(rec.noise_path)
        return SourcePool([seen[k] for k in sorted(seen)], sorted(noises.items()))


def load_records(root: str | Path, split: str | None = None) -> list[MixtureRecord]:
    records = read_metadata(Path(root) / "metadata.csv")
    if split is not None:
        records = [r for r in records if r.split == split]
    return records


def load_corpus(root: str | Path, split: str | None = None, use_direct: bool = True) -> list[MixtureExample]:
    reader = CorpusReader(root, use_direct)
    return [reader.render(r) for r in load_records(root, split)]


# --- dynamic mixing -------------------------------------------------------

class VirtualCorpus(Sequence):
    """Mixtures of one dynamic-mixing epoch, rendered on access."""

    def __init__(self, records: list[MixtureRecord], pool: SourcePool):
        self.records = records
        self._items = {it.path: it for it in pool.items}
        self._noises = dict(pool.noises)

    def __len__(self) -> int:
        return len(self.records)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return [self[k] for k in range(*i.indices(len(self)))]
        rec = self.records[i]
        items = [self._items[p] for p in rec.source_paths]
        noise = self._noises[rec.noise_path] if rec.noise_path else None
        return render_record(rec, [it.far for it in items], noise, [it.direct for it in items])


def dynamic_mix(pool: SourcePool, config: CorpusConfig, seed: int, epoch: int, n_mixtures: int | None = None) -> VirtualCorpus:
    """Fresh pairings, SSRs, offsets and noise for one epoch.

    Every mixture draws from its own stream seeded by ``(seed, epoch, index)``.
    """
    n = config.n_train if n_mixtures is None else n_mixtures
    records = []
    for i in range(n):
        rng = np.random.default_rng([seed, 6, epoch, i])
        _, _, rec = draw_mixture(rng, pool, config, f"dm{epoch}-{i:05d}")
        records.append(rec)
    return VirtualCorpus(records, pool)


# --- toy task -------------------------------------------------------------

TOY_BANDS = ((0.0, 1400.0), (2200.0, 4000.0))


def band_pair_corpus(
    n: int,
    seed: int,
    length_s: float = 1.0,
    sample_rate_hz: int = 8000,
    bands: Sequence[tuple[float, float]] = TOY_BANDS,
    ssr_range_db: tuple[float, float] = (0.0, 5.0),
    prefix: str = "toy",
) -> list[MixtureExample]:
    """Two-source mixtures of band-limited noises occupying disjoint bands."""
    n_samples = int(round(length_s * sample_rate_hz))
    out = []
    for i in range(n):
        rng = np.random.default_rng([seed, 8, i])
        srcs = [band_noise(n_samples, b, rng, sample_rate_hz) for b in bands]
        ssr = float(rng.uniform(*ssr_range_db))
        x, refs, rec = make_mixture(srcs, ssr, mixture_id=f"{prefix}-{i:05d}")
        out.append(render_record(rec, srcs))
    return out


def examples_from_clips(
    sources: Sequence[Sequence[AudioClip]],
    ssr_db: Sequence[float],
    prefix: str = "ex",
) -> list[MixtureExample]:
    out = []
    for i, (srcs, ssr) in enumerate(zip(sources, ssr_db)):
        _, _, rec = make_mixture(srcs, ssr, mixture_id=f"{prefix}-{i:05d}")
        out.append(render_record(rec, srcs))
    return out

