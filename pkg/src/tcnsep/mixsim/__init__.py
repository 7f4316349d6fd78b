"""Mixture simulation: signal model, corpus pipeline and dynamic mixing."""

from .audio import AudioClip, Rir, WavFormatError, read_wav, write_wav
from .corpus import (
    CSV_COLUMNS,
    CorpusConfig,
    CorpusReader,
    CorpusSummary,
    MixtureExample,
    MixtureRecord,
    PoolItem,
    SourcePool,
    VirtualCorpus,
    band_pair_corpus,
    build_corpus,
    compose,
    draw_mixture,
    dynamic_mix,
    examples_from_clips,
    load_corpus,
    load_records,
    make_mixture,
    read_metadata,
    records_to_csv,
    render_record,
    write_metadata,
)
from .signal import (
    add_noise_at_snr,
    align_by_xcorr,
    apply_rir,
    filter_short_utterances,
    gain_for_ssr,
    measured_ssr_db,
    noise_gain_for_snr,
    shift,
    synth_rir,
)
from .synthetic import SpeakerInfo, Utterance, band_noise, synth_noise, synth_speakers, synth_utterance

__all__ = [name for name in dir() if not name.startswith("_")]
