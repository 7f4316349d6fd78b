"""Command-line front end: ``tcnsep {mix,stats,rf,train,eval,sweep}``.

Every subcommand reads a ``key = value`` config file (``--config``), applies
``--set key=value`` overrides, and writes its outputs under ``--out``.
Exit codes: 0 success, 2 configuration error, 3 runtime or numeric error.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

from .configfile import (
    ConfigError,
    apply_overrides,
    build_dataclass,
    dataclass_items,
    field_names,
    format_value,
    read_config,
    write_config,
)
from .mixsim.corpus import (
    CorpusConfig,
    CorpusReader,
    band_pair_corpus,
    build_corpus,
    load_records,
)
from .models import PRESETS, CheckpointError, ModelConfig, SeparationModel, load_checkpoint, receptive_field
from .numerics import NumericalError
from .sampling import SamplerConfig, length_stats
from .trainer import TrainConfig, TrainingError, evaluate, sweep_csv, sweep_gc_position, train, write_reports

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3
CORPUS_CONFIG_FILE = "corpus.cfg"


@dataclass(frozen=True)
class CommandSpec:
    name: str
    config_path: str | None
    overrides: tuple[str, ...]
    out_dir: str
    seed: int | None


# --- data sources ----------------------------------------------------------

@dataclass(frozen=True)
class DataConfig:
    """Where examples come from: ``data = toy`` or a corpus directory."""

    data: str = "toy"
    toy_train: int = 200
    toy_valid: int = 20
    toy_test: int = 50
    toy_length_s: float = 1.0
    data_seed: int = 0
    train_split: str = "train"
    valid_split: str = "dev"
    test_split: str = "test"
    use_direct: bool = True


_TOY_SEED_OFFSETS = {"train": 0, "valid": 1, "test": 2}


def load_split(dc: DataConfig, which: str):
    """Examples for ``which`` in {train, valid, test}."""
    if dc.data == "toy":
        n = getattr(dc, f"toy_{which}")
        return band_pair_corpus(n, dc.data_seed * 10 + _TOY_SEED_OFFSETS[which], dc.toy_length_s, prefix=f"toy{which}")
    root = Path(dc.data)
    if not (root / "metadata.csv").is_file():
        raise ConfigError(f"no metadata.csv under corpus directory {root}")
    split = getattr(dc, f"{which}_split")
    reader = CorpusReader(root, use_direct=dc.use_direct)
    return [reader.render(r) for r in load_records(root, split)]


def dynamic_mixing_inputs(dc: DataConfig):
    if dc.data == "toy":
        raise ConfigError("dynamic_mixing needs a corpus directory (data = PATH)")
    root = Path(dc.data)
    cfg_path = root / CORPUS_CONFIG_FILE
    if not cfg_path.is_file():
        raise ConfigError(f"dynamic mixing needs {cfg_path} (written by 'tcnsep mix')")
    corpus_config = build_dataclass(CorpusConfig, read_config(cfg_path))
    pool = CorpusReader(root, use_direct=dc.use_direct).pool(load_records(root, dc.train_split))
    return pool, corpus_config


# --- config assembly -------------------------------------------------------

def _model_config(values: dict[str, str], default_preset: str) -> ModelConfig:
    preset = values.get("preset", default_preset)
    if preset not in PRESETS:
        raise ConfigError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
    merged = {k: format_value(v) for k, v in dataclass_items(PRESETS[preset]()).items()}
    keys = field_names(ModelConfig)
    merged.update({k: v for k, v in values.items() if k in keys})
    return build_dataclass(ModelConfig, merged)


def _check_keys(values: dict[str, str], allowed: set[str]) -> None:
    for key in values:
        if key not in allowed:
            raise ConfigError(f"unknown config key: {key}")


_TRAIN_SCALARS = field_names(TrainConfig) - {"sampler"}
_SAMPLER_KEYS = field_names(SamplerConfig) - {"seed", "batch_size"}


def _train_config(values: dict[str, str], seed: int | None) -> TrainConfig:
    sampler_values = {"t_lim_s": repr(TrainConfig().sampler.t_lim_s)}
    sampler_values.update({k: v for k, v in values.items() if k in _SAMPLER_KEYS})
    sampler = build_dataclass(SamplerConfig, sampler_values)
    scalars = {k: v for k, v in values.items() if k in _TRAIN_SCALARS}
    cfg = build_dataclass(TrainConfig, scalars)
    cfg = dataclasses.replace(cfg, sampler=sampler)
    if seed is not None:
        cfg = dataclasses.replace(cfg, seed=seed)
    return cfg


def _data_config(values: dict[str, str]) -> DataConfig:
    return build_dataclass(DataConfig, {k: v for k, v in values.items() if k in field_names(DataConfig)})


def _flatten(*objs, extra: dict | None = None) -> dict:
    out = {}
    for obj in objs:
        for k, v in dataclass_items(obj).items():
            if dataclasses.is_dataclass(v):
                continue
            out[k] = v
    out.update(extra or {})
    return out


# --- subcommands -----------------------------------------------------------

def cmd_mix(spec: CommandSpec, values: dict[str, str], echo: Callable[[str], None]) -> int:
    _check_keys(values, field_names(CorpusConfig) | {"seed"})
    raw_seed = values.pop("seed", "0")
    try:
        seed = spec.seed if spec.seed is not None else int(raw_seed)
    except ValueError as exc:
        raise ConfigError(f"invalid value for seed: {raw_seed!r}") from exc
    config = build_dataclass(CorpusConfig, values)
    out = Path(spec.out_dir)
    summary = build_corpus(config, seed, out)
    write_config(out / CORPUS_CONFIG_FILE, dataclass_items(config))
    (out / "checksums.txt").write_text("".join(f"{k} {v}\n" for k, v in sorted(summary.checksums.items())))
    echo(f"mixtures: {len(summary.records)}")
    echo(f"metadata: {summary.csv_path}")
    return EXIT_OK


def cmd_stats(spec: CommandSpec, values: dict[str, str], echo: Callable[[str], None]) -> int:
    _check_keys(values, {"corpus", "split", "sample_rate_hz"})
    if "corpus" not in values:
        raise ConfigError("stats needs 'corpus = DIR'")
    root = Path(values["corpus"])
    if not (root / "metadata.csv").is_file():
        raise ConfigError(f"no metadata.csv under corpus directory {root}")
    split = values.get("split") or None
    try:
        fs = int(values.get("sample_rate_hz", "8000"))
    except ValueError as exc:
        raise ConfigError(f"invalid value for sample_rate_hz: {values['sample_rate_hz']!r}") from exc
    records = load_records(root, split)
    if not records:
        raise ValueError(f"corpus {root} has no mixtures" + (f" in split {split!r}" if split else ""))
    stats = length_stats([r.length_samples for r in records], sample_rate_hz=fs)
    out = Path(spec.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "length_density.csv").write_text(stats.density_csv())
    (out / "length_stats.csv").write_text(stats.summary_csv())
    (out / "length_summary.txt").write_text(stats.summary())
    echo(stats.summary().rstrip("\n"))
    return EXIT_OK


def cmd_rf(spec: CommandSpec, values: dict[str, str], echo: Callable[[str], None]) -> int:
    _check_keys(values, field_names(ModelConfig) | {"preset"})
    config = _model_config(values, "conv_tasnet")
    frames, seconds = receptive_field(config)
    echo(f"frames: {frames}")
    echo(f"seconds: {seconds:.4f}")
    if config.gc_kind != "none":
        echo(f"global context: {config.gc_kind} (every frame reachable)")
    return EXIT_OK


def _training_setup(values: dict[str, str], spec: CommandSpec, extra: set[str] = frozenset()):
    allowed = field_names(ModelConfig) | {"preset", "model_seed"} | _TRAIN_SCALARS | _SAMPLER_KEYS | field_names(DataConfig) | extra
    _check_keys(values, allowed)
    model_config = _model_config(values, "toy")
    train_config = _train_config(values, spec.seed)
    data = _data_config(values)
    try:
        model_seed = int(values.get("model_seed", str(train_config.seed)))
    except ValueError as exc:
        raise ConfigError(f"invalid value for model_seed: {values['model_seed']!r}") from exc
    return model_config, train_config, data, model_seed


def cmd_train(spec: CommandSpec, values: dict[str, str], echo: Callable[[str], None]) -> int:
    model_config, train_config, data, model_seed = _training_setup(values, spec)
    pool = corpus_config = None
    if train_config.sampler.dynamic_mixing:
        pool, corpus_config = dynamic_mixing_inputs(data)
    train_set, valid_set = load_split(data, "train"), load_split(data, "valid")
    out = Path(spec.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_config(out / "config.txt", _flatten(model_config, train_config, train_config.sampler, data, extra={"model_seed": model_seed}))
    model = SeparationModel(model_config, seed=model_seed)
    result = train(model, train_set, valid_set, train_config, checkpoint_path=out / "model.ckpt",
                   pool=pool, corpus_config=corpus_config, log=echo)
    write_reports(out / "epochs.csv", result.reports)
    echo(f"best validation delta SI-SDR: {result.best_val_db:.3f} dB (epoch {result.best_epoch})")
    echo(f"checkpoint: {out / 'model.ckpt'}")
    return EXIT_OK


def cmd_eval(spec: CommandSpec, values: dict[str, str], echo: Callable[[str], None]) -> int:
    _check_keys(values, {"checkpoint"} | field_names(DataConfig))
    if "checkpoint" not in values:
        raise ConfigError("eval needs 'checkpoint = PATH'")
    data = _data_config(values)
    model = load_checkpoint(values["checkpoint"])
    result = evaluate(model, load_split(data, "test"))
    out = Path(spec.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "eval.csv").write_text(result.csv())
    (out / "eval_summary.txt").write_text(result.table())
    echo(result.table().rstrip("\n"))
    return EXIT_OK


def cmd_sweep(spec: CommandSpec, values: dict[str, str], echo: Callable[[str], None]) -> int:
    model_config, train_config, data, model_seed = _training_setup(values, spec, extra={"positions"})
    kind = model_config.gc_kind if model_config.gc_kind != "none" else "gru"
    if kind not in ("gru", "transformer"):
        raise ConfigError(f"sweep needs gc_kind gru or transformer, got {kind!r}")
    base = model_config.replace(gc_kind="none")
    raw = values.get("positions", "")
    try:
        positions = [int(p) for p in raw.split(",") if p.strip()] or list(range(base.n_blocks))
    except ValueError as exc:
        raise ConfigError(f"invalid value for positions: {raw!r}") from exc
    bad = [p for p in positions if not 0 <= p < base.n_blocks]
    if bad:
        raise ConfigError(f"positions {bad} outside [0, {base.n_blocks})")
    sets = [load_split(data, w) for w in ("train", "valid", "test")]
    rows = sweep_gc_position(base, positions, *sets, train_config, kind=kind, model_seed=model_seed, log=echo)
    out = Path(spec.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "sweep.csv").write_text(sweep_csv(rows))
    echo(sweep_csv(rows).rstrip("\n"))
    return EXIT_OK


COMMANDS = {
    "mix": cmd_mix,
    "stats": cmd_stats,
    "rf": cmd_rf,
    "train": cmd_train,
    "eval": cmd_eval,
    "sweep": cmd_sweep,
}

_DEFAULT_OUT = {"mix": "corpus", "stats": "stats", "rf": ".", "train": "run", "eval": "eval", "sweep": "sweep"}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tcnsep", description="Speech separation experiment toolkit.")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "mix": "build a mixture corpus and metadata.csv",
        "stats": "length distribution report for a corpus",
        "rf": "analytic receptive field of a model config",
        "train": "train a separation model",
        "eval": "evaluate a checkpoint",
        "sweep": "train one model per global-context position",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", metavar="PATH", help="key = value config file")
        p.add_argument("--set", metavar="KEY=VALUE", action="append", default=[], dest="overrides",
                       help="override one config key (repeatable)")
        p.add_argument("--out", metavar="DIR", default=None, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="random seed")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    spec = CommandSpec(args.command, args.config, tuple(args.overrides), args.out or _DEFAULT_OUT[args.command], args.seed)

    def echo(msg: str) -> None:
        print(msg, flush=True)

    try:
        values = read_config(spec.config_path) if spec.config_path else {}
        values = apply_overrides(values, spec.overrides)
        return COMMANDS[spec.name](spec, values, echo)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (TrainingError, NumericalError, CheckpointError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
