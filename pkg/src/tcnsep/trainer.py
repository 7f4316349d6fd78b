"""Training loop with plateau learning-rate halving, evaluation, and the
global-context position sweep."""

from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .mixsim.corpus import CorpusConfig, MixtureExample, SourcePool
from .models import ModelConfig, SeparationModel, receptive_field, save_checkpoint, separate_tensor
from .numerics import Adam, NumericalError, backward, no_grad
from .objectives import score_separation, upit_loss
from .sampling import SamplerConfig, make_batches, quartile_eval


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 150
    lr: float = 2e-4
    batch_size: int = 4
    patience_epochs: int = 3
    lr_halving_factor: float = 0.5
    grad_clip: float | None = 5.0
    seed: int = 0
    # stop after this many optimizer steps in total (None: run all epochs)
    max_steps: int | None = None
    min_improvement_db: float = 0.01
    sampler: SamplerConfig = field(default_factory=lambda: SamplerConfig(t_lim_s=8.0))

    def __post_init__(self):
        if not (math.isfinite(self.lr) and self.lr > 0):
            raise ValueError(f"lr must be positive, got {self.lr}")
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")
        if self.patience_epochs < 1:
            raise ValueError(f"patience_epochs must be >= 1, got {self.patience_epochs}")
        if not 0 < self.lr_halving_factor <= 1:
            raise ValueError(f"lr_halving_factor must lie in (0, 1], got {self.lr_halving_factor}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.grad_clip is not None and self.grad_clip <= 0:
            raise ValueError("grad_clip must be positive")
        if self.max_steps is not None and self.max_steps < 1:
            raise ValueError("max_steps must be positive")

    @property
    def effective_sampler(self) -> SamplerConfig:
        """The sampler with this config's batch size and seed."""
        return replace(self.sampler, batch_size=self.batch_size, seed=self.seed)


@dataclass(frozen=True)
class EpochReport:
    epoch: int
    train_loss: float
    val_delta_si_sdr_db: float
    samples_processed: int
    lr: float
    steps: int
    wall_seconds: float = 0.0


REPORT_COLUMNS = ("epoch", "train_loss", "val_delta_si_sdr_db", "samples_processed", "lr", "steps")


def reports_csv(reports: Sequence[EpochReport]) -> str:
    """Epoch reports as CSV; wall-clock time is left out so reruns compare byte for byte."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_COLUMNS)
    for r in reports:
        w.writerow([r.epoch, repr(r.train_loss), repr(r.val_delta_si_sdr_db), r.samples_processed, repr(r.lr), r.steps])
    return buf.getvalue()


def write_reports(path: str | Path, reports: Sequence[EpochReport]) -> None:
    Path(path).write_text(reports_csv(reports))


# --- evaluation ------------------------------------------------------------

@dataclass(frozen=True)
class EvalRow:
    mixture_id: str
    length_samples: int
    si_sdr_mix_db: float
    si_sdr_est_db: float
    delta_si_sdr_db: float


@dataclass(frozen=True)
class EvalResult:
    mean_delta_si_sdr_db: float
    quartile_means_db: list[float] | None
    rows: list[EvalRow]

    def csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("mixture_id", "length_samples", "si_sdr_mix_db", "si_sdr_est_db", "delta_si_sdr_db"))
        for r in self.rows:
            w.writerow([r.mixture_id, r.length_samples, repr(r.si_sdr_mix_db), repr(r.si_sdr_est_db), repr(r.delta_si_sdr_db)])
        return buf.getvalue()

    def table(self) -> str:
        lines = [f"mixtures: {len(self.rows)}", f"mean delta SI-SDR: {self.mean_delta_si_sdr_db:.3f} dB"]
        if self.quartile_means_db is not None:
            for k, v in enumerate(self.quartile_means_db, 1):
                lines.append(f"Q{k} (by length): {v:.3f} dB")
        return "\n".join(lines) + "\n"


Estimator = Callable[[MixtureExample], np.ndarray]


def model_estimator(model: SeparationModel) -> Estimator:
    def run(ex: MixtureExample) -> np.ndarray:
        with no_grad():
            return separate_tensor(model, ex.mixture).numpy()

    return run


def evaluate(model: SeparationModel | Estimator, corpus: Sequence[MixtureExample]) -> EvalResult:
    """Full-length delta SI-SDR per mixture, its mean, and length-quartile means.

    ``model`` may be a :class:`SeparationModel` or any callable mapping an
    example to a ``(C, L)`` array of estimates.
    """
    if len(corpus) == 0:
        raise ValueError("cannot evaluate on an empty corpus")
    estimate = model_estimator(model) if isinstance(model, SeparationModel) else model
    rows = []
    for ex in corpus:
        est = np.asarray(estimate(ex), dtype=np.float64)
        if est.shape != ex.refs.shape:
            raise ValueError(f"{ex.example_id}: estimates {est.shape} do not match references {ex.refs.shape}")
        s = score_separation(est, ex.refs, ex.mixture)
        mix_db = s.mean_si_sdr_db - s.delta_si_sdr_db
        rows.append(EvalRow(ex.example_id, len(ex), mix_db, s.mean_si_sdr_db, s.delta_si_sdr_db))
    deltas = [r.delta_si_sdr_db for r in rows]
    quartiles = quartile_eval(deltas, [r.length_samples for r in rows]) if len(rows) >= 4 else None
    return EvalResult(math.fsum(deltas) / len(deltas), quartiles, rows)


# --- training --------------------------------------------------------------

@dataclass
class TrainResult:
    model: SeparationModel
    reports: list[EpochReport]
    best_epoch: int | None
    best_val_db: float
    steps: int


Validator = Callable[[SeparationModel, int], float]


def train(
    model: SeparationModel,
    train_corpus: Sequence[MixtureExample],
    valid_corpus: Sequence[MixtureExample] | None,
    config: TrainConfig,
    validate: Validator | None = None,
    checkpoint_path: str | Path | None = None,
    pool: SourcePool | None = None,
    corpus_config: CorpusConfig | None = None,
    log: Callable[[str], None] | None = None,
) -> TrainResult:
    """Adam on the uPIT loss with validation-driven lr halving.

    After each epoch the validation score (``validate(model, epoch)``, by
    default the mean delta SI-SDR on ``valid_corpus``) is compared against the
    last accepted improvement; ``patience_epochs`` epochs without a gain of
    ``min_improvement_db`` halve the lr. The best-scoring parameters are
    restored before returning and written to ``checkpoint_path``.
    """
    if validate is None:
        if not valid_corpus:
            raise ValueError("need a validation corpus or a validate callback")
        train_ids = {ex.example_id for ex in train_corpus}
        if train_ids & {ex.example_id for ex in valid_corpus}:
            raise ValueError("training and validation corpora overlap")

        def validate(m: SeparationModel, epoch: int) -> float:
            return evaluate(m, valid_corpus).mean_delta_si_sdr_db

    sampler = config.effective_sampler
    opt = Adam(model.parameters(), config.lr, grad_clip=config.grad_clip)
    reports: list[EpochReport] = []
    best_state, best_val, best_epoch = model.state(), -math.inf, None
    baseline, stale, steps = -math.inf, 0, 0

    for epoch in range(config.epochs):
        if config.max_steps is not None and steps >= config.max_steps:
            break
        start = time.perf_counter()
        lr_in_effect = opt.lr
        losses, samples = [], 0
        for batch in make_batches(train_corpus, sampler, epoch, pool, corpus_config):
            if config.max_steps is not None and steps >= config.max_steps:
                break
            opt.zero_grad()
            try:
                loss, _ = upit_loss(separate_tensor(model, batch.mixture), batch.refs)
                backward(loss)
                opt.step()
            except NumericalError as exc:
                raise TrainingError(
                    f"non-finite value at epoch {epoch}, step {steps}; batch: {', '.join(batch.ids)}"
                ) from exc
            losses.append(loss.item())
            samples += batch.samples
            steps += 1
        if not losses:
            raise TrainingError(f"epoch {epoch} produced no batches")
        val = float(validate(model, epoch))
        if not math.isfinite(val):
            raise TrainingError(f"non-finite validation score at epoch {epoch}")
        report = EpochReport(
            epoch, math.fsum(losses) / len(losses), val, samples, lr_in_effect, steps, time.perf_counter() - start
        )
        reports.append(report)
        if log:
            log(f"epoch {epoch}: loss {report.train_loss:.4f}, val {val:.3f} dB, lr {lr_in_effect:g}, steps {steps}")

        if val > best_val:
            best_state, best_val, best_epoch = model.state(), val, epoch
            if checkpoint_path is not None:
                save_checkpoint(model, checkpoint_path)
        if val >= baseline + config.min_improvement_db:
            baseline, stale = val, 0
        else:
            stale += 1
            if stale >= config.patience_epochs:
                opt.lr *= config.lr_halving_factor
                stale = 0

    model.load_state(best_state)
    if checkpoint_path is not None and best_epoch is None:
        save_checkpoint(model, checkpoint_path)
    return TrainResult(model, reports, best_epoch, best_val, steps)


# --- global-context position sweep -----------------------------------------

@dataclass(frozen=True)
class SweepRow:
    position: int
    delta_si_sdr_db: float
    params: int
    rf_seconds: float


SWEEP_COLUMNS = ("position", "delta_si_sdr_db", "params", "rf_seconds")


def sweep_csv(rows: Sequence[SweepRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    for r in rows:
        w.writerow([r.position, repr(r.delta_si_sdr_db), r.params, repr(r.rf_seconds)])
    return buf.getvalue()


def sweep_gc_position(
    base: ModelConfig,
    positions: Sequence[int],
    train_corpus: Sequence[MixtureExample],
    valid_corpus: Sequence[MixtureExample],
    test_corpus: Sequence[MixtureExample],
    config: TrainConfig,
    kind: str = "gru",
    model_seed: int = 0,
    log: Callable[[str], None] | None = None,
) -> list[SweepRow]:
    """Train one model per global-context position and score it on ``test_corpus``.

    Every run uses the same seeds and data; only the position differs.
    ``rf_seconds`` is the span of the remaining convolutional blocks.
    """
    rows = []
    for p in sorted(set(positions)):
        cfg = base.replace(gc_kind=kind, gc_position=p)
        model = SeparationModel(cfg, seed=model_seed)
        train(model, train_corpus, valid_corpus, config, log=log)
        score = evaluate(model, test_corpus).mean_delta_si_sdr_db
        rows.append(SweepRow(p, score, model.num_parameters(), receptive_field(cfg)[1]))
        if log:
            log(f"position {p}: {score:.3f} dB")
    return rows
