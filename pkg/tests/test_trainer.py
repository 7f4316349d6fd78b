import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from corpora import spread_corpus
from tcnsep.mixsim import band_pair_corpus
from tcnsep.mixsim.corpus import MixtureExample
from tcnsep.models import ModelConfig, SeparationModel, load_checkpoint, receptive_field
from tcnsep.objectives import CLAMP_DB
from tcnsep.sampling import SamplerConfig, epoch_samples
from tcnsep.trainer import (
    EpochReport,
    TrainConfig,
    TrainingError,
    evaluate,
    reports_csv,
    sweep_csv,
    sweep_gc_position,
    train,
)

TINY = ModelConfig(n_enc_channels=8, enc_window=8, enc_hop=4, bottleneck_channels=6, conv_channels=8, blocks_per_stack=2, repeats=2)


@pytest.fixture(scope="module")
def data():
    return (
        band_pair_corpus(6, 1, length_s=0.05, prefix="tr"),
        band_pair_corpus(4, 2, length_s=0.05, prefix="va"),
    )


def quick(**kw):
    base = dict(epochs=2, lr=1e-3, batch_size=2, sampler=SamplerConfig())
    base.update(kw)
    return TrainConfig(**base)


def simulate_schedule(vals, lr, patience, factor, threshold):
    """Reference implementation of the plateau rule: lr in effect per epoch."""
    out, baseline, stale = [], -math.inf, 0
    for v in vals:
        out.append(lr)
        if v >= baseline + threshold:
            baseline, stale = v, 0
        else:
            stale += 1
            if stale >= patience:
                lr *= factor
                stale = 0
    return out


class TestConfig:
    def test_defaults(self):
        c = TrainConfig()
        assert (c.epochs, c.lr, c.batch_size, c.patience_epochs, c.lr_halving_factor, c.grad_clip) == (150, 2e-4, 4, 3, 0.5, 5.0)
        assert c.sampler.t_lim_s == 8.0

    @pytest.mark.parametrize("bad", [dict(lr=0.0), dict(epochs=-1), dict(patience_epochs=0), dict(lr_halving_factor=1.5)])
    def test_invalid(self, bad):
        with pytest.raises(ValueError):
            TrainConfig(**bad)

    def test_effective_sampler(self):
        c = TrainConfig(batch_size=7, seed=3, sampler=SamplerConfig(t_lim_s=2.0, batch_size=1, seed=99))
        assert c.effective_sampler == SamplerConfig(t_lim_s=2.0, batch_size=7, seed=3)


class TestSchedule:
    def test_halves_after_three_flat_epochs(self, data):
        model = SeparationModel(TINY)
        res = train(model, data[0], None, quick(epochs=9, lr=2e-4), validate=lambda m, e: 1.0)
        assert [r.lr for r in res.reports] == [2e-4] * 4 + [1e-4] * 3 + [5e-5] * 2

    def test_no_halving_while_improving(self, data):
        res = train(SeparationModel(TINY), data[0], None, quick(epochs=6), validate=lambda m, e: float(e))
        assert {r.lr for r in res.reports} == {1e-3}

    def test_sub_threshold_gain_is_not_improvement(self, data):
        vals = [1.0, 1.005, 1.009, 1.0095, 2.0]
        res = train(SeparationModel(TINY), data[0], None, quick(epochs=5), validate=lambda m, e: vals[e])
        assert [r.lr for r in res.reports] == [1e-3] * 4 + [5e-4]
        # the best checkpoint still follows the raw maximum
        assert res.best_epoch == 4

    @given(st.lists(st.sampled_from([0.0, 0.005, 0.01, 0.5, -1.0, 3.0]), min_size=1, max_size=12), st.integers(1, 4))
    @settings(max_examples=15, deadline=None)
    def test_matches_reference_rule(self, data, vals, patience):
        cfg = quick(epochs=len(vals), patience_epochs=patience)
        res = train(SeparationModel(TINY), data[0][:2], None, cfg, validate=lambda m, e: vals[e])
        lrs = [r.lr for r in res.reports]
        assert lrs == simulate_schedule(vals, 1e-3, patience, 0.5, 0.01)
        assert all(b <= a for a, b in zip(lrs, lrs[1:]))
        assert all(b in (a, a * 0.5) for a, b in zip(lrs, lrs[1:]))


class TestTrain:
    def test_zero_epochs(self, data):
        model = SeparationModel(TINY, seed=2)
        before = model.state()
        res = train(model, data[0], data[1], quick(epochs=0))
        assert res.reports == [] and res.steps == 0
        for k, v in model.state().items():
            np.testing.assert_array_equal(v, before[k])

    def test_best_checkpoint(self, data, tmp_path):
        path = tmp_path / "best.ckpt"
        model = SeparationModel(TINY, seed=1)
        res = train(model, data[0], data[1], quick(epochs=4, lr=5e-3), checkpoint_path=path)
        vals = [r.val_delta_si_sdr_db for r in res.reports]
        assert evaluate(res.model, data[1]).mean_delta_si_sdr_db == max(vals)
        assert res.best_val_db == max(vals)
        restored = load_checkpoint(path)
        for k, v in restored.state().items():
            np.testing.assert_array_equal(v, res.model.state()[k])

    def test_deterministic_reports(self, data):
        runs = [train(SeparationModel(TINY, seed=4), data[0], data[1], quick(epochs=2, seed=8)) for _ in range(2)]
        assert reports_csv(runs[0].reports) == reports_csv(runs[1].reports)
        for k, v in runs[0].model.state().items():
            np.testing.assert_array_equal(v, runs[1].model.state()[k])

    def test_csv_has_no_wall_time(self):
        text = reports_csv([EpochReport(0, 1.5, 2.5, 100, 1e-3, 3, wall_seconds=12.0)])
        assert text == "epoch,train_loss,val_delta_si_sdr_db,samples_processed,lr,steps\n0,1.5,2.5,100,0.001,3\n"

    def test_samples_processed(self, data):
        cfg = quick(epochs=2, sampler=SamplerConfig(t_lim_s=0.03))
        res = train(SeparationModel(TINY), data[0], None, cfg, validate=lambda m, e: 0.0)
        for r in res.reports:
            assert r.samples_processed == epoch_samples(data[0], cfg.effective_sampler, r.epoch)

    def test_samples_monotone_in_limit(self):
        corpus = spread_corpus(12, 5, low_s=0.05, high_s=0.2, noise=False)
        totals = []
        for t in (0.06, 0.1, 0.15, 0.3):
            cfg = quick(epochs=1, sampler=SamplerConfig(t_lim_s=t))
            res = train(SeparationModel(TINY), corpus, None, cfg, validate=lambda m, e: 0.0)
            totals.append(res.reports[0].samples_processed)
        assert totals == sorted(totals) and totals[0] < totals[-1]

    def test_max_steps(self, data):
        res = train(SeparationModel(TINY), data[0], None, quick(epochs=10, max_steps=4), validate=lambda m, e: 0.0)
        assert res.steps == 4
        assert [r.steps for r in res.reports] == [3, 4]

    def test_loss_decreases(self, data):
        res = train(SeparationModel(TINY), data[0], None, quick(epochs=6, lr=5e-3), validate=lambda m, e: float(e))
        assert res.reports[-1].train_loss < res.reports[0].train_loss

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_non_finite_aborts_with_batch_ids(self, data):
        bad = data[0][0]
        huge = MixtureExample("broken-00000", bad.mixture * 1e300, bad.refs, bad.components, None)
        with pytest.raises(TrainingError, match="broken-00000"):
            train(SeparationModel(TINY), [huge], None, quick(batch_size=1), validate=lambda m, e: 0.0)

    def test_overlapping_corpora(self, data):
        with pytest.raises(ValueError):
            train(SeparationModel(TINY), data[0], data[0][:2], quick())

    def test_needs_validation(self, data):
        with pytest.raises(ValueError):
            train(SeparationModel(TINY), data[0], None, quick())


class TestEvaluate:
    def test_identity_is_zero(self, data):
        res = evaluate(lambda ex: np.stack([ex.mixture] * 2), data[1])
        assert res.mean_delta_si_sdr_db == 0.0
        assert all(r.delta_si_sdr_db == 0.0 for r in res.rows)

    def test_oracle_hits_clamp(self, data):
        res = evaluate(lambda ex: ex.refs[::-1], data[1])
        assert all(r.si_sdr_est_db == CLAMP_DB for r in res.rows)
        assert all(r.delta_si_sdr_db == CLAMP_DB - r.si_sdr_mix_db for r in res.rows)

    def test_rows_average_to_mean(self, data):
        res = evaluate(SeparationModel(TINY), data[1])
        assert math.fsum(r.delta_si_sdr_db for r in res.rows) / len(res.rows) == res.mean_delta_si_sdr_db
        assert len(res.quartile_means_db) == 4
        assert len(res.csv().splitlines()) == 1 + len(data[1])
        assert "Q4" in res.table()

    def test_full_length(self):
        corpus = spread_corpus(4, 9, low_s=0.05, high_s=0.1, noise=False)
        res = evaluate(SeparationModel(TINY), corpus)
        assert [r.length_samples for r in res.rows] == [len(e) for e in corpus]

    def test_errors(self, data):
        with pytest.raises(ValueError):
            evaluate(SeparationModel(TINY), [])
        with pytest.raises(ValueError):
            evaluate(lambda ex: ex.refs[:1], data[1])


class TestSweep:
    def test_rows_and_determinism(self, data):
        cfg = quick(epochs=1)
        rows = sweep_gc_position(TINY, [3, 0, 1, 2], data[0][:2], data[1][:2], data[1][2:], cfg)
        assert [r.position for r in rows] == [0, 1, 2, 3]
        assert len({r.params for r in rows}) == 1
        for r in rows:
            assert r.rf_seconds == receptive_field(TINY.replace(gc_kind="gru", gc_position=r.position))[1]
        again = sweep_gc_position(TINY, [0, 1, 2, 3], data[0][:2], data[1][:2], data[1][2:], cfg)
        assert sweep_csv(rows) == sweep_csv(again)
        assert sweep_csv(rows).splitlines()[0] == "position,delta_si_sdr_db,params,rf_seconds"
