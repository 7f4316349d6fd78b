"""End-to-end acceptance checks, one test per criterion.

Each test prints a single PASS/FAIL line (collected again in the terminal
summary). Run with ``pytest -v tests/test_acceptance.py``.
"""

import hashlib
import itertools
import re
import time

import numpy as np
import pytest
from scipy import stats

from acceptance_log import criterion
from corpora import spread_corpus
from op_cases import OP_CASES
from tcnsep.cli import main
from tcnsep.mixsim import (
    AudioClip,
    CorpusConfig,
    CorpusReader,
    align_by_xcorr,
    band_pair_corpus,
    build_corpus,
    read_metadata,
    shift,
)
from tcnsep.mixsim.corpus import direct_path_for
from tcnsep.models import (
    ModelConfig,
    SeparationModel,
    chunk,
    dual_path_forward,
    empirical_rf_probe,
    overlap_add,
    rf_window,
    toy_config,
    zero_output_projection,
)
from tcnsep.models import blocks as B
from tcnsep.numerics import check_directional, check_gradients
from tcnsep.objectives import delta_si_sdr, si_sdr, upit_loss
from tcnsep.sampling import SamplerConfig, crop_fixed, random_window, split_batch, tsl_grid
from tcnsep.trainer import TrainConfig, evaluate, reports_csv, train

GRAD_TOL = 1e-4
TRIALS = 20


def _elapsed_under(start, limit_s, what):
    took = time.perf_counter() - start
    assert took < limit_s, f"{what} took {took:.1f} s (limit {limit_s} s)"
    return took


def test_1_receptive_field(capsys):
    with criterion(1, "receptive field of the full-size TCN") as notes:
        start = time.perf_counter()
        assert main(["rf"]) == 0
        _elapsed_under(start, 1.0, "rf")
        out = capsys.readouterr().out
        frames = int(re.search(r"frames: (\d+)", out).group(1))
        seconds = float(re.search(r"seconds: ([0-9.]+)", out).group(1))
        assert frames == 1531, f"frames {frames}"
        assert abs(seconds - 1.53) <= 0.01, f"seconds {seconds}"
        notes.append(f"{frames} frames, {seconds:.4f} s")


def test_2_locality_vs_global_context():
    with criterion(2, "probe: conv locality, global context sees every frame") as notes:
        start = time.perf_counter()
        base = toy_config(norm_mode="frame")
        n_frames, t_out = 128, 64
        left, right = rf_window(base)
        support = empirical_rf_probe(SeparationModel(base, seed=1), t_out, n_frames)
        assert support == list(range(t_out - left, t_out + right + 1)), f"conv support {support[:3]}..{support[-3:]}"
        positions = (0, base.blocks_per_stack, base.n_blocks - 1)
        for kind in ("gru", "transformer"):
            for p in positions:
                model = SeparationModel(base.replace(gc_kind=kind, gc_position=p), seed=1)
                got = empirical_rf_probe(model, t_out, n_frames)
                assert got == list(range(n_frames)), f"{kind}@{p}: {n_frames - len(got)} frames insensitive"
        _elapsed_under(start, 60.0, "probe")
        notes.append(f"conv window [{t_out - left}, {t_out + right}], gru/transformer at {positions} all {n_frames} frames")


def _model_case(config, seed):
    rng = np.random.default_rng([seed, 5])
    model = SeparationModel(config, seed=seed)
    x = rng.standard_normal((2, 400))
    refs = rng.standard_normal((2, 2, 400))
    return model, (lambda: upit_loss(model(x), refs)[0])


def test_3_gradient_suite():
    with criterion(3, "finite-difference gradient checks") as notes:
        start = time.perf_counter()
        worst, worst_name = 0.0, ""
        for name, build in OP_CASES.items():
            for trial in range(TRIALS):
                fn, params = build(np.random.default_rng([trial, 77]))
                res = check_gradients(fn, params, max_coords=12, rng=np.random.default_rng(trial))
                assert res.max_rel_err < GRAD_TOL, f"{name} trial {trial}: {res.max_rel_err:.2e}"
                if res.max_rel_err > worst:
                    worst, worst_name = res.max_rel_err, name
        variants = {
            "toy": toy_config(),
            "toy+gru": toy_config(gc_kind="gru", gc_position=4),
            "toy+transformer": toy_config(gc_kind="transformer", gc_position=4),
            "toy+dualpath": toy_config(gc_kind="dualpath"),
        }
        # a whole-model step of 1e-5 can cross a PReLU/ReLU kink; 1e-6 stays on one linear piece
        for name, config in variants.items():
            for trial in range(TRIALS):
                model, fn = _model_case(config, trial)
                res = check_directional(fn, model.parameters(), trials=1, h=1e-6, rng=np.random.default_rng([trial, 3]))
                assert res.max_rel_err < GRAD_TOL, f"{name} trial {trial}: {res.max_rel_err:.2e}"
                if res.max_rel_err > worst:
                    worst, worst_name = res.max_rel_err, name
        _elapsed_under(start, 300.0, "gradient suite")
        notes.append(f"{len(OP_CASES)} ops + {len(variants)} models x {TRIALS} trials, worst {worst:.2e} ({worst_name})")


def test_4_sampling_contracts():
    with criterion(4, "sampling contracts") as notes:
        assert tsl_grid() == [0.5, 0.66, 0.86, 1.13, 1.49, 1.95, 2.56, 3.36, 4.42, 5.8, 7.62, 10]

        rng = np.random.default_rng(2024)
        starts = np.array([random_window(1199, 1000, rng)[0] for _ in range(10_000)])
        assert starts.min() >= 0 and starts.max() <= 199
        p = stats.chisquare(np.bincount(starts // 10, minlength=20)).pvalue
        assert p > 0.01, f"chi-square p = {p:.4f}"

        x = AudioClip(np.random.default_rng(1).standard_normal(20_000))
        np.testing.assert_array_equal(crop_fixed(x, 8000).samples, x.samples[1999:9999])
        np.testing.assert_array_equal(crop_fixed(x, 20_000).samples, x.samples)
        np.testing.assert_array_equal(crop_fixed(x, 30_000).samples, x.samples)

        for d in (1, 2, 4):
            for m, length in ((1, 97), (3, 160), (4, 8001)):
                y = np.random.default_rng([d, m]).standard_normal((m, length))
                out = split_batch(y, d)
                seg = length // d
                assert out.shape == (m * d, seg)
                np.testing.assert_array_equal(out.reshape(m, d * seg), y[:, : d * seg])
                assert length - d * seg < d
        notes.append(f"chi-square p = {p:.3f}")


def _digest(arr):
    return hashlib.sha256(np.ascontiguousarray(arr, dtype=np.float64).tobytes()).hexdigest()


def test_5_mixture_bookkeeping(tmp_path):
    with criterion(5, "mixture bookkeeping on 1000 mixtures") as notes:
        config = CorpusConfig(n_train=800, n_dev=100, n_test=100, noise=True, write_mixtures=False)
        summary = build_corpus(config, 11, tmp_path / "corpus")
        records = read_metadata(summary.csv_path)
        assert len(records) == 1000
        reader = CorpusReader(summary.root)
        worst_ssr = 0.0
        for rec in records:
            ex = reader.render(rec)
            assert _digest(ex.mixture) == summary.checksums[rec.mixture_id], f"{rec.mixture_id} not bit-identical"
            assert 0.0 <= rec.ssr_db <= 5.0, f"{rec.mixture_id} SSR {rec.ssr_db}"
            measured = 10 * np.log10(np.mean(ex.components[0] ** 2) / np.mean(ex.components[1] ** 2))
            worst_ssr = max(worst_ssr, abs(measured - rec.ssr_db))
        assert worst_ssr < 1e-9, f"SSR error {worst_ssr:.2e} dB"

        clean = reader.load(direct_path_for(records[0].source_paths[0])).samples
        clean = AudioClip(np.concatenate([np.zeros(2000), clean, np.zeros(2000)]))
        for d in range(-2000, 2001):
            assert align_by_xcorr(shift(clean, d), clean) == d, f"delay {d}"
        notes.append(f"max SSR error {worst_ssr:.1e} dB, 4001 delays recovered")


def _oracle_si_sdr(est, ref):
    e, r = est - est.mean(), ref - ref.mean()
    target = (e @ r) / (r @ r) * r
    return 10 * np.log10((target @ target) / ((target - e) @ (target - e)))


def test_6_objective_properties():
    with criterion(6, "objective properties") as notes:
        rng = np.random.default_rng(6)
        for a in (0.5, 3.0, 100.0):
            for _ in range(50):
                ref = rng.integers(-20000, 20000, 800) / 32768.0
                est = np.round((ref + 0.3 * rng.integers(-20000, 20000, 800) / 32768.0) * 32768) / 32768
                assert si_sdr(a * est, ref) == si_sdr(est, ref), f"scale {a}"
        for c in (2, 3):
            for _ in range(100):
                ref = rng.standard_normal((c, 120))
                est = rng.uniform(0, 1, (c, c)) @ ref + 0.3 * rng.standard_normal((c, 120))
                loss, perm = upit_loss(est, ref)
                scores = {p: sum(_oracle_si_sdr(est[p[j]], ref[j]) for j in range(c)) for p in itertools.permutations(range(c))}
                best = max(scores, key=scores.get)
                assert perm == best
                assert abs(loss.item() + scores[best] / c) < 1e-9
        for _ in range(20):
            ref = rng.standard_normal((2, 500))
            mix = ref.sum(axis=0)
            assert delta_si_sdr(np.stack([mix, mix]), ref, mix) == 0.0
        notes.append("scale a in {0.5, 3, 100}, uPIT C=2,3 x 100, identity 0 dB")


@pytest.fixture(scope="module")
def toy_task():
    return (
        band_pair_corpus(200, 100, prefix="train"),
        band_pair_corpus(20, 101, prefix="valid"),
        band_pair_corpus(50, 102, prefix="test"),
    )


def _toy_run(config, task):
    train_set, valid_set, test_set = task
    cfg = TrainConfig(epochs=10, lr=1e-3, batch_size=4, max_steps=500, seed=0, sampler=SamplerConfig())
    res = train(SeparationModel(config, seed=0), train_set, valid_set, cfg)
    assert res.steps == 500
    return evaluate(res.model, test_set).mean_delta_si_sdr_db


def test_7_toy_training(toy_task):
    with criterion(7, "toy training: conv >= 5 dB, GRU variants within 3 dB") as notes:
        start = time.perf_counter()
        conv = _toy_run(toy_config(), toy_task)
        notes.append(f"conv {conv:.2f} dB")
        assert conv >= 5.0, f"conv {conv:.2f} dB"
        base = toy_config()
        for p in (0, base.blocks_per_stack, base.n_blocks - 1):
            gru = _toy_run(toy_config(gc_kind="gru", gc_position=p), toy_task)
            notes.append(f"gru@{p} {gru:.2f} dB")
            assert abs(gru - conv) <= 3.0, f"gru@{p} {gru:.2f} dB vs conv {conv:.2f} dB"
        notes.append(f"{(time.perf_counter() - start) / 60:.1f} min")


TINY = ModelConfig(n_enc_channels=8, enc_window=8, enc_hop=4, bottleneck_channels=6, conv_channels=8, blocks_per_stack=2, repeats=2)


def test_8_schedule_and_determinism():
    with criterion(8, "lr schedule, determinism, samples vs length limit") as notes:
        data = band_pair_corpus(8, 3, length_s=0.05, prefix="tr")
        valid = band_pair_corpus(4, 4, length_s=0.05, prefix="va")
        frozen = TrainConfig(epochs=8, lr=2e-4, batch_size=2, sampler=SamplerConfig())
        res = train(SeparationModel(TINY), data, None, frozen, validate=lambda m, e: 0.0)
        assert [r.lr for r in res.reports] == [2e-4] * 4 + [1e-4] * 3 + [5e-5]

        cfg = TrainConfig(epochs=3, lr=1e-3, batch_size=2, seed=5, sampler=SamplerConfig(t_lim_s=0.03))
        csvs = [reports_csv(train(SeparationModel(TINY, seed=2), data, valid, cfg).reports).encode() for _ in range(2)]
        assert csvs[0] == csvs[1]

        corpus = spread_corpus(16, 8, durations_s=np.linspace(1.6, 9.6, 16), noise=False)
        mean_s = np.mean([e.duration_s for e in corpus])
        assert abs(mean_s - 5.6) < 1e-3
        totals = []
        for t in (1.95, 3.36, 5.8, 10.0):
            cfg = TrainConfig(epochs=1, lr=1e-3, batch_size=4, sampler=SamplerConfig(t_lim_s=t))
            res = train(SeparationModel(TINY), corpus, None, cfg, validate=lambda m, e: 0.0)
            totals.append(res.reports[0].samples_processed)
        assert all(b >= a for a, b in zip(totals, totals[1:])), f"samples {totals}"
        notes.append(f"samples per epoch {totals}")


def test_9_chunk_round_trip_and_dual_path_identity():
    with criterion(9, "chunk/overlap-add round trip, dual-path identity") as notes:
        rng = np.random.default_rng(9)
        worst = 0.0
        for _ in range(50):
            length = int(rng.integers(1, 300))
            k = 2 * int(rng.integers(1, 40))
            y = rng.standard_normal((3, length))
            back = overlap_add(chunk(y, k), length).numpy()
            worst = max(worst, float(np.max(np.abs(back - y))))
        assert worst <= 1e-12, f"round trip error {worst:.2e}"

        config = toy_config(gc_kind="dualpath")
        layers = []
        for _ in range(2):
            intra = B.init_transformer_block(rng, config.bottleneck_channels, config.gc_ffn_dim)
            inter = B.init_transformer_block(rng, config.bottleneck_channels, config.gc_ffn_dim)
            zero_output_projection(intra, "transformer")
            zero_output_projection(inter, "transformer")
            layers.append((intra, inter))
        y = rng.standard_normal((2, config.bottleneck_channels, 77))
        out = dual_path_forward(y, layers, config.gc_heads, config.gc_chunk_size).numpy()
        ident = float(np.max(np.abs(out - y)))
        assert ident <= 1e-12, f"dual-path identity error {ident:.2e}"
        notes.append(f"round trip {worst:.1e}, identity {ident:.1e}")
