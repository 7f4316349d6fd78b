import time

import pytest

from tcnsep.cli import main
from tcnsep.mixsim import load_records
from tcnsep.sampling import length_stats

SMALL_MIX = ["--set", "n_train=6", "--set", "n_dev=2", "--set", "n_test=2"]
FAST_TRAIN = [
    "--set", "toy_train=6", "--set", "toy_valid=2", "--set", "toy_test=4", "--set", "toy_length_s=0.1",
    "--set", "epochs=2", "--set", "lr=0.001", "--set", "n_enc_channels=16", "--set", "bottleneck_channels=8",
    "--set", "conv_channels=16", "--set", "blocks_per_stack=2",
]


@pytest.fixture(scope="module")
def corpus_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli") / "corpus"
    assert main(["mix", "--out", str(out), "--seed", "3", *SMALL_MIX]) == 0
    return out


class TestRf:
    def test_default_conv_tasnet(self, capsys):
        t = time.perf_counter()
        assert main(["rf"]) == 0
        assert time.perf_counter() - t < 1.0
        out = capsys.readouterr().out
        assert "frames: 1531" in out and "seconds: 1.5320" in out

    def test_invalid_config(self, capsys):
        assert main(["rf", "--set", "kernel=0"]) == 2
        assert main(["rf", "--set", "repeats=x"]) == 2

    def test_unknown_key_named(self, capsys):
        assert main(["rf", "--set", "kernal=3"]) == 2
        assert "kernal" in capsys.readouterr().err

    def test_config_file(self, tmp_path, capsys):
        cfg = tmp_path / "m.cfg"
        cfg.write_text("# toy model\npreset = toy\n")
        assert main(["rf", "--config", str(cfg)]) == 0
        assert "frames: 61" in capsys.readouterr().out

    def test_missing_config_file(self, tmp_path):
        assert main(["rf", "--config", str(tmp_path / "absent.cfg")]) == 2

    def test_bad_flag(self, capsys):
        assert main(["rf", "--bogus"]) == 2


class TestMix:
    def test_outputs(self, corpus_dir):
        assert len(list((corpus_dir / "mix").glob("*.wav"))) == 10
        assert len(list(corpus_dir.glob("*.csv"))) == 1
        assert len(load_records(corpus_dir)) == 10

    def test_same_seed_same_checksums(self, corpus_dir, tmp_path):
        again = tmp_path / "again"
        assert main(["mix", "--out", str(again), "--seed", "3", *SMALL_MIX]) == 0
        assert (again / "checksums.txt").read_bytes() == (corpus_dir / "checksums.txt").read_bytes()
        assert (again / "metadata.csv").read_bytes() == (corpus_dir / "metadata.csv").read_bytes()

    def test_invalid_ssr_range(self, tmp_path, capsys):
        code = main(["mix", "--out", str(tmp_path / "x"), "--set", "ssr_min_db=5", "--set", "ssr_max_db=0"])
        assert code == 2
        assert "SSR" in capsys.readouterr().err


class TestStats:
    def test_passthrough(self, corpus_dir, tmp_path, capsys):
        out = tmp_path / "st"
        assert main(["stats", "--set", f"corpus={corpus_dir}", "--set", "split=train", "--out", str(out)]) == 0
        expected = length_stats([r.length_samples for r in load_records(corpus_dir, "train")], sample_rate_hz=8000)
        assert (out / "length_density.csv").read_text() == expected.density_csv()
        assert (out / "length_stats.csv").read_text() == expected.summary_csv()
        assert f"mean: {expected.mean_s:.4f} s" in capsys.readouterr().out

    def test_empty_split(self, tmp_path):
        root = tmp_path / "c"
        assert main(["mix", "--out", str(root), "--set", "n_train=2", "--set", "n_dev=0", "--set", "n_test=0"]) == 0
        assert main(["stats", "--set", f"corpus={root}", "--set", "split=dev", "--out", str(tmp_path / "s")]) == 3

    def test_missing_corpus(self, tmp_path):
        assert main(["stats", "--out", str(tmp_path)]) == 2
        assert main(["stats", "--set", f"corpus={tmp_path / 'none'}", "--out", str(tmp_path)]) == 2


class TestTrainEvalSweep:
    def test_train_then_eval(self, tmp_path, capsys):
        run = tmp_path / "run"
        assert main(["train", "--out", str(run), "--seed", "1", *FAST_TRAIN]) == 0
        assert (run / "model.ckpt").is_file()
        assert len((run / "epochs.csv").read_text().splitlines()) == 3
        assert (run / "config.txt").is_file()
        ev = tmp_path / "ev"
        args = ["eval", "--out", str(ev), "--set", f"checkpoint={run / 'model.ckpt'}", "--set", "toy_test=8",
                "--set", "toy_length_s=0.1"]
        capsys.readouterr()
        assert main(args) == 0
        out = capsys.readouterr().out
        assert "mean delta SI-SDR" in out and "Q4" in out
        assert len((ev / "eval.csv").read_text().splitlines()) == 9

    def test_train_idempotent(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(["train", "--out", str(a), *FAST_TRAIN]) == 0
        assert main(["train", "--out", str(b), *FAST_TRAIN]) == 0
        assert (a / "epochs.csv").read_bytes() == (b / "epochs.csv").read_bytes()
        assert (a / "model.ckpt").read_bytes() == (b / "model.ckpt").read_bytes()

    def test_train_on_corpus_with_dynamic_mixing(self, corpus_dir, tmp_path):
        args = ["train", "--out", str(tmp_path / "dm"), "--set", f"data={corpus_dir}", "--set", "dynamic_mixing=true",
                "--set", "epochs=1", "--set", "t_lim_s=0.5", "--set", "n_enc_channels=16",
                "--set", "bottleneck_channels=8", "--set", "conv_channels=16", "--set", "blocks_per_stack=2"]
        assert main(args) == 0

    def test_dynamic_mixing_needs_corpus(self, tmp_path):
        assert main(["train", "--out", str(tmp_path), "--set", "dynamic_mixing=true", *FAST_TRAIN]) == 2

    def test_eval_missing_checkpoint(self, tmp_path):
        assert main(["eval", "--set", f"checkpoint={tmp_path / 'none.ckpt'}", "--out", str(tmp_path)]) == 3
        assert main(["eval", "--out", str(tmp_path)]) == 2

    def test_sweep_rows(self, tmp_path):
        out = tmp_path / "sw"
        assert main(["sweep", "--out", str(out), *FAST_TRAIN, "--set", "epochs=1", "--set", "positions=0,2,3"]) == 0
        lines = (out / "sweep.csv").read_text().splitlines()
        assert lines[0] == "position,delta_si_sdr_db,params,rf_seconds"
        assert [l.split(",")[0] for l in lines[1:]] == ["0", "2", "3"]

    def test_sweep_bad_position(self, tmp_path):
        assert main(["sweep", "--out", str(tmp_path), *FAST_TRAIN, "--set", "positions=9"]) == 2

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_non_finite_is_runtime_error(self, tmp_path):
        assert main(["train", "--out", str(tmp_path), *FAST_TRAIN, "--set", "lr=1e300"]) == 3
