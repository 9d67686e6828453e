"""End-to-end command-line runs at toy scale (seconds, not minutes)."""

import csv
import os

import pytest
import torch

from relayjscc.cli import main
from relayjscc.codec import CodecBundle
from relayjscc.data import DATA_ROOT_ENV

TINY = [
    "--set", "train.max_epochs=2",
    "--set", "dataset.n_train=64",
    "--set", "dataset.n_val=16",
    "--set", "dataset.n_test=16",
]


def _run(capsys, *argv) -> str:
    """Invoke the CLI and return the printed run directory."""
    assert main(list(argv)) == 0
    return capsys.readouterr().out.strip().splitlines()[-1]


def _read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture()
def out(tmp_path):
    return str(tmp_path / "runs")


class TestTrain:
    def test_smoke_writes_loadable_checkpoint(self, capsys, out):
        run = _run(capsys, "train", "--profile", "toy", *TINY, "--out", out)
        bundle = CodecBundle.load(os.path.join(run, "checkpoint", "model_best"))
        assert bundle.meta["mode"] == "hd_pf"
        assert os.path.exists(os.path.join(run, "resolved_config.yaml"))
        assert os.path.exists(os.path.join(run, "summary.json"))

    def test_rerun_reproduces_metrics(self, capsys, out):
        run1 = _run(capsys, "train", "--profile", "toy", *TINY, "--out", out)
        run2 = _run(capsys, "train", "--profile", "toy", *TINY, "--out", out)
        assert run1 != run2  # fresh directory, previous run untouched
        m1 = _read_csv(os.path.join(run1, "checkpoint", "metrics.csv"))
        m2 = _read_csv(os.path.join(run2, "checkpoint", "metrics.csv"))
        # seconds is wall clock; the learned quantities must match exactly
        keys = ("epoch", "train_loss", "val_loss", "lr")
        assert [[r[k] for k in keys] for r in m1] == [[r[k] for k in keys] for r in m2]

    def test_run_dirs_increment_and_do_not_mutate(self, capsys, out):
        run1 = _run(capsys, "train", "--profile", "toy", *TINY, "--out", out)
        before = {
            p: os.path.getmtime(os.path.join(dp, f))
            for dp, _, fs in os.walk(run1)
            for f in fs
            for p in [os.path.join(dp, f)]
        }
        run2 = _run(capsys, "train", "--profile", "toy", *TINY, "--out", out)
        after = {p: os.path.getmtime(p) for p in before}
        assert after == before
        assert run1.endswith("-001") and run2.endswith("-002")

    def test_missing_dataset_exits_nonzero_with_no_run_dir(self, capsys, out, monkeypatch):
        monkeypatch.delenv(DATA_ROOT_ENV, raising=False)
        code = main(["train", "--profile", "toy", "--set", "dataset={name: cifar10}", "--out", out])
        assert code != 0
        assert "dataset root" in capsys.readouterr().err
        assert not os.path.exists(out) or os.listdir(out) == []

    def test_invalid_config_exits_nonzero_with_field_message(self, capsys, out):
        code = main(["train", "--profile", "toy", "--set", "train.lr_decay=1.5", "--out", out])
        assert code != 0
        assert "lr_decay" in capsys.readouterr().err


class TestEval:
    @pytest.fixture()
    def checkpoint(self, capsys, out):
        return _run(capsys, "train", "--profile", "toy", *TINY, "--out", out)

    def test_grid_rows(self, capsys, out, checkpoint):
        run = _run(
            capsys, "eval", "--profile", "toy", *TINY, "--checkpoint", checkpoint,
            "--c-sr-db", "0,10", "--c-rd-db", "0,10", "--out", out,
        )
        rows = _read_csv(os.path.join(run, "grid.csv"))
        assert len(rows) == 4
        assert {(r["c_sr_db"], r["c_rd_db"]) for r in rows} == {
            ("0.0", "0.0"), ("0.0", "10.0"), ("10.0", "0.0"), ("10.0", "10.0")
        }
        assert all(float(r["psnr"]) > 5 for r in rows)
        assert os.path.exists(os.path.join(run, "grid.png"))
        assert os.path.exists(os.path.join(run, "reports", "point_03.jsonl"))

    def test_single_point_gives_one_row(self, capsys, out, checkpoint):
        run = _run(
            capsys, "eval", "--profile", "toy", *TINY, "--checkpoint", checkpoint,
            "--c-sr-db", "10", "--c-rd-db", "10", "--out", out,
        )
        assert len(_read_csv(os.path.join(run, "grid.csv"))) == 1

    def test_codec_mismatch_rejected(self, capsys, out, checkpoint):
        code = main([
            "eval", "--profile", "toy", *TINY, "--set", "codec.la_enabled=true",
            "--checkpoint", checkpoint, "--out", out,
        ])
        assert code != 0
        assert "mismatch" in capsys.readouterr().err

    def test_mode_mismatch_rejected(self, capsys, out, checkpoint):
        code = main([
            "eval", "--profile", "toy", "--mode", "hd_af", *TINY,
            "--checkpoint", checkpoint, "--out", out,
        ])
        assert code != 0
        err = capsys.readouterr().err
        assert "hd_af" in err and "hd_pf" in err

    def test_missing_checkpoint_rejected(self, capsys, out, tmp_path):
        code = main(["eval", "--profile", "toy", *TINY, "--checkpoint", str(tmp_path / "nope"), "--out", out])
        assert code != 0
        assert "manifest" in capsys.readouterr().err


class TestRates:
    def test_grid_schema(self, capsys, out):
        run = _run(
            capsys, "rates", "--c-sr-db", "0,10", "--c-rd-db", "0,10",
            "--step", "0.01", "--out", out,
        )
        rows = _read_csv(os.path.join(run, "rates.csv"))
        assert len(rows) == 4
        assert list(rows[0]) == [
            "c_sr_db", "c_rd_db", "p_s_db", "p_r_db",
            "r_df", "r_cf", "r_star", "alpha", "beta", "gamma",
        ]
        assert os.path.exists(os.path.join(run, "rates.png"))

    def test_no_relay_point_gives_direct_capacity(self, capsys, out):
        run = _run(
            capsys, "rates", "--c-sr-db", "0", "--c-rd-db=-inf",
            "--p-s-db", "0", "--p-r-db", "0", "--step", "0.002", "--out", out,
        )
        (row,) = _read_csv(os.path.join(run, "rates.csv"))
        # c_sd is fixed at 1, so the fallback is 1/2 log2(1 + P_s) = 1/2
        assert float(row["r_star"]) == pytest.approx(0.5, abs=2e-3)


class TestSweeps:
    def test_sweep_alpha_artifacts(self, capsys, out):
        run = _run(
            capsys, "sweep-alpha", "--profile", "toy", *TINY,
            "--alphas", "0.3333333333,0.5", "--out", out,
        )
        rows = _read_csv(os.path.join(run, "sweep.csv"))
        assert [r["alpha"] for r in rows] == ["0.3333333333", "0.5"]
        assert os.path.exists(os.path.join(run, "sweep.png"))
        assert os.path.exists(os.path.join(run, "summary.json"))
        # the cache is shared: both checkpoints live under <out>/cache
        assert len(os.listdir(os.path.join(out, "cache"))) == 2

    def test_bad_alpha_leaves_no_run_dir(self, capsys, out):
        code = main(["sweep-alpha", "--profile", "toy", *TINY, "--alphas", "0.25", "--out", out])
        assert code != 0
        assert "integral" in capsys.readouterr().err
        assert not os.path.exists(out) or all("sweep" not in d for d in os.listdir(out))

    def test_sweep_b_runs(self, capsys, out):
        run = _run(
            capsys, "sweep-b", "--profile", "toy", "--mode", "fd_pf", *TINY,
            "--blocks", "1,2", "--out", out,
        )
        rows = _read_csv(os.path.join(run, "sweep.csv"))
        assert [r["B"] for r in rows] == ["1", "2"]

    def test_sweep_memory_runs(self, capsys, out):
        run = _run(
            capsys, "sweep-memory", "--profile", "toy", "--mode", "fd_pf", *TINY,
            "--blocks", "3", "--memories", "1,2", "--out", out,
        )
        rows = _read_csv(os.path.join(run, "sweep.csv"))
        assert [r["t"] for r in rows] == ["1", "2"]


class TestTimingAndPlot:
    def test_timing_report(self, capsys, out):
        run = _run(
            capsys, "timing", "--profile", "toy", *TINY,
            "--batch", "4", "--repeats", "2", "--out", out,
        )
        rows = _read_csv(os.path.join(run, "timing.csv"))
        assert [r["stage"] for r in rows] == ["encode", "relay", "decode"]
        assert all(float(r["per_image_s"]) > 0 for r in rows)

    def test_plot_verb(self, capsys, out, tmp_path):
        run = _run(
            capsys, "rates", "--c-sr-db", "0", "--c-rd-db", "0",
            "--step", "0.01", "--out", out,
        )
        figure = tmp_path / "fig.png"
        code = main([
            "plot", "--input", os.path.join(run, "rates.csv"),
            "--kind", "rates", "--figure", str(figure),
        ])
        assert code == 0 and figure.exists()


class TestOverridePlumbing:
    def test_overrides_reach_training(self, capsys, out):
        run = _run(
            capsys, "train", "--profile", "toy", *TINY,
            "--set", "train.seed=7", "--out", out,
        )
        bundle = CodecBundle.load(os.path.join(run, "checkpoint", "model_best"))
        assert isinstance(bundle, CodecBundle)
        with open(os.path.join(run, "resolved_config.yaml")) as fh:
            assert "seed: 7" in fh.read()

    def test_seed_changes_weights(self, capsys, out):
        run1 = _run(capsys, "train", "--profile", "toy", *TINY, "--out", out)
        run2 = _run(capsys, "train", "--profile", "toy", *TINY, "--set", "train.seed=7", "--out", out)
        b1 = CodecBundle.load(os.path.join(run1, "checkpoint", "model_best"))
        b2 = CodecBundle.load(os.path.join(run2, "checkpoint", "model_best"))
        p1 = torch.cat([p.flatten() for p in b1.source.parameters()])
        p2 = torch.cat([p.flatten() for p in b2.source.parameters()])
        assert not torch.equal(p1, p2)
