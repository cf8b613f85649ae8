import numpy as np
import pytest

from aiqn import ConfigError, Gaussian
from aiqn.cli import main
from aiqn.config import (ExperimentConfig, build_dist, parse_config,
                         render_config, resolve_config)
from aiqn.tensor_io import read_tensor, write_tensor


class TestConfigFormat:
    def test_parse_types_and_comments(self):
        cfg = parse_config("""
            # a comment
            task = scalar-analytic
            dist = exponential   # trailing comment
            lam = 2.5
            steps = 100
            autoregressive = false
        """)
        assert cfg.task == "scalar-analytic"
        assert cfg.dist == "exponential"
        assert cfg.lam == 2.5
        assert cfg.steps == 100
        assert cfg.autoregressive is False

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError):
            parse_config("no_such_key = 1")

    def test_duplicate_key_rejected(self):
        with pytest.raises(ConfigError):
            parse_config("steps = 1\nsteps = 2")

    def test_bad_value_rejected(self):
        with pytest.raises(ConfigError):
            parse_config("steps = many")
        with pytest.raises(ConfigError):
            parse_config("autoregressive = maybe")

    def test_round_trip(self):
        cfg = ExperimentConfig(task="bars8x8", steps=123, lr=3e-4, kappa=0.01)
        text = render_config(cfg)
        assert parse_config(text) == cfg
        # Rendering is canonical.
        assert render_config(parse_config(text)) == text

    def test_resolve_fills_architecture(self):
        cfg = resolve_config(ExperimentConfig(task="bars8x8"))
        assert cfg.hidden_sizes == "256,256,256"
        assert cfg.head_width == 256
        cfg = resolve_config(ExperimentConfig(task="scalar-analytic"))
        assert cfg.hidden_sizes == "64,64"

    def test_build_dist(self):
        assert build_dist(ExperimentConfig(dist="gaussian", mu=3, sigma=2)) == Gaussian(3, 2)
        mix = build_dist(ExperimentConfig(dist="mixture", mixture_weights="0.5,0.5",
                                          mixture_mus="0,4", mixture_sigmas="1,1"))
        assert mix.mean() == pytest.approx(2.0)
        with pytest.raises(ConfigError):
            build_dist(ExperimentConfig(dist="mixture"))


def write_cfg(tmp_path, text, name="exp.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


SCALAR_CFG = """
task = scalar-analytic
dist = gaussian
mu = 0.0
sigma = 1.0
count = 512
hidden_sizes = 16,16
head_width = 8
lr = 0.002
batch_size = 32
steps = 150
polyak = 0.99
seed = 7
"""


class TestCli:
    def test_gen_data_deterministic(self, tmp_path):
        cfg = write_cfg(tmp_path, SCALAR_CFG)
        for sub in ("a", "b"):
            assert main(["gen-data", "--config", cfg, "--out", str(tmp_path / sub)]) == 0
        b1 = (tmp_path / "a" / "dataset.aiqt").read_bytes()
        b2 = (tmp_path / "b" / "dataset.aiqt").read_bytes()
        assert b1 == b2

    def test_gen_data_seed_override(self, tmp_path):
        cfg = write_cfg(tmp_path, SCALAR_CFG)
        main(["gen-data", "--config", cfg, "--out", str(tmp_path / "a")])
        main(["gen-data", "--config", cfg, "--out", str(tmp_path / "b"), "--seed", "99"])
        assert (tmp_path / "a" / "dataset.aiqt").read_bytes() != \
            (tmp_path / "b" / "dataset.aiqt").read_bytes()

    def test_full_pipeline(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, SCALAR_CFG)
        out = str(tmp_path / "run")
        assert main(["gen-data", "--config", cfg, "--out", out]) == 0
        assert main(["train", "--config", cfg, "--out", out]) == 0
        ckpt = str(tmp_path / "run" / "checkpoint.aiqn")
        assert main(["sample", "--config", cfg, "--out", out,
                     "--checkpoint", ckpt, "--count", "32"]) == 0
        samples, seed = read_tensor(tmp_path / "run" / "samples.aiqt")
        assert samples.shape == (32, 1)
        assert seed == 7
        assert main(["eval", "--config", cfg, "--out", out,
                     "--checkpoint", ckpt, "--samples", "128"]) == 0
        eval_text = (tmp_path / "run" / "eval.csv").read_text()
        assert eval_text.startswith("metric,value,samples,seed\n")
        assert "w1_dim0" in eval_text

    def test_train_determinism_end_to_end(self, tmp_path):
        cfg = write_cfg(tmp_path, SCALAR_CFG)
        blobs = {}
        for sub in ("r1", "r2"):
            out = str(tmp_path / sub)
            main(["gen-data", "--config", cfg, "--out", out])
            main(["train", "--config", cfg, "--out", out])
            blobs[sub] = ((tmp_path / sub / "checkpoint.aiqn").read_bytes(),
                          (tmp_path / sub / "metrics.csv").read_bytes())
        assert blobs["r1"] == blobs["r2"]

    def test_missing_dataset_exit_2(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, SCALAR_CFG)
        code = main(["train", "--config", cfg, "--out", str(tmp_path / "empty")])
        assert code == 2
        assert "dataset" in capsys.readouterr().err

    def test_dry_run_round_trips(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, SCALAR_CFG)
        assert main(["train", "--config", cfg, "--dry-run"]) == 0
        printed = capsys.readouterr().out
        reparsed = parse_config(printed)
        assert reparsed.steps == 150
        assert reparsed.hidden_sizes == "16,16"
        assert render_config(reparsed) == printed

    def test_unknown_config_key_exit_2(self, tmp_path):
        cfg = write_cfg(tmp_path, "bogus = 1")
        assert main(["gen-data", "--config", cfg]) == 2

    def test_gradcheck_ok_and_fault(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, SCALAR_CFG)
        assert main(["gradcheck", "--config", cfg]) == 0
        assert "max relative error" in capsys.readouterr().out
        assert main(["gradcheck", "--config", cfg, "--inject-fault"]) == 1

    def test_bad_tensor_file_exit_3(self, tmp_path):
        cfg = write_cfg(tmp_path, SCALAR_CFG)
        bad = tmp_path / "run"
        bad.mkdir()
        (bad / "dataset.aiqt").write_bytes(b"garbage")
        assert main(["train", "--config", cfg, "--out", str(bad)]) == 3


BARS_CFG = """
task = bars8x8
count = 64
hidden_sizes = 32,32
head_width = 16
batch_size = 16
steps = 30
polyak = 0.99
seed = 3
"""


class TestCliImages:
    def test_sample_writes_pgms(self, tmp_path):
        cfg = write_cfg(tmp_path, BARS_CFG)
        out = str(tmp_path / "run")
        assert main(["gen-data", "--config", cfg, "--out", out]) == 0
        assert main(["train", "--config", cfg, "--out", out]) == 0
        ckpt = str(tmp_path / "run" / "checkpoint.aiqn")
        assert main(["sample", "--config", cfg, "--out", out, "--checkpoint", ckpt,
                     "--count", "3", "--images"]) == 0
        pgms = sorted((tmp_path / "run").glob("sample_*.pgm"))
        assert len(pgms) == 3
        header = pgms[0].read_bytes()[:15]
        assert header.startswith(b"P5\n8 8\n255\n")

    def test_inpaint_prefix_verbatim_and_deterministic(self, tmp_path):
        cfg = write_cfg(tmp_path, BARS_CFG)
        out = str(tmp_path / "run")
        main(["gen-data", "--config", cfg, "--out", out])
        main(["train", "--config", cfg, "--out", out])
        ckpt = str(tmp_path / "run" / "checkpoint.aiqn")
        data, _ = read_tensor(tmp_path / "run" / "dataset.aiqt")
        prefix_path = tmp_path / "prefix.aiqt"
        write_tensor(prefix_path, data[0, :32], seed=0)
        for sub in ("i1", "i2"):
            assert main(["inpaint", "--config", cfg, "--out", str(tmp_path / sub),
                         "--checkpoint", ckpt, "--prefix-file", str(prefix_path),
                         "--count", "4", "--images"]) == 0
        b1 = (tmp_path / "i1" / "inpaint.aiqt").read_bytes()
        assert b1 == (tmp_path / "i2" / "inpaint.aiqt").read_bytes()
        assert (tmp_path / "i1" / "inpaint_0000.pgm").read_bytes() == \
            (tmp_path / "i2" / "inpaint_0000.pgm").read_bytes()
        completions, _ = read_tensor(tmp_path / "i1" / "inpaint.aiqt")
        np.testing.assert_array_equal(completions[:, :32],
                                      np.tile(data[0, :32], (4, 1)))

    def test_inpaint_bad_prefix_length(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, BARS_CFG)
        out = str(tmp_path / "run")
        main(["gen-data", "--config", cfg, "--out", out])
        main(["train", "--config", cfg, "--out", out])
        ckpt = str(tmp_path / "run" / "checkpoint.aiqn")
        prefix_path = tmp_path / "long.aiqt"
        write_tensor(prefix_path, np.zeros(64), seed=0)
        assert main(["inpaint", "--config", cfg, "--out", out, "--checkpoint", ckpt,
                     "--prefix-file", str(prefix_path)]) == 2
        assert "contiguous prefix" in capsys.readouterr().err

    def test_eval_dimension_mismatch_exit_2(self, tmp_path):
        bars_cfg = write_cfg(tmp_path, BARS_CFG)
        out = str(tmp_path / "run")
        main(["gen-data", "--config", bars_cfg, "--out", out])
        main(["train", "--config", bars_cfg, "--out", out])
        ckpt = str(tmp_path / "run" / "checkpoint.aiqn")
        # Scalar dataset against the bars checkpoint.
        scalar_cfg = write_cfg(tmp_path, SCALAR_CFG, name="s.cfg")
        main(["gen-data", "--config", scalar_cfg, "--out", str(tmp_path / "s")])
        assert main(["eval", "--config", bars_cfg, "--out", out, "--checkpoint", ckpt,
                     "--dataset", str(tmp_path / "s" / "dataset.aiqt")]) == 2
