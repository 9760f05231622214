"""Command-line behavior: exit codes, artifacts, config precedence."""

import json
import os

import numpy as np
import pytest

from refinery.autodiff import Tensor, no_grad
from refinery.cli import CONFIG_KEYS, RESOLVED_NAME, main
from refinery.datasets import load_manifest, write_toy_dataset
from refinery.imageio import read_ppm
from refinery.model import RefinementConfig
from refinery.priors import read_prior
from refinery.train import TrainConfig, load_joint

SMALL_FLAGS = ["--channels", "8", "--prior-dim", "16", "--attn-downsample", "2"]
SMALL_MODEL = RefinementConfig(channels=8, prior_dim=16, attn_downsample=2)


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cliws")
    train_m = write_toy_dataset(str(root / "train"), count=6, size=16, seed=3)
    val_m = write_toy_dataset(str(root / "val"), count=3, size=16, seed=4)
    return root, train_m, val_m


@pytest.fixture(scope="module")
def trained(workspace):
    root, train_m, val_m = workspace
    out = root / "run"
    code = main(["train", *SMALL_FLAGS, "--epochs", "1", "--batch-size", "3",
                 "--train-manifest", train_m, "--val-manifest", val_m,
                 "--out-dir", str(out)])
    assert code == 0
    return root, val_m, str(out / "checkpoint.ptgc")


class TestDispatch:
    def test_no_subcommand_exits_one(self, capsys):
        assert main([]) == 1
        assert "subcommand" in capsys.readouterr().err

    def test_unknown_subcommand_exits_one(self, capsys):
        with pytest.raises(SystemExit) as err:
            main(["frobnicate"])
        assert err.value.code == 1

    def test_unknown_flag_exits_one(self):
        with pytest.raises(SystemExit) as err:
            main(["train", "--no-such-flag"])
        assert err.value.code == 1


class TestGradcheckCommand:
    def test_small_run_passes(self, capsys):
        assert main(["gradcheck", "--instances", "1", "--seed", "0"]) == 0
        out = capsys.readouterr().out
        assert "gradient cases within" in out


class TestTrainCommand:
    def test_artifacts_and_log_shape(self, trained, capsys):
        root, _, checkpoint = trained
        run_dir = os.path.dirname(checkpoint)
        names = sorted(os.listdir(run_dir))
        assert names == [os.path.basename(checkpoint), RESOLVED_NAME, "train_log.txt"]
        lines = open(os.path.join(run_dir, "train_log.txt")).read().splitlines()
        assert len(lines) == 2           # untrained row + one epoch
        assert lines[0].startswith("0, ")
        assert len(lines[0].split(", ")) == 6

    def test_resolved_config_records_merged_values(self, trained):
        _, _, checkpoint = trained
        resolved = json.load(open(os.path.join(os.path.dirname(checkpoint), RESOLVED_NAME)))
        assert resolved["channels"] == 8
        assert resolved["epochs"] == 1
        assert set(resolved) == set(CONFIG_KEYS)

    def test_missing_required_settings_exit_one(self, capsys):
        assert main(["train"]) == 1
        assert "missing required settings" in capsys.readouterr().err

    def test_missing_manifest_file_exits_two(self, workspace, capsys):
        root, _, val_m = workspace
        assert main(["train", *SMALL_FLAGS, "--epochs", "1",
                     "--train-manifest", str(root / "ghost.txt"),
                     "--val-manifest", val_m, "--out-dir", str(root / "x")]) == 2


class TestConfigFile:
    def test_file_values_used_and_flags_override(self, workspace, capsys):
        root, train_m, val_m = workspace
        cfg = {"channels": 8, "prior_dim": 16, "attn_downsample": 2,
               "epochs": 99, "batch_size": 3,
               "train_manifest": train_m, "val_manifest": val_m,
               "out_dir": str(root / "cfgrun")}
        cfg_path = root / "cfg.json"
        cfg_path.write_text(json.dumps(cfg))
        assert main(["train", "--config", str(cfg_path), "--epochs", "1"]) == 0
        resolved = json.load(open(root / "cfgrun" / RESOLVED_NAME))
        assert resolved["epochs"] == 1          # flag beat the file
        assert resolved["prior_dim"] == 16      # file beat the default
        log = open(root / "cfgrun" / "train_log.txt").read().splitlines()
        assert len(log) == 2

    def test_unknown_key_exits_one(self, workspace, capsys):
        root, *_ = workspace
        p = root / "bad1.json"
        p.write_text(json.dumps({"channles": 8}))
        assert main(["train", "--config", str(p)]) == 1
        assert "unknown config keys" in capsys.readouterr().err

    def test_boolean_for_number_exits_one(self, workspace, capsys):
        root, *_ = workspace
        p = root / "bad2.json"
        p.write_text(json.dumps({"epochs": True}))
        assert main(["train", "--config", str(p)]) == 1

    def test_malformed_json_exits_two(self, workspace, capsys):
        root, *_ = workspace
        p = root / "bad3.json"
        p.write_text("{not json")
        assert main(["train", "--config", str(p)]) == 2


class TestEvalCommand:
    def test_scores_checkpoint(self, trained, capsys):
        root, val_m, checkpoint = trained
        out = root / "evalout"
        code = main(["eval", *SMALL_FLAGS, "--checkpoint", checkpoint,
                     "--val-manifest", val_m, "--out-dir", str(out)])
        assert code == 0
        text = capsys.readouterr().out
        assert "baseline" in text and "refined" in text
        metrics = (out / "metrics.txt").read_text()
        assert "psnr=" in metrics and "ssim=" in metrics

    def test_missing_checkpoint_exits_two(self, workspace, trained, capsys):
        root, _, val_m = workspace
        assert main(["eval", *SMALL_FLAGS, "--checkpoint", str(root / "ghost.ptgc"),
                     "--val-manifest", val_m]) == 2


class TestRefineCommand:
    def test_writes_three_images(self, workspace, trained, capsys):
        root, train_m, _ = workspace
        _, _, checkpoint = trained
        image = load_manifest(train_m)[0][0]
        out = root / "refineout"
        code = main(["refine", *SMALL_FLAGS, "--checkpoint", checkpoint,
                     "--image", image, "--out-dir", str(out)])
        assert code == 0
        for name in ("refined.ppm", "mask.ppm", "residual.ppm"):
            img = read_ppm(str(out / name))
            assert img.shape == (16, 16, 3)

    def test_forced_passthrough_recovers_baseline(self, workspace, trained):
        root, train_m, _ = workspace
        _, _, checkpoint = trained
        image = load_manifest(train_m)[1][0]
        out = root / "forcedout"
        code = main(["refine", *SMALL_FLAGS, "--checkpoint", checkpoint,
                     "--image", image, "--out-dir", str(out),
                     "--force-mask", "1", "--force-residual", "0"])
        assert code == 0
        model = load_joint(checkpoint, SMALL_MODEL, TrainConfig())
        with no_grad():
            i_hat = model.baseline(Tensor(read_ppm(image)))
        expected = np.clip(i_hat.data, 0.0, 1.0)
        got = read_ppm(str(out / "refined.ppm"))
        assert np.abs(got - expected).max() <= 1.0 / 255.0 + 1e-7

    def test_explicit_prior_file(self, workspace, trained):
        root, train_m, _ = workspace
        _, _, checkpoint = trained
        image = load_manifest(train_m)[2][0]
        pri_dir = root / "pri"
        assert main(["stub-priors", "--manifest", train_m, "--prior-dim", "16",
                     "--out-dir", str(pri_dir)]) == 0
        prior_path = load_manifest(str(pri_dir / "manifest_with_priors.txt"))[2][1]
        out = root / "priorout"
        assert main(["refine", *SMALL_FLAGS, "--checkpoint", checkpoint,
                     "--image", image, "--prior", prior_path,
                     "--out-dir", str(out)]) == 0

    def test_missing_image_flag_exits_one(self, trained, capsys):
        _, _, checkpoint = trained
        assert main(["refine", *SMALL_FLAGS, "--checkpoint", checkpoint,
                     "--out-dir", "/tmp/nowhere"]) == 1
        assert "--image" in capsys.readouterr().err


class TestStubPriorsCommand:
    def test_outputs_parse_and_match_dim(self, workspace, capsys):
        root, train_m, _ = workspace
        out = root / "stubs"
        assert main(["stub-priors", "--manifest", train_m, "--prior-dim", "16",
                     "--out-dir", str(out)]) == 0
        rows = load_manifest(str(out / "manifest_with_priors.txt"))
        assert len(rows) == 6
        for clean_path, prior_path in rows:
            assert os.path.exists(clean_path)
            assert read_prior(prior_path).dim == 16


class TestAblateCommand:
    def test_two_setting_study(self, workspace, capsys):
        root, train_m, val_m = workspace
        out = root / "ablrun"
        code = main(["ablate", *SMALL_FLAGS, "--epochs", "1", "--batch-size", "3",
                     "--variants", "no_ca",
                     "--train-manifest", train_m, "--val-manifest", val_m,
                     "--out-dir", str(out)])
        assert code == 0
        table = (out / "ablation.txt").read_text().splitlines()
        assert table[0].startswith("setting")
        assert [row.split()[0] for row in table[1:]] == ["full", "no_ca"]

    def test_unknown_variant_exits_one(self, workspace, capsys):
        root, train_m, val_m = workspace
        assert main(["ablate", *SMALL_FLAGS, "--variants", "bogus",
                     "--train-manifest", train_m, "--val-manifest", val_m,
                     "--out-dir", str(root / "x")]) == 1
