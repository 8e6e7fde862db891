import json

import numpy as np
import pytest

from cli import build_parser, run_command
from cli.commands import resolve_configs
from config.config import active_config as Config
from minusface.data import save_image
from minusface.models import MappingSpec
from minusface.nn.network import build_recognizer
from minusface.storage import read_representation, save_model, write_report

QUIET = ["--log-file", "", "--log-level", "WARNING"]


def run(*argv):
    return run_command(QUIET + [str(a) for a in argv])


def test_usage_errors_exit_two(capsys):
    assert run("no-such-command") == 2
    assert run("gen-data", "--bogus") == 2
    assert run("gen-data") == 2
    assert run("--help") == 0


def test_bad_seed_is_a_usage_error():
    assert run("protect", "--image", "a.png", "--gen", "g.mfck", "--seed", "0xZZ", "--out", "p.mfrp") == 2


def test_gen_data(tmp_path, capsys):
    assert run("gen-data", "--ids", 4, "--per-id", 6, "--size", 16, "--seed", 3, "--out", tmp_path / "data") == 0
    assert (tmp_path / "data" / "manifest.txt").exists()
    assert "24 images" in capsys.readouterr().out


def test_check_invariants(tmp_path, capsys):
    code = run("check-invariants", "--mapping", "haar2", "--suites", "codec,perturb", "--samples", 4, "--seeds", 300,
               "--out", tmp_path / "table.txt")
    assert code == 0
    assert "FAIL" not in (tmp_path / "table.txt").read_text()
    assert "passed" in capsys.readouterr().out


def test_unknown_suite_fails(capsys):
    assert run("check-invariants", "--suites", "codec,colour") == 1
    assert "error:" in capsys.readouterr().err


@pytest.fixture
def generator_file(tmp_path, frozen_haar_generator):
    path = tmp_path / "g.mfck"
    save_model(path, frozen_haar_generator, mapping=MappingSpec.parse("haar2"))
    return path


@pytest.fixture
def image_file(tmp_path, toy_dataset):
    path = tmp_path / "face.png"
    save_image(toy_dataset.images[0], path)
    return path


def test_protect_writes_spatial_representation(tmp_path, generator_file, image_file, capsys):
    out = tmp_path / "face.mfrp"
    code = run("protect", "--image", image_file, "--gen", generator_file, "--seed", "0xDEAD",
               "--out", out, "--preview", tmp_path / "preview.png")
    assert code == 0
    assert out.stat().st_size == 3 * 16 * 16 * 4 + 19
    assert read_representation(out).spatial
    assert (tmp_path / "preview.png").exists()
    assert "12-channel residue" in capsys.readouterr().out


def test_protect_missing_image(tmp_path, generator_file, capsys):
    code = run("protect", "--image", tmp_path / "missing.png", "--gen", generator_file, "--seed", 1,
               "--out", tmp_path / "p.mfrp")
    assert code == 1
    assert "missing.png" in capsys.readouterr().err


def test_enroll_then_verify(tmp_path, generator_file, image_file, capsys):
    recognizer, head = build_recognizer(3, 8, 2, base_width=4)
    save_model(tmp_path / "fp.mfck", recognizer, head)
    for seed in (1, 2):
        assert run("protect", "--image", image_file, "--gen", generator_file, "--seed", seed,
                   "--out", tmp_path / f"p{seed}.mfrp") == 0
    templates = tmp_path / "templates.npz"
    assert run("enroll", "--recognizer", tmp_path / "fp.mfck", "--identity", "alice",
               "--inputs", tmp_path / "p1.mfrp", "--templates", templates) == 0
    capsys.readouterr()
    assert run("verify", "--recognizer", tmp_path / "fp.mfck", "--templates", templates,
               "--identity", "alice", "--probe", tmp_path / "p1.mfrp", "--threshold", 0.5) == 0
    assert capsys.readouterr().out.startswith("MATCH")
    assert run("verify", "--recognizer", tmp_path / "fp.mfck", "--templates", templates,
               "--identity", "bob", "--probe", tmp_path / "p2.mfrp") == 1


def test_config_precedence(tmp_path):
    config = tmp_path / "cfg.json"
    config.write_text(json.dumps({"epochs": 5, "init_seed": 3, "alpha": 2.0, "attack_epochs": 6}))
    args = build_parser().parse_args(
        ["train-stage1", "--data", "d", "--out", "o", "--config", str(config), "--epochs", "4", "--shuffle-seed", "9"])
    train, protector, attack = resolve_configs(args)
    assert train.epochs == 4
    assert train.seeds.init == 3
    assert train.seeds.shuffle == 9
    assert train.seeds.data == Config.DATA_SEED
    assert all(1 <= d < 4 for d in train.lr_drop_epochs)
    assert protector.alpha == 2.0
    assert attack.epochs == 6
    assert attack.init_seed == 3


def test_report_aggregates_runs(tmp_path, capsys):
    write_report(tmp_path / "runs" / "desk" / "stage1_report.txt", {"mean_residue_l1": 0.1})
    write_report(tmp_path / "runs" / "desk" / "stage2_report.txt", {"protected_accuracy": 0.8, "baseline_accuracy": 0.9})
    write_report(tmp_path / "runs" / "desk" / "attack_report.txt", {"mode": "random", "ssim_mean": 0.3, "floor_ssim": 0.2})
    assert run("report", "--runs", tmp_path / "runs", "--out", tmp_path / "summary.txt") == 0
    text = (tmp_path / "summary.txt").read_text()
    assert text.startswith("Recognition accuracy")
    assert "Recovery attacks" in text and "Blank residue" in text
    assert "mean_residue_l1" in text


def test_report_without_runs(tmp_path):
    (tmp_path / "empty").mkdir()
    assert run("report", "--runs", tmp_path / "empty") == 1


@pytest.mark.slow
def test_stage1_command(tmp_path, capsys):
    data = tmp_path / "data"
    assert run("gen-data", "--ids", 4, "--per-id", 6, "--size", 16, "--seed", 0, "--out", data) == 0
    code = run("train-stage1", "--data", data, "--out", tmp_path / "run", "--mapping", "haar2",
               "--epochs", 1, "--batch-size", 8, "--generator-width", 4, "--recognizer-width", 4,
               "--embedding-dim", 8, "--pairs", 6)
    assert code == 0
    for name in ("g.mfck", "g.json", "f.mfck", "stage1_log.txt", "stage1_report.txt"):
        assert (tmp_path / "run" / name).exists()
