import numpy as np
import pytest

from minusface.attack import attack_protected
from minusface.data import SPLIT_DEFENDER_TEST
from minusface.errors import InvalidArgumentError
from minusface.evaluation import (
    evaluate_verification,
    placeholder_generator,
    run_ablation,
    stage2_evaluation,
    summarize_logs,
)
from minusface.models import AttackConfig, EpochLog, ProtectorConfig
from minusface.nn.network import build_recognizer
from minusface.perturb import derive_seed
from minusface.pipeline import Protector

from tests.conftest import DESK_PAIRS, DESK_SEED


def test_verification_on_raw_images(toy_dataset):
    f, _ = build_recognizer(3, 8, 4, base_width=4)
    images, labels = toy_dataset.arrays("defender-test")
    result, tpr = evaluate_verification(f, images, labels, n_pairs=6, seed=0)
    assert result.pairs == 6
    assert 0.5 <= result.accuracy <= 1.0
    assert 0.0 <= tpr <= 1.0


def test_stage2_metrics(toy_dataset, tiny_train_cfg, frozen_haar_generator, haar_cfg):
    f_p, _ = build_recognizer(3, 8, 2, base_width=4)
    metrics = stage2_evaluation(toy_dataset, Protector(frozen_haar_generator, haar_cfg), f_p, n_pairs=6)
    assert set(metrics) == {"protected_accuracy", "protected_threshold", "protected_tpr_at_fpr", "seed_consistency"}
    assert 0.0 <= metrics["seed_consistency"] <= 1.0


def test_placeholder_generator_is_frozen(tiny_train_cfg, haar_cfg):
    g = placeholder_generator(haar_cfg, tiny_train_cfg)
    assert g.is_frozen
    assert g.spec.in_channels == 12


def test_unknown_ablation(toy_dataset, tiny_train_cfg, haar_cfg):
    with pytest.raises(InvalidArgumentError):
        run_ablation("bogus", toy_dataset, tiny_train_cfg, haar_cfg)


def test_residue_ablation(toy_dataset, tiny_train_cfg, haar_cfg):
    metrics = run_ablation("r", toy_dataset, tiny_train_cfg, haar_cfg, n_pairs=6)
    assert "ablation_r_mean_residue_l1" in metrics
    assert metrics["ablation_r_mean_image_l1"] > 0
    assert 0.5 <= metrics["ablation_r_r_accuracy"] <= 1.0


@pytest.mark.slow
def test_no_subtraction_ablation(toy_dataset, tiny_train_cfg, haar_cfg, tiny_attack_cfg):
    metrics = run_ablation("no-subtraction", toy_dataset, tiny_train_cfg, haar_cfg,
                           attack_cfg=tiny_attack_cfg, n_pairs=6)
    assert "ablation_no_subtraction_attack_ssim" in metrics


def test_log_summary():
    logs = [EpochLog(epoch=0, lr=0.01, l_total=2.0), EpochLog(epoch=1, lr=0.01, l_total=1.0, accuracy=0.5)]
    summary = summarize_logs(logs)
    assert summary["epochs"] == 2
    assert summary["first_l_total"] == 2.0
    assert summary["final_accuracy"] == 0.5
    assert summarize_logs([]) == {}


# ----------------------------------------------------------------------
# Desk-scale ablation contrasts
# ----------------------------------------------------------------------

@pytest.mark.slow
def test_desk_masking_loses_utility_against_shuffling(
    desk_dataset, desk_train_cfg, desk_protector_cfg, desk_stage1, desk_protector, desk_stage2
):
    shuffle = stage2_evaluation(desk_dataset, desk_protector, desk_stage2.model, DESK_PAIRS, DESK_SEED)
    mask = run_ablation("mask", desk_dataset, desk_train_cfg, desk_protector_cfg,
                        stage1=desk_stage1, n_pairs=DESK_PAIRS, seed=DESK_SEED)
    assert mask["ablation_mask_protected_accuracy"] < shuffle["protected_accuracy"]


@pytest.mark.slow
def test_desk_no_subtraction_is_easier_to_invert(
    desk_dataset, desk_train_cfg, desk_protector_cfg, desk_protector, desk_random_attacker
):
    ablation = run_ablation("no-subtraction", desk_dataset, desk_train_cfg, desk_protector_cfg,
                            attack_cfg=AttackConfig(), n_pairs=DESK_PAIRS, seed=DESK_SEED)
    images, _ = desk_dataset.arrays(SPLIT_DEFENDER_TEST)
    shuffled = attack_protected(desk_random_attacker, desk_protector, images,
                                seed_base=derive_seed(DESK_SEED, 0xA77))
    assert ablation["ablation_no_subtraction_attack_ssim"] >= shuffled.ssim_mean + 0.3


@pytest.mark.slow
def test_desk_haar_pipeline_beats_chance(desk_dataset, desk_train_cfg, desk_protector_cfg):
    metrics = run_ablation("dwt", desk_dataset, desk_train_cfg, desk_protector_cfg,
                           n_pairs=DESK_PAIRS, seed=DESK_SEED)
    assert metrics["ablation_dwt_protected_accuracy"] >= 0.7
