import numpy as np
import pytest

from minusface.data import generate_toy_dataset
from minusface.errors import InvalidArgumentError, StateError
from minusface.models import AttackConfig, ProtectorConfig, TrainConfig
from minusface.nn.network import build_generator
from minusface.pipeline import Protector
from minusface.train import (
    lr_at_epoch,
    train_recognizer,
    train_recovery,
    train_stage1,
    train_stage2,
)

from minusface.evaluation import baseline_evaluation, run_ablation, stage1_evaluation, stage2_evaluation

from tests.conftest import DESK_PAIRS, DESK_SEED, HAAR


def test_full_scale_schedule():
    cfg = TrainConfig(epochs=24, lr_drop_epochs=[10, 18, 22])
    assert lr_at_epoch(cfg, 0) == pytest.approx(1e-2)
    assert lr_at_epoch(cfg, 9) == pytest.approx(1e-2)
    assert lr_at_epoch(cfg, 10) == pytest.approx(1e-3)
    assert lr_at_epoch(cfg, 18) == pytest.approx(1e-4)
    assert lr_at_epoch(cfg, 23) == pytest.approx(1e-5)


def test_schedule_bounds():
    cfg = TrainConfig(epochs=24, lr_drop_epochs=[10, 18, 22])
    with pytest.raises(InvalidArgumentError):
        lr_at_epoch(cfg, 24)
    with pytest.raises(InvalidArgumentError):
        lr_at_epoch(cfg, -1)


def test_schedule_validation():
    with pytest.raises(ValueError):
        TrainConfig(epochs=10, lr_drop_epochs=[5, 5])
    with pytest.raises(ValueError):
        TrainConfig(epochs=10, lr_drop_epochs=[12])


def test_stage1_returns_frozen_generator(toy_dataset, tiny_train_cfg, haar_cfg):
    result = train_stage1(toy_dataset, tiny_train_cfg, haar_cfg)
    assert result.g.is_frozen
    assert len(result.logs) == 2
    assert [log.lr for log in result.logs] == pytest.approx([1e-2, 1e-3])
    assert all(np.isfinite(log.l_total) for log in result.logs)
    assert len(result.classes) == 2


def test_stage1_is_deterministic(toy_dataset, tiny_train_cfg, haar_cfg):
    a = train_stage1(toy_dataset, tiny_train_cfg, haar_cfg)
    b = train_stage1(toy_dataset, tiny_train_cfg, haar_cfg)
    for name, value in a.g.state_dict().items():
        np.testing.assert_array_equal(b.g.state_dict()[name], value)
    assert a.logs == b.logs


def test_stage1_moves_generator(toy_dataset, tiny_train_cfg, haar_cfg):
    initial = build_generator(HAAR.channels, base_width=4, levels=2, init_seed=0).state_dict()
    trained = train_stage1(toy_dataset, tiny_train_cfg, haar_cfg).g.state_dict()
    assert any(not np.array_equal(trained[name], initial[name]) for name in initial)


def test_zero_beta_leaves_recognizer_untouched(toy_dataset, tiny_train_cfg):
    cfg = ProtectorConfig(mapping=HAAR, beta=0.0)
    first = train_stage1(toy_dataset, tiny_train_cfg.model_copy(update={"epochs": 1, "lr_drop_epochs": []}), cfg)
    second = train_stage1(toy_dataset, tiny_train_cfg, cfg)
    for name, value in first.f.state_dict().items():
        np.testing.assert_array_equal(second.f.state_dict()[name], value)
    np.testing.assert_array_equal(first.head.weight.data, second.head.weight.data)


def test_stage1_on_size_that_is_not_a_multiple_of_16(tiny_train_cfg, haar_cfg):
    dataset = generate_toy_dataset(4, 4, 24, seed=1)
    cfg = tiny_train_cfg.model_copy(update={"epochs": 1, "lr_drop_epochs": []})
    result = train_stage1(dataset, cfg, haar_cfg)
    assert np.isfinite(result.logs[0].l_total)
    images, _ = dataset.arrays("defender-test")
    protected = Protector(result.g, haar_cfg).protect(images[0], seed=5)
    assert protected.shape == (3, 24, 24)
    assert train_stage2(dataset, result.g, cfg, haar_cfg).logs[0].iterations >= 1


def test_stage1_needs_two_identities(toy_dataset, tiny_train_cfg, haar_cfg):
    images, labels = toy_dataset.arrays("defender-train")
    one = labels == labels[0]
    with pytest.raises(InvalidArgumentError):
        train_stage1((images[one], labels[one]), tiny_train_cfg, haar_cfg)


def test_stage2_requires_frozen_generator(toy_dataset, tiny_train_cfg, haar_cfg):
    g = build_generator(HAAR.channels, base_width=4, levels=2)
    with pytest.raises(StateError):
        train_stage2(toy_dataset, g, tiny_train_cfg, haar_cfg)


def test_stage2_trains_on_protected_images(toy_dataset, tiny_train_cfg, haar_cfg, frozen_haar_generator):
    result = train_stage2(toy_dataset, frozen_haar_generator, tiny_train_cfg, haar_cfg)
    assert result.model.spec.in_channels == 3
    assert len(result.logs) == 2
    assert result.logs[0].iterations == 1


def test_augment_copies_scale_iterations(toy_dataset, tiny_train_cfg, haar_cfg, frozen_haar_generator):
    cfg = tiny_train_cfg.model_copy(update={"augment_copies": 3})
    result = train_stage2(toy_dataset, frozen_haar_generator, cfg, haar_cfg)
    assert result.logs[0].iterations == 3


def test_plain_recognizer(toy_dataset, tiny_train_cfg):
    result = train_recognizer(toy_dataset, tiny_train_cfg)
    assert len(result.logs) == 2
    with pytest.raises(InvalidArgumentError):
        train_recognizer(toy_dataset, tiny_train_cfg, in_channels=12)


def test_identity_recovery(toy_dataset, tiny_attack_cfg):
    cfg = tiny_attack_cfg.model_copy(update={"mode": "identity"})
    result = train_recovery(toy_dataset, None, cfg)
    assert 1 <= len(result.logs) <= 2
    assert result.model.spec.in_channels == 3


def test_random_recovery(toy_dataset, tiny_attack_cfg, haar_cfg, frozen_haar_generator):
    result = train_recovery(toy_dataset, Protector(frozen_haar_generator, haar_cfg), tiny_attack_cfg)
    assert all(np.isfinite(log.l_total) for log in result.logs)


def test_recovery_needs_protector(toy_dataset, tiny_attack_cfg):
    with pytest.raises(InvalidArgumentError):
        train_recovery(toy_dataset, None, tiny_attack_cfg)


def test_empty_attacker_set(tiny_attack_cfg):
    cfg = tiny_attack_cfg.model_copy(update={"mode": "identity"})
    with pytest.raises(InvalidArgumentError):
        train_recovery((np.zeros((0, 3, 16, 16)), np.zeros(0)), None, cfg)


def test_fixed_mode_requires_seed():
    with pytest.raises(ValueError):
        AttackConfig(mode="fixed")


# ----------------------------------------------------------------------
# Desk-scale acceptance (10 ids x 20 images, 32x32, default schedule)
# ----------------------------------------------------------------------

@pytest.mark.slow
def test_desk_stage1_leaves_blank_residue(desk_dataset, desk_stage1, desk_protector_cfg):
    final = desk_stage1.logs[-1]
    assert len(desk_stage1.logs) == 30
    assert final.l_gen <= 0.05
    assert final.accuracy >= 0.9
    metrics = stage1_evaluation(desk_dataset, desk_stage1, desk_protector_cfg, DESK_PAIRS, DESK_SEED)
    assert metrics["mean_residue_l1"] <= 0.05
    assert metrics["mean_image_l1"] >= 0.3
    assert metrics["mean_image_l1"] >= 6 * metrics["mean_residue_l1"]


@pytest.mark.slow
def test_desk_residue_identifies_but_blank_residue_does_not(
    desk_dataset, desk_train_cfg, desk_protector_cfg, desk_stage1
):
    on_r = stage1_evaluation(desk_dataset, desk_stage1, desk_protector_cfg, DESK_PAIRS, DESK_SEED)["r_accuracy"]
    on_r_prime = run_ablation("r-prime", desk_dataset, desk_train_cfg, desk_protector_cfg,
                              stage1=desk_stage1, n_pairs=DESK_PAIRS, seed=DESK_SEED)["ablation_r_prime_accuracy"]
    assert on_r >= 0.9
    assert on_r_prime <= 0.6
    assert on_r - on_r_prime >= 0.3


@pytest.mark.slow
def test_desk_protected_recognizer_keeps_utility(desk_dataset, desk_protector, desk_stage2, desk_baseline):
    protected = stage2_evaluation(desk_dataset, desk_protector, desk_stage2.model, DESK_PAIRS, DESK_SEED)
    baseline = baseline_evaluation(desk_dataset, desk_baseline.model, n_pairs=DESK_PAIRS, seed=DESK_SEED)
    assert protected["protected_accuracy"] >= 0.85
    assert baseline["accuracy"] - protected["protected_accuracy"] <= 0.05
    assert protected["seed_consistency"] >= 0.95
