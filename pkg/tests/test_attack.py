import numpy as np
import pytest

from minusface.attack import (
    attack_protected,
    evaluate_recovery,
    fixed_seed_experiment,
    recover,
    reencode_distance,
    reencode_inversion,
)
from minusface.data import SPLIT_DEFENDER_TEST
from minusface.errors import InvalidArgumentError
from minusface.models import AttackConfig
from minusface.nn.network import build_recovery
from minusface.pipeline import Protector
from minusface.train import train_recovery

from tests.conftest import DESK_SEED, HAAR


@pytest.fixture
def recovery_model():
    return build_recovery(base_width=4, levels=2, init_seed=0)


@pytest.fixture
def protector(frozen_haar_generator, haar_cfg):
    return Protector(frozen_haar_generator, haar_cfg)


def zero_recovery():
    model = build_recovery(base_width=4, levels=2)
    model.load_state_dict({name: np.zeros_like(value) for name, value in model.state_dict().items()})
    return model


def test_perfect_recovery(toy_dataset):
    images = toy_dataset.images[:3]
    report = evaluate_recovery(images, images)
    assert report.count == 3
    assert report.ssim_mean == pytest.approx(1.0)
    assert report.psnr_mean == pytest.approx(100.0)
    assert report.ssim_std == pytest.approx(0.0)
    assert len(report.per_image) == 3
    assert report.floor_ssim < 1.0


def test_unpaired_sets_rejected(toy_dataset):
    with pytest.raises(InvalidArgumentError):
        evaluate_recovery(toy_dataset.images[:3], toy_dataset.images[:2])
    with pytest.raises(InvalidArgumentError):
        evaluate_recovery(np.zeros((0, 3, 16, 16)), np.zeros((0, 3, 16, 16)))


def test_recover_is_clamped(toy_dataset, recovery_model):
    out = recover(recovery_model, toy_dataset.images[:2] * 4.0 - 2.0)
    assert out.shape == (2, 3, 16, 16)
    assert out.min() >= 0.0 and out.max() <= 1.0
    assert recover(recovery_model, toy_dataset.images[0]).shape == (3, 16, 16)


def test_recover_rejects_representations(recovery_model):
    with pytest.raises(InvalidArgumentError):
        recover(recovery_model, np.zeros((1, 12, 16, 16)))


def test_zero_input_gives_zero_output():
    out = recover(zero_recovery(), np.zeros((1, 3, 16, 16)))
    np.testing.assert_array_equal(out, 0.0)


def test_reencoding_does_not_return_the_shuffled_residue(toy_dataset, protector):
    distances = reencode_distance(protector, toy_dataset.images[:3], [1, 2, 3])
    assert distances.shape == (3,)
    assert (distances > 1e-3).all()


def test_reencode_shape(toy_dataset):
    assert reencode_inversion(toy_dataset.images[:2], HAAR).shape == (2, 12, 16, 16)


def test_attack_protected_report(toy_dataset, recovery_model, protector):
    report = attack_protected(recovery_model, protector, toy_dataset.images[:4], seed_base=9)
    assert report.count == 4
    assert -1.0 <= report.ssim_mean <= 1.0
    assert report.floor_ssim is not None


def test_identity_task_without_protector(toy_dataset, recovery_model):
    report = attack_protected(recovery_model, None, toy_dataset.images[:2], seed_base=0)
    assert report.count == 2


def test_fixed_seed_experiment(toy_dataset, recovery_model, protector):
    report = fixed_seed_experiment(recovery_model, protector, toy_dataset.images[:2], theta=5, theta_prime=[6, 7])
    assert report.theta_primes == [6, 7]
    assert len(report.different_seed) == 2
    assert report.different_seed_mean == pytest.approx(
        np.mean([r.ssim_mean for r in report.different_seed]))


def test_theta_prime_must_differ(toy_dataset, recovery_model, protector):
    with pytest.raises(InvalidArgumentError):
        fixed_seed_experiment(recovery_model, protector, toy_dataset.images[:2], theta=5, theta_prime=5)
    with pytest.raises(InvalidArgumentError):
        fixed_seed_experiment(recovery_model, protector, toy_dataset.images[:2], theta=5, theta_prime=[])


def test_fixed_seed_experiment_accepts_numpy_seeds(toy_dataset, recovery_model, protector):
    images = toy_dataset.images[:2]
    single = fixed_seed_experiment(recovery_model, protector, images, theta=np.int64(5), theta_prime=np.int64(6))
    assert single.theta == 5 and single.theta_primes == [6]
    listed = fixed_seed_experiment(recovery_model, protector, images, theta=5, theta_prime=np.array([6, 7]))
    assert listed.theta_primes == [6, 7]
    assert listed.same_seed == single.same_seed


# ----------------------------------------------------------------------
# Desk-scale acceptance
# ----------------------------------------------------------------------

FIXED_THETA = 0xF1
OTHER_THETAS = [0xF2, 0xF3, 0xF4]


@pytest.mark.slow
def test_desk_identity_attacker_recovers_faces(desk_dataset):
    attacker = train_recovery(desk_dataset, None, AttackConfig(mode="identity")).model.freeze()
    images, _ = desk_dataset.arrays(SPLIT_DEFENDER_TEST)
    report = attack_protected(attacker, None, images, seed_base=DESK_SEED)
    assert report.ssim_mean >= 0.95


@pytest.mark.slow
def test_desk_random_attacker_stays_near_mean_face(desk_dataset, desk_protector, desk_random_attacker):
    images, _ = desk_dataset.arrays(SPLIT_DEFENDER_TEST)
    report = attack_protected(desk_random_attacker, desk_protector, images, seed_base=DESK_SEED)
    assert report.ssim_mean <= report.floor_ssim + 0.1


@pytest.mark.slow
def test_desk_fixed_seed_attacker_fails_on_other_seeds(desk_dataset, desk_protector):
    cfg = AttackConfig(mode="fixed", fixed_seed=FIXED_THETA)
    attacker = train_recovery(desk_dataset, desk_protector, cfg).model.freeze()
    images, _ = desk_dataset.arrays(SPLIT_DEFENDER_TEST)
    report = fixed_seed_experiment(attacker, desk_protector, images, FIXED_THETA, OTHER_THETAS)
    assert report.same_exceeds_different
    assert report.same_seed.ssim_mean > report.different_seed_mean
    assert report.different_seed_mean <= report.same_seed.floor_ssim + 0.1
