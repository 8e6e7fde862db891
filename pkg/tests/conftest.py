"""
Shared fixtures: a small synthetic dataset and tiny model configurations.
"""

import logging

import numpy as np
import pytest

from minusface.data import generate_toy_dataset
from minusface.models import AttackConfig, MappingSpec, ProtectorConfig, SeedSet, TrainConfig
from minusface.nn.network import build_generator
from minusface.pipeline import Protector
from minusface.train import train_recognizer, train_recovery, train_stage1, train_stage2

HAAR = MappingSpec.parse("haar2")
DCT = MappingSpec.parse("dct8")


@pytest.fixture(autouse=True)
def _quiet_logs(caplog):
    caplog.set_level(logging.WARNING)


@pytest.fixture(scope="session")
def toy_dataset():
    """4 identities x 6 images at 16x16: 2 attacker ids, 2 defender ids."""
    return generate_toy_dataset(4, 6, 16, seed=0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_train_cfg():
    return TrainConfig(
        epochs=2,
        batch_size=8,
        lr_drop_epochs=[1],
        generator_width=4,
        generator_levels=2,
        recognizer_width=4,
        embedding_dim=8,
        augment_copies=1,
        seeds=SeedSet(init=0, data=1, shuffle=2),
    )


@pytest.fixture
def haar_cfg():
    return ProtectorConfig(mapping=HAAR)


@pytest.fixture
def tiny_attack_cfg():
    return AttackConfig(epochs=2, patience=5, batch_size=8, recovery_width=4, recovery_levels=2)


@pytest.fixture
def frozen_haar_generator():
    return build_generator(HAAR.channels, base_width=4, levels=2, init_seed=0).freeze()


# ----------------------------------------------------------------------
# Desk-scale runs shared by the slow acceptance tests
# ----------------------------------------------------------------------

DESK_PAIRS = 200
DESK_SEED = 7


@pytest.fixture(scope="session")
def desk_dataset():
    """10 identities x 20 images at 32x32."""
    return generate_toy_dataset(10, 20, 32, seed=DESK_SEED)


@pytest.fixture(scope="session")
def desk_train_cfg():
    return TrainConfig()


@pytest.fixture(scope="session")
def desk_protector_cfg():
    return ProtectorConfig()


@pytest.fixture(scope="session")
def desk_stage1(desk_dataset, desk_train_cfg, desk_protector_cfg):
    return train_stage1(desk_dataset, desk_train_cfg, desk_protector_cfg)


@pytest.fixture(scope="session")
def desk_protector(desk_stage1, desk_protector_cfg):
    return Protector(desk_stage1.g, desk_protector_cfg)


@pytest.fixture(scope="session")
def desk_stage2(desk_dataset, desk_train_cfg, desk_protector):
    return train_stage2(desk_dataset, desk_protector.g, desk_train_cfg, desk_protector.cfg)


@pytest.fixture(scope="session")
def desk_baseline(desk_dataset, desk_train_cfg):
    return train_recognizer(desk_dataset, desk_train_cfg, tag="Baseline")


@pytest.fixture(scope="session")
def desk_random_attacker(desk_dataset, desk_protector):
    return train_recovery(desk_dataset, desk_protector, AttackConfig()).model.freeze()
