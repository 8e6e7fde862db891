"""
MinusFace Package
Privacy-preserving face representations by feature subtraction and
channel shuffling, with the training, attack and evaluation harness.

Version: 1.0.0
"""

# Transforms
from minusface.codec import decode, encode, project
from minusface.perturb import derive_seed, perturb, permutation_from_seed, shuffle_channels
from minusface.pipeline import Protector, combined_loss, compute_residue, protect, regenerate

# Training and attacks
from minusface.train import lr_at_epoch, train_recovery, train_stage1, train_stage2
from minusface.attack import attack_protected, evaluate_recovery, fixed_seed_experiment, recover

# Data
from minusface.data import ToyDataset, generate_toy_dataset, load_image, save_image

# Metrics
from minusface.metrics import best_threshold_accuracy, psnr, ssim, tpr_at_fpr

# Models
from minusface.models import (
    AttackConfig,
    MappingKind,
    MappingSpec,
    ModelSpec,
    ProtectorConfig,
    RecoveryReport,
    TrainConfig,
)

# Errors
from minusface.errors import FormatError, InvalidArgumentError, MinusFaceError, StateError

# Service
from minusface.service import ProtectionService, get_service

__version__ = "1.0.0"

__all__ = [
    # Transforms
    'encode',
    'decode',
    'project',
    'derive_seed',
    'perturb',
    'permutation_from_seed',
    'shuffle_channels',
    'Protector',
    'combined_loss',
    'compute_residue',
    'protect',
    'regenerate',

    # Training and attacks
    'lr_at_epoch',
    'train_stage1',
    'train_stage2',
    'train_recovery',
    'attack_protected',
    'evaluate_recovery',
    'fixed_seed_experiment',
    'recover',

    # Data
    'ToyDataset',
    'generate_toy_dataset',
    'load_image',
    'save_image',

    # Metrics
    'ssim',
    'psnr',
    'best_threshold_accuracy',
    'tpr_at_fpr',

    # Models
    'AttackConfig',
    'MappingKind',
    'MappingSpec',
    'ModelSpec',
    'ProtectorConfig',
    'RecoveryReport',
    'TrainConfig',

    # Errors
    'MinusFaceError',
    'InvalidArgumentError',
    'StateError',
    'FormatError',

    # Service
    'ProtectionService',
    'get_service',
]
