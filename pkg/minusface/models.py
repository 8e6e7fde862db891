"""
Data models for the MinusFace toolkit.
"""

import sys
from enum import Enum
from pathlib import Path
from typing import Dict, List, Literal, Optional

from pydantic import BaseModel, Field, field_validator, model_validator

# config/ lives at the project root
_project_root = Path(__file__).parent.parent
if str(_project_root) not in sys.path:
    sys.path.insert(0, str(_project_root))

from config.config import active_config as Config  # noqa: E402


class MappingKind(str, Enum):
    """Which encode/decode pair is active."""
    DCT8 = "dct8"
    HAAR2 = "haar2"


_MAPPING_GEOMETRY = {
    MappingKind.DCT8: {"factor": 8, "channels": 192, "code": 0},
    MappingKind.HAAR2: {"factor": 2, "channels": 12, "code": 1},
}


class MappingSpec(BaseModel):
    """
    Geometry of a spatial <-> high-dimensional mapping.

    Channel layout: for DCT8, c = k*64 + u*8 + v (color k, frequency (u, v));
    for HAAR2, c = k*4 + b with subbands b in the order LL, LH, HL, HH.
    """
    kind: MappingKind = MappingKind.DCT8

    model_config = {"frozen": True}

    @property
    def upsample_factor(self) -> int:
        return _MAPPING_GEOMETRY[self.kind]["factor"]

    @property
    def channels(self) -> int:
        return _MAPPING_GEOMETRY[self.kind]["channels"]

    @property
    def code(self) -> int:
        """Mapping-kind byte used in MFRP headers."""
        return _MAPPING_GEOMETRY[self.kind]["code"]

    @property
    def coefficients_per_color(self) -> int:
        return self.upsample_factor * self.upsample_factor

    @classmethod
    def from_code(cls, code: int) -> "MappingSpec":
        for kind, geometry in _MAPPING_GEOMETRY.items():
            if geometry["code"] == code:
                return cls(kind=kind)
        raise ValueError(f"Unknown mapping code: {code}")

    @classmethod
    def parse(cls, name: str) -> "MappingSpec":
        """Parse 'dct8' / 'haar2' (case-insensitive; 'dwt' is an alias of haar2)."""
        key = name.strip().lower()
        if key == "dwt":
            key = "haar2"
        return cls(kind=MappingKind(key))


class LayerSpec(BaseModel):
    """One parameterized layer of a Model."""
    name: str
    kind: Literal["conv", "linear"]
    in_channels: int
    out_channels: int
    stride: int = 1
    kernel: int = 3

    @property
    def weight_shape(self) -> tuple:
        if self.kind == "conv":
            return (self.out_channels, self.in_channels, self.kernel, self.kernel)
        return (self.out_channels, self.in_channels)

    @property
    def fan_in(self) -> int:
        if self.kind == "conv":
            return self.in_channels * self.kernel * self.kernel
        return self.in_channels


class ModelSpec(BaseModel):
    """Architecture of a generator, recognizer or recovery network."""
    topology: Literal["encoder_decoder_skip", "conv_classifier"]
    in_channels: int
    out_channels: int
    base_width: int = 16
    levels: int = 3
    input_skip: bool = False
    init_seed: int = 0

    @field_validator("in_channels", "out_channels", "base_width", "levels")
    @classmethod
    def _positive(cls, value: int) -> int:
        if value < 1:
            raise ValueError("must be at least 1")
        return value

    @model_validator(mode="after")
    def _check_skip(self) -> "ModelSpec":
        if self.input_skip and self.in_channels != self.out_channels:
            raise ValueError("input_skip needs equal input and output channels")
        return self

    @property
    def spatial_multiple(self) -> int:
        """Working-grid multiple; model inputs are zero-padded up to it."""
        if self.topology == "conv_classifier":
            return 2 ** 4
        return 2 ** self.levels


class ProtectorConfig(BaseModel):
    """Settings of the protective transform F = d(s(r; theta))."""
    mapping: MappingSpec = Field(default_factory=MappingSpec)
    alpha: float = 5.0
    beta: float = 1.0
    perturbation: Literal["shuffle", "mask", "none"] = "shuffle"
    mask_ratio: float = 0.25
    feature_subtraction: bool = True

    @field_validator("alpha", "beta")
    @classmethod
    def _non_negative(cls, value: float) -> float:
        if value < 0:
            raise ValueError("objective weights must be non-negative")
        return value

    @field_validator("mask_ratio")
    @classmethod
    def _ratio_range(cls, value: float) -> float:
        if not 0.0 <= value <= 1.0:
            raise ValueError("mask_ratio must lie in [0, 1]")
        return value

    @property
    def is_ablation(self) -> bool:
        return self.perturbation == "none" or not self.feature_subtraction

    @classmethod
    def from_config(cls, **overrides) -> "ProtectorConfig":
        values = {
            "alpha": Config.ALPHA,
            "beta": Config.BETA,
            "mask_ratio": Config.MASK_RATIO,
        }
        values.update(overrides)
        return cls(**values)


class SeedSet(BaseModel):
    """Explicit seeds; every source of randomness flows from one of these."""
    init: int = 0
    data: int = 1
    shuffle: int = 2


class TrainConfig(BaseModel):
    """Optimization schedule shared by both training stages."""
    epochs: int = 30
    batch_size: int = 32
    lr_initial: float = 1e-2
    lr_drop_epochs: List[int] = Field(default_factory=lambda: [15, 24])
    momentum: float = 0.9
    weight_decay: float = 1e-4
    generator_lr_factor: float = 0.5
    augment_copies: int = 3
    flip_augment: bool = True
    seeds: SeedSet = Field(default_factory=SeedSet)

    # Architecture
    generator_width: int = 16
    generator_levels: int = 3
    generator_input_skip: bool = True
    recognizer_width: int = 32
    embedding_dim: int = 64
    arc_scale: float = 16.0
    arc_margin: float = 0.3
    margin_type: Literal["arc", "cosine"] = "arc"

    @field_validator("epochs", "batch_size", "augment_copies")
    @classmethod
    def _positive(cls, value: int) -> int:
        if value < 1:
            raise ValueError("must be at least 1")
        return value

    @model_validator(mode="after")
    def _check_schedule(self) -> "TrainConfig":
        drops = self.lr_drop_epochs
        if any(b <= a for a, b in zip(drops, drops[1:])):
            raise ValueError("lr_drop_epochs must be strictly increasing")
        if any(d >= self.epochs or d < 0 for d in drops):
            raise ValueError("lr_drop_epochs must lie in [0, epochs)")
        return self

    @classmethod
    def from_config(cls, **overrides) -> "TrainConfig":
        values = {
            "epochs": Config.EPOCHS,
            "batch_size": Config.BATCH_SIZE,
            "lr_initial": Config.LR_INITIAL,
            "lr_drop_epochs": list(Config.LR_DROP_EPOCHS),
            "momentum": Config.MOMENTUM,
            "weight_decay": Config.WEIGHT_DECAY,
            "generator_lr_factor": Config.GENERATOR_LR_FACTOR,
            "augment_copies": Config.AUGMENT_COPIES,
            "seeds": SeedSet(init=Config.INIT_SEED, data=Config.DATA_SEED, shuffle=Config.SHUFFLE_SEED),
            "generator_width": Config.GENERATOR_WIDTH,
            "generator_levels": Config.GENERATOR_LEVELS,
            "generator_input_skip": Config.GENERATOR_INPUT_SKIP,
            "recognizer_width": Config.RECOGNIZER_WIDTH,
            "embedding_dim": Config.EMBEDDING_DIM,
            "arc_scale": Config.ARC_SCALE,
            "arc_margin": Config.ARC_MARGIN,
            "margin_type": Config.MARGIN_TYPE,
        }
        seeds = overrides.pop("seeds", None)
        if isinstance(seeds, dict):
            seeds = values["seeds"].model_copy(update=seeds)
        if seeds is not None:
            values["seeds"] = seeds
        if "epochs" in overrides and "lr_drop_epochs" not in overrides:
            overrides["lr_drop_epochs"] = scale_drop_epochs(values["lr_drop_epochs"], Config.EPOCHS,
                                                            overrides["epochs"])
        values.update(overrides)
        return cls(**values)


def scale_drop_epochs(drops: List[int], from_epochs: int, to_epochs: int) -> List[int]:
    """Stretch a drop schedule to another epoch count, keeping drops inside [1, to_epochs)."""
    scaled = sorted({int(round(d * to_epochs / from_epochs)) for d in drops})
    return [d for d in scaled if 1 <= d < to_epochs]


class AttackConfig(BaseModel):
    """Recovery-attacker training settings."""
    mode: Literal["random", "fixed", "identity"] = "random"
    fixed_seed: Optional[int] = None
    epochs: int = 40
    patience: int = 5
    batch_size: int = 32
    lr: float = 1e-3
    momentum: float = 0.9
    weight_decay: float = 0.0
    recovery_width: int = 24
    recovery_levels: int = 4
    init_seed: int = 0
    data_seed: int = 1
    seed_base: int = 3

    @model_validator(mode="after")
    def _check_mode(self) -> "AttackConfig":
        if self.mode == "fixed" and self.fixed_seed is None:
            raise ValueError("fixed mode requires fixed_seed")
        return self

    @classmethod
    def from_config(cls, **overrides) -> "AttackConfig":
        values = {
            "epochs": Config.ATTACK_EPOCHS,
            "patience": Config.ATTACK_PATIENCE,
            "batch_size": Config.ATTACK_BATCH_SIZE,
            "lr": Config.ATTACK_LR,
            "recovery_width": Config.RECOVERY_WIDTH,
            "recovery_levels": Config.RECOVERY_LEVELS,
            "init_seed": Config.INIT_SEED,
            "data_seed": Config.DATA_SEED,
        }
        values.update(overrides)
        return cls(**values)


class EpochLog(BaseModel):
    """One line of a training log."""
    epoch: int
    lr: float
    l_gen: float = 0.0
    l_fr: float = 0.0
    l_total: float = 0.0
    accuracy: float = 0.0
    iterations: int = 0


class ImageScore(BaseModel):
    index: int
    ssim: float
    psnr: float


class RecoveryReport(BaseModel):
    """Aggregated recovery quality over paired image sets."""
    count: int
    ssim_mean: float
    ssim_std: float
    psnr_mean: float
    psnr_std: float
    floor_ssim: Optional[float] = None
    per_image: List[ImageScore] = Field(default_factory=list)


class FixedSeedReport(BaseModel):
    """Outcome of training an attacker on one shuffle seed and testing on others."""
    theta: int
    theta_primes: List[int]
    same_seed: RecoveryReport
    different_seed: List[RecoveryReport]
    same_exceeds_different: bool

    @property
    def different_seed_mean(self) -> float:
        return sum(r.ssim_mean for r in self.different_seed) / len(self.different_seed)


class VerificationResult(BaseModel):
    accuracy: float
    best_threshold: float
    pairs: int


class InvariantResult(BaseModel):
    """One row of the invariant-suite PASS/FAIL table."""
    name: str
    passed: bool
    detail: str = ""
    metrics: Dict[str, float] = Field(default_factory=dict)


class VerificationDecision(BaseModel):
    """Outcome of verifying a protected probe against an enrolled template."""
    identity: str
    score: float
    threshold: float
    match: bool
