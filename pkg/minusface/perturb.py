"""
Seed-driven channel perturbations of the residue r.

Randomness comes from SplitMix64 so protective outputs are reproducible
on every platform:

    state <- state + 0x9E3779B97F4A7C15            (mod 2^64)
    z <- (state ^ (state >> 30)) * 0xBF58476D1CE4E5B9
    z <- (z ^ (z >> 27)) * 0x94D049BB133111EB
    out <- z ^ (z >> 31)

Bounded draws use rejection sampling, so Fisher-Yates is uniform over all
C! permutations.
"""

import logging
from typing import Sequence, Tuple

import numpy as np
from pydantic import BaseModel, field_validator

from minusface.errors import InvalidArgumentError

logger = logging.getLogger(__name__)

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
MIX_1 = 0xBF58476D1CE4E5B9
MIX_2 = 0x94D049BB133111EB


def _mix(z: int) -> int:
    z = ((z ^ (z >> 30)) * MIX_1) & MASK64
    z = ((z ^ (z >> 27)) * MIX_2) & MASK64
    return z ^ (z >> 31)


class SplitMix64:
    """64-bit SplitMix generator."""

    def __init__(self, seed: int):
        self.state = int(seed) & MASK64

    def next(self) -> int:
        self.state = (self.state + GOLDEN_GAMMA) & MASK64
        return _mix(self.state)

    def bounded(self, n: int) -> int:
        """Uniform integer in [0, n)."""
        if n <= 0:
            raise InvalidArgumentError("bound must be positive")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            value = self.next()
            if value < limit:
                return value % n


def derive_seed(base: int, *path: int) -> int:
    """Deterministic child seed for (base, epoch, index, copy, ...)."""
    state = int(base) & MASK64
    for item in path:
        state = _mix(((state ^ (int(item) & MASK64)) + GOLDEN_GAMMA) & MASK64)
    return state


class ChannelPermutation(BaseModel):
    """Output channel i takes input channel mapping[i]."""
    mapping: Tuple[int, ...]

    model_config = {"frozen": True}

    @field_validator("mapping")
    @classmethod
    def _bijection(cls, value: Tuple[int, ...]) -> Tuple[int, ...]:
        if sorted(value) != list(range(len(value))):
            raise ValueError("mapping is not a bijection on [0, C)")
        return value

    def __len__(self) -> int:
        return len(self.mapping)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.mapping, dtype=np.int64)

    def inverse(self) -> "ChannelPermutation":
        inv = np.empty(len(self.mapping), dtype=np.int64)
        inv[self.as_array()] = np.arange(len(self.mapping))
        return ChannelPermutation(mapping=tuple(int(i) for i in inv))

    def is_identity(self) -> bool:
        return all(i == m for i, m in enumerate(self.mapping))

    @classmethod
    def identity(cls, channels: int) -> "ChannelPermutation":
        return cls(mapping=tuple(range(channels)))


def permutation_from_seed(seed: int, channels: int) -> ChannelPermutation:
    """
    Fisher-Yates permutation of range(channels) driven by SplitMix64(seed).

    Any seed is accepted; it is reduced modulo 2^64.
    """
    if channels < 1:
        raise InvalidArgumentError(f"channels must be >= 1, got {channels}")
    rng = SplitMix64(seed)
    order = list(range(channels))
    for i in range(channels - 1, 0, -1):
        j = rng.bounded(i + 1)
        order[i], order[j] = order[j], order[i]
    return ChannelPermutation(mapping=tuple(order))


def shuffle_channels(rep, perm: ChannelPermutation) -> np.ndarray:
    """s(r; theta): reorder the channel axis of a (..., C, H, W) representation."""
    arr = np.asarray(rep)
    if arr.ndim < 3 or arr.shape[-3] != len(perm):
        raise InvalidArgumentError(
            f"permutation of length {len(perm)} does not match representation shape {arr.shape}"
        )
    return np.take(arr, perm.as_array(), axis=-3)


def masked_channel_indices(seed: int, channels: int, ratio: float) -> np.ndarray:
    """The round(ratio * channels) channels selected by a seeded partial shuffle, sorted."""
    if not 0.0 <= ratio <= 1.0:
        raise InvalidArgumentError(f"mask ratio must lie in [0, 1], got {ratio}")
    count = int(np.floor(ratio * channels + 0.5))
    rng = SplitMix64(seed)
    order = list(range(channels))
    for i in range(count):
        j = i + rng.bounded(channels - i)
        order[i], order[j] = order[j], order[i]
    return np.sort(np.asarray(order[:count], dtype=np.int64))


def mask_channels(rep, seed: int, ratio: float) -> np.ndarray:
    """m(r; theta): zero round(ratio * C) seeded channels, leave the rest unchanged."""
    arr = np.asarray(rep)
    if arr.ndim < 3:
        raise InvalidArgumentError(f"expected a (..., C, H, W) representation, got {arr.shape}")
    indices = masked_channel_indices(seed, arr.shape[-3], ratio)
    out = arr.copy()
    out[..., indices, :, :] = 0
    return out


def perturb(rep, seed: int, mode: str, ratio: float = 0.25) -> np.ndarray:
    """Apply the configured perturbation to one (C, H, W) representation."""
    if mode == "shuffle":
        return shuffle_channels(rep, permutation_from_seed(seed, np.shape(rep)[-3]))
    if mode == "mask":
        return mask_channels(rep, seed, ratio)
    if mode == "none":
        return np.asarray(rep).copy()
    raise InvalidArgumentError(f"unknown perturbation mode: {mode!r}")


def perturb_batch(reps: np.ndarray, seeds: Sequence[int], mode: str, ratio: float = 0.25) -> np.ndarray:
    """Per-sample perturbation of a (B, C, H, W) batch with one seed per sample."""
    if len(seeds) != reps.shape[0]:
        raise InvalidArgumentError(f"need {reps.shape[0]} seeds, got {len(seeds)}")
    return np.stack([perturb(rep, seed, mode, ratio) for rep, seed in zip(reps, seeds)])
