"""
Recovery-attack harness: run a trained f^-1, the re-encoding inversion,
the fixed-seed experiment, and recovery-quality aggregation.

The attacker may use every protector component except per-sample seeds.
"""

import logging
import numbers
from typing import Iterable, List, Optional, Union

import numpy as np

from minusface import codec
from minusface.errors import InvalidArgumentError
from minusface.metrics import mean_image_floor, psnr, ssim
from minusface.models import FixedSeedReport, ImageScore, MappingSpec, RecoveryReport
from minusface.nn.network import Model, embed
from minusface.perturb import derive_seed
from minusface.pipeline import Protector

logger = logging.getLogger(__name__)


def recover(f_inv: Model, X_p) -> np.ndarray:
    """One forward pass of f^-1, clamped to [0, 1]. Accepts (3, H, W) or (B, 3, H, W)."""
    arr = np.asarray(X_p, dtype=np.float32)
    single = arr.ndim == 3
    if single:
        arr = arr[None]
    if arr.ndim != 4 or arr.shape[1] != 3:
        raise InvalidArgumentError(f"recover expects (B, 3, H, W) protective images, got {np.shape(X_p)}")
    out = np.clip(embed(f_inv, arr), 0.0, 1.0)
    return out[0] if single else out


def reencode_inversion(X_p, spec: MappingSpec = MappingSpec()) -> np.ndarray:
    """r' = e(X_p): the attacker's attempt to lift X_p back to a representation."""
    return codec.encode(X_p, spec)


def reencode_distance(protector: Protector, images, seeds) -> np.ndarray:
    """Per-image relative L2 distance |e(X_p) - s(r)| / |s(r)|."""
    shuffled = protector.perturbed(images, seeds)
    lifted = reencode_inversion(codec.decode(shuffled, protector.spec), protector.spec)
    diff = (lifted - shuffled).reshape(len(shuffled), -1)
    norm = np.linalg.norm(shuffled.reshape(len(shuffled), -1), axis=1)
    return np.linalg.norm(diff, axis=1) / np.maximum(norm, 1e-12)


def evaluate_recovery(recovered, originals, with_floor: bool = True) -> RecoveryReport:
    """
    SSIM / PSNR of recovered images against the [0, 1] originals.

    Args:
        recovered: (N, 3, H, W) recovered images (clamped by recover)
        originals: (N, 3, H, W) ground truth
        with_floor: Also compute the mean-image SSIM floor of the originals

    Returns:
        RecoveryReport with per-image scores
    """
    recovered = np.asarray(recovered, dtype=np.float64)
    originals = np.asarray(originals, dtype=np.float64)
    if recovered.shape != originals.shape or recovered.ndim != 4:
        raise InvalidArgumentError(
            f"recovered {recovered.shape} and originals {originals.shape} must be paired (N, 3, H, W) sets"
        )
    if len(recovered) == 0:
        raise InvalidArgumentError("evaluate_recovery needs at least one image")

    scores = [
        ImageScore(index=i, ssim=ssim(r, o), psnr=psnr(r, o))
        for i, (r, o) in enumerate(zip(recovered, originals))
    ]
    ssims = np.array([s.ssim for s in scores])
    psnrs = np.array([s.psnr for s in scores])
    floor = None
    if with_floor:
        _, floor_scores = mean_image_floor(originals)
        floor = float(floor_scores.mean())
    return RecoveryReport(
        count=len(scores),
        ssim_mean=float(ssims.mean()),
        ssim_std=float(ssims.std()),
        psnr_mean=float(psnrs.mean()),
        psnr_std=float(psnrs.std()),
        floor_ssim=floor,
        per_image=scores,
    )


def attack_protected(
    f_inv: Model,
    protector: Optional[Protector],
    images,
    seed_base: int,
    fixed_seed: Optional[int] = None,
) -> RecoveryReport:
    """
    Protect the images (fresh per-image seeds, or one fixed seed), run f^-1 and
    score the recovery. A None protector means the identity task X_p = X.
    """
    images = np.asarray(images, dtype=np.float32)
    if protector is None:
        X_p = images
    else:
        if fixed_seed is not None:
            seeds = [fixed_seed] * len(images)
        else:
            seeds = [derive_seed(seed_base, i) for i in range(len(images))]
        X_p = protector.protect_batch(images, seeds)
    report = evaluate_recovery(recover(f_inv, X_p), images)
    logger.info(f"Recovery SSIM {report.ssim_mean:.4f} (floor {report.floor_ssim:.4f}), "
                f"PSNR {report.psnr_mean:.2f} dB over {report.count} images")
    return report


def fixed_seed_experiment(
    f_inv_fixed: Model,
    protector: Protector,
    test_images,
    theta: int,
    theta_prime: Union[int, Iterable[int]],
) -> FixedSeedReport:
    """
    Score an attacker trained on one seed theta against X_p made with theta
    and with each theta' != theta.
    """
    if isinstance(theta_prime, numbers.Integral):
        theta_prime = [theta_prime]
    theta = int(theta)
    theta_primes: List[int] = [int(t) for t in theta_prime]
    if not theta_primes:
        raise InvalidArgumentError("at least one theta' is required")
    if theta in theta_primes:
        raise InvalidArgumentError(f"theta' must differ from theta ({theta})")

    same = attack_protected(f_inv_fixed, protector, test_images, seed_base=0, fixed_seed=theta)
    different = [
        attack_protected(f_inv_fixed, protector, test_images, seed_base=0, fixed_seed=t)
        for t in theta_primes
    ]
    different_mean = float(np.mean([r.ssim_mean for r in different]))
    report = FixedSeedReport(
        theta=theta,
        theta_primes=theta_primes,
        same_seed=same,
        different_seed=different,
        same_exceeds_different=same.ssim_mean > different_mean,
    )
    logger.info(f"Fixed-seed attack: same-seed SSIM {same.ssim_mean:.4f}, "
                f"different-seed SSIM {different_mean:.4f}")
    return report
