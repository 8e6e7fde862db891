"""
Held-out evaluations: verification accuracy, blank-residue statistics,
protected-recognition utility, seed consistency and the ablation variants.
"""

import logging
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from minusface import codec
from minusface.attack import attack_protected
from minusface.data import SPLIT_DEFENDER_TEST, ToyDataset, make_pairs
from minusface.errors import InvalidArgumentError
from minusface.metrics import best_threshold_accuracy, cosine_similarity, tpr_at_fpr
from minusface.models import AttackConfig, MappingSpec, ProtectorConfig, TrainConfig, VerificationResult
from minusface.nn.network import Model, build_generator, embed
from minusface.perturb import derive_seed
from minusface.pipeline import Protector
from minusface.train import Stage1Result, train_recognizer, train_recovery, train_stage1, train_stage2

logger = logging.getLogger(__name__)

ABLATIONS = ("r", "r-prime", "mask", "no-subtraction", "dwt")
CONSISTENCY_SEEDS = 5


def pair_scores(model: Model, inputs, pairs: Sequence[Tuple[int, int, bool]]) -> Tuple[np.ndarray, np.ndarray]:
    """Cosine score and same-identity flag of every pair."""
    embeddings = embed(model, np.asarray(inputs, dtype=np.float32))
    a = np.array([p[0] for p in pairs])
    b = np.array([p[1] for p in pairs])
    same = np.array([p[2] for p in pairs], dtype=bool)
    return cosine_similarity(embeddings[a], embeddings[b]), same


def evaluate_verification(
    model: Model,
    inputs,
    labels,
    n_pairs: int = 200,
    seed: int = 0,
    target_fpr: float = 1e-2,
) -> Tuple[VerificationResult, float]:
    """
    Verification accuracy (best threshold) and TPR@FPR on seeded pairs.

    Returns:
        (VerificationResult, tpr)
    """
    pairs = make_pairs(np.asarray(labels), n_pairs, seed)
    scores, same = pair_scores(model, inputs, pairs)
    accuracy, threshold = best_threshold_accuracy(scores, same)
    tpr = tpr_at_fpr(scores, same, target_fpr) if (~same).any() else 0.0
    return VerificationResult(accuracy=accuracy, best_threshold=threshold, pairs=len(pairs)), tpr


def _test_arrays(dataset: ToyDataset) -> Tuple[np.ndarray, np.ndarray]:
    images, labels = dataset.arrays(SPLIT_DEFENDER_TEST)
    if len(images) == 0:
        raise InvalidArgumentError("dataset has no defender-test images")
    return images.astype(np.float32), labels


def stage1_evaluation(
    dataset: ToyDataset,
    stage1: Stage1Result,
    protector_cfg: ProtectorConfig,
    n_pairs: int = 200,
    seed: int = 0,
) -> Dict[str, float]:
    """Mean |R'|, mean |X| and verification accuracy of f on r, on defender-test images."""
    images, labels = _test_arrays(dataset)
    protector = Protector(stage1.g, protector_cfg)
    r = protector.residues(images)
    r_prime = codec.decode(r, protector.spec)
    verification, tpr = evaluate_verification(stage1.f, r, labels, n_pairs, seed)
    result = {
        "mean_residue_l1": float(np.abs(r_prime).mean()),
        "mean_image_l1": float(np.abs(images).mean()),
        "r_accuracy": verification.accuracy,
        "r_threshold": verification.best_threshold,
        "r_tpr_at_fpr": tpr,
    }
    logger.info(f"Stage 1 evaluation: |R'|={result['mean_residue_l1']:.4f} |X|={result['mean_image_l1']:.4f} "
                f"acc(r)={result['r_accuracy']:.3f}")
    return result


def protected_inputs(protector: Protector, images, seed_base: int) -> np.ndarray:
    seeds = [derive_seed(seed_base, i) for i in range(len(images))]
    return protector.protect_batch(images, seeds).astype(np.float32)


def seed_consistency(
    protector: Protector,
    f_p: Model,
    images,
    pairs: Sequence[Tuple[int, int, bool]],
    threshold: float,
    seed_base: int,
    n_seeds: int = CONSISTENCY_SEEDS,
) -> float:
    """Fraction of pairs whose same/different decision agrees across n_seeds seed draws."""
    decisions = []
    for s in range(n_seeds):
        X_p = protected_inputs(protector, images, derive_seed(seed_base, s))
        scores, _ = pair_scores(f_p, X_p, pairs)
        decisions.append(scores > threshold)
    decisions = np.stack(decisions)
    agree = np.all(decisions == decisions[0], axis=0)
    return float(agree.mean())


def stage2_evaluation(
    dataset: ToyDataset,
    protector: Protector,
    f_p: Model,
    n_pairs: int = 200,
    seed: int = 0,
    target_fpr: float = 1e-2,
) -> Dict[str, float]:
    """Verification accuracy and TPR@FPR of f_p on X_p, plus seed consistency."""
    images, labels = _test_arrays(dataset)
    eval_seed = derive_seed(seed, 0xE7A1)
    X_p = protected_inputs(protector, images, eval_seed)
    pairs = make_pairs(labels, n_pairs, seed)
    scores, same = pair_scores(f_p, X_p, pairs)
    accuracy, threshold = best_threshold_accuracy(scores, same)
    result = {
        "protected_accuracy": accuracy,
        "protected_threshold": threshold,
        "protected_tpr_at_fpr": tpr_at_fpr(scores, same, target_fpr),
        "seed_consistency": seed_consistency(protector, f_p, images, pairs, threshold, eval_seed),
    }
    logger.info(f"Stage 2 evaluation: acc={accuracy:.3f} consistency={result['seed_consistency']:.3f}")
    return result


def baseline_evaluation(
    dataset: ToyDataset,
    model: Model,
    transform: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    n_pairs: int = 200,
    seed: int = 0,
) -> Dict[str, float]:
    """Verification accuracy of a recognizer trained on transform(X)."""
    images, labels = _test_arrays(dataset)
    inputs = transform(images) if transform else images
    verification, tpr = evaluate_verification(model, inputs, labels, n_pairs, seed)
    return {"accuracy": verification.accuracy, "threshold": verification.best_threshold, "tpr_at_fpr": tpr}


def run_ablation(
    name: str,
    dataset: ToyDataset,
    cfg: TrainConfig,
    protector_cfg: ProtectorConfig,
    stage1: Optional[Stage1Result] = None,
    attack_cfg: Optional[AttackConfig] = None,
    n_pairs: int = 200,
    seed: int = 0,
) -> Dict[str, float]:
    """
    Run one ablation variant and return its metrics.

    r:              recognizer trained on the residue r (stage-1 f)
    r-prime:        recognizer trained on the decoded residue R'
    mask:           stage 2 with 25%-style channel masking instead of shuffling
    no-subtraction: shuffle e(X) directly (no g); utility and attacker SSIM
    dwt:            the whole pipeline with the HAAR2 mapping
    """
    if name not in ABLATIONS:
        raise InvalidArgumentError(f"unknown ablation {name!r}; choose from {', '.join(ABLATIONS)}")
    logger.info(f"Running ablation {name}")

    if name == "dwt":
        protector_cfg = protector_cfg.model_copy(update={"mapping": MappingSpec.parse("haar2")})
        stage1 = None
    if name != "no-subtraction" and (stage1 is None or stage1.g.spec.in_channels != protector_cfg.mapping.channels):
        stage1 = train_stage1(dataset, cfg, protector_cfg)

    if name == "r":
        return {f"ablation_r_{k}": v for k, v in stage1_evaluation(dataset, stage1, protector_cfg, n_pairs, seed).items()}

    if name == "r-prime":
        protector = Protector(stage1.g, protector_cfg)
        result = train_recognizer(dataset, cfg, transform=protector.blank_residue, tag="R' recognizer")
        metrics = baseline_evaluation(dataset, result.model, protector.blank_residue, n_pairs, seed)
        return {f"ablation_r_prime_{k}": v for k, v in metrics.items()}

    if name == "mask":
        variant = protector_cfg.model_copy(update={"perturbation": "mask"})
    elif name == "no-subtraction":
        variant = protector_cfg.model_copy(update={"feature_subtraction": False})
    else:
        variant = protector_cfg
    g = stage1.g if stage1 is not None else placeholder_generator(variant, cfg)
    protector = Protector(g, variant)
    stage2 = train_stage2(dataset, g, cfg, variant)
    metrics = stage2_evaluation(dataset, protector, stage2.model, n_pairs, seed)
    prefix = f"ablation_{name.replace('-', '_')}_"
    result = {prefix + k: v for k, v in metrics.items()}

    if attack_cfg is not None and name in ("no-subtraction", "dwt"):
        recovery = train_recovery(dataset, protector, attack_cfg)
        test_images, _ = _test_arrays(dataset)
        report = attack_protected(recovery.model, protector, test_images, seed_base=derive_seed(seed, 0xA77))
        result[prefix + "attack_ssim"] = report.ssim_mean
        result[prefix + "attack_floor_ssim"] = report.floor_ssim
    return result


def placeholder_generator(protector_cfg: ProtectorConfig, cfg: TrainConfig) -> Model:
    """Frozen g for pipelines that never call it (no feature subtraction)."""
    return build_generator(
        protector_cfg.mapping.channels,
        base_width=cfg.generator_width,
        levels=cfg.generator_levels,
        input_skip=cfg.generator_input_skip,
        init_seed=cfg.seeds.init,
    ).freeze()


def summarize_logs(logs: List) -> Dict[str, float]:
    """First/last epoch losses and final accuracy of a training log."""
    if not logs:
        return {}
    return {
        "epochs": len(logs),
        "first_l_total": logs[0].l_total,
        "final_l_total": logs[-1].l_total,
        "final_l_gen": logs[-1].l_gen,
        "final_accuracy": logs[-1].accuracy,
    }
