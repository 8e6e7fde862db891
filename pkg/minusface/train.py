"""
Two-stage MinusFace training and the attacker's recovery-model training.

Stage 1 optimizes g and a recognizer f end to end on the residue r.
Stage 2 freezes g and trains a 3-channel recognizer f_p on protective
images X_p, each training image expanded into several copies with fresh
shuffle seeds. Recovery training fits f^-1 to map X_p back to X.
"""

import logging
import math
from typing import Callable, List, NamedTuple, Optional, Tuple, Union

import numpy as np

from minusface import codec
from minusface.data import SPLIT_ATTACKER, SPLIT_DEFENDER_TRAIN, ToyDataset, flip_horizontal, random_flip
from minusface.errors import InvalidArgumentError, StateError
from minusface.models import AttackConfig, EpochLog, ProtectorConfig, TrainConfig
from minusface.nn.losses import arcface_loss, l1_loss
from minusface.nn.network import ArcFaceHead, Model, build_generator, build_recognizer, build_recovery
from minusface.nn.optim import SGD
from minusface.nn.tensor import Tensor
from minusface.perturb import derive_seed, perturb_batch
from minusface.pipeline import Protector, combined_loss, residue_graph

logger = logging.getLogger(__name__)

DatasetLike = Union[ToyDataset, Tuple[np.ndarray, np.ndarray]]

PLATEAU_TOLERANCE = 1e-4


class Stage1Result(NamedTuple):
    g: Model
    f: Model
    head: ArcFaceHead
    logs: List[EpochLog]
    classes: np.ndarray


class RecognizerResult(NamedTuple):
    model: Model
    head: ArcFaceHead
    logs: List[EpochLog]
    classes: np.ndarray


class RecoveryResult(NamedTuple):
    model: Model
    logs: List[EpochLog]
    stopped_early: bool


def lr_at_epoch(cfg: TrainConfig, epoch: int) -> float:
    """lr_initial divided by 10 for every drop epoch <= epoch."""
    if not 0 <= epoch < cfg.epochs:
        raise InvalidArgumentError(f"epoch {epoch} outside [0, {cfg.epochs})")
    drops = sum(1 for d in cfg.lr_drop_epochs if d <= epoch)
    return cfg.lr_initial / (10 ** drops)


def _training_arrays(dataset: DatasetLike, *splits: str) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(images, contiguous labels, original class ids)."""
    if isinstance(dataset, ToyDataset):
        images, labels = dataset.arrays(*splits)
    else:
        images, labels = dataset
    images = np.asarray(images, dtype=np.float32)
    labels = np.asarray(labels).reshape(-1)
    if len(images) == 0:
        raise InvalidArgumentError("training set is empty")
    if len(images) != len(labels):
        raise InvalidArgumentError(f"{len(images)} images for {len(labels)} labels")
    classes, contiguous = np.unique(labels, return_inverse=True)
    return images, contiguous.astype(np.int64), classes


def _epoch_rng(cfg: TrainConfig, epoch: int) -> np.random.Generator:
    return np.random.default_rng([cfg.seeds.data, epoch])


def _batches(order: np.ndarray, batch_size: int):
    for start in range(0, len(order), batch_size):
        yield order[start:start + batch_size]


def _new_recognizer(cfg: TrainConfig, in_channels: int, class_count: int, seed_offset: int = 1):
    return build_recognizer(
        in_channels,
        cfg.embedding_dim,
        class_count,
        base_width=cfg.recognizer_width,
        scale=cfg.arc_scale,
        margin=cfg.arc_margin,
        margin_type=cfg.margin_type,
        init_seed=cfg.seeds.init + seed_offset,
    )


def train_stage1(dataset: DatasetLike, cfg: TrainConfig, protector_cfg: ProtectorConfig) -> Stage1Result:
    """
    Jointly train g and f under alpha * L_gen + beta * L_fr, f consuming
    r = e(X) - g(e(X)). g steps with lr * generator_lr_factor. With beta = 0
    the recognizer is never stepped. g is returned frozen.

    Args:
        dataset: ToyDataset (defender-train split is used) or (images, labels)
        cfg: Schedule and architecture
        protector_cfg: Mapping and objective weights

    Returns:
        Stage1Result(g, f, head, logs, classes)
    """
    images, labels, classes = _training_arrays(dataset, SPLIT_DEFENDER_TRAIN)
    if len(classes) < 2:
        raise InvalidArgumentError("stage 1 needs at least 2 identities")
    spec = protector_cfg.mapping

    g = build_generator(
        spec.channels,
        base_width=cfg.generator_width,
        levels=cfg.generator_levels,
        input_skip=cfg.generator_input_skip,
        init_seed=cfg.seeds.init,
    )
    f, head = _new_recognizer(cfg, spec.channels, len(classes))
    g_opt = SGD(g.parameter_list(), cfg.momentum, cfg.weight_decay)
    f_opt = SGD(f.parameter_list() + [head.weight], cfg.momentum, cfg.weight_decay)
    if protector_cfg.beta == 0:
        logger.info("beta=0: recognizer parameters stay at initialization")

    logger.info(f"Stage 1: {len(images)} images, {len(classes)} classes, {spec.kind.value}, "
                f"g params={g.parameter_count()}, f params={f.parameter_count()}")
    logs = []
    for epoch in range(cfg.epochs):
        lr = lr_at_epoch(cfg, epoch)
        rng = _epoch_rng(cfg, epoch)
        order = rng.permutation(len(images))
        sums = {"l_gen": 0.0, "l_fr": 0.0, "l_total": 0.0}
        correct = 0
        iterations = 0
        for idx in _batches(order, cfg.batch_size):
            X = images[idx]
            if cfg.flip_augment:
                X = random_flip(X, rng)
            y = labels[idx]
            graph = residue_graph(codec.encode(X, spec), g, spec)
            embeddings = f(graph.r)
            loss, parts = combined_loss(X, graph.X_prime, embeddings, y, head, protector_cfg)
            loss.backward()
            g_opt.step(lr * cfg.generator_lr_factor)
            if protector_cfg.beta > 0:
                f_opt.step(lr)
            else:
                f_opt.zero_grad()

            for key in sums:
                sums[key] += parts[key] * len(idx)
            correct += int((head.predict(embeddings.data) == y).sum())
            iterations += 1
            logger.debug(f"stage1 epoch={epoch} iter={iterations} " +
                         " ".join(f"{k}={v:.5f}" for k, v in parts.items()))

        log = EpochLog(
            epoch=epoch,
            lr=lr,
            l_gen=sums["l_gen"] / len(images),
            l_fr=sums["l_fr"] / len(images),
            l_total=sums["l_total"] / len(images),
            accuracy=correct / len(images),
            iterations=iterations,
        )
        logs.append(log)
        logger.info(f"Stage 1 epoch {epoch}: lr={lr:g} L_gen={log.l_gen:.4f} "
                    f"L_fr={log.l_fr:.4f} acc={log.accuracy:.3f}")

    g.freeze()
    return Stage1Result(g, f, head, logs, classes)


def _fit_recognizer(
    epoch_inputs: Callable[[int, np.random.Generator], Tuple[np.ndarray, np.ndarray]],
    in_channels: int,
    class_count: int,
    cfg: TrainConfig,
    tag: str,
    seed_offset: int = 2,
) -> Tuple[Model, ArcFaceHead, List[EpochLog]]:
    """Train a recognizer with the angular-margin loss only on per-epoch inputs."""
    f, head = _new_recognizer(cfg, in_channels, class_count, seed_offset)
    opt = SGD(f.parameter_list() + [head.weight], cfg.momentum, cfg.weight_decay)
    logs = []
    for epoch in range(cfg.epochs):
        lr = lr_at_epoch(cfg, epoch)
        rng = _epoch_rng(cfg, epoch)
        inputs, labels = epoch_inputs(epoch, rng)
        order = rng.permutation(len(inputs))
        total = 0.0
        correct = 0
        iterations = 0
        for idx in _batches(order, cfg.batch_size):
            embeddings = f(inputs[idx])
            loss = arcface_loss(embeddings, labels[idx], head)
            loss.backward()
            opt.step(lr)
            total += loss.item() * len(idx)
            correct += int((head.predict(embeddings.data) == labels[idx]).sum())
            iterations += 1
        log = EpochLog(
            epoch=epoch,
            lr=lr,
            l_fr=total / len(inputs),
            l_total=total / len(inputs),
            accuracy=correct / len(inputs),
            iterations=iterations,
        )
        logs.append(log)
        logger.info(f"{tag} epoch {epoch}: lr={lr:g} L_fr={log.l_fr:.4f} acc={log.accuracy:.3f} "
                    f"iters={iterations}")
    return f, head, logs


def _flip_variants(images: np.ndarray, transform: Callable[[np.ndarray], np.ndarray]):
    """transform() of the images and of their horizontal flips (flip happens first)."""
    return transform(images), transform(flip_horizontal(images))


def train_stage2(
    dataset: DatasetLike,
    g: Model,
    cfg: TrainConfig,
    protector_cfg: ProtectorConfig,
) -> RecognizerResult:
    """
    Train f_p on protective images from a frozen g.

    Every training image becomes augment_copies protected variants per epoch,
    each with a fresh seed derived from (shuffle seed, epoch, index, copy).

    Raises:
        StateError: g still has trainable parameters
    """
    if not g.is_frozen:
        raise StateError("train_stage2 requires a frozen generator (call g.freeze())")
    if protector_cfg.perturbation == "none":
        logger.warning("Stage 2 with perturbation 'none': training on the unperturbed residue (ablation)")
    images, labels, classes = _training_arrays(dataset, SPLIT_DEFENDER_TRAIN)
    if len(classes) < 2:
        raise InvalidArgumentError("stage 2 needs at least 2 identities")

    protector = Protector(g, protector_cfg)
    residues, flipped = _flip_variants(images, protector.residues)
    copies = cfg.augment_copies
    n = len(images)

    def epoch_inputs(epoch: int, rng: np.random.Generator):
        base = np.repeat(np.arange(n), copies)
        copy_index = np.tile(np.arange(copies), n)
        flips = rng.random(len(base)) < 0.5 if cfg.flip_augment else np.zeros(len(base), dtype=bool)
        r = np.where(flips[:, None, None, None], flipped[base], residues[base])
        seeds = [derive_seed(cfg.seeds.shuffle, epoch, int(i), int(c)) for i, c in zip(base, copy_index)]
        perturbed = perturb_batch(r, seeds, protector_cfg.perturbation, protector_cfg.mask_ratio)
        return codec.decode(perturbed, protector_cfg.mapping).astype(np.float32), labels[base]

    f_p, head_p, logs = _fit_recognizer(epoch_inputs, 3, len(classes), cfg, "Stage 2")
    return RecognizerResult(f_p, head_p, logs, classes)


def train_recognizer(
    dataset: DatasetLike,
    cfg: TrainConfig,
    transform: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    in_channels: int = 3,
    tag: str = "Recognizer",
) -> RecognizerResult:
    """
    Train a recognizer on transform(X) (X itself when no transform is given).

    Used for the unprotected baseline and the ablations (R', r). Flips are
    applied to X before the transform.
    """
    images, labels, classes = _training_arrays(dataset, SPLIT_DEFENDER_TRAIN)
    if len(classes) < 2:
        raise InvalidArgumentError("recognizer training needs at least 2 identities")
    transform = transform or (lambda batch: batch)
    plain, flipped = _flip_variants(images, transform)
    plain = np.asarray(plain, dtype=np.float32)
    flipped = np.asarray(flipped, dtype=np.float32)
    if plain.shape[1] != in_channels:
        raise InvalidArgumentError(f"transform yields {plain.shape[1]} channels, expected {in_channels}")

    def epoch_inputs(epoch: int, rng: np.random.Generator):
        if not cfg.flip_augment:
            return plain, labels
        flips = rng.random(len(plain)) < 0.5
        return np.where(flips[:, None, None, None], flipped, plain), labels

    f, head, logs = _fit_recognizer(epoch_inputs, in_channels, len(classes), cfg, tag)
    return RecognizerResult(f, head, logs, classes)


def train_recovery(
    dataset: DatasetLike,
    protector: Optional[Protector],
    cfg_attack: AttackConfig,
) -> RecoveryResult:
    """
    Fit f^-1 minimizing mean |f^-1(X_p) - X| on the attacker's images.

    Modes:
        random: each sample gets a fresh seed every epoch
        fixed: one seed (cfg_attack.fixed_seed) for every sample and epoch
        identity: X_p = X (sanity upper bound; protector may be None)

    Training stops after cfg_attack.epochs or when the epoch loss has not
    improved for cfg_attack.patience epochs; the best epoch's weights are kept.
    """
    if isinstance(dataset, ToyDataset):
        images, _ = dataset.arrays(SPLIT_ATTACKER)
    else:
        images = dataset[0]
    images = np.asarray(images, dtype=np.float32)
    if len(images) == 0:
        raise InvalidArgumentError("attacker dataset is empty")
    if cfg_attack.mode != "identity" and protector is None:
        raise InvalidArgumentError(f"{cfg_attack.mode} mode needs a protector")

    residues = None
    if cfg_attack.mode != "identity":
        residues = protector.residues(images)

    def protected(epoch: int) -> np.ndarray:
        if cfg_attack.mode == "identity":
            return images
        if cfg_attack.mode == "fixed":
            seeds = [cfg_attack.fixed_seed] * len(images)
        else:
            seeds = [derive_seed(cfg_attack.seed_base, epoch, i) for i in range(len(images))]
        perturbed = perturb_batch(residues, seeds, protector.cfg.perturbation, protector.cfg.mask_ratio)
        return codec.decode(perturbed, protector.spec).astype(np.float32)

    model = build_recovery(cfg_attack.recovery_width, cfg_attack.recovery_levels, cfg_attack.init_seed)
    opt = SGD(model.parameter_list(), cfg_attack.momentum, cfg_attack.weight_decay)
    logger.info(f"Recovery training ({cfg_attack.mode}): {len(images)} images, params={model.parameter_count()}")

    logs: List[EpochLog] = []
    best_loss = math.inf
    best_state = model.state_dict()
    stale = 0
    stopped_early = False
    for epoch in range(cfg_attack.epochs):
        rng = np.random.default_rng([cfg_attack.data_seed, epoch])
        inputs = protected(epoch)
        order = rng.permutation(len(images))
        total = 0.0
        iterations = 0
        for idx in _batches(order, cfg_attack.batch_size):
            loss = l1_loss(model(inputs[idx]), Tensor(images[idx]))
            loss.backward()
            opt.step(cfg_attack.lr)
            total += loss.item() * len(idx)
            iterations += 1
        epoch_loss = total / len(images)
        logs.append(EpochLog(epoch=epoch, lr=cfg_attack.lr, l_gen=epoch_loss, l_total=epoch_loss,
                             iterations=iterations))
        logger.info(f"Recovery epoch {epoch}: L1={epoch_loss:.4f}")

        if epoch_loss < best_loss - PLATEAU_TOLERANCE:
            best_loss = epoch_loss
            best_state = model.state_dict()
            stale = 0
        else:
            stale += 1
            if stale >= cfg_attack.patience:
                logger.info(f"Recovery loss plateaued for {stale} epochs; stopping at epoch {epoch}")
                stopped_early = True
                break

    model.load_state_dict(best_state)
    model.freeze()
    return RecoveryResult(model, logs, stopped_early)
