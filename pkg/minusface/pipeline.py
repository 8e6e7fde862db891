"""
MinusFace transforms: residue computation, the protective transform
F = d(s(r; theta)) with r = e(X) - g(e(X)), and the combined training
objective alpha * L_gen + beta * L_fr.
"""

import logging
from typing import Dict, NamedTuple, Sequence, Tuple

import numpy as np

from minusface import codec
from minusface.errors import InvalidArgumentError, StateError
from minusface.models import MappingSpec, ProtectorConfig
from minusface.nn import functional as F
from minusface.nn.losses import arcface_loss, l1_loss
from minusface.nn.network import ArcFaceHead, Model, embed
from minusface.nn.tensor import Tensor
from minusface.perturb import perturb, perturb_batch

logger = logging.getLogger(__name__)


class Regeneration(NamedTuple):
    x: np.ndarray
    x_prime: np.ndarray
    X_prime: np.ndarray


class ResidueGraph(NamedTuple):
    """Graph-recorded stage-1 quantities for one batch."""
    r: Tensor
    X_prime: Tensor


def residue(x, x_prime) -> np.ndarray:
    """r = x - x'."""
    x = np.asarray(x)
    x_prime = np.asarray(x_prime)
    if x.shape != x_prime.shape:
        raise InvalidArgumentError(f"residue: shape mismatch {x.shape} vs {x_prime.shape}")
    return x - x_prime


def _check_generator(g: Model, spec: MappingSpec) -> None:
    if g.spec.in_channels != spec.channels:
        raise InvalidArgumentError(
            f"generator expects {g.spec.in_channels} channels but {spec.kind.value} has {spec.channels}"
        )


def _batched(images) -> Tuple[np.ndarray, bool]:
    arr = np.asarray(images, dtype=np.float32)
    if arr.ndim == 3:
        return arr[None], True
    if arr.ndim != 4:
        raise InvalidArgumentError(f"expected (3, H, W) or (B, 3, H, W) images, got {arr.shape}")
    return arr, False


def regenerate(X, g: Model, spec: MappingSpec = MappingSpec(), batch_size: int = 32) -> Regeneration:
    """
    x = e(X), x' = g(x), X' = d(x').

    Accepts a single (3, H, W) image or a (B, 3, H, W) batch and returns
    arrays with the same leading layout.
    """
    _check_generator(g, spec)
    batch, single = _batched(X)
    x = codec.encode(batch, spec)
    x_prime = embed(g, x, batch_size=batch_size)
    X_prime = codec.decode(x_prime, spec)
    if single:
        return Regeneration(x[0], x_prime[0], X_prime[0])
    return Regeneration(x, x_prime, X_prime)


def compute_residue(X, g: Model, cfg: ProtectorConfig, batch_size: int = 32) -> np.ndarray:
    """r for the configured pipeline (x itself when feature subtraction is disabled)."""
    if not cfg.feature_subtraction:
        batch, single = _batched(X)
        x = codec.encode(batch, cfg.mapping)
        return x[0] if single else x
    regen = regenerate(X, g, cfg.mapping, batch_size)
    return residue(regen.x, regen.x_prime)


def protect(X, g: Model, spec: MappingSpec, seed: int, cfg: ProtectorConfig) -> np.ndarray:
    """
    X_p = d(s(r; theta)) for one (3, H, W) image.

    The result is unclamped; callers clamp copies for visualization only.
    """
    if cfg.mapping != spec:
        cfg = cfg.model_copy(update={"mapping": spec})
    r = compute_residue(X, g, cfg)
    if r.ndim != 3:
        raise InvalidArgumentError(f"protect takes a single (3, H, W) image, got a batch of {len(r)}")
    if cfg.perturbation == "none":
        logger.debug("protect called with perturbation 'none' (ablation output)")
    return codec.decode(perturb(r, seed, cfg.perturbation, cfg.mask_ratio), spec)


def residue_graph(x: np.ndarray, g: Model, spec: MappingSpec) -> ResidueGraph:
    """
    Stage-1 forward with gradients through g: r = x - g(x), X' = d(g(x)).

    d runs as a fixed channel projection so L_gen back-propagates into g.
    """
    _check_generator(g, spec)
    x_t = Tensor(np.asarray(x, dtype=np.float32))
    x_prime = g(x_t)
    r = F.sub(x_t, x_prime)
    X_prime = F.channel_project(x_prime, codec.decode_matrix(spec))
    return ResidueGraph(r, X_prime)


def combined_loss(
    X,
    X_prime: Tensor,
    embeddings: Tensor,
    labels,
    head: ArcFaceHead,
    cfg: ProtectorConfig,
) -> Tuple[Tensor, Dict[str, float]]:
    """
    L_minus = alpha * l1(X, X') + beta * arcface(f(r), y).

    Returns:
        (scalar loss tensor, {"l_gen": ..., "l_fr": ..., "l_total": ...})
    """
    X_t = X if isinstance(X, Tensor) else Tensor(np.asarray(X, dtype=np.float32))
    if X_t.shape != X_prime.shape:
        raise InvalidArgumentError(f"combined_loss: X {X_t.shape} vs X' {X_prime.shape}")
    if embeddings.shape[0] != X_t.shape[0]:
        raise InvalidArgumentError(f"combined_loss: {embeddings.shape[0]} embeddings for {X_t.shape[0]} images")
    l_gen = l1_loss(X_t, X_prime)
    l_fr = arcface_loss(embeddings, labels, head)
    total = F.add(F.scale(l_gen, cfg.alpha), F.scale(l_fr, cfg.beta))
    parts = {"l_gen": l_gen.item(), "l_fr": l_fr.item(), "l_total": total.item()}
    return total, parts


class Protector:
    """
    A frozen generator plus its pipeline settings: the client-side transform.
    """

    def __init__(self, g: Model, cfg: ProtectorConfig):
        if cfg.feature_subtraction:
            _check_generator(g, cfg.mapping)
        if not g.is_frozen:
            raise StateError("Protector requires a frozen generator")
        self.g = g
        self.cfg = cfg

    @property
    def spec(self) -> MappingSpec:
        return self.cfg.mapping

    def residues(self, X, batch_size: int = 32) -> np.ndarray:
        return compute_residue(X, self.g, self.cfg, batch_size)

    def perturbed(self, X, seeds: Sequence[int], batch_size: int = 32) -> np.ndarray:
        """s(r; theta) for a (B, 3, H, W) batch, one seed per image."""
        r = self.residues(np.asarray(X), batch_size)
        return perturb_batch(r, seeds, self.cfg.perturbation, self.cfg.mask_ratio)

    def protect(self, X, seed: int) -> np.ndarray:
        return protect(X, self.g, self.spec, seed, self.cfg)

    def protect_batch(self, X, seeds: Sequence[int], batch_size: int = 32) -> np.ndarray:
        """X_p for a (B, 3, H, W) batch, one seed per image."""
        return codec.decode(self.perturbed(X, seeds, batch_size), self.spec)

    def blank_residue(self, X, batch_size: int = 32) -> np.ndarray:
        """R' = d(r), the unperturbed decoded residue."""
        return codec.decode(self.residues(X, batch_size), self.spec)
