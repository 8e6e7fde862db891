"""
Enrollment and verification service.

The client side holds the frozen generator and produces protective images;
the provider side holds f_p, enrolls identity templates from protected
images and verifies protected probes against them.
"""

import logging
from pathlib import Path
from typing import Dict, Optional, Sequence

import numpy as np

from config.config import active_config as Config
from minusface.data import save_image
from minusface.errors import FormatError, InvalidArgumentError, StateError
from minusface.models import ProtectorConfig, VerificationDecision
from minusface.nn.network import Model, embed
from minusface.pipeline import Protector
from minusface.storage import load_model, write_representation

logger = logging.getLogger(__name__)


def _unit(vectors: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(vectors, axis=-1, keepdims=True)
    return vectors / np.maximum(norms, 1e-12)


class ProtectionService:
    """
    Wraps a Protector (client transform) and a protected recognizer f_p
    (provider model) behind protect / enroll / verify.
    """

    def __init__(
        self,
        protector: Optional[Protector] = None,
        recognizer: Optional[Model] = None,
        threshold: Optional[float] = None,
    ):
        self.protector = protector
        self.recognizer = recognizer
        self.threshold = Config.VERIFY_THRESHOLD if threshold is None else float(threshold)
        self.templates: Dict[str, np.ndarray] = {}

    @classmethod
    def from_files(
        cls,
        generator_path=None,
        recognizer_path=None,
        protector_cfg: Optional[ProtectorConfig] = None,
        threshold: Optional[float] = None,
    ) -> "ProtectionService":
        """Load g and/or f_p checkpoints; g is frozen on load."""
        protector = None
        recognizer = None
        if generator_path is not None:
            g, _, mapping = load_model(generator_path)
            cfg = protector_cfg or ProtectorConfig.from_config()
            if mapping is not None and mapping != cfg.mapping:
                cfg = cfg.model_copy(update={"mapping": mapping})
            protector = Protector(g.freeze(), cfg)
        if recognizer_path is not None:
            recognizer, _, _ = load_model(recognizer_path)
            recognizer.freeze()
        return cls(protector, recognizer, threshold)

    def _require_protector(self) -> Protector:
        if self.protector is None:
            raise StateError("no generator loaded; protection is unavailable")
        return self.protector

    def _require_recognizer(self) -> Model:
        if self.recognizer is None:
            raise StateError("no protected recognizer loaded; enroll/verify are unavailable")
        return self.recognizer

    # ------------------------------------------------------------------
    # Client side
    # ------------------------------------------------------------------

    def protect(self, image, seed: int) -> np.ndarray:
        """X_p for one (3, H, W) image (unclamped)."""
        return self._require_protector().protect(image, seed)

    def protect_to_file(self, image, seed: int, path, preview_path=None) -> int:
        """
        Write X_p as a spatial MFRP file, optionally with a clamped 8-bit
        preview. Returns the MFRP size in bytes.
        """
        protector = self._require_protector()
        X_p = protector.protect(image, seed)
        size = write_representation(
            path, X_p, protector.spec, spatial=True,
            unperturbed=protector.cfg.perturbation == "none",
        )
        if preview_path is not None:
            save_image(np.clip(X_p, 0.0, 1.0), preview_path)
        logger.info(f"Protected image written to {path} ({size} bytes)")
        return size

    # ------------------------------------------------------------------
    # Provider side
    # ------------------------------------------------------------------

    def template(self, protected_images) -> np.ndarray:
        """Unit-normalized mean of the unit f_p embeddings of protected images."""
        batch = np.asarray(protected_images, dtype=np.float32)
        if batch.ndim == 3:
            batch = batch[None]
        if batch.ndim != 4 or len(batch) == 0:
            raise InvalidArgumentError(f"expected (N, 3, H, W) protected images, got {batch.shape}")
        embeddings = _unit(embed(self._require_recognizer(), batch))
        return _unit(embeddings.mean(axis=0))

    def enroll(self, identity: str, protected_images) -> np.ndarray:
        if not identity:
            raise InvalidArgumentError("identity name must not be empty")
        self.templates[identity] = self.template(protected_images)
        logger.info(f"Enrolled {identity!r}")
        return self.templates[identity]

    def verify(self, identity: str, protected_probe) -> VerificationDecision:
        """Cosine score of a protected probe against an enrolled template."""
        if identity not in self.templates:
            raise InvalidArgumentError(f"identity {identity!r} is not enrolled")
        probe = self.template(protected_probe)
        score = float(np.dot(probe, self.templates[identity]))
        decision = VerificationDecision(
            identity=identity, score=score, threshold=self.threshold, match=score > self.threshold
        )
        logger.info(f"Verify {identity!r}: score={score:.4f} match={decision.match}")
        return decision

    def identify(self, protected_probe, candidates: Optional[Sequence[str]] = None) -> VerificationDecision:
        """Best-scoring enrolled identity for a protected probe."""
        names = list(candidates) if candidates is not None else sorted(self.templates)
        if not names:
            raise StateError("no identities enrolled")
        decisions = [self.verify(name, protected_probe) for name in names]
        return max(decisions, key=lambda d: d.score)

    # ------------------------------------------------------------------
    # Template persistence
    # ------------------------------------------------------------------

    def save_templates(self, path) -> Path:
        path = Path(path)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            with path.open("wb") as fh:
                np.savez(fh, **self.templates)
        except OSError as e:
            raise FormatError(path, f"cannot write templates ({e.strerror})", e)
        return path

    def load_templates(self, path) -> Dict[str, np.ndarray]:
        path = Path(path)
        try:
            with np.load(path) as archive:
                loaded = {name: archive[name].astype(np.float64) for name in archive.files}
        except FileNotFoundError as e:
            raise FormatError(path, "no such file", e)
        except (OSError, ValueError) as e:
            raise FormatError(path, f"not a template archive ({e})", e)
        self.templates.update(loaded)
        return loaded

    def is_available(self) -> bool:
        return self.protector is not None or self.recognizer is not None


# Singleton instance
_service_instance: Optional[ProtectionService] = None


def get_service(generator_path=None, recognizer_path=None, threshold: Optional[float] = None) -> ProtectionService:
    """Get or create the singleton service; paths apply only on first creation."""
    global _service_instance
    if _service_instance is None:
        _service_instance = ProtectionService.from_files(generator_path, recognizer_path, threshold=threshold)
    return _service_instance


def reset_service() -> None:
    global _service_instance
    _service_instance = None
