"""
Synthetic identity datasets, image I/O, verification pairs and augmentation.
"""

import logging
from itertools import combinations
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
from PIL import Image, UnidentifiedImageError
from pydantic import BaseModel, ConfigDict

from minusface.errors import FormatError, InvalidArgumentError
from minusface.storage import read_manifest, write_manifest

logger = logging.getLogger(__name__)

SPLIT_DEFENDER_TRAIN = "defender-train"
SPLIT_DEFENDER_TEST = "defender-test"
SPLIT_ATTACKER = "attacker"
SPLITS = (SPLIT_DEFENDER_TRAIN, SPLIT_DEFENDER_TEST, SPLIT_ATTACKER)

MAX_JITTER = 2
BRIGHTNESS_JITTER = 0.1
NOISE_SIGMA = 0.02

_SUFFIX_FORMATS = {".png": "PNG", ".ppm": "PPM"}


class ToyDataset(BaseModel):
    """Images (N, 3, H, W) in [0, 1], identity labels and split tags."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    images: np.ndarray
    labels: np.ndarray
    splits: List[str]
    identities: int
    images_per_identity: int
    size: int

    def __len__(self) -> int:
        return len(self.labels)

    def indices(self, *splits: str) -> np.ndarray:
        wanted = set(splits) if splits else set(SPLITS)
        return np.array([i for i, s in enumerate(self.splits) if s in wanted], dtype=np.int64)

    def arrays(self, *splits: str) -> Tuple[np.ndarray, np.ndarray]:
        """(images, labels) of the requested splits, all splits when none given."""
        idx = self.indices(*splits)
        return self.images[idx], self.labels[idx]

    def subset(self, *splits: str) -> "ToyDataset":
        idx = self.indices(*splits)
        return self.model_copy(update={
            "images": self.images[idx],
            "labels": self.labels[idx],
            "splits": [self.splits[i] for i in idx],
        })

    def identity_set(self, *splits: str) -> set:
        return set(int(v) for v in self.labels[self.indices(*splits)])


# ----------------------------------------------------------------------
# Synthetic faces
# ----------------------------------------------------------------------

def _identity_params(rng: np.random.Generator) -> dict:
    return {
        "background": rng.uniform(0.05, 0.6, size=3),
        "skin": rng.uniform(0.45, 0.95, size=3),
        "center": rng.uniform(-0.06, 0.06, size=2),
        "radii": (rng.uniform(0.28, 0.40), rng.uniform(0.34, 0.46)),
        "eye_y": rng.uniform(-0.16, -0.04),
        "eye_dx": rng.uniform(0.10, 0.20),
        "eye_r": rng.uniform(0.035, 0.075),
        "eye_color": rng.uniform(0.0, 0.35, size=3),
        "nose_len": rng.uniform(0.06, 0.16),
        "nose_w": rng.uniform(0.02, 0.05),
        "nose_shade": rng.uniform(-0.25, -0.05),
        "mouth_y": rng.uniform(0.14, 0.26),
        "mouth_w": rng.uniform(0.08, 0.20),
        "mouth_h": rng.uniform(0.015, 0.05),
        "mouth_color": rng.uniform(0.2, 0.8, size=3) * np.array([1.0, 0.4, 0.4]),
        "hair": rng.uniform(0.0, 0.5, size=3),
        "hair_line": rng.uniform(-0.36, -0.22),
    }


def render_face(params: dict, size: int, shift=(0, 0)) -> np.ndarray:
    """Draw one parametric face as a (3, size, size) array in [0, 1]."""
    coords = (np.arange(size) + 0.5) / size - 0.5
    y = coords[:, None] - shift[0] / size
    x = coords[None, :] - shift[1] / size

    image = np.broadcast_to(params["background"][:, None, None], (3, size, size)).copy()

    cy, cx = params["center"]
    ry, rx = params["radii"][1], params["radii"][0]
    face = ((y - cy) / ry) ** 2 + ((x - cx) / rx) ** 2 <= 1.0
    image[:, face] = params["skin"][:, None]

    hair = face & (y - cy < params["hair_line"])
    image[:, hair] = params["hair"][:, None]

    for side in (-1.0, 1.0):
        eye = (y - cy - params["eye_y"]) ** 2 + (x - cx - side * params["eye_dx"]) ** 2 <= params["eye_r"] ** 2
        image[:, eye] = params["eye_color"][:, None]

    nose = (np.abs(x - cx) <= params["nose_w"]) & (y - cy >= 0) & (y - cy <= params["nose_len"])
    image[:, nose & face] = np.clip(params["skin"] + params["nose_shade"], 0, 1)[:, None]

    mouth = ((y - cy - params["mouth_y"]) / params["mouth_h"]) ** 2 + ((x - cx) / params["mouth_w"]) ** 2 <= 1.0
    image[:, mouth] = params["mouth_color"][:, None]
    return image


def generate_toy_dataset(
    n_ids: int,
    per_id: int,
    size: int,
    seed: int,
    test_fraction: float = 0.3,
) -> ToyDataset:
    """
    Build a seeded synthetic face dataset.

    Each identity draws fixed face geometry and colors; each image adds
    position jitter (at most 2 px), brightness jitter (at most 0.1), Gaussian
    noise (sigma 0.02) and a random horizontal flip. Half of the identities
    (seeded choice) form the attacker split; the rest are divided per image
    into defender-train and defender-test.

    Args:
        n_ids: Number of identities (>= 2)
        per_id: Images per identity (>= 2)
        size: Image height and width (>= 16)
        seed: Dataset seed
        test_fraction: Share of each defender identity's images held out

    Returns:
        ToyDataset with n_ids * per_id samples
    """
    if n_ids < 2 or per_id < 2:
        raise InvalidArgumentError(f"need at least 2 identities and 2 images each, got {n_ids}x{per_id}")
    if size < 16:
        raise InvalidArgumentError(f"image size must be at least 16, got {size}")
    if not 0.0 < test_fraction < 1.0:
        raise InvalidArgumentError(f"test_fraction must lie in (0, 1), got {test_fraction}")

    rng = np.random.default_rng(seed)
    identity_params = [_identity_params(rng) for _ in range(n_ids)]

    n_attacker = n_ids // 2
    attacker_ids = set(int(i) for i in rng.permutation(n_ids)[:n_attacker])
    n_test = min(max(1, int(round(per_id * test_fraction))), per_id - 1)

    images = np.empty((n_ids * per_id, 3, size, size), dtype=np.float32)
    labels = np.empty(n_ids * per_id, dtype=np.int64)
    splits: List[str] = []
    for identity, params in enumerate(identity_params):
        for k in range(per_id):
            index = identity * per_id + k
            shift = rng.integers(-MAX_JITTER, MAX_JITTER + 1, size=2)
            face = render_face(params, size, shift)
            face = face + rng.uniform(-BRIGHTNESS_JITTER, BRIGHTNESS_JITTER)
            face = face + rng.normal(0.0, NOISE_SIGMA, size=face.shape)
            if rng.random() < 0.5:
                face = face[:, :, ::-1]
            images[index] = np.clip(face, 0.0, 1.0)
            labels[index] = identity
            if identity in attacker_ids:
                splits.append(SPLIT_ATTACKER)
            else:
                splits.append(SPLIT_DEFENDER_TEST if k >= per_id - n_test else SPLIT_DEFENDER_TRAIN)

    logger.info(f"Generated toy dataset: {n_ids} identities x {per_id} images, {size}x{size}, seed={seed}")
    return ToyDataset(
        images=images,
        labels=labels,
        splits=splits,
        identities=n_ids,
        images_per_identity=per_id,
        size=size,
    )


# ----------------------------------------------------------------------
# Image I/O
# ----------------------------------------------------------------------

def load_image(path) -> np.ndarray:
    """Load an 8-bit PNG or binary PPM as a (3, H, W) float32 array in [0, 1]."""
    path = Path(path)
    if not path.exists():
        raise FormatError(path, "no such file")
    try:
        with Image.open(path) as img:
            if img.format not in ("PNG", "PPM"):
                raise FormatError(path, f"unsupported image format {img.format}")
            if img.mode not in ("RGB", "RGBA", "L", "P", "LA"):
                raise FormatError(path, f"unsupported image mode {img.mode} (8-bit expected)")
            rgb = np.asarray(img.convert("RGB"), dtype=np.float32)
    except UnidentifiedImageError as e:
        raise FormatError(path, "not a readable PNG/PPM image", e)
    except OSError as e:
        if isinstance(e, FormatError):
            raise
        raise FormatError(path, f"corrupt image ({e})", e)
    return np.ascontiguousarray(rgb.transpose(2, 0, 1) / 255.0)


def to_uint8(image) -> np.ndarray:
    """Clamp to [0, 1] and quantize a (3, H, W) image to (H, W, 3) uint8."""
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[0] != 3:
        raise InvalidArgumentError(f"expected a (3, H, W) image, got {arr.shape}")
    return np.round(np.clip(arr, 0.0, 1.0) * 255.0).astype(np.uint8).transpose(1, 2, 0)


def save_image(image, path) -> None:
    """Save as 8-bit PNG or PPM (chosen by suffix); lossy, for visualization."""
    path = Path(path)
    fmt = _SUFFIX_FORMATS.get(path.suffix.lower())
    if fmt is None:
        raise FormatError(path, f"unsupported image suffix {path.suffix!r} (use .png or .ppm)")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        Image.fromarray(to_uint8(image)).save(path, format=fmt)
    except OSError as e:
        raise FormatError(path, f"cannot write image ({e})", e)


# ----------------------------------------------------------------------
# Pairs and augmentation
# ----------------------------------------------------------------------

def _draw(candidates: List[Tuple[int, int]], count: int, rng: np.random.Generator) -> List[Tuple[int, int]]:
    if count == 0:
        return []
    if count <= len(candidates):
        picks = rng.choice(len(candidates), size=count, replace=False)
    else:
        # every distinct pair once, then repeats
        extra = rng.choice(len(candidates), size=count - len(candidates), replace=True)
        picks = np.concatenate([rng.permutation(len(candidates)), extra])
    return [candidates[i] for i in picks]


def make_pairs(dataset, n_pairs: int, seed: int) -> List[Tuple[int, int, bool]]:
    """
    Seeded, balanced verification pairs over sample indices.

    Half of the pairs share an identity; pairs are drawn without replacement
    while enough distinct pairs exist.

    Args:
        dataset: ToyDataset or a 1-D label array
        n_pairs: Total pairs (positives get the extra one when odd)
        seed: Pair-sampling seed

    Returns:
        List of (index_a, index_b, same_identity)
    """
    labels = np.asarray(dataset.labels if isinstance(dataset, ToyDataset) else dataset).reshape(-1)
    if n_pairs < 1:
        raise InvalidArgumentError(f"n_pairs must be positive, got {n_pairs}")
    if len(np.unique(labels)) < 2:
        raise InvalidArgumentError("make_pairs needs at least 2 identities")

    positives, negatives = [], []
    for i, j in combinations(range(len(labels)), 2):
        (positives if labels[i] == labels[j] else negatives).append((i, j))
    if not positives:
        raise InvalidArgumentError("make_pairs needs an identity with at least 2 samples")

    rng = np.random.default_rng(seed)
    n_pos = (n_pairs + 1) // 2
    n_neg = n_pairs - n_pos
    pairs = [(i, j, True) for i, j in _draw(positives, n_pos, rng)]
    pairs += [(i, j, False) for i, j in _draw(negatives, n_neg, rng)]
    order = rng.permutation(len(pairs))
    return [pairs[k] for k in order]


def flip_horizontal(images: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(np.asarray(images)[..., ::-1])


def random_flip(images: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Flip each image of a (B, 3, H, W) batch with probability 0.5."""
    images = np.array(images, copy=True)
    mask = rng.random(len(images)) < 0.5
    images[mask] = images[mask][..., ::-1]
    return images


# ----------------------------------------------------------------------
# On-disk datasets
# ----------------------------------------------------------------------

def save_dataset(dataset: ToyDataset, directory) -> Path:
    """One directory per identity with zero-padded PNG names, plus manifest.txt."""
    directory = Path(directory)
    rows = []
    counters = {}
    for image, label, split in zip(dataset.images, dataset.labels, dataset.splits):
        label = int(label)
        k = counters.get(label, 0)
        counters[label] = k + 1
        relative = f"id_{label:04d}/{k:04d}.png"
        save_image(image, directory / relative)
        rows.append((relative, label, split))
    manifest = write_manifest(directory, rows)
    logger.info(f"Saved {len(rows)} images to {directory}")
    return manifest


def load_dataset(directory, size: Optional[int] = None) -> ToyDataset:
    """Load a dataset written by save_dataset (8-bit quantized)."""
    directory = Path(directory)
    rows = read_manifest(directory)
    if not rows:
        raise FormatError(directory / "manifest.txt", "empty manifest")
    images = np.stack([load_image(directory / relative) for relative, _, _ in rows]).astype(np.float32)
    labels = np.array([label for _, label, _ in rows], dtype=np.int64)
    splits = [split for _, _, split in rows]
    unknown = set(splits) - set(SPLITS)
    if unknown:
        raise FormatError(directory / "manifest.txt", f"unknown split tags {sorted(unknown)}")
    if size is not None and images.shape[-1] != size:
        raise InvalidArgumentError(f"dataset images are {images.shape[-1]} px, expected {size}")
    counts = np.bincount(labels)
    return ToyDataset(
        images=images,
        labels=labels,
        splits=splits,
        identities=len(np.unique(labels)),
        images_per_identity=int(counts[counts > 0].max()),
        size=images.shape[-1],
    )
