#!/usr/bin/env python3
"""
File formats for MinusFace artifacts.
Handles representation tensors (MFRP), checkpoints (MFCK), dataset
manifests, training logs and plain-text reports.

USAGE:
    from minusface.storage import write_representation, read_representation
    from minusface.storage import save_model, load_model
"""

import json
import logging
import struct
from pathlib import Path
from typing import Dict, List, NamedTuple, Optional, Tuple

import numpy as np

from minusface.errors import FormatError, InvalidArgumentError
from minusface.models import EpochLog, MappingSpec, ModelSpec

logger = logging.getLogger(__name__)


# MFRP: magic, version, mapping kind, flags, then C, H, W (uint32 LE)
MFRP_MAGIC = b"MFRP"
MFRP_VERSION = 1
MFRP_HEADER = struct.Struct("<4sBBBIII")
FLAG_SPATIAL = 0x01
FLAG_UNPERTURBED = 0x02

# MFCK: magic, version, parameter count
MFCK_MAGIC = b"MFCK"
MFCK_VERSION = 1
MFCK_HEADER = struct.Struct("<4sBI")

MANIFEST_NAME = "manifest.txt"


class RepresentationFile(NamedTuple):
    data: np.ndarray
    mapping: MappingSpec
    spatial: bool
    unperturbed: bool


def _read_bytes(path) -> bytes:
    path = Path(path)
    try:
        return path.read_bytes()
    except FileNotFoundError as e:
        raise FormatError(path, "no such file", e)
    except OSError as e:
        raise FormatError(path, f"cannot read file ({e.strerror})", e)


def _write_bytes(path, payload: bytes) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(payload)
    except OSError as e:
        raise FormatError(path, f"cannot write file ({e.strerror})", e)


# ----------------------------------------------------------------------
# MFRP representation files
# ----------------------------------------------------------------------

def encode_representation(
    data,
    spec: MappingSpec = MappingSpec(),
    spatial: bool = False,
    unperturbed: bool = False,
) -> bytes:
    """Serialize a (C, H, W) tensor to MFRP bytes."""
    arr = np.asarray(data, dtype="<f4")
    if arr.ndim != 3:
        raise InvalidArgumentError(f"MFRP stores a single (C, H, W) tensor, got shape {arr.shape}")
    expected = 3 if spatial else spec.channels
    if arr.shape[0] != expected:
        raise InvalidArgumentError(f"expected {expected} channels, got {arr.shape[0]}")
    flags = (FLAG_SPATIAL if spatial else 0) | (FLAG_UNPERTURBED if unperturbed else 0)
    header = MFRP_HEADER.pack(MFRP_MAGIC, MFRP_VERSION, spec.code, flags, *arr.shape)
    return header + np.ascontiguousarray(arr).tobytes()


def write_representation(path, data, spec: MappingSpec = MappingSpec(), spatial: bool = False,
                         unperturbed: bool = False) -> int:
    """
    Write an MFRP file. Per-sample seeds are never part of the payload.

    Returns:
        Number of bytes written
    """
    payload = encode_representation(data, spec, spatial, unperturbed)
    _write_bytes(path, payload)
    logger.debug(f"Wrote {len(payload)} bytes to {path}")
    return len(payload)


def read_representation(path) -> RepresentationFile:
    """Read and validate an MFRP file."""
    raw = _read_bytes(path)
    if len(raw) < MFRP_HEADER.size:
        raise FormatError(path, "truncated MFRP header")
    magic, version, kind, flags, c, h, w = MFRP_HEADER.unpack_from(raw)
    if magic != MFRP_MAGIC:
        raise FormatError(path, f"bad magic {magic!r}")
    if version != MFRP_VERSION:
        raise FormatError(path, f"unsupported MFRP version {version}")
    try:
        spec = MappingSpec.from_code(kind)
    except ValueError as e:
        raise FormatError(path, str(e), e)
    spatial = bool(flags & FLAG_SPATIAL)
    expected_c = 3 if spatial else spec.channels
    if c != expected_c:
        raise FormatError(path, f"channel count {c} does not match header ({expected_c} expected)")
    body = raw[MFRP_HEADER.size:]
    if len(body) != c * h * w * 4:
        raise FormatError(path, f"payload has {len(body)} bytes, expected {c * h * w * 4}")
    data = np.frombuffer(body, dtype="<f4").reshape(c, h, w).astype(np.float32)
    return RepresentationFile(data, spec, spatial, bool(flags & FLAG_UNPERTURBED))


# ----------------------------------------------------------------------
# MFCK checkpoints
# ----------------------------------------------------------------------

def save_checkpoint(path, tensors: Dict[str, np.ndarray]) -> None:
    """Write a named parameter table."""
    parts = [MFCK_HEADER.pack(MFCK_MAGIC, MFCK_VERSION, len(tensors))]
    for name, value in tensors.items():
        arr = np.ascontiguousarray(value, dtype="<f4")
        encoded = name.encode("utf-8")
        parts.append(struct.pack("<I", len(encoded)))
        parts.append(encoded)
        parts.append(struct.pack("<I", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(arr.tobytes())
    _write_bytes(path, b"".join(parts))


def read_checkpoint(path) -> Dict[str, np.ndarray]:
    """Read a named parameter table (no model validation)."""
    raw = _read_bytes(path)
    try:
        magic, version, count = MFCK_HEADER.unpack_from(raw)
        if magic != MFCK_MAGIC:
            raise FormatError(path, f"bad magic {magic!r}")
        if version != MFCK_VERSION:
            raise FormatError(path, f"unsupported MFCK version {version}")
        offset = MFCK_HEADER.size
        tensors: Dict[str, np.ndarray] = {}
        for _ in range(count):
            (name_len,) = struct.unpack_from("<I", raw, offset)
            offset += 4
            name = raw[offset:offset + name_len].decode("utf-8")
            offset += name_len
            (ndim,) = struct.unpack_from("<I", raw, offset)
            offset += 4
            shape = struct.unpack_from(f"<{ndim}I", raw, offset)
            offset += 4 * ndim
            size = int(np.prod(shape)) if ndim else 1
            end = offset + 4 * size
            if end > len(raw):
                raise FormatError(path, f"truncated data for parameter {name!r}")
            tensors[name] = np.frombuffer(raw[offset:end], dtype="<f4").reshape(shape).astype(np.float32)
            offset = end
    except (struct.error, UnicodeDecodeError) as e:
        raise FormatError(path, f"corrupt checkpoint ({e})", e)
    if offset != len(raw):
        raise FormatError(path, f"{len(raw) - offset} trailing bytes")
    return tensors


def _sidecar(path) -> Path:
    return Path(path).with_suffix(".json")


def save_model(path, model, head=None, mapping: Optional[MappingSpec] = None) -> None:
    """
    Save a model (and optional angular-margin head) as MFCK plus a JSON
    sidecar describing the architecture.
    """
    tensors = model.state_dict()
    meta = {"model": model.spec.model_dump(mode="json"), "head": None, "mapping": None}
    if head is not None:
        tensors.update(head.state_dict())
        meta["head"] = {
            "class_count": head.class_count,
            "embedding_dim": head.embedding_dim,
            "scale": head.scale,
            "margin": head.margin,
            "margin_type": head.margin_type,
        }
    if mapping is not None:
        meta["mapping"] = mapping.kind.value
    save_checkpoint(path, tensors)
    _write_bytes(_sidecar(path), json.dumps(meta, indent=2).encode("utf-8"))
    logger.info(f"Saved {model} to {path}")


def load_model(path):
    """
    Rebuild a model from MFCK + sidecar, validating every name and shape.

    Returns:
        (model, head or None, MappingSpec or None)
    """
    from minusface.nn.network import ArcFaceHead, build_model

    try:
        meta = json.loads(_read_bytes(_sidecar(path)).decode("utf-8"))
        spec = ModelSpec(**meta["model"])
    except (ValueError, KeyError, TypeError) as e:
        raise FormatError(_sidecar(path), f"invalid model description ({e})", e)

    tensors = read_checkpoint(path)
    model = build_model(spec)
    head = None
    head_meta = meta.get("head")
    if head_meta:
        head = ArcFaceHead(**head_meta)
        try:
            head.load_state_dict({"head.weight": tensors.pop("head.weight")})
        except (KeyError, InvalidArgumentError) as e:
            raise FormatError(path, f"head weights do not match ({e})", e)
    try:
        model.load_state_dict(tensors)
    except InvalidArgumentError as e:
        raise FormatError(path, str(e), e)
    mapping = MappingSpec.parse(meta["mapping"]) if meta.get("mapping") else None
    return model, head, mapping


# ----------------------------------------------------------------------
# Manifests, logs and reports
# ----------------------------------------------------------------------

def write_manifest(directory, rows: List[Tuple[str, int, str]]) -> Path:
    path = Path(directory) / MANIFEST_NAME
    text = "".join(f"{p}\t{label}\t{split}\n" for p, label, split in rows)
    _write_bytes(path, text.encode("utf-8"))
    return path


def read_manifest(directory) -> List[Tuple[str, int, str]]:
    path = Path(directory) / MANIFEST_NAME
    rows = []
    for number, line in enumerate(_read_bytes(path).decode("utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != 3:
            raise FormatError(path, f"line {number}: expected path<TAB>label<TAB>split")
        try:
            rows.append((fields[0], int(fields[1]), fields[2]))
        except ValueError as e:
            raise FormatError(path, f"line {number}: bad label {fields[1]!r}", e)
    return rows


def write_epoch_logs(path, logs: List[EpochLog]) -> None:
    lines = []
    for log in logs:
        lines.append(" ".join(f"{key}={value}" for key, value in log.model_dump().items()))
    _write_bytes(path, ("\n".join(lines) + "\n").encode("utf-8"))


def read_epoch_logs(path) -> List[EpochLog]:
    logs = []
    for number, line in enumerate(_read_bytes(path).decode("utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            fields = dict(item.split("=", 1) for item in line.split())
            logs.append(EpochLog(**fields))
        except ValueError as e:
            raise FormatError(path, f"line {number}: {e}", e)
    return logs


def write_report(path, values: Dict[str, object]) -> None:
    """Plain-text 'key: value' report."""
    text = "".join(f"{key}: {value}\n" for key, value in values.items())
    _write_bytes(path, text.encode("utf-8"))


def read_report(path) -> Dict[str, str]:
    values = {}
    for line in _read_bytes(path).decode("utf-8").splitlines():
        if ":" in line:
            key, value = line.split(":", 1)
            values[key.strip()] = value.strip()
    return values
