"""
Parsing helpers for command-line values and flat JSON config files.
"""

import json
import logging
from pathlib import Path
from typing import Dict, Tuple

from minusface.errors import FormatError, InvalidArgumentError
from minusface.models import AttackConfig, MappingSpec, ProtectorConfig, TrainConfig

logger = logging.getLogger(__name__)

SEED_LIMIT = 2 ** 64

# Config-file keys that set TrainConfig.seeds
SEED_KEYS = {"init_seed": "init", "data_seed": "data", "shuffle_seed": "shuffle"}

# Recovery-attacker keys are prefixed to keep them apart from the training schedule
ATTACK_PREFIX = "attack_"


def parse_seed(value) -> int:
    """
    Parse a seed given as an int or as decimal / 0x-hex text.

    Raises:
        InvalidArgumentError: not an integer, or outside [0, 2^64)
    """
    if isinstance(value, bool):
        raise InvalidArgumentError(f"seed must be an integer, got {value!r}")
    if isinstance(value, int):
        seed = value
    else:
        text = str(value).strip().replace("_", "")
        try:
            seed = int(text, 16) if text.lower().startswith("0x") else int(text, 10)
        except ValueError:
            raise InvalidArgumentError(f"seed {value!r} is neither decimal nor 0x-hex")
    if not 0 <= seed < SEED_LIMIT:
        raise InvalidArgumentError(f"seed {value!r} outside [0, 2^64)")
    return seed


def load_config_file(path) -> Dict[str, object]:
    """
    Read a flat JSON object of config overrides.

    Raises:
        FormatError: unreadable file, invalid JSON, non-object or nested values
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError as e:
        raise FormatError(path, "no such file", e)
    except OSError as e:
        raise FormatError(path, f"cannot read file ({e.strerror})", e)
    try:
        values = json.loads(text)
    except json.JSONDecodeError as e:
        raise FormatError(path, f"invalid JSON at line {e.lineno}: {e.msg}", e)
    if not isinstance(values, dict):
        raise FormatError(path, "config file must hold a JSON object")
    for key, value in values.items():
        if isinstance(value, dict) or (isinstance(value, list) and any(isinstance(v, (dict, list)) for v in value)):
            raise FormatError(path, f"key {key!r}: nested values are not supported")
    logger.debug(f"Loaded {len(values)} config values from {path}")
    return values


def split_overrides(values: Dict[str, object]) -> Tuple[Dict, Dict, Dict]:
    """
    Route flat config keys to (TrainConfig, ProtectorConfig, AttackConfig)
    override dicts.

    Seed keys (init_seed, data_seed, shuffle_seed) land in TrainConfig.seeds;
    init_seed and data_seed also seed the attacker. Attacker fields that
    share a name with a training field take the attack_ prefix
    (attack_epochs, attack_batch_size, ...).
    """
    train_fields = set(TrainConfig.model_fields) - {"seeds"}
    protector_fields = set(ProtectorConfig.model_fields)
    attack_fields = set(AttackConfig.model_fields)

    train: Dict[str, object] = {}
    protector: Dict[str, object] = {}
    attack: Dict[str, object] = {}
    seeds: Dict[str, int] = {}
    unknown = []

    for key, value in values.items():
        if key in SEED_KEYS:
            seeds[SEED_KEYS[key]] = parse_seed(value)
            if key in attack_fields:
                attack[key] = parse_seed(value)
        elif key == "mapping":
            try:
                protector["mapping"] = MappingSpec.parse(str(value))
            except ValueError as e:
                raise InvalidArgumentError(str(e))
        elif key.startswith(ATTACK_PREFIX) and key[len(ATTACK_PREFIX):] in attack_fields:
            attack[key[len(ATTACK_PREFIX):]] = value
        elif key in train_fields:
            train[key] = value
        elif key in protector_fields:
            protector[key] = value
        elif key in attack_fields:
            attack[key] = parse_seed(value) if key in ("fixed_seed", "seed_base") and value is not None else value
        else:
            unknown.append(key)

    if unknown:
        raise InvalidArgumentError(f"unknown config keys: {', '.join(sorted(unknown))}")
    if seeds:
        train["seeds"] = seeds
    return train, protector, attack
