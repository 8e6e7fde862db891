"""
Environment-driven configuration for the MinusFace toolkit.
"""
import os
from pathlib import Path
from dotenv import load_dotenv

# Load environment variables
load_dotenv()


def _int_env(name: str, default: int) -> int:
    """Read an integer env var, accepting decimal or 0x-hex."""
    raw = os.getenv(name)
    if raw is None or not raw.strip():
        return default
    return int(raw.strip(), 0)


class Config:
    """Base configuration class"""

    # Application root directory
    BASE_DIR = Path(__file__).parent.parent.absolute()

    PRESET = os.getenv('MINUSFACE_PRESET', 'desk')

    # Directories
    DATA_DIR = os.getenv('MINUSFACE_DATA_DIR', 'data')
    RUNS_DIR = os.getenv('MINUSFACE_RUNS_DIR', 'runs')

    # Logging
    LOG_LEVEL = os.getenv('LOG_LEVEL', 'INFO')
    LOG_FILE = os.getenv('LOG_FILE', 'minusface.log')

    # Seeds
    INIT_SEED = _int_env('MINUSFACE_INIT_SEED', 0)
    DATA_SEED = _int_env('MINUSFACE_DATA_SEED', 1)
    SHUFFLE_SEED = _int_env('MINUSFACE_SHUFFLE_SEED', 2)

    # Toy data
    IMAGE_SIZE = int(os.getenv('MINUSFACE_IMAGE_SIZE', 32))
    TOY_IDENTITIES = int(os.getenv('MINUSFACE_TOY_IDENTITIES', 10))
    TOY_PER_IDENTITY = int(os.getenv('MINUSFACE_TOY_PER_IDENTITY', 20))
    TEST_FRACTION = float(os.getenv('MINUSFACE_TEST_FRACTION', 0.3))

    # Objective weights (alpha on L_gen, beta on L_fr)
    ALPHA = float(os.getenv('MINUSFACE_ALPHA', 5.0))
    BETA = float(os.getenv('MINUSFACE_BETA', 1.0))

    # Angular-margin head
    ARC_SCALE = float(os.getenv('MINUSFACE_ARC_SCALE', 16.0))
    ARC_MARGIN = float(os.getenv('MINUSFACE_ARC_MARGIN', 0.3))
    MARGIN_TYPE = os.getenv('MINUSFACE_MARGIN_TYPE', 'arc')

    # Model widths
    GENERATOR_LEVELS = 3
    GENERATOR_WIDTH = int(os.getenv('MINUSFACE_GENERATOR_WIDTH', 16))
    GENERATOR_INPUT_SKIP = os.getenv('MINUSFACE_GENERATOR_INPUT_SKIP', '1') == '1'
    RECOGNIZER_WIDTH = int(os.getenv('MINUSFACE_RECOGNIZER_WIDTH', 32))
    EMBEDDING_DIM = int(os.getenv('MINUSFACE_EMBEDDING_DIM', 64))
    RECOVERY_LEVELS = 4
    RECOVERY_WIDTH = int(os.getenv('MINUSFACE_RECOVERY_WIDTH', 24))

    # Optimizer
    LR_INITIAL = 1e-2
    MOMENTUM = 0.9
    WEIGHT_DECAY = 1e-4
    GENERATOR_LR_FACTOR = 0.5
    AUGMENT_COPIES = 3

    # Schedule (overridden by presets)
    EPOCHS = 30
    BATCH_SIZE = 32
    LR_DROP_EPOCHS = [15, 24]

    # Recovery attacker
    ATTACK_LR = 1e-3
    ATTACK_EPOCHS = 40
    ATTACK_PATIENCE = 5
    ATTACK_BATCH_SIZE = 32

    # Evaluation
    VERIFY_PAIRS = int(os.getenv('MINUSFACE_VERIFY_PAIRS', 200))
    VERIFY_THRESHOLD = float(os.getenv('MINUSFACE_VERIFY_THRESHOLD', 0.5))
    TARGET_FPR = 1e-2
    MASK_RATIO = 0.25

    @classmethod
    def validate(cls):
        """Validate critical configuration values"""
        errors = []

        if cls.PRESET not in ('desk', 'full'):
            errors.append(f"MINUSFACE_PRESET must be 'desk' or 'full' (got {cls.PRESET!r})")

        if cls.ALPHA < 0 or cls.BETA < 0:
            errors.append("MINUSFACE_ALPHA and MINUSFACE_BETA must be non-negative")

        if cls.ARC_SCALE <= 0:
            errors.append("MINUSFACE_ARC_SCALE must be positive")

        if not (0 <= cls.ARC_MARGIN < 1.5707963267948966):
            errors.append("MINUSFACE_ARC_MARGIN must lie in [0, pi/2)")

        if cls.MARGIN_TYPE not in ('arc', 'cosine'):
            errors.append("MINUSFACE_MARGIN_TYPE must be 'arc' or 'cosine'")

        if cls.IMAGE_SIZE < 16:
            errors.append("MINUSFACE_IMAGE_SIZE must be at least 16")

        if cls.LOG_LEVEL.upper() not in ('DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL'):
            errors.append(f"LOG_LEVEL {cls.LOG_LEVEL!r} is not a logging level")

        drops = list(cls.LR_DROP_EPOCHS)
        if any(b <= a for a, b in zip(drops, drops[1:])) or any(d >= cls.EPOCHS for d in drops):
            errors.append("LR_DROP_EPOCHS must be strictly increasing and below EPOCHS")

        if errors:
            raise ValueError("Configuration validation failed:\n" + "\n".join(f"  - {err}" for err in errors))

        return True


class DeskConfig(Config):
    """Toy-scale schedule tuned for a few hundred 32x32 images"""
    PRESET = 'desk'
    EPOCHS = 30
    BATCH_SIZE = 32
    LR_DROP_EPOCHS = [15, 24]


class FullScaleConfig(Config):
    """The 24-epoch, batch-64 schedule intended for millions of images"""
    PRESET = 'full'
    EPOCHS = 24
    BATCH_SIZE = 64
    LR_DROP_EPOCHS = [10, 18, 22]


def get_config():
    """Get configuration based on environment"""
    preset = os.getenv('MINUSFACE_PRESET', 'desk')

    if preset == 'full':
        return FullScaleConfig
    else:
        return DeskConfig


# Export the active configuration
active_config = get_config()
