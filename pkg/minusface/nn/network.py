"""
Network topologies for the generator g, the recognizers f / f_p and the
recovery attacker f^-1, plus the angular-margin head.
"""

import logging
from typing import Dict, List

import numpy as np

from minusface.errors import InvalidArgumentError
from minusface.models import LayerSpec, ModelSpec
from minusface.nn import functional as F
from minusface.nn.losses import cosine_logits
from minusface.nn.tensor import Tensor

logger = logging.getLogger(__name__)

GENERATOR_CHANNELS = (12, 192)
RECOGNIZER_CHANNELS = (3, 12, 192)
CLASSIFIER_STAGES = (1, 2, 4, 4)
MAX_WIDTH_FACTOR = 8


def _level_width(base: int, level: int) -> int:
    return base * min(2 ** level, MAX_WIDTH_FACTOR)


def _encoder_decoder_layers(spec: ModelSpec) -> List[LayerSpec]:
    w = spec.base_width
    layers = [LayerSpec(name="stem", kind="conv", in_channels=spec.in_channels, out_channels=w)]
    for level in range(1, spec.levels + 1):
        layers.append(LayerSpec(
            name=f"down{level}", kind="conv", stride=2,
            in_channels=_level_width(w, level - 1), out_channels=_level_width(w, level),
        ))
    for level in range(spec.levels, 0, -1):
        layers.append(LayerSpec(
            name=f"up{level}", kind="conv",
            in_channels=_level_width(w, level), out_channels=_level_width(w, level - 1),
        ))
    layers.append(LayerSpec(name="head", kind="conv", in_channels=w, out_channels=spec.out_channels))
    return layers


def _classifier_layers(spec: ModelSpec) -> List[LayerSpec]:
    layers = []
    previous = spec.in_channels
    for index, factor in enumerate(CLASSIFIER_STAGES, start=1):
        width = spec.base_width * factor
        layers.append(LayerSpec(name=f"stage{index}", kind="conv", in_channels=previous, out_channels=width))
        previous = width
    layers.append(LayerSpec(name="embed", kind="linear", in_channels=previous, out_channels=spec.out_channels))
    return layers


class Model:
    """
    A differentiable network with a named parameter store.

    Parameters are created from the layer specs in order with Kaiming-uniform
    fan-in initialization (zero bias) from a generator seeded by
    spec.init_seed, so the same spec always builds the same weights.
    """

    def __init__(self, spec: ModelSpec):
        self.spec = spec
        if spec.topology == "encoder_decoder_skip":
            self.layers = _encoder_decoder_layers(spec)
        else:
            self.layers = _classifier_layers(spec)
        self.parameters: Dict[str, Tensor] = {}
        rng = np.random.default_rng(spec.init_seed)
        for layer in self.layers:
            bound = np.sqrt(6.0 / layer.fan_in)
            weight = rng.uniform(-bound, bound, size=layer.weight_shape).astype(np.float32)
            self.parameters[f"{layer.name}.weight"] = Tensor(weight, requires_grad=True, name=f"{layer.name}.weight")
            self.parameters[f"{layer.name}.bias"] = Tensor(
                np.zeros(layer.out_channels, dtype=np.float32), requires_grad=True, name=f"{layer.name}.bias"
            )

    # ------------------------------------------------------------------
    # Forward
    # ------------------------------------------------------------------

    def _check_input(self, x: Tensor) -> None:
        if x.ndim != 4 or x.shape[1] != self.spec.in_channels:
            raise InvalidArgumentError(
                f"{self.spec.topology} expects (B, {self.spec.in_channels}, H, W) input, got {x.shape}"
            )
        if x.shape[2] < 1 or x.shape[3] < 1:
            raise InvalidArgumentError(f"{self.spec.topology} got an empty spatial grid {x.shape[2:]}")

    def _conv(self, name: str, x: Tensor, stride: int = 1) -> Tensor:
        return F.conv2d(x, self.parameters[f"{name}.weight"], self.parameters[f"{name}.bias"], stride=stride)

    def forward(self, x) -> Tensor:
        """
        Run the network on a (B, C, H, W) batch of any spatial size.

        H and W are zero-padded at the bottom-right up to the next multiple of
        spec.spatial_multiple; encoder-decoder outputs are cropped back to (H, W).
        """
        if not isinstance(x, Tensor):
            x = Tensor(x)
        self._check_input(x)
        h, w = x.shape[2], x.shape[3]
        multiple = self.spec.spatial_multiple
        padded = F.pad_bottom_right(x, -(-h // multiple) * multiple, -(-w // multiple) * multiple)
        out = self._forward(padded)
        if out.ndim == 4:
            out = F.crop_top_left(out, h, w)
        return out

    __call__ = forward

    def _forward(self, x: Tensor) -> Tensor:
        raise NotImplementedError

    # ------------------------------------------------------------------
    # Parameter management
    # ------------------------------------------------------------------

    def parameter_list(self) -> List[Tensor]:
        return list(self.parameters.values())

    def parameter_count(self) -> int:
        return int(sum(p.data.size for p in self.parameters.values()))

    def freeze(self) -> "Model":
        for p in self.parameters.values():
            p.requires_grad = False
            p.grad = None
        return self

    def unfreeze(self) -> "Model":
        for p in self.parameters.values():
            p.requires_grad = True
        return self

    @property
    def is_frozen(self) -> bool:
        return not any(p.requires_grad for p in self.parameters.values())

    def zero_grad(self) -> None:
        for p in self.parameters.values():
            p.grad = None

    def state_dict(self) -> Dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.parameters.items()}

    def load_state_dict(self, state: Dict[str, np.ndarray]) -> None:
        """Replace parameter values; names and shapes must match exactly."""
        missing = set(self.parameters) - set(state)
        unexpected = set(state) - set(self.parameters)
        if missing or unexpected:
            raise InvalidArgumentError(
                f"state dict mismatch: missing {sorted(missing)}, unexpected {sorted(unexpected)}"
            )
        for name, p in self.parameters.items():
            value = np.asarray(state[name], dtype=np.float32)
            if value.shape != p.data.shape:
                raise InvalidArgumentError(f"{name}: expected shape {p.data.shape}, got {value.shape}")
            p.data = value.copy()

    def __repr__(self) -> str:
        return (f"{type(self).__name__}(in={self.spec.in_channels}, out={self.spec.out_channels}, "
                f"width={self.spec.base_width}, params={self.parameter_count()})")


class EncoderDecoder(Model):
    """U-Net-style encoder-decoder with additive skips; (B, C, H, W) -> (B, C_out, H, W)."""

    def _forward(self, x: Tensor) -> Tensor:
        h = F.relu(self._conv("stem", x))
        skips = [h]
        for level in range(1, self.spec.levels + 1):
            h = F.relu(self._conv(f"down{level}", h, stride=2))
            skips.append(h)
        for level in range(self.spec.levels, 0, -1):
            h = F.relu(self._conv(f"up{level}", F.upsample2x(h)))
            h = F.add(h, skips[level - 1])
        out = self._conv("head", h)
        if self.spec.input_skip:
            out = F.add(out, x)
        return out


class ConvClassifier(Model):
    """Conv-relu-pool stages, global average pool, linear embedding; (B, C, H, W) -> (B, d)."""

    def _forward(self, x: Tensor) -> Tensor:
        h = x
        for index in range(1, len(CLASSIFIER_STAGES) + 1):
            h = F.avg_pool2x2(F.relu(self._conv(f"stage{index}", h)))
        h = F.global_avg_pool(h)
        return F.linear(h, self.parameters["embed.weight"], self.parameters["embed.bias"])

    @property
    def embedding_dim(self) -> int:
        return self.spec.out_channels


class ArcFaceHead:
    """Class-weight matrix of an angular-margin classifier (rows normalized at use)."""

    def __init__(
        self,
        class_count: int,
        embedding_dim: int,
        scale: float = 16.0,
        margin: float = 0.3,
        margin_type: str = "arc",
        init_seed: int = 0,
    ):
        if class_count < 1 or embedding_dim < 1:
            raise InvalidArgumentError("class_count and embedding_dim must be positive")
        if scale <= 0:
            raise InvalidArgumentError(f"scale must be positive, got {scale}")
        if not 0 <= margin < np.pi / 2:
            raise InvalidArgumentError(f"margin must lie in [0, pi/2), got {margin}")
        if margin_type not in ("arc", "cosine"):
            raise InvalidArgumentError(f"unknown margin type: {margin_type!r}")
        self.class_count = class_count
        self.embedding_dim = embedding_dim
        self.scale = float(scale)
        self.margin = float(margin)
        self.margin_type = margin_type
        rng = np.random.default_rng([init_seed, class_count, embedding_dim])
        bound = np.sqrt(6.0 / embedding_dim)
        self.weight = Tensor(
            rng.uniform(-bound, bound, size=(class_count, embedding_dim)).astype(np.float32),
            requires_grad=True,
            name="head.weight",
        )

    def cosines(self, embeddings) -> np.ndarray:
        data = embeddings.data if isinstance(embeddings, Tensor) else embeddings
        return cosine_logits(data, self.weight.data)

    def predict(self, embeddings) -> np.ndarray:
        """Nearest class by cosine."""
        return self.cosines(embeddings).argmax(axis=1)

    def state_dict(self) -> Dict[str, np.ndarray]:
        return {"head.weight": self.weight.data.copy()}

    def load_state_dict(self, state: Dict[str, np.ndarray]) -> None:
        value = np.asarray(state.get("head.weight"), dtype=np.float32)
        if value.shape != self.weight.data.shape:
            raise InvalidArgumentError(f"head.weight: expected shape {self.weight.data.shape}, got {value.shape}")
        self.weight.data = value.copy()


# ----------------------------------------------------------------------
# Builders
# ----------------------------------------------------------------------

def build_generator(
    channels: int,
    base_width: int = 16,
    levels: int = 3,
    input_skip: bool = True,
    init_seed: int = 0,
) -> EncoderDecoder:
    """
    Encoder-decoder g mapping a (C, H, W) representation to (C, H, W).

    Args:
        channels: Representation channel count (12 or 192)
        base_width: Width of the first level, doubled per level
        levels: Number of stride-2 down / x2 up levels
        input_skip: Add the input to the output, so g starts near identity
        init_seed: Parameter initialization seed

    Returns:
        Generator model
    """
    if channels not in GENERATOR_CHANNELS:
        raise InvalidArgumentError(f"generator channels must be one of {GENERATOR_CHANNELS}, got {channels}")
    spec = ModelSpec(
        topology="encoder_decoder_skip",
        in_channels=channels,
        out_channels=channels,
        base_width=base_width,
        levels=levels,
        input_skip=input_skip,
        init_seed=init_seed,
    )
    model = EncoderDecoder(spec)
    logger.debug(f"Built generator {model}")
    return model


def build_recognizer(
    in_channels: int,
    embedding_dim: int,
    class_count: int,
    base_width: int = 32,
    scale: float = 16.0,
    margin: float = 0.3,
    margin_type: str = "arc",
    init_seed: int = 0,
):
    """Build a recognizer f and its paired angular-margin head."""
    if in_channels not in RECOGNIZER_CHANNELS:
        raise InvalidArgumentError(f"recognizer channels must be one of {RECOGNIZER_CHANNELS}, got {in_channels}")
    if embedding_dim < 1 or class_count < 1:
        raise InvalidArgumentError("embedding_dim and class_count must be positive")
    spec = ModelSpec(
        topology="conv_classifier",
        in_channels=in_channels,
        out_channels=embedding_dim,
        base_width=base_width,
        levels=len(CLASSIFIER_STAGES),
        init_seed=init_seed,
    )
    model = ConvClassifier(spec)
    head = ArcFaceHead(class_count, embedding_dim, scale, margin, margin_type, init_seed=init_seed)
    logger.debug(f"Built recognizer {model} with {class_count} classes")
    return model, head


def build_recovery(base_width: int = 24, levels: int = 4, init_seed: int = 0) -> EncoderDecoder:
    """3-channel to 3-channel encoder-decoder used by the recovery attacker."""
    spec = ModelSpec(
        topology="encoder_decoder_skip",
        in_channels=3,
        out_channels=3,
        base_width=base_width,
        levels=levels,
        input_skip=False,
        init_seed=init_seed,
    )
    return EncoderDecoder(spec)


def build_model(spec: ModelSpec) -> Model:
    """Instantiate the model class for a spec (used when loading checkpoints)."""
    if spec.topology == "encoder_decoder_skip":
        return EncoderDecoder(spec)
    return ConvClassifier(spec)


def embed(model: Model, images: np.ndarray, batch_size: int = 64) -> np.ndarray:
    """Forward-only batched embedding / inference without recording a graph."""
    outputs = []
    params_state = [(p, p.requires_grad) for p in model.parameters.values()]
    for p, _ in params_state:
        p.requires_grad = False
    try:
        for start in range(0, len(images), batch_size):
            outputs.append(model(np.asarray(images[start:start + batch_size])).data)
    finally:
        for p, flag in params_state:
            p.requires_grad = flag
    if not outputs:
        return np.zeros((0,), dtype=np.float32)
    return np.concatenate(outputs, axis=0)
