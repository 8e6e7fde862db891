"""
Property suites run by `check-invariants`: codec exactness and linearity,
permutation/mask properties, and finite-difference gradient checks.
"""

import logging
import math
from typing import Callable, Dict, List

import numpy as np

from minusface import codec
from minusface.errors import InvalidArgumentError
from minusface.models import InvariantResult, MappingSpec
from minusface.nn import functional as F
from minusface.nn.gradcheck import gradient_check
from minusface.nn.losses import arcface_loss, l1_loss
from minusface.nn.network import ArcFaceHead
from minusface.nn.tensor import Tensor
from minusface.perturb import mask_channels, permutation_from_seed, shuffle_channels

logger = logging.getLogger(__name__)

CODEC_TOLERANCE = 1e-5
GRAD_TOLERANCE = 1e-2
SUITES = ("codec", "perturb", "nn")
PERTURB_SEEDS = 10_000


def _result(name: str, passed: bool, detail: str = "", **metrics: float) -> InvariantResult:
    return InvariantResult(name=name, passed=bool(passed), detail=detail,
                           metrics={k: float(v) for k, v in metrics.items()})


# ----------------------------------------------------------------------
# codec
# ----------------------------------------------------------------------

def codec_suite(spec: MappingSpec, samples: int = 100, size: int = 32, seed: int = 0) -> List[InvariantResult]:
    rng = np.random.default_rng(seed)
    X = rng.random((samples, 3, size, size))
    results = []

    roundtrip = np.abs(codec.decode(codec.encode(X, spec), spec) - X).max()
    results.append(_result("codec.roundtrip", roundtrip <= CODEC_TOLERANCE, f"{samples} images", max_error=roundtrip))

    reps = min(samples, 8)
    x1 = rng.normal(size=(reps, spec.channels, size, size))
    x2 = rng.normal(size=(reps, spec.channels, size, size))
    a, b = 1.7, -0.6
    additive = np.abs(codec.decode(x1 + x2, spec) - codec.decode(x1, spec) - codec.decode(x2, spec)).max()
    homogeneous = np.abs(codec.decode(a * x1 + b * x2, spec)
                         - a * codec.decode(x1, spec) - b * codec.decode(x2, spec)).max()
    results.append(_result("codec.decode_linear", max(additive, homogeneous) <= CODEC_TOLERANCE,
                           max_error=max(additive, homogeneous)))

    projected = codec.project(x1, spec)
    idempotent = np.abs(codec.project(projected, spec) - projected).max()
    results.append(_result("codec.projector_idempotent", idempotent <= CODEC_TOLERANCE, max_error=idempotent))

    asymmetry = np.abs(projected - x1).max()
    results.append(_result("codec.not_inverse_on_generic_reps", asymmetry > CODEC_TOLERANCE,
                           "e(d(x)) != x for x outside e's range", max_difference=asymmetry))

    # |X - X'| equals |d(r)| for arbitrary generator outputs x'
    x = codec.encode(X, spec)
    x_prime = rng.normal(size=x.shape)
    chain = np.abs(np.abs(X - codec.decode(x_prime, spec)).mean(axis=(1, 2, 3))
                   - np.abs(codec.decode(x - x_prime, spec)).mean(axis=(1, 2, 3))).max()
    results.append(_result("codec.residue_chain", chain <= CODEC_TOLERANCE, max_error=chain))

    ac = np.ones(spec.channels, dtype=bool)
    ac[codec.dc_channels(spec)] = False
    dc_error = np.abs(x[:, codec.dc_channels(spec)] - spec.upsample_factor * X).max()
    ac_max = np.abs(x[:, ac]).max()
    results.append(_result("codec.replicate_structure", dc_error <= CODEC_TOLERANCE and ac_max <= CODEC_TOLERANCE,
                           "only DC/LL channels carry signal", dc_error=dc_error, ac_max=ac_max))
    return results


# ----------------------------------------------------------------------
# perturb
# ----------------------------------------------------------------------

def allowed_collisions(draws: int, channels: int) -> int:
    """
    Collision budget for `draws` uniform permutations of `channels` items:
    the birthday expectation plus three standard deviations, rounded down.
    Zero for any realistic draw count once channels reaches 20 or so.
    """
    pairs = draws * (draws - 1) / 2
    if pairs <= 0:
        return 0
    expected = math.exp(math.log(pairs) - math.lgamma(channels + 1))
    return int(math.floor(expected + 3 * math.sqrt(expected)))


def perturb_suite(spec: MappingSpec, seeds: int = PERTURB_SEEDS, seed: int = 0) -> List[InvariantResult]:
    channels = spec.channels
    rng = np.random.default_rng(seed)
    results = []

    perms = [permutation_from_seed(s, channels).mapping for s in range(seeds)]
    bijective = all(sorted(p) == list(range(channels)) for p in perms)
    results.append(_result("perturb.bijection", bijective, f"{seeds} seeds"))

    collisions = seeds - len(set(perms))
    allowed = allowed_collisions(seeds, channels)
    results.append(_result("perturb.seed_collisions", collisions <= allowed, f"at most {allowed} allowed",
                           collisions=collisions))

    fixes = np.mean([p[0] == 0 for p in perms])
    tolerance = max(0.01, 3 * np.sqrt((1 / channels) * (1 - 1 / channels) / seeds))
    results.append(_result("perturb.uniform_channel0", abs(fixes - 1 / channels) <= tolerance,
                           f"expected {1 / channels:.4f}", fixed_fraction=fixes))

    r = rng.normal(size=(channels, 8, 8))
    perm = permutation_from_seed(seeds + 1, channels)
    shuffled = shuffle_channels(r, perm)
    l1_gap = abs(np.abs(shuffled).sum() - np.abs(r).sum())
    norms_equal = np.array_equal(np.sort(np.abs(r).sum(axis=(1, 2))), np.sort(np.abs(shuffled).sum(axis=(1, 2))))
    results.append(_result("perturb.l1_conservation", l1_gap <= 1e-9 and norms_equal, l1_gap=l1_gap))

    restored = shuffle_channels(shuffled, perm.inverse())
    results.append(_result("perturb.inverse", np.array_equal(restored, r)))

    masked = mask_channels(r, seed, 0.25)
    zeroed = int(np.sum(~masked.reshape(channels, -1).any(axis=1)))
    expected = int(np.floor(0.25 * channels + 0.5))
    results.append(_result("perturb.mask_count", zeroed == expected, f"expected {expected}", zeroed=zeroed))

    delta = r - shuffled
    results.append(_result("perturb.delta_nonzero", not perm.is_identity() and np.abs(delta).sum() > 0,
                           norm=np.abs(delta).sum()))
    return results


# ----------------------------------------------------------------------
# nn gradients
# ----------------------------------------------------------------------

def _param(rng, *shape, name="") -> Tensor:
    return Tensor(rng.normal(size=shape).astype(np.float64), requires_grad=True, name=name)


class _Readout:
    """
    Scalar read-out l1(out, target) with a fixed target at least 0.2 away from
    the first output, so every element gets a distinct smooth gradient.
    """

    def __init__(self, seed: int = 100):
        self.seed = seed
        self.targets: Dict[str, np.ndarray] = {}

    def __call__(self, key: str, out: Tensor) -> Tensor:
        if key not in self.targets:
            rng = np.random.default_rng([self.seed, len(self.targets)])
            offset = np.sign(rng.normal(size=out.shape)) * rng.uniform(0.2, 1.0, size=out.shape)
            self.targets[key] = out.data + offset
        return l1_loss(out, Tensor(self.targets[key]))


def nn_suite(seed: int = 0) -> List[InvariantResult]:
    rng = np.random.default_rng(seed)
    # values kept away from 0 so relu and |.| are smooth under the finite-difference step
    x = Tensor(np.sign(rng.normal(size=(2, 2, 4, 4))) * rng.uniform(0.2, 1.0, size=(2, 2, 4, 4)),
               requires_grad=True, name="x")
    w = _param(rng, 3, 2, 3, 3, name="w")
    b = _param(rng, 3, name="b")
    v = _param(rng, 2, 5, name="v")
    lw = _param(rng, 4, 5, name="lw")
    lb = _param(rng, 4, name="lb")
    other = Tensor(rng.normal(size=(2, 2, 4, 4)))
    matrix = rng.normal(size=(3, 2))
    head = ArcFaceHead(class_count=3, embedding_dim=5, scale=4.0, margin=0.3, init_seed=seed)
    head.weight.data = head.weight.data.astype(np.float64)
    labels = np.array([0, 2])

    readout = _Readout()
    checks: Dict[str, Callable[[], Tensor]] = {
        "conv2d": lambda: readout("conv2d", F.conv2d(x, w, b)),
        "conv2d_stride2": lambda: readout("conv2d_stride2", F.conv2d(x, w, b, stride=2)),
        "relu": lambda: readout("relu", F.relu(x)),
        "avg_pool2x2": lambda: readout("avg_pool2x2", F.avg_pool2x2(x)),
        "global_avg_pool": lambda: readout("global_avg_pool", F.global_avg_pool(x)),
        "upsample2x": lambda: readout("upsample2x", F.upsample2x(x)),
        "linear": lambda: readout("linear", F.linear(v, lw, lb)),
        "add_sub": lambda: readout("add_sub", F.sub(F.add(x, other), F.scale(x, 0.5))),
        "channel_project": lambda: readout("channel_project", F.channel_project(x, matrix)),
        "l1_loss": lambda: l1_loss(x, Tensor(np.zeros(x.shape))),
        "arcface_loss": lambda: arcface_loss(v, labels, head),
    }
    tensors = {
        "conv2d": [x, w, b],
        "conv2d_stride2": [x, w, b],
        "relu": [x],
        "avg_pool2x2": [x],
        "global_avg_pool": [x],
        "upsample2x": [x],
        "linear": [v, lw, lb],
        "add_sub": [x],
        "channel_project": [x],
        "l1_loss": [x],
        "arcface_loss": [v, head.weight],
    }
    results = []
    for name, fn in checks.items():
        errors = gradient_check(fn, tensors[name])
        worst = max(errors.values())
        results.append(_result(f"nn.grad.{name}", worst <= GRAD_TOLERANCE, max_rel_error=worst))
    return results


def check_invariants(
    spec: MappingSpec = MappingSpec(),
    suites=SUITES,
    samples: int = 100,
    seeds: int = PERTURB_SEEDS,
) -> List[InvariantResult]:
    """Run the requested suites and return one result per property."""
    unknown = set(suites) - set(SUITES)
    if unknown:
        raise InvalidArgumentError(f"unknown suites {sorted(unknown)}; choose from {', '.join(SUITES)}")
    results: List[InvariantResult] = []
    if "codec" in suites:
        results += codec_suite(spec, samples=samples)
    if "perturb" in suites:
        results += perturb_suite(spec, seeds=seeds)
    if "nn" in suites:
        results += nn_suite()
    failed = [r.name for r in results if not r.passed]
    logger.info(f"Invariant suites {list(suites)}: {len(results) - len(failed)}/{len(results)} passed")
    if failed:
        logger.warning(f"Failed invariants: {', '.join(failed)}")
    return results
