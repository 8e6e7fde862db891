import numpy as np
import pytest

from minusface import codec
from minusface.errors import InvalidArgumentError
from minusface.models import MappingKind, MappingSpec

from tests.conftest import DCT, HAAR

MAPPINGS = [DCT, HAAR]


def test_dct8_constant_block_has_only_dc():
    coeffs = codec.dct8_forward(np.full((8, 8), 0.5))
    assert coeffs[0, 0] == pytest.approx(4.0)
    ac = coeffs.copy()
    ac[0, 0] = 0
    np.testing.assert_allclose(ac, 0.0, atol=1e-12)


def test_dct8_zero_block():
    np.testing.assert_array_equal(codec.dct8_forward(np.zeros((8, 8))), np.zeros((8, 8)))
    np.testing.assert_array_equal(codec.dct8_inverse(np.zeros((8, 8))), np.zeros((8, 8)))


def test_dct8_inverse_of_dc_is_constant_ones():
    coeffs = np.zeros((8, 8))
    coeffs[0, 0] = 8.0
    np.testing.assert_allclose(codec.dct8_inverse(coeffs), np.ones((8, 8)), atol=1e-12)


def test_dct8_rejects_wrong_block_shape():
    with pytest.raises(InvalidArgumentError):
        codec.dct8_forward(np.zeros((4, 8)))
    with pytest.raises(InvalidArgumentError):
        codec.dct8_inverse(np.zeros((8, 8, 1)))


def test_dct8_roundtrip_on_random_block(rng):
    block = rng.random((8, 8))
    np.testing.assert_allclose(codec.dct8_inverse(codec.dct8_forward(block)), block, atol=1e-12)


@pytest.mark.parametrize("spec", MAPPINGS, ids=lambda s: s.kind.value)
def test_encode_decode_roundtrip(spec, rng):
    X = rng.random((5, 3, 16, 16))
    rep = codec.encode(X, spec)
    assert rep.shape == (5, spec.channels, 16, 16)
    np.testing.assert_allclose(codec.decode(rep, spec), X, atol=1e-5)


@pytest.mark.parametrize("spec", MAPPINGS, ids=lambda s: s.kind.value)
def test_single_image_shapes(spec, rng):
    X = rng.random((3, 8, 12)).astype(np.float32)
    rep = codec.encode(X, spec)
    assert rep.shape == (spec.channels, 8, 12)
    assert rep.dtype == np.float32
    assert codec.decode(rep, spec).shape == (3, 8, 12)


@pytest.mark.parametrize("spec", MAPPINGS, ids=lambda s: s.kind.value)
def test_replicate_upsample_only_fills_dc_channels(spec, rng):
    X = rng.random((2, 3, 8, 8))
    rep = codec.encode(X, spec)
    dc = codec.dc_channels(spec)
    np.testing.assert_allclose(rep[:, dc], spec.upsample_factor * X, atol=1e-9)
    ac = np.ones(spec.channels, dtype=bool)
    ac[dc] = False
    np.testing.assert_allclose(rep[:, ac], 0.0, atol=1e-9)


def test_dc_channel_indices():
    np.testing.assert_array_equal(codec.dc_channels(DCT), [0, 64, 128])
    np.testing.assert_array_equal(codec.dc_channels(HAAR), [0, 4, 8])


@pytest.mark.parametrize("spec", MAPPINGS, ids=lambda s: s.kind.value)
def test_zero_image_encodes_to_zero(spec):
    np.testing.assert_array_equal(codec.encode(np.zeros((3, 4, 4)), spec), np.zeros((spec.channels, 4, 4)))


@pytest.mark.parametrize("spec", MAPPINGS, ids=lambda s: s.kind.value)
def test_decode_is_linear(spec, rng):
    a = rng.normal(size=(2, spec.channels, 8, 8))
    b = rng.normal(size=(2, spec.channels, 8, 8))
    np.testing.assert_allclose(
        codec.decode(2.5 * a - 0.75 * b, spec),
        2.5 * codec.decode(a, spec) - 0.75 * codec.decode(b, spec),
        atol=1e-9,
    )


@pytest.mark.parametrize("spec", MAPPINGS, ids=lambda s: s.kind.value)
def test_projection_is_idempotent_but_not_identity(spec, rng):
    x = rng.normal(size=(spec.channels, 4, 4))
    p = codec.project(x, spec)
    np.testing.assert_allclose(codec.project(p, spec), p, atol=1e-9)
    assert np.abs(p - x).max() > 1e-3


@pytest.mark.parametrize("spec", MAPPINGS, ids=lambda s: s.kind.value)
def test_residue_chain(spec, rng):
    X = rng.random((4, 3, 8, 8))
    x = codec.encode(X, spec)
    x_prime = rng.normal(size=x.shape)
    lhs = np.abs(X - codec.decode(x_prime, spec)).mean()
    rhs = np.abs(codec.decode(x - x_prime, spec)).mean()
    assert abs(lhs - rhs) <= 1e-9


@pytest.mark.parametrize("spec", MAPPINGS, ids=lambda s: s.kind.value)
def test_decode_matrix_reproduces_decode(spec, rng):
    x = rng.normal(size=(spec.channels, 4, 4))
    matrix = codec.decode_matrix(spec)
    assert matrix.shape == (3, spec.channels)
    np.testing.assert_allclose(np.einsum("kc,chw->khw", matrix, x), codec.decode(x, spec), atol=1e-9)


def test_encode_rejects_non_rgb():
    with pytest.raises(InvalidArgumentError):
        codec.encode(np.zeros((4, 8, 8)))
    with pytest.raises(InvalidArgumentError):
        codec.encode(np.zeros((8, 8)))


def test_decode_rejects_channel_mismatch():
    with pytest.raises(InvalidArgumentError):
        codec.decode(np.zeros((12, 4, 4)), DCT)
    with pytest.raises(InvalidArgumentError):
        codec.decode(np.zeros((192, 4, 4)), HAAR)


def test_mapping_spec_geometry():
    assert (DCT.upsample_factor, DCT.channels, DCT.code) == (8, 192, 0)
    assert (HAAR.upsample_factor, HAAR.channels, HAAR.code) == (2, 12, 1)
    assert MappingSpec.parse("DWT").kind is MappingKind.HAAR2
    assert MappingSpec.from_code(1) == HAAR
    with pytest.raises(ValueError):
        MappingSpec.from_code(7)
