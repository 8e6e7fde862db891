import numpy as np
import pytest

from tests.conftest import HAAR
from minusface import codec
from minusface.errors import InvalidArgumentError, StateError
from minusface.models import ProtectorConfig
from minusface.nn.network import build_generator, build_recognizer
from minusface.pipeline import (
    Protector,
    combined_loss,
    compute_residue,
    regenerate,
    residue,
    residue_graph,
)


def zero_generator(input_skip: bool):
    g = build_generator(HAAR.channels, base_width=4, levels=2, input_skip=input_skip)
    g.load_state_dict({name: np.zeros_like(value) for name, value in g.state_dict().items()})
    return g.freeze()


@pytest.fixture
def images(toy_dataset):
    return toy_dataset.images[:4]


def test_residue_shape_check():
    np.testing.assert_array_equal(residue(np.ones((2, 3)), np.zeros((2, 3))), np.ones((2, 3)))
    with pytest.raises(InvalidArgumentError):
        residue(np.ones((2, 3)), np.ones((3, 2)))


def test_identity_generator_leaves_no_residue(images, haar_cfg):
    r = compute_residue(images, zero_generator(input_skip=True), haar_cfg)
    assert r.shape == (4, 12, 16, 16)
    assert np.abs(r).max() < 1e-6


def test_zero_generator_keeps_everything(images, haar_cfg):
    r = compute_residue(images, zero_generator(input_skip=False), haar_cfg)
    np.testing.assert_allclose(r, codec.encode(images, HAAR), atol=1e-6)


def test_regenerate_single_and_batch(images, frozen_haar_generator):
    batch = regenerate(images, frozen_haar_generator, HAAR)
    single = regenerate(images[0], frozen_haar_generator, HAAR)
    assert batch.X_prime.shape == (4, 3, 16, 16)
    np.testing.assert_allclose(single.x_prime, batch.x_prime[0], atol=1e-5)


def test_generator_mapping_mismatch(images):
    g = build_generator(192, base_width=4, levels=2).freeze()
    with pytest.raises(InvalidArgumentError):
        regenerate(images, g, HAAR)


def test_protect_is_seed_deterministic(images, frozen_haar_generator, haar_cfg):
    protector = Protector(frozen_haar_generator, haar_cfg)
    a = protector.protect(images[0], 11)
    np.testing.assert_array_equal(a, protector.protect(images[0], 11))
    assert a.shape == (3, 16, 16)
    assert not np.allclose(a, protector.protect(images[0], 12))


def test_protect_batch_matches_single(images, frozen_haar_generator, haar_cfg):
    protector = Protector(frozen_haar_generator, haar_cfg)
    batch = protector.protect_batch(images, [5, 6, 7, 8])
    np.testing.assert_allclose(batch[2], protector.protect(images[2], 7), atol=1e-5)


def test_no_perturbation_gives_blank_residue(images, frozen_haar_generator):
    protector = Protector(frozen_haar_generator, ProtectorConfig(mapping=HAAR, perturbation="none"))
    np.testing.assert_allclose(protector.protect(images[1], 3), protector.blank_residue(images[1]), atol=1e-6)


def test_without_subtraction_residue_is_encoding(images, frozen_haar_generator):
    cfg = ProtectorConfig(mapping=HAAR, feature_subtraction=False)
    np.testing.assert_array_equal(Protector(frozen_haar_generator, cfg).residues(images), codec.encode(images, HAAR))


def test_protect_rejects_batches(images, frozen_haar_generator, haar_cfg):
    protector = Protector(frozen_haar_generator, haar_cfg)
    with pytest.raises(InvalidArgumentError):
        protector.protect(images, 1)


def test_protector_requires_frozen_generator(haar_cfg):
    with pytest.raises(StateError):
        Protector(build_generator(HAAR.channels, base_width=4, levels=2), haar_cfg)


def _loss_inputs(images):
    g = build_generator(HAAR.channels, base_width=4, levels=2)
    f, head = build_recognizer(HAAR.channels, 8, 4, base_width=4)
    graph = residue_graph(codec.encode(images, HAAR), g, HAAR)
    return g, graph, f(graph.r), head


def test_combined_loss_weights(images):
    _, graph, embeddings, head = _loss_inputs(images)
    labels = np.array([0, 1, 2, 3])
    _, gen_only = combined_loss(images, graph.X_prime, embeddings, labels, head,
                                ProtectorConfig(mapping=HAAR, beta=0.0))
    assert gen_only["l_total"] == pytest.approx(5.0 * gen_only["l_gen"])
    _, fr_only = combined_loss(images, graph.X_prime, embeddings, labels, head,
                               ProtectorConfig(mapping=HAAR, alpha=0.0))
    assert fr_only["l_total"] == pytest.approx(fr_only["l_fr"])
    assert fr_only["l_gen"] == pytest.approx(gen_only["l_gen"])


def test_generation_loss_reaches_generator(images):
    g, graph, embeddings, head = _loss_inputs(images)
    loss, _ = combined_loss(images, graph.X_prime, embeddings, np.arange(4), head,
                            ProtectorConfig(mapping=HAAR, beta=0.0))
    loss.backward()
    assert all(p.grad is not None and np.isfinite(p.grad).all() for p in g.parameter_list())


def test_combined_loss_shape_checks(images):
    _, graph, embeddings, head = _loss_inputs(images)
    with pytest.raises(InvalidArgumentError):
        combined_loss(images[:2], graph.X_prime, embeddings, np.arange(4), head, ProtectorConfig(mapping=HAAR))
