import pytest

from minusface.errors import InvalidArgumentError
from minusface.invariants import allowed_collisions, check_invariants, codec_suite, nn_suite, perturb_suite

from tests.conftest import DCT, HAAR


@pytest.mark.parametrize("spec", [DCT, HAAR], ids=["dct8", "haar2"])
def test_codec_suite_passes(spec):
    results = codec_suite(spec, samples=3, size=16)
    failed = [r.name for r in results if not r.passed]
    assert not failed


@pytest.mark.parametrize("spec", [DCT, HAAR], ids=["dct8", "haar2"])
def test_perturb_suite_passes(spec):
    results = perturb_suite(spec, seeds=500)
    assert [r.name for r in results if not r.passed] == []


@pytest.mark.slow
@pytest.mark.parametrize("spec", [DCT, HAAR], ids=["dct8", "haar2"])
def test_perturb_suite_at_full_seed_count(spec):
    results = {r.name: r for r in perturb_suite(spec)}
    assert results["perturb.bijection"].detail == "10000 seeds"
    assert [name for name, r in results.items() if not r.passed] == []
    assert abs(results["perturb.uniform_channel0"].metrics["fixed_fraction"] - 1 / spec.channels) <= 0.01


def test_collision_budget():
    assert allowed_collisions(10_000, 192) == 0
    assert allowed_collisions(10_000, 12) == 1
    assert allowed_collisions(1, 3) == 0
    assert allowed_collisions(1000, 3) > 1000


def test_gradient_suite_passes():
    results = nn_suite()
    assert len(results) == 11
    assert [r.name for r in results if not r.passed] == []


def test_unknown_suite():
    with pytest.raises(InvalidArgumentError):
        check_invariants(HAAR, suites=("codec", "metrics"))


def test_selected_suites_only():
    names = {r.name.split(".")[0] for r in check_invariants(HAAR, suites=("codec",), samples=2)}
    assert names == {"codec"}
