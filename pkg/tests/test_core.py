import numpy as np
import pytest

from expofront.core import (Permutation, QueryInstance, RankingDistribution, build_target_exposure,
                            canonical_groups, dcg_exposure, group_exposure, unfairness_of,
                            utility_of)
from expofront.errors import (DimensionError, EmptyDistribution, InvalidInstance,
                              ZeroRelevance)

G3 = 1.0 / np.log2(3)


def test_dcg_exposure():
    np.testing.assert_allclose(dcg_exposure(3), [1.0, G3, 0.5])


def test_size_proportional_target_toy3(toy3):
    total = 1.0 + G3 + 0.5
    np.testing.assert_allclose(toy3.target, [2 * total / 3, total / 3])
    np.testing.assert_allclose(toy3.target, [1.42062, 0.71031], atol=1e-5)


def test_size_proportional_target_toy2(toy2):
    np.testing.assert_allclose(toy2.target, [0.75, 0.75])


def test_merit_target_toy2():
    eps = build_target_exposure([1.0, 0.2], [0, 1], [1.0, 0.5], "merit")
    np.testing.assert_allclose(eps, [1.25, 0.25])


def test_explicit_target_must_sum_to_total():
    with pytest.raises(InvalidInstance):
        build_target_exposure([1.0, 0.2], [0, 1], [1.0, 0.5], "explicit", [1.0, 1.0])
    eps = build_target_exposure([1.0, 0.2], [0, 1], [1.0, 0.5], "explicit", [1.0, 0.5])
    np.testing.assert_allclose(eps, [1.0, 0.5])


def test_merit_needs_relevance():
    with pytest.raises(ZeroRelevance):
        build_target_exposure([0.0, 0.0], [0, 1], [1.0, 0.5], "merit")


def test_utility_examples(toy2, toy3):
    assert utility_of(toy3.gamma, toy3.relevance) == pytest.approx(1.32856, abs=1e-5)
    assert utility_of(np.zeros(3), toy3.relevance) == 0.0
    assert utility_of([0.75, 0.75], toy2.relevance) == pytest.approx(0.9)


def test_utility_dimension_mismatch(toy3):
    with pytest.raises(DimensionError):
        utility_of([1.0, 0.5], toy3.relevance)


def test_unfairness_examples(toy2, toy3):
    assert unfairness_of([1.0, 0.5], toy2) == pytest.approx(np.sqrt(2) * 0.25)
    assert unfairness_of(toy3.gamma, toy3) == pytest.approx(0.297423, abs=1e-6)
    x = np.array([toy3.target[0] - 0.5, 0.5, toy3.target[1]])
    assert unfairness_of(x, toy3) == pytest.approx(0.0, abs=1e-15)
    np.testing.assert_allclose(group_exposure(x, toy3), toy3.target)


def test_canonical_groups():
    np.testing.assert_array_equal(canonical_groups(["b", "a", "b"]), [1, 0, 1])
    np.testing.assert_array_equal(canonical_groups([7, 3, 3]), [1, 0, 0])


@pytest.mark.parametrize("kw", [
    dict(relevance=[1.0, 0.5], groups=[0, 0, 1]),
    dict(relevance=[1.0, 0.5], groups=[0, 1], gamma=[0.5, 1.0]),
    dict(relevance=[1.0, 0.5], groups=[0, 1], gamma=[1.0, 1.0]),
])
def test_invalid_instances(kw):
    with pytest.raises((InvalidInstance, DimensionError)):
        QueryInstance.create(**kw)


def test_instance_roundtrip_and_equality(toy3):
    again = QueryInstance.from_dict(toy3.to_dict())
    assert again == toy3
    assert hash(again) == hash(toy3)
    assert len({toy3, again}) == 1
    assert toy3 != QueryInstance.create([0.9, 0.6, 0.2], [0, 0, 1], query_id="toy3")


def test_instance_arrays_are_read_only(toy3):
    with pytest.raises(ValueError):
        toy3.relevance[0] = 0.0


def test_permutation_exposure_and_matrix():
    p = Permutation((2, 0, 1))
    gamma = np.array([3.0, 2.0, 1.0])
    np.testing.assert_allclose(p.exposure(gamma), [2.0, 1.0, 3.0])
    np.testing.assert_allclose(p.matrix() @ gamma, p.exposure(gamma))
    assert Permutation.from_positions(p.position_of) == p
    with pytest.raises(ValueError):
        Permutation((0, 0, 1))


def test_distribution_validation():
    with pytest.raises(EmptyDistribution):
        RankingDistribution(())
    with pytest.raises(ValueError):
        RankingDistribution(((0.5, (0, 1)),))
    d = RankingDistribution.normalized([(1.0, (0, 1)), (1.0, (1, 0)), (0.0, (0, 1))])
    np.testing.assert_allclose(d.weights, [0.5, 0.5])
    assert RankingDistribution.from_dict(d.to_dict()) == d
