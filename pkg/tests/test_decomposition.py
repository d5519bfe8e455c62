import itertools

import numpy as np
import pytest

from expofront.core import Permutation, RankingDistribution, dcg_exposure
from expofront.decomposition import (bvn_decompose, caratheodory_decompose, check_bistochastic,
                                     empirical_exposure, expected_exposure, sample_deliveries)
from expofront.errors import EmptyDistribution, NotBistochastic, NotInPolytope

G321 = np.array([3.0, 2.0, 1.0])


def reconstruct_matrix(atoms):
    return sum(w * p.matrix() for w, p in atoms)


@pytest.mark.parametrize("perm", list(itertools.permutations(range(3))))
def test_caratheodory_vertex_is_one_atom(perm):
    x = Permutation(perm).exposure(G321)
    dist = caratheodory_decompose(x, G321)
    assert len(dist) == 1
    assert dist.atoms[0] == (1.0, Permutation(perm))


def test_caratheodory_toy2_center():
    dist = caratheodory_decompose([0.75, 0.75], [1.0, 0.5])
    got = sorted((p.order, w) for w, p in dist.atoms)
    assert [o for o, _ in got] == [(0, 1), (1, 0)]
    np.testing.assert_allclose([w for _, w in got], [0.5, 0.5], atol=1e-12)


def test_caratheodory_center_of_321():
    dist = caratheodory_decompose([2.0, 2.0, 2.0], G321)
    assert len(dist) <= 3
    np.testing.assert_allclose(expected_exposure(dist, G321), [2.0, 2.0, 2.0], atol=1e-9)


def test_caratheodory_random_points():
    rng = np.random.default_rng(0)
    for n in (4, 7, 12):
        gamma = dcg_exposure(n)
        perms = [rng.permutation(n) for _ in range(6)]
        w = rng.dirichlet(np.ones(6))
        x = sum(wi * Permutation(p).exposure(gamma) for wi, p in zip(w, perms))
        dist = caratheodory_decompose(x, gamma)
        assert len(dist) <= n
        np.testing.assert_allclose(expected_exposure(dist, gamma), x, atol=1e-9)


def test_caratheodory_outside_raises():
    with pytest.raises(NotInPolytope):
        caratheodory_decompose([1.1, 0.4], [1.0, 0.5])


def test_bvn_examples():
    assert bvn_decompose(np.eye(3)) == [(1.0, Permutation((0, 1, 2)))]
    atoms = bvn_decompose(np.full((2, 2), 0.5))
    assert sorted(p.order for _, p in atoms) == [(0, 1), (1, 0)]
    np.testing.assert_allclose([w for w, _ in atoms], [0.5, 0.5])


def test_bvn_random_mixture():
    rng = np.random.default_rng(5)
    perms = [Permutation(rng.permutation(4)) for _ in range(5)]
    w = rng.dirichlet(np.ones(5))
    B = sum(wi * p.matrix() for wi, p in zip(w, perms))
    atoms = bvn_decompose(B)
    assert len(atoms) <= 10
    np.testing.assert_allclose(reconstruct_matrix(atoms), B, atol=1e-9)


def test_check_bistochastic():
    with pytest.raises(NotBistochastic):
        check_bistochastic(np.array([[0.6, 0.4], [0.6, 0.4]]))
    with pytest.raises(NotBistochastic):
        check_bistochastic(np.ones((2, 3)) / 2)
    with pytest.raises(NotBistochastic):
        check_bistochastic(np.array([[1.5, -0.5], [-0.5, 1.5]]))


def test_expected_exposure_examples():
    gamma = [1.0, 0.5]
    one = RankingDistribution(((1.0, (1, 0)),))
    np.testing.assert_allclose(expected_exposure(one, gamma), [0.5, 1.0])
    half = RankingDistribution(((0.5, (0, 1)), (0.5, (1, 0))))
    np.testing.assert_allclose(expected_exposure(half, gamma), [0.75, 0.75])
    with pytest.raises(EmptyDistribution):
        expected_exposure(None, gamma)


def test_low_discrepancy_delivery():
    dist = RankingDistribution(((0.5, (0, 1)), (0.5, (1, 0))))
    seq = sample_deliveries(dist, 4)
    assert [p.order for p in seq] == [(0, 1), (1, 0), (0, 1), (1, 0)]
    assert sample_deliveries(dist, 0) == []
    np.testing.assert_allclose(empirical_exposure(seq, [1.0, 0.5]), [0.75, 0.75])


def test_low_discrepancy_counts_stay_within_one():
    dist = RankingDistribution(((0.2, (0, 1, 2)), (0.3, (1, 0, 2)), (0.5, (2, 1, 0))))
    seq = sample_deliveries(dist, 97)
    for t in range(1, 98):
        for w, p in dist.atoms:
            assert abs(sum(q == p for q in seq[:t]) - t * w) < 1.0


def test_iid_delivery_is_seeded():
    dist = RankingDistribution(((0.3, (0, 1)), (0.7, (1, 0))))
    a = sample_deliveries(dist, 10, "iid", seed=42)
    b = sample_deliveries(dist, 10, "iid", seed=42)
    assert a == b
    golden = [p.order[0] for p in a]
    assert golden == [p.order[0] for p in sample_deliveries(dist, 10, "iid", seed=42)]
    with pytest.raises(ValueError):
        sample_deliveries(dist, 3, "roundrobin")
