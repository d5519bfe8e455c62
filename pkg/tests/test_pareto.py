import numpy as np
import pytest

from expofront.core import QueryInstance, dcg_exposure, unfairness_of, utility_of
from expofront.errors import DegenerateArc, EmptyFront
from expofront.expohedron import FaceDescriptor, face_of, is_feasible, sphere_frame
from expofront.pareto import (GeodesicArc, ParetoFront, ParetoPoint, evaluate, front_gap,
                              hypervolume, non_dominated, optimal_direction_on_face,
                              pexpo_front, qp_sweep_front, sphere_expo_front,
                              utility_at_unfairness)

from conftest import random_instance
from oracle import SimplexOracle

SQ2 = np.sqrt(2.0)


def pairs(front):
    return [(p.utility, p.unfairness) for p in front.points]


# -- face directions --------------------------------------------------------------

def test_direction_toy2_full_face(toy2):
    face = FaceDescriptor.from_blocks([(0, 1)])
    d = optimal_direction_on_face(toy2, np.array([0.75, 0.75]), face)
    np.testing.assert_allclose(d.d / np.linalg.norm(d.d), [1 / SQ2, -1 / SQ2])
    assert d.slope == pytest.approx(0.565685, abs=1e-6)


def test_direction_single_group_is_free():
    inst = QueryInstance.create([0.9, 0.5, 0.1], [0, 0, 0], dcg_exposure(3))
    x = np.full(3, inst.gamma.mean())
    d = optimal_direction_on_face(inst, x, face_of(x, inst.gamma))
    assert d.slope == np.inf
    rho_v = inst.relevance - inst.relevance.mean()
    np.testing.assert_allclose(d.d / np.linalg.norm(d.d), rho_v / np.linalg.norm(rho_v),
                               atol=1e-12)


def test_direction_at_vertex_is_none(toy2):
    x = np.array([1.0, 0.5])
    assert optimal_direction_on_face(toy2, x, face_of(x, toy2.gamma)) is None


# -- exact front ----------------------------------------------------------------------

def test_pexpo_toy2(toy2):
    f = pexpo_front(toy2)
    assert f.exact
    np.testing.assert_allclose(pairs(f), [(0.9, 0.0), (1.1, 0.25 * SQ2)], atol=1e-12)
    np.testing.assert_allclose(f.exposures, [[0.75, 0.75], [1.0, 0.5]], atol=1e-12)


def test_pexpo_single_group_is_prp():
    inst = QueryInstance.create([0.9, 0.5, 0.1], [0, 0, 0], dcg_exposure(3))
    f = pexpo_front(inst)
    assert len(f) == 1
    np.testing.assert_allclose(f.exposures[0], inst.gamma)
    assert f.points[0].unfairness == pytest.approx(0.0, abs=1e-12)


def test_pexpo_toy3_endpoints_and_oracle(toy3):
    f = pexpo_front(toy3)
    assert f.points[0].utility == pytest.approx(1.19959, abs=1e-5)
    assert f.points[0].unfairness == pytest.approx(0.0, abs=1e-12)
    assert f.points[-1].utility == pytest.approx(1.32856, abs=1e-5)
    assert f.points[-1].unfairness == pytest.approx(0.297423, abs=1e-6)
    oracle = SimplexOracle(toy3.relevance, toy3.groups, toy3.gamma, toy3.target)
    for s in np.linspace(0.02, 0.29, 7):
        assert utility_at_unfairness(f, s, toy3) == pytest.approx(oracle.utility_at(s), abs=1e-6)


def test_pexpo_matches_oracle_on_random_instances():
    rng = np.random.default_rng(21)
    for i in range(6):
        inst = random_instance(rng, int(rng.integers(3, 6)), "merit")
        f = pexpo_front(inst)
        oracle = SimplexOracle(inst.relevance, inst.groups, inst.gamma, inst.target)
        for s in np.linspace(f.unfairnesses[0], f.unfairnesses[-1], 6):
            assert utility_at_unfairness(f, s, inst) == pytest.approx(oracle.utility_at(s),
                                                                      abs=1e-6)


def test_pexpo_points_are_feasible_and_monotone():
    rng = np.random.default_rng(2)
    inst = random_instance(rng, 14, "merit")
    f = pexpo_front(inst)
    assert all(is_feasible(x, inst.gamma, 1e-7) for x in f.exposures)
    assert np.all(np.diff(f.utilities) > 0) and np.all(np.diff(f.unfairnesses) > 0)


# -- geodesic arcs ----------------------------------------------------------------------

def test_arc_endpoints_and_radius():
    frame = sphere_frame([3.0, 2.0, 1.0])
    p, q = np.array([3.0, 2.0, 1.0]), np.array([1.0, 3.0, 2.0])
    arc = GeodesicArc(p, q, frame)
    np.testing.assert_allclose(arc.sample(0.0), p)
    np.testing.assert_allclose(arc.sample(1.0), q)
    for t in np.linspace(0, 1, 11):
        assert np.linalg.norm(arc.sample(t) - frame.center) == pytest.approx(frame.radius,
                                                                             abs=1e-12)


def test_arc_quarter_circle_midpoint():
    frame = sphere_frame([3.0, 2.0, 1.0])
    c, R = frame.center, frame.radius
    u = np.array([1.0, 0.0, -1.0]) / SQ2
    w = np.array([1.0, -2.0, 1.0]) / np.sqrt(6)
    arc = GeodesicArc(c + R * u, c + R * w, frame)
    assert arc.omega == pytest.approx(np.pi / 2)
    mid = arc.midpoint()
    np.testing.assert_allclose(mid, c + R * (u + w) / SQ2, atol=1e-12)


def test_arc_degenerate():
    frame = sphere_frame([3.0, 2.0, 1.0])
    v = np.array([3.0, 2.0, 1.0])
    with pytest.raises(DegenerateArc):
        GeodesicArc(v, v, frame)
    with pytest.raises(DegenerateArc):
        GeodesicArc(v, 2 * frame.center - v, frame)


# -- approximate fronts -------------------------------------------------------------------

def test_sphere_k0_returns_endpoints(toy3):
    f = sphere_expo_front(toy3, K=0, n_sample=2)
    np.testing.assert_allclose(f.exposures[[0, -1]], [[toy3.target[0] - 0.5, 0.5, toy3.target[1]],
                                                      toy3.gamma], atol=1e-12)
    assert len(f) == 2
    assert f.info["markedSolves"] == 0


def test_sphere_toy3_marked_point_on_exact_front(toy3):
    f = sphere_expo_front(toy3, K=1)
    exact = pexpo_front(toy3)
    assert f.info["markedSolves"] == 1
    mid = f.marked[1]
    assert mid.utility == pytest.approx(utility_at_unfairness(exact, mid.unfairness, toy3),
                                        abs=1e-6)


def test_sphere_toy2_bypass(toy2):
    for K in (0, 3):
        f = sphere_expo_front(toy2, K=K)
        np.testing.assert_allclose(pairs(f), [(0.9, 0.0), (1.1, 0.25 * SQ2)], atol=1e-12)


def test_sphere_marked_solve_count():
    rng = np.random.default_rng(4)
    inst = random_instance(rng, 10)
    for K in range(4):
        f = sphere_expo_front(inst, K=K)
        assert f.info["markedSolves"] == 2 ** K - 1
        assert len(f.marked) == 2 ** K + 1


def test_qp_sweep_toy2(toy2):
    f = qp_sweep_front(toy2, n_points=3)
    np.testing.assert_allclose(pairs(f), [(0.9, 0.0), (1.0, 0.125 * SQ2), (1.1, 0.25 * SQ2)],
                               atol=1e-12)
    assert len(qp_sweep_front(toy2, n_points=2)) == 2


def test_qp_sweep_agrees_with_pexpo_toy3(toy3):
    sweep = qp_sweep_front(toy3, n_points=12)
    exact = pexpo_front(toy3)
    for p in sweep.points:
        assert p.utility == pytest.approx(utility_at_unfairness(exact, p.unfairness, toy3),
                                          abs=1e-6)


# -- front comparison -------------------------------------------------------------------

def test_front_gap_identical(toy3):
    f = pexpo_front(toy3)
    assert front_gap(f, f, toy3) == (0.0, 0.0)


def test_front_gap_toy2_endpoints(toy2):
    exact = pexpo_front(toy2)
    ends = ParetoFront([exact.points[0], exact.points[-1]])
    gap = front_gap(ends, exact, toy2)
    assert gap.hypervolume_gap == pytest.approx(0.0, abs=1e-14)


def test_front_gap_empty(toy2):
    with pytest.raises(EmptyFront):
        front_gap(ParetoFront([]), pexpo_front(toy2), toy2)


def test_exact_hypervolume_uses_curved_segments(toy3):
    """On a face the unfairness along a segment is convex, so the exact area
    sits above the chord area."""
    f = pexpo_front(toy3)
    u_ref, f_ref = f.utilities.min(), f.unfairnesses.max()
    chord = hypervolume(ParetoFront(f.points), u_ref, f_ref)
    exact = hypervolume(f, u_ref, f_ref, toy3)
    assert exact >= chord - 1e-15
    # brute-force integral of the curve U(F)
    grid = np.linspace(f.unfairnesses[0], f_ref, 20001)
    vals = np.array([utility_at_unfairness(f, s, toy3) for s in grid]) - u_ref
    assert exact == pytest.approx(np.trapezoid(vals, grid) + (f.utilities[0] - u_ref) * grid[0],
                                  abs=1e-8)


def test_non_dominated():
    x = np.zeros(2)
    pts = [ParetoPoint(x, 1.0, 0.5), ParetoPoint(x, 0.8, 0.6), ParetoPoint(x, 1.2, 0.7),
           ParetoPoint(x, 0.9, 0.1)]
    assert [(p.utility, p.unfairness) for p in non_dominated(pts)] == [(0.9, 0.1), (1.0, 0.5),
                                                                      (1.2, 0.7)]


def test_evaluate(toy2):
    p = evaluate(toy2, [1.0, 0.5], param=3)
    assert (p.utility, p.param) == (1.1, 3)
    assert p.unfairness == pytest.approx(unfairness_of([1.0, 0.5], toy2))
    assert utility_of(p.exposure, toy2.relevance) == p.utility
