import math

import numpy as np
import pytest

from qreglp import (
    AllVerticesOptimal,
    BudgetExceeded,
    EmptyFeasibleSet,
    PolytopeSpec,
    ShapeMismatch,
    UnboundedSet,
    enumerate_vertices,
    geometry,
    suboptimality_gap,
    validate,
)
from qreglp.ot import birkhoff_polytope, permutation_matrices


def test_validate_interval(interval):
    rep = validate(interval)
    assert rep.nonempty and rep.bounded


def test_validate_birkhoff2_vertices():
    spec = birkhoff_polytope(2, attach_vertices=True)
    rep = validate(spec)
    assert rep.vertex_consistent
    perms = {(1.0, 0.0, 0.0, 1.0), (0.0, 1.0, 1.0, 0.0)}
    assert {tuple(v) for v in rep.spec.vertices} == perms


def test_enumerate_affine_subspace_has_no_vertices():
    spec = PolytopeSpec(dim=2, A=[[1.0, 1.0]], b=[1.0])
    with pytest.raises(UnboundedSet):
        enumerate_vertices(spec)


def test_validate_unbounded_halfspace():
    spec = PolytopeSpec(dim=2, G=[[-1.0, 0.0]], h=[0.0])
    with pytest.raises(UnboundedSet):
        validate(spec)


def test_validate_empty():
    spec = PolytopeSpec(dim=1, G=[[1.0], [-1.0]], h=[-1.0, 0.0])
    with pytest.raises(EmptyFeasibleSet):
        validate(spec)


def test_shape_mismatch():
    with pytest.raises(ShapeMismatch):
        PolytopeSpec(dim=2, G=[[1.0, 0.0, 0.0]], h=[1.0])
    with pytest.raises(ShapeMismatch):
        PolytopeSpec(dim=2, G=[[1.0, 0.0]], h=[1.0, 2.0])


def test_enumerate_interval(interval):
    vs = enumerate_vertices(interval)
    assert np.allclose(np.sort(vs.vertices.ravel()), [0.0, 1.0])


def test_enumerate_birkhoff3_from_constraints():
    # No vertex list attached: the combinatorial route must find the
    # six permutation matrices on its own.
    spec = birkhoff_polytope(3)
    assert spec.vertices is None
    vs = enumerate_vertices(spec)
    assert len(vs) == 6
    P = np.sort(permutation_matrices(3).reshape(6, 9), axis=0)
    assert np.allclose(np.sort(vs.vertices, axis=0), P, atol=1e-9)


def test_enumerate_simplex():
    vs = enumerate_vertices(PolytopeSpec.simplex(3))
    assert len(vs) == 3
    assert np.allclose(np.sort(vs.vertices, axis=0), np.sort(np.eye(3), axis=0), atol=1e-12)


@pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
def test_birkhoff_vertex_count_and_structure(n):
    spec = birkhoff_polytope(n, attach_vertices=True)
    vs = enumerate_vertices(spec)
    assert len(vs) == math.factorial(n)
    V = vs.vertices.reshape(-1, n, n)
    assert np.all((np.abs(V) < 1e-9) | (np.abs(V - 1) < 1e-9))
    assert np.allclose(V.sum(axis=1), 1.0) and np.allclose(V.sum(axis=2), 1.0)


def test_enumerated_vertices_feasible():
    rng = np.random.default_rng(7)
    G = np.vstack([np.eye(3), -np.eye(3), rng.normal(size=(3, 3))])
    h = np.concatenate([np.ones(3), np.zeros(3), G[6:] @ np.full(3, 0.5) + 0.2])
    spec = PolytopeSpec(dim=3, G=G, h=h)
    vs = enumerate_vertices(spec)
    for v in vs.vertices:
        assert np.max(spec.G @ v - spec.h) <= 1e-9


def test_enumeration_row_permutation_invariant():
    rng = np.random.default_rng(3)
    G = np.vstack([np.eye(3), -np.eye(3), rng.normal(size=(2, 3))])
    h = np.concatenate([np.ones(3), np.zeros(3), G[6:] @ np.full(3, 0.5) + 0.1])
    spec = PolytopeSpec(dim=3, G=G, h=h)
    perm = rng.permutation(G.shape[0])
    spec_p = PolytopeSpec(dim=3, G=G[perm], h=h[perm])
    v1 = enumerate_vertices(spec).vertices
    v2 = enumerate_vertices(spec_p).vertices
    assert v1.shape == v2.shape
    assert np.max(np.abs(v1 - v2)) <= 1e-9


def test_enumeration_budget():
    with pytest.raises(BudgetExceeded):
        enumerate_vertices(birkhoff_polytope(5), budget=10**6)


def test_geometry_interval(interval):
    B, D = geometry(enumerate_vertices(interval))
    assert B == pytest.approx(1.0, abs=1e-12)
    assert D == pytest.approx(1.0, abs=1e-12)


def test_geometry_birkhoff2():
    vs = enumerate_vertices(birkhoff_polytope(2, attach_vertices=True))
    B, D = geometry(vs)
    assert B == pytest.approx(math.sqrt(2.0), abs=1e-12)
    assert D == pytest.approx(2.0, abs=1e-12)


def test_geometry_simplex():
    B, D = geometry(enumerate_vertices(PolytopeSpec.simplex(3)))
    assert B == pytest.approx(1.0, abs=1e-12)
    assert D == pytest.approx(math.sqrt(2.0), abs=1e-12)


def test_gap_interval(interval):
    vs = enumerate_vertices(interval).mark_optimal(np.array([-1.0]))
    assert suboptimality_gap(vs, np.array([-1.0])) == pytest.approx(1.0, abs=1e-12)


def test_gap_birkhoff2():
    vs = enumerate_vertices(birkhoff_polytope(2, attach_vertices=True))
    c = (-np.eye(2) / 2).ravel()
    assert suboptimality_gap(vs.mark_optimal(c), c) == pytest.approx(1.0, abs=1e-12)


def test_gap_all_optimal(interval):
    c = np.zeros(1)
    vs = enumerate_vertices(interval).mark_optimal(c)
    with pytest.raises(AllVerticesOptimal):
        suboptimality_gap(vs, c)


def test_cost_range_cauchy_schwarz():
    rng = np.random.default_rng(11)
    for _ in range(20):
        d = int(rng.integers(1, 5))
        spec = PolytopeSpec.box(np.zeros(d), rng.uniform(0.5, 2.0, size=d))
        vs = enumerate_vertices(spec)
        _, D = geometry(vs)
        c = rng.normal(size=d)
        vals = vs.vertices @ c
        assert vals.max() - vals.min() <= np.linalg.norm(c) * D + 1e-9


def test_json_round_trip(interval):
    data = interval.to_json_dict()
    assert set(data) == {"dim", "A", "b", "G", "h"}
    again = PolytopeSpec.from_json_dict(data)
    assert np.allclose(again.G, interval.G) and np.allclose(again.h, interval.h)
