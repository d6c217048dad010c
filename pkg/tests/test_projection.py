import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qreglp import (
    PolytopeSpec,
    ProjectionResult,
    QlpInstance,
    certify,
    enumerate_vertices,
    project,
    solve_qlp,
)
from qreglp.ot import birkhoff_polytope
from qreglp.projection import min_distance_active_set


def test_project_interior(interval):
    res = project(interval, np.array([0.5]))
    assert res.x == pytest.approx(0.5, abs=1e-12)
    assert res.active_set.size == 0


def test_project_clamp(interval):
    res = project(interval, np.array([-3.0]))
    assert res.x == pytest.approx(0.0, abs=1e-12)
    assert 1 in res.active_set  # row -x <= 0


def test_project_birkhoff_origin():
    for n in (2, 3, 4):
        spec = birkhoff_polytope(n)
        res = project(spec, np.zeros(n * n))
        assert np.allclose(res.x, 1.0 / n, atol=1e-12)


def test_solve_qlp_interval(interval_inst):
    assert solve_qlp(interval_inst, 1.0).x == pytest.approx(0.5, abs=1e-12)
    assert solve_qlp(interval_inst, 5.0).x == pytest.approx(1.0, abs=1e-12)


def test_solve_qlp_birkhoff_midpoint():
    n = 3
    spec = birkhoff_polytope(n)
    inst = QlpInstance(spec, (-np.eye(n) / n).ravel())
    pi = solve_qlp(inst, 3.0).x.reshape(n, n)
    assert np.allclose(np.diag(pi), 2.0 / 3.0, atol=1e-10)
    off = pi[~np.eye(n, dtype=bool)]
    assert np.allclose(off, 1.0 / 6.0, atol=1e-10)


def test_objective_identity():
    rng = np.random.default_rng(0)
    spec = PolytopeSpec.box(np.zeros(4), np.ones(4))
    c = rng.normal(size=4)
    inst = QlpInstance(spec, c)
    for _ in range(50):
        x = rng.uniform(size=4)
        eta = float(rng.uniform(0.1, 10.0))
        lhs = inst.objective(x, eta)
        rhs = np.sum((x + eta * c / 2.0) ** 2) / eta - eta * np.dot(c, c) / 4.0
        assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)


def test_solution_beats_vertices():
    rng = np.random.default_rng(5)
    spec = birkhoff_polytope(3, attach_vertices=True)
    c = rng.normal(size=9)
    inst = QlpInstance(spec, c)
    for eta in (0.5, 2.0, 11.0):
        res = solve_qlp(inst, eta)
        best_vertex = min(inst.objective(v, eta) for v in spec.vertices)
        assert inst.objective(res.x, eta) <= best_vertex + 1e-9


def test_warm_start_uniqueness():
    spec = birkhoff_polytope(3, attach_vertices=True)
    inst = QlpInstance(spec, (-np.eye(3) / 3).ravel())
    z = inst.target(4.0)
    cold = project(spec, z)
    for v in spec.vertices[:4]:
        warm = project(spec, z, start=v)
        assert np.max(np.abs(warm.x - cold.x)) <= 1e-8


@given(
    st.lists(st.floats(-5, 5), min_size=3, max_size=3),
    st.lists(st.floats(-5, 5), min_size=3, max_size=3),
)
def test_projection_lipschitz(z1, z2):
    spec = PolytopeSpec.simplex(3)
    x1 = project(spec, np.array(z1)).x
    x2 = project(spec, np.array(z2)).x
    assert np.linalg.norm(x1 - x2) <= np.linalg.norm(np.array(z1) - np.array(z2)) + 1e-8


def test_kkt_certificate_data():
    rng = np.random.default_rng(9)
    spec = birkhoff_polytope(3)
    z = rng.normal(size=9)
    res = project(spec, z)
    assert np.all(res.multipliers >= -1e-10)
    assert res.kkt_residual <= 1e-8
    # Stationarity rebuilt from the reported pieces.
    grad = z - res.x - spec.A.T @ res.eq_multipliers
    grad -= spec.G[res.active_set].T @ res.multipliers
    assert np.max(np.abs(grad)) <= 1e-8


def test_decay_bound_interval_equality(interval_inst):
    # On the sharp example the decay bound holds with equality.
    x_star = np.array([1.0])
    for eta in np.linspace(0.1, 4.0, 24):
        x = solve_qlp(interval_inst, float(eta)).x
        e = float(interval_inst.c @ (x - x_star))
        bound = (x_star @ x_star - x @ x - (x_star - x) @ (x_star - x)) / eta
        assert e == pytest.approx(float(bound), abs=1e-9)


def test_decay_bound_random_instance():
    rng = np.random.default_rng(21)
    spec = PolytopeSpec.box(np.zeros(3), np.ones(3))
    c = rng.normal(size=3)
    inst = QlpInstance(spec, c)
    vs = enumerate_vertices(spec)
    vals = vs.vertices @ c
    x_star_vertex = vs.vertices[int(np.argmin(vals))]
    for eta in np.linspace(0.05, 8.0, 30):
        x = solve_qlp(inst, float(eta)).x
        e = float(c @ (x - x_star_vertex))
        bound = (
            x_star_vertex @ x_star_vertex - x @ x - (x_star_vertex - x) @ (x_star_vertex - x)
        ) / eta
        assert e <= bound + 1e-9


def test_suboptimality_nonincreasing(interval_inst):
    vals = []
    for eta in np.linspace(0.05, 5.0, 40):
        x = solve_qlp(interval_inst, float(eta)).x
        vals.append(float(interval_inst.c @ x))
    assert np.all(np.diff(vals) <= 1e-12)


def test_certify_pass(interval):
    vs = enumerate_vertices(interval)
    res = project(interval, np.array([-0.5]))
    rep = certify(interval, res, np.array([-0.5]), vs)
    assert rep.passed and rep.max_violation <= 0.0 + 1e-12


def test_certify_detects_wrong_point(interval):
    vs = enumerate_vertices(interval)
    fake = ProjectionResult(
        x=np.array([0.1]),
        active_set=np.zeros(0, dtype=int),
        multipliers=np.zeros(0),
        residual=0.0,
    )
    rep = certify(interval, fake, np.array([-0.5]), vs)
    assert not rep.passed
    assert rep.max_violation == pytest.approx(0.06, abs=1e-12)


def test_certify_interior_exact(interval):
    vs = enumerate_vertices(interval)
    z = np.array([0.25])
    res = project(interval, z)
    rep = certify(interval, res, z, vs)
    assert rep.passed and abs(rep.max_violation) <= 1e-12


def test_low_level_solver_on_cone():
    # The engine must also handle unbounded feasible cones.
    G = -np.eye(2)
    x, W, mu, lam, _ = min_distance_active_set(
        np.zeros((0, 2)), G, np.zeros(2), np.array([1.0, -2.0]), np.zeros(2)
    )
    assert np.allclose(x, [1.0, 0.0], atol=1e-12)
    assert list(W) == [1] and lam[0] == pytest.approx(2.0, abs=1e-12)


def test_result_json_keys(interval):
    res = project(interval, np.array([0.3]))
    data = res.to_json_dict()
    assert set(data) == {"x", "active_set", "residual"}
