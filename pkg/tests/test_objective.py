"""Objective value, derivatives and the independent Lyapunov evaluation."""

import numpy as np
import pytest

from gsp import graphs, objective
from gsp.errors import InfeasiblePointError, SizeCapError
from gsp.objective import HESSIAN_SCALE, Objective


def p3_problem(gamma=0.0):
    plant = graphs.generate("path", 3)
    cand = graphs.EdgeList.from_tuples(3, [(0, 2)])
    return graphs.default_problem(plant, candidates=cand, gamma=gamma,
                                  resistive=True)


def two_node_problem(gamma=0.0):
    return graphs.default_problem(graphs.EdgeList.from_tuples(2, []),
                                  gamma=gamma)


def seeded_problem(n=20, seed=0, p=0.3):
    plant = graphs.generate("erdos_renyi", n, p=p, seed=seed)
    return graphs.default_problem(plant)


def feasible_point(problem, seed=0, lo=0.2, hi=0.8):
    rng = np.random.Generator(np.random.PCG64(seed))
    return lo + (hi - lo) * rng.random(problem.m)


def test_qp_matrix_p3_spectrum():
    # path-3 plant with identity weights: eigenvalues of the effective
    # state weight are {1, 2, 10}
    prob = p3_problem()
    qp = objective.build_qp(prob)
    lam = np.sort(np.linalg.eigvalsh(qp.Qp))
    assert np.allclose(lam, [1.0, 2.0, 10.0], atol=1e-10)
    assert np.allclose(qp.sqrt @ qp.sqrt, qp.Qp, atol=1e-10)


def test_value_two_node_analytic():
    # single edge with weight x on an otherwise empty 2-node plant:
    # J(x) = 1/(2x) + 2x, hence J(1/2) = 2
    prob = two_node_problem()
    obj = Objective(prob)
    for x in (0.25, 0.5, 1.0, 2.0):
        assert obj.value(np.array([x])) == pytest.approx(1 / (2 * x) + 2 * x,
                                                         abs=1e-12)
    assert obj.value(np.array([0.5])) == pytest.approx(2.0, abs=1e-12)


def test_value_p3_analytic():
    # closing the triangle with weight x: J(x) = 2/(1 + 2x) + 2x - 2/3
    prob = p3_problem()
    obj = Objective(prob)
    for x in (0.0, 0.3, 1.0):
        expected = 2.0 / (1.0 + 2.0 * x) + 2.0 * x - 2.0 / 3.0
        assert obj.value(np.array([x])) == pytest.approx(expected, abs=1e-12)


def test_value_raises_on_infeasible_point():
    prob = two_node_problem()
    with pytest.raises(InfeasiblePointError):
        Objective(prob).value(np.array([-1.0]))


def test_gradient_matches_finite_differences():
    worst = 0.0
    for seed in range(10):
        prob = seeded_problem(seed=seed)
        obj = Objective(prob)
        x = feasible_point(prob, seed=100 + seed)
        g = obj.gradient(x)
        rng = np.random.Generator(np.random.PCG64(200 + seed))
        h = 1e-5
        for i in rng.choice(prob.m, size=6, replace=False):
            e = np.zeros(prob.m)
            e[i] = h
            fd = (obj.value(x + e) - obj.value(x - e)) / (2 * h)
            worst = max(worst, abs(fd - g[i]) / max(1.0, abs(fd)))
    assert worst < 1e-6


def test_hessian_columns_match_finite_differences():
    worst = 0.0
    for seed in range(5):
        prob = seeded_problem(seed=seed)
        obj = Objective(prob)
        x = feasible_point(prob, seed=300 + seed)
        rng = np.random.Generator(np.random.PCG64(400 + seed))
        h = 1e-5
        for i in rng.choice(prob.m, size=4, replace=False):
            e = np.zeros(prob.m)
            e[i] = h
            fd = (obj.gradient(x + e) - obj.gradient(x - e)) / (2 * h)
            col = obj.hessian_column(x, int(i))
            worst = max(worst, np.max(np.abs(col - fd)) / max(1.0, np.max(np.abs(fd))))
    assert worst < 1e-4


def test_hessian_scale_pinned_by_two_node_instance():
    # d2J/dx2 = 1/x^3 on the single-edge instance; the elementwise product
    # of edge quadratic forms gives 1/(2 x^3), fixing the scale at 2
    prob = two_node_problem()
    obj = Objective(prob)
    for x in (0.3, 0.5, 1.2):
        xv = np.array([x])
        assert obj.hessian_diag(xv)[0] == pytest.approx(1.0 / x**3, rel=1e-10)
        st = obj.state(xv)
        Ginv = st.cl.solve(np.eye(2))
        raw = objective.edge_quad_diag(st.Y, obj.pairs) * objective.edge_quad_diag(
            Ginv, obj.pairs
        )
        assert HESSIAN_SCALE * raw[0] == pytest.approx(1.0 / x**3, rel=1e-10)
    assert HESSIAN_SCALE == 2.0


def test_dense_hessian_consistency():
    prob = seeded_problem(n=12, seed=2)
    obj = Objective(prob)
    x = feasible_point(prob, seed=11)
    H = obj.hessian(x)
    assert np.allclose(H, H.T, atol=1e-10)
    assert np.allclose(np.diag(H), obj.hessian_diag(x), atol=1e-12)
    for l in (0, prob.m // 2, prob.m - 1):
        assert np.allclose(H[:, l], obj.hessian_column(x, l), atol=1e-12)
    lam = np.linalg.eigvalsh(0.5 * (H + H.T))
    assert lam.min() >= -1e-8  # convexity on the feasible region


def test_hessian_size_cap(monkeypatch):
    prob = seeded_problem(n=12, seed=2)
    monkeypatch.setattr(objective, "DENSE_HESSIAN_CAP", 3)
    with pytest.raises(SizeCapError):
        Objective(prob).hessian(feasible_point(prob, seed=1))


def test_edge_quad_forms_match_dense():
    prob = seeded_problem(n=10, seed=4)
    E = prob.candidates.dense()
    rng = np.random.Generator(np.random.PCG64(9))
    A = rng.random((10, 10))
    A = A + A.T
    assert np.allclose(objective.edge_quad_diag(A, prob.candidates.pairs),
                       np.diag(E.T @ A @ E), atol=1e-12)
    l = 3
    assert np.allclose(
        objective.edge_quad_column(A, prob.candidates.pairs[l],
                                   prob.candidates.pairs),
        E.T @ A @ E[:, l], atol=1e-12,
    )


def test_lyapunov_oracle_equals_half_objective():
    rng = np.random.Generator(np.random.PCG64(42))
    count = 0
    for n in (5, 10, 30):
        plant = graphs.generate("erdos_renyi", n, p=0.4, seed=n)
        prob = graphs.default_problem(plant)
        obj = Objective(prob)
        for _ in range(7):
            x = 0.1 + rng.random(prob.m)
            J = obj.value(x)
            h2 = objective.lyapunov_h2_oracle(prob, x)
            assert abs(h2 - J / 2.0) <= 1e-8 * max(1.0, abs(J))
            count += 1
    assert count >= 20


def test_convexity_along_segments():
    prob = seeded_problem(n=8, seed=6)
    obj = Objective(prob)
    rng = np.random.Generator(np.random.PCG64(3))
    for _ in range(10):
        a = 0.2 + rng.random(prob.m)
        b = 0.2 + rng.random(prob.m)
        mid = obj.value(0.5 * (a + b))
        assert mid <= 0.5 * obj.value(a) + 0.5 * obj.value(b) + 1e-10


def test_functional_wrappers_agree():
    prob = seeded_problem(n=8, seed=7)
    x = feasible_point(prob, seed=21)
    obj = Objective(prob)
    assert objective.eval_J(prob, x) == pytest.approx(obj.value(x))
    assert np.allclose(objective.grad_J(prob, x), obj.gradient(x))
    assert np.allclose(objective.hessian_diag(prob, x), obj.hessian_diag(x))
