"""Second-order solver: active sets, coordinate descent and line search."""

import numpy as np
import pytest

from gsp import graphs, proxnewton
from gsp.errors import InvalidInputError
from gsp.objective import Objective
from gsp.proxgrad import soft_threshold
from gsp.proxnewton import NewtonOptions, active_set, cd_direction, line_search


def p3_problem(gamma=0.0):
    plant = graphs.generate("path", 3)
    cand = graphs.EdgeList.from_tuples(3, [(0, 2)])
    return graphs.default_problem(plant, candidates=cand, gamma=gamma,
                                  resistive=True)


def two_node_problem(gamma=0.0):
    return graphs.default_problem(graphs.EdgeList.from_tuples(2, []),
                                  gamma=gamma)


TIGHT = NewtonOptions(tol_gap=1e-12, tol_rd=1e-6)
# the certificate bias floor on larger instances sits near 1e-10
TIGHT_ER = NewtonOptions(tol_gap=1e-9, tol_rd=1e-6)


def test_options_validation():
    with pytest.raises(InvalidInputError):
        NewtonOptions(sigma=0.7)
    with pytest.raises(InvalidInputError):
        NewtonOptions(backtrack_shrink=1.5)


def test_active_set_signed_rule():
    gamma = np.full(4, 1.0)
    eps = 1e-4 * gamma
    x = np.array([0.5, 0.0, 0.0, 0.0])
    grad = np.array([0.2, 0.5, 0.99999, -1.2])
    act = active_set(x, grad, gamma, eps, resistive=False)
    # nonzero coordinates always active; zeros active when |grad| >= gamma-eps
    assert list(act) == [0, 2, 3]


def test_active_set_resistive_rule():
    gamma = np.full(3, 1.0)
    eps = 1e-4 * gamma
    x = np.array([0.0, 0.0, 0.4])
    grad = np.array([0.3, -0.3, 5.0])
    act = active_set(x, grad, gamma, eps, resistive=True)
    # zeros stay inactive when the penalized gradient pushes outward
    assert list(act) == [1, 2]


def test_cd_direction_two_node_hand_value():
    # at x = 1, gamma = 0: grad = 3/2, hessian = 1, direction = -3/2
    prob = two_node_problem()
    obj = Objective(prob)
    st = obj.state(np.array([1.0]))
    Ginv = st.cl.solve(np.eye(2))
    gam = np.zeros(1)
    xt = cd_direction(obj.pairs, st.Y, Ginv, st.grad, st.x, gam,
                      np.array([0]), NewtonOptions(), resistive=False)
    assert xt[0] == pytest.approx(-1.5, abs=1e-10)


def test_cd_direction_matches_dense_reference():
    # cyclic coordinate descent with the running Hessian-product accumulator
    # must match an independent implementation using the dense Hessian
    prob = graphs.default_problem(
        graphs.generate("erdos_renyi", 12, p=0.4, seed=4), gamma=0.3
    )
    obj = Objective(prob)
    rng = np.random.Generator(np.random.PCG64(1))
    x = 0.2 + 0.5 * rng.random(prob.m)
    st = obj.state(x)
    Ginv = st.cl.solve(np.eye(prob.n))
    Ginv = 0.5 * (Ginv + Ginv.T)
    gam = np.full(prob.m, prob.gamma)
    opts = NewtonOptions(cd_sweeps_max=30, cd_tol=1e-14)
    act = active_set(x, st.grad, gam, 1e-4 * gam, resistive=False)
    xt, hv = cd_direction(obj.pairs, st.Y, Ginv, st.grad, x, gam, act,
                          opts, resistive=False, return_hv=True)

    H = obj.hessian(x)
    # accumulator integrity: hv equals the dense product on the active set
    assert np.allclose(hv, (H @ xt)[act], atol=1e-10)

    # independent dense coordinate descent
    ref = np.zeros(prob.m)
    for _ in range(30):
        for i in act:
            a = H[i, i]
            b = float(H[i] @ ref) + st.grad[i]
            c = x[i] + ref[i]
            ref[i] += -c + soft_threshold(c - b / a, gam[i] / a)
    assert np.allclose(xt, ref, atol=1e-8)


def test_cd_direction_resistive_respects_cone():
    prob = graphs.default_problem(
        graphs.generate("erdos_renyi", 10, p=0.4, seed=8),
        gamma=0.2, resistive=True,
    )
    obj = Objective(prob)
    x = np.zeros(prob.m)
    x[::3] = 0.3
    st = obj.state(x)
    Ginv = st.cl.solve(np.eye(prob.n))
    gam = np.full(prob.m, prob.gamma)
    grad_f = st.grad + gam
    act = active_set(x, grad_f, gam, 1e-4 * gam, resistive=True)
    xt = cd_direction(obj.pairs, st.Y, Ginv, grad_f, x, gam, act,
                      NewtonOptions(), resistive=True)
    assert np.min(x + xt) >= -1e-12


def test_line_search_hand_trace():
    # from x = 1 along direction -3/2 (gamma = 0): alpha = 1 is infeasible,
    # alpha = 1/2 fails the Armijo test, alpha = 1/4 lands at x = 5/8 with
    # J = 2.05 and is accepted
    prob = two_node_problem()
    obj = Objective(prob)
    st = obj.state(np.array([1.0]))
    xt = np.array([-1.5])
    opts = NewtonOptions(sigma=0.01, backtrack_shrink=0.5)
    alpha, x_new, cl = line_search(obj, np.zeros(1), st, xt, opts,
                                   resistive=False)
    assert alpha == pytest.approx(0.25)
    assert x_new[0] == pytest.approx(0.625)
    assert obj.value(x_new) == pytest.approx(2.05, abs=1e-12)


def test_newton_two_node_analytic():
    for g in (0.0, 1.0, 4.0):
        x, rep = proxnewton.solve_newton(two_node_problem(g), opts=TIGHT)
        assert rep.status == "converged"
        assert x[0] == pytest.approx(1 / np.sqrt(2 * (2 + g)), abs=1e-6)


def test_newton_p3_analytic():
    for g in (0.0, 0.5, 1.0, 1.9, 2.0, 3.0):
        x, rep = proxnewton.solve_newton(p3_problem(g), opts=TIGHT)
        assert rep.status == "converged"
        assert x[0] == pytest.approx(max(0.0, (2 / np.sqrt(2 + g) - 1) / 2),
                                     abs=1e-6)


def test_newton_never_builds_dense_hessian(monkeypatch):
    prob = graphs.default_problem(
        graphs.generate("erdos_renyi", 15, p=0.3, seed=2), gamma=0.4
    )

    def forbidden(self, x):
        raise AssertionError("dense Hessian must not be materialized")

    monkeypatch.setattr(Objective, "hessian", forbidden)
    x, rep = proxnewton.solve_newton(prob, opts=TIGHT_ER)
    assert rep.status == "converged"


def test_newton_trace_monotone():
    prob = graphs.default_problem(
        graphs.generate("erdos_renyi", 15, p=0.3, seed=6), gamma=0.5
    )
    x, rep = proxnewton.solve_newton(prob, opts=TIGHT_ER)
    trace = np.array(rep.objective_trace)
    assert np.all(np.diff(trace) <= 1e-10)
    assert rep.status == "converged"


def test_newton_zero_at_gamma_max():
    prob = p3_problem(2.0)  # gamma_max of the P3 family
    x, rep = proxnewton.solve_newton(prob, opts=TIGHT)
    assert rep.status == "converged"
    assert np.allclose(x, 0.0, atol=1e-10)


def test_newton_warm_start_and_weights():
    g = 0.8
    prob = two_node_problem(g)
    x, rep = proxnewton.solve_newton(prob, x0=np.array([0.35]), opts=TIGHT)
    assert x[0] == pytest.approx(1 / np.sqrt(2 * (2 + g)), abs=1e-6)
    x, rep = proxnewton.solve_newton(prob, opts=TIGHT,
                                     weights=np.array([3.0]))
    assert x[0] == pytest.approx(1 / np.sqrt(2 * (2 + 3 * g)), abs=1e-6)


def test_newton_determinism():
    prob = graphs.default_problem(
        graphs.generate("erdos_renyi", 12, p=0.4, seed=9), gamma=0.5
    )
    x1, r1 = proxnewton.solve_newton(prob, opts=TIGHT_ER)
    x2, r2 = proxnewton.solve_newton(prob, opts=TIGHT_ER)
    assert np.array_equal(x1, x2)
    assert r1.iterations == r2.iterations
