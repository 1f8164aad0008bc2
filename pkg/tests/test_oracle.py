import math

import numpy as np
import pytest

import geptrkn.oracle as oracle
from geptrkn import evaluate_exact, line_problem, rk_reference, vand_problem
from geptrkn.exceptions import ToleranceUnreachable
from geptrkn.problems import OdeProblem
from support import slope


def test_free_flight_is_exact_for_any_substeps():
    prob = OdeProblem("free", lambda t, y, yp: np.zeros_like(y), 0.0, 1.0, [1.0], [2.0])
    res = rk_reference(prob, 0.0, [1.0], [2.0], [0.5, 3.0], initial_substeps=1)
    for t, y, yp in res.values:
        np.testing.assert_allclose(y, [1.0 + 2.0 * t], atol=1e-14)
        np.testing.assert_allclose(yp, [2.0], atol=1e-14)


def test_line_targets_match_closed_form():
    prob = line_problem()
    res = rk_reference(prob, 0.0, prob.y0, prob.yp0, [1.0, 2.0], tol=1e-12)
    assert [v[0] for v in res.values] == [1.0, 2.0]
    assert res.est_error <= 1e-12
    for t, y, yp in res.values:
        ey, eyp = prob.exact(t)
        np.testing.assert_allclose(y, ey, atol=1e-11)
        np.testing.assert_allclose(yp, eyp, atol=1e-11)


def test_backward_and_unsorted_targets():
    prob = line_problem()
    res = rk_reference(prob, 0.0, prob.y0, prob.yp0, [0.4, -0.1, 0.0, 0.2], tol=1e-12)
    assert [v[0] for v in res.values] == [0.4, -0.1, 0.0, 0.2]
    for t, y, yp in res.values:
        np.testing.assert_allclose(y, prob.exact(t)[0], atol=1e-11)
    # the start point itself is returned unchanged
    np.testing.assert_array_equal(res.values[2][1], prob.y0)


def test_order_five():
    prob = line_problem()
    ns = np.array([8, 16, 32, 64])
    errs = []
    for n in ns:
        out, _ = oracle._sweep(prob.f, 0.0, prob.y0, prob.yp0, [2.0], 2.0 / n)
        errs.append(abs(out[0][1][0] - prob.exact(2.0)[0][0]))
    assert abs(slope(2.0 / ns, errs) - 5.0) <= 0.3


def test_deterministic():
    prob = vand_problem()
    a = rk_reference(prob, 0.0, prob.y0, prob.yp0, [1.0, 3.0], tol=1e-10)
    b = rk_reference(prob, 0.0, prob.y0, prob.yp0, [1.0, 3.0], tol=1e-10)
    for (ta, ya, pa), (tb, yb, pb) in zip(a.values, b.values):
        assert ta == tb and ya.tobytes() == yb.tobytes() and pa.tobytes() == pb.tobytes()
    assert a.substeps_used == b.substeps_used


def test_substeps_doubled_until_tolerance():
    prob = line_problem()
    coarse = rk_reference(prob, 0.0, prob.y0, prob.yp0, [1.0], tol=1e-6)
    fine = rk_reference(prob, 0.0, prob.y0, prob.yp0, [1.0], tol=1e-12)
    assert fine.substeps_used > coarse.substeps_used
    assert math.log2(fine.substeps_used / coarse.substeps_used).is_integer()


def test_unreachable(monkeypatch):
    monkeypatch.setattr(oracle, "MAX_HALVINGS", 2)
    prob = line_problem()
    with pytest.raises(ToleranceUnreachable):
        rk_reference(prob, 0.0, prob.y0, prob.yp0, [10.0], tol=1e-14)


def test_evaluate_exact():
    prob = line_problem()
    y, yp = evaluate_exact(prob, 0.0)
    np.testing.assert_allclose(y, [2.0])
    np.testing.assert_allclose(yp, [-1.0])
    y, _ = evaluate_exact(prob, math.pi / 2)
    np.testing.assert_allclose(y, [-1.0], atol=1e-15)
    assert evaluate_exact(vand_problem(), 1.0) is None


def test_vand_fixture_against_scipy():
    integrate = pytest.importorskip("scipy.integrate")
    import json
    from pathlib import Path

    fx = json.loads((Path(__file__).parent / "fixtures" / "vand_reference.json").read_text())
    prob = vand_problem()

    def first_order(t, u):
        return [u[1], prob.f(t, u[:1], u[1:])[0]]

    sol = integrate.solve_ivp(first_order, (0.0, 10.0), [2.0, 0.0], method="DOP853",
                              rtol=1e-13, atol=1e-13)
    np.testing.assert_allclose(sol.y[0, -1], fx["y_end"][0], atol=1e-9)
    np.testing.assert_allclose(sol.y[1, -1], fx["yp_end"][0], atol=1e-9)
    res = rk_reference(prob, 0.0, prob.y0, prob.yp0, [10.0], tol=1e-12)
    np.testing.assert_allclose(res.values[0][1], fx["y_end"], atol=1e-11)
