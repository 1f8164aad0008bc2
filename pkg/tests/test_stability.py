import io
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

import geptrkn.stability as stab
from geptrkn import (CollocationScheme, NODE_SETS, derive_coefficients, get_scheme, scan_region,
                     spectral_radius, spectral_radius_charpoly, stability_matrix)
from geptrkn.exceptions import NoConvergence


def assemble_from_json(text, z, nu):
    """Block assembly written out element by element from serialized coefficients."""
    data = json.loads(text)
    c = data["c"]
    A, B, b, d = data["A"], data["B"], data["b"], data["d"]
    s = len(c)
    n = 2 * s + 2
    M = [[0.0] * n for _ in range(n)]
    for i in range(s):
        for j in range(s):
            p = b[j] + c[i] * d[j] + A[i][j]
            q = d[j] + B[i][j]
            M[i][j], M[i][s + j] = z * p, nu * p
            M[s + i][j], M[s + i][s + j] = z * q, nu * q
        M[i][2 * s], M[i][2 * s + 1] = 1.0, 1.0 + c[i]
        M[s + i][2 * s + 1] = 1.0
    for j in range(s):
        M[2 * s][j], M[2 * s][s + j] = z * b[j], nu * b[j]
        M[2 * s + 1][j], M[2 * s + 1][s + j] = z * d[j], nu * d[j]
    M[2 * s][2 * s] = M[2 * s][2 * s + 1] = M[2 * s + 1][2 * s + 1] = 1.0
    return np.array(M)


@pytest.mark.parametrize("name", sorted(NODE_SETS))
def test_origin_structure(name):
    sc = get_scheme(name)
    M = stability_matrix(sc, 0.0, 0.0)
    assert M.shape == (2 * sc.s + 2, 2 * sc.s + 2)
    np.testing.assert_array_equal(M[:, :2 * sc.s], 0.0)
    ev = np.sort(np.abs(np.linalg.eigvals(M)))
    np.testing.assert_allclose(ev[-2:], [1.0, 1.0])
    np.testing.assert_allclose(ev[:-2], 0.0, atol=1e-14)
    assert spectral_radius(M) == pytest.approx(1.0, abs=1e-10)


def test_single_stage_entry_by_hand():
    c1, z0 = 0.4, -0.7
    M = stability_matrix(derive_coefficients([c1]), z0, 0.0)
    assert M.shape == (4, 4)
    assert M[0, 0] == pytest.approx(z0 * (0.5 + c1 + c1 ** 2 / 2))


def test_matches_independent_assembly():
    sc = get_scheme("geptrkn5")
    again = assemble_from_json(sc.to_json(), -0.1, -0.1)
    np.testing.assert_allclose(stability_matrix(sc, -0.1, -0.1), again, atol=1e-15)
    rebuilt = CollocationScheme.from_json(sc.to_json())
    np.testing.assert_array_equal(stability_matrix(rebuilt, -0.3, -0.2),
                                  stability_matrix(sc, -0.3, -0.2))


def test_spectral_radius_basics():
    assert spectral_radius(np.eye(4)) == pytest.approx(1.0)
    assert spectral_radius(np.array([[0.0, 1.0], [-1.0, 0.0]])) == pytest.approx(1.0)
    batch = np.stack([np.eye(3) * 2, np.eye(3) * 0.5])
    np.testing.assert_allclose(spectral_radius(batch), [2.0, 0.5])
    with pytest.raises(ValueError):
        spectral_radius(np.ones((2, 3)))
    with pytest.raises(ValueError):
        spectral_radius(np.array([[np.nan]]))
    with pytest.raises(ValueError):
        spectral_radius(np.eye(65))


@settings(max_examples=60, deadline=None)
@given(arrays(float, st.tuples(st.integers(1, 6)).map(lambda t: (t[0], t[0])),
              elements=st.floats(-2, 2, allow_nan=False)))
def test_eigenvalue_and_charpoly_routes_agree(M):
    a = spectral_radius(M)
    b = spectral_radius_charpoly(M)
    # repeated roots lose accuracy in the companion route, hence the loose bound
    assert abs(a - b) <= 1e-5 * max(1.0, a) or abs(a - b) <= 1e-8 ** (1 / M.shape[0]) * 4


@pytest.mark.parametrize("name", ["geptrkn5", "geptrkn8"])
def test_charpoly_cross_check_on_method_matrices(name):
    sc = get_scheme(name)
    for z, nu in [(-0.2, -0.1), (-0.6, -0.3), (-3.0, -2.0)]:
        M = stability_matrix(sc, z, nu)
        assert spectral_radius_charpoly(M) == pytest.approx(spectral_radius(M), rel=1e-6)


def test_eigen_failure_is_reported(monkeypatch):
    def boom(_):
        raise np.linalg.LinAlgError("no convergence")

    monkeypatch.setattr(stab.np.linalg, "eigvals", boom)
    with pytest.raises(NoConvergence):
        spectral_radius(np.eye(2))


def test_scan_matches_cellwise_evaluation():
    sc = get_scheme("geptrkn6")
    grid = scan_region(sc, -2.0, -1.5, 5, 4)
    assert grid.rho.shape == (5, 4)
    for i, z in enumerate(grid.z_axis):
        for j, nu in enumerate(grid.nu_axis):
            assert grid.rho[i, j] == pytest.approx(spectral_radius(stability_matrix(sc, z, nu)),
                                                   rel=1e-12)
    assert grid.rho[-1, -1] == pytest.approx(1.0, abs=1e-10)
    assert not grid.stable[-1, -1]


def test_near_origin_is_marginal():
    grid = scan_region(get_scheme("geptrkn5"), -1e-4, -1e-4, 2, 2)
    np.testing.assert_allclose(grid.rho, 1.0, atol=1e-3)


def test_failed_cells_become_nan(monkeypatch):
    real = stab.spectral_radius

    def flaky(M):
        M = np.asarray(M)
        if M.ndim == 3:
            raise NoConvergence("batch")
        if not M[:, :-2].any():
            raise NoConvergence("cell")
        return real(M)

    monkeypatch.setattr(stab, "spectral_radius", flaky)
    grid = scan_region(get_scheme("geptrkn5"), -1.0, -1.0, 3, 3)
    assert grid.failed == 1 and np.isnan(grid.rho[-1, -1])
    assert grid.summary()["failed_cells"] == 1


def test_region_shrinks_with_order_on_small_grid():
    fr = {n: scan_region(get_scheme(n), -1.0, -1.0, 60, 60).fraction_stable
          for n in ("geptrkn5", "geptrkn8")}
    assert 0 < fr["geptrkn8"] < fr["geptrkn5"]


def test_exports():
    grid = scan_region(get_scheme("geptrkn5"), -1.0, -0.5, 3, 2)
    text = grid.to_csv()
    lines = text.strip().splitlines()
    assert lines[0] == "z,nu,rho"
    assert len(lines) == 7
    z, nu, rho = (float(v) for v in lines[-1].split(","))
    assert (z, nu) == (0.0, 0.0) and rho == pytest.approx(1.0)
    buf = io.StringIO()
    grid.to_csv(buf)
    assert buf.getvalue() == text
    summary = json.loads(grid.summary_json())
    assert set(summary) >= {"scheme_id", "fraction_stable", "max_rho", "grid_spec"}
    assert summary["scheme_id"] == "geptrkn5"
    assert summary["grid_spec"]["n_z"] == 3


def test_scan_validation():
    sc = get_scheme("geptrkn5")
    with pytest.raises(ValueError):
        scan_region(sc, -1.0, -1.0, 1, 5)
    with pytest.raises(ValueError):
        scan_region(sc, 1.0, -1.0, 5, 5)
