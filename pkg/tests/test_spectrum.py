import json

import numpy as np
import pytest

from prandtl_lab.errors import NonConvergence, OutOfDomain, ShiftSingular
from prandtl_lab.spectrum import (OperatorMatrix, _inverse_iteration, assemble_L, default_Y_grid,
                                  eigen_principal, eigenfunction, eigenrelation_residual,
                                  eigenvalues_near, export_eigenpair, potential, to_similarity,
                                  wbar_profile)
from prandtl_lab.vonmises import Grid, blasius_w


@pytest.fixture(scope="module")
def op_default(table):
    W, _ = wbar_profile(table, default_Y_grid(4096))
    return assemble_L(W, table)


@pytest.fixture(scope="module")
def op_refined(table):
    W, _ = wbar_profile(table, default_Y_grid(8192))
    return assemble_L(W, table)


def test_similarity_of_blasius_is_stationary(table):
    Yg = default_Y_grid(1024)
    Wbar, _ = wbar_profile(table, Yg)
    for X in (0.0, 15.0, 400.0):
        g = Grid.stretched(12.0 * np.sqrt(X + 1.0), 6000)
        frame = to_similarity(blasius_w(table, X, g), Yg)
        assert frame.s == pytest.approx(np.log(X + 1.0))
        assert np.max(np.abs(frame.W.values - Wbar.values)) <= 1e-5


def test_similarity_identity_at_origin(table):
    g = Grid.stretched(20.0, 500)
    w = blasius_w(table, 0.0, g, offset=2.0)
    frame = to_similarity(w, g)
    assert np.allclose(frame.W.values, w.values, atol=1e-15)


def test_similarity_out_of_domain(table):
    g = Grid.stretched(20.0, 100)
    with pytest.raises(OutOfDomain):
        to_similarity(blasius_w(table, 8.0, g), default_Y_grid(100))


def test_similarity_shifted_gap_scales_like_inverse_X(table):
    Yg = default_Y_grid(1024)
    Wbar, _ = wbar_profile(table, Yg)
    gaps = []
    for X in (1e3, 1e4):
        g = Grid.stretched(10.0 * np.sqrt(X + 1.0), 8000)
        W = to_similarity(blasius_w(table, X, g, offset=2.0), Yg).W.values
        gaps.append(np.max(np.abs(W - Wbar.values)) * X)
    assert gaps[1] == pytest.approx(gaps[0], rel=0.05)
    assert gaps[1] < 1.0


def test_wbar_profile_limits_and_residual_order(table):
    res = []
    for n in (512, 1024, 2048):
        W, r = wbar_profile(table, default_Y_grid(n))
        res.append(r)
        assert W.values[0] == 0.0
    assert W.values[-1] == pytest.approx(1.0, abs=1e-9)
    assert res[0] / res[1] >= 2.8 and res[1] / res[2] >= 2.8


def test_potential_wall_limit(table):
    V = potential(table, np.array([0.0, 1e-8, 1e-4]))
    assert V[0] == 0.25 and V[1] == pytest.approx(0.25, rel=1e-6)


def test_constant_vector_action(op_default, table):
    Y = op_default.grid.nodes
    out = op_default.matvec(np.ones(Y.size))
    assert np.allclose(out[1:-1], potential(table, Y[1:-1]), rtol=0, atol=1e-6)  # round-off of 1/h**2 sums
    assert out[0] == 1.0 and out[-1] == 1.0
    assert op_default.bandwidth == 2 and np.all(np.isfinite(op_default.ab))


def test_eigenrelation_residual_decreases(op_default, op_refined, table):
    r1 = eigenrelation_residual(op_default, table)
    r2 = eigenrelation_residual(op_refined, table)
    assert r1 <= 1e-3 and r2 < r1


def test_principal_eigenpair(op_default, op_refined, table):
    p1 = eigen_principal(op_default)
    p2 = eigen_principal(op_refined)
    assert abs(p1.eigenvalue - 1.0) <= 0.05 and abs(p2.eigenvalue - 1.0) <= 0.01
    assert p2.residual <= 1e-8
    assert np.all(p2.vector[1:-1] > 0)
    phi = eigenfunction(table, op_refined.grid.nodes)
    assert np.max(np.abs(p2.vector - phi / phi.max())) <= 2e-2


def test_no_eigenvalue_below_half(op_refined):
    vals = eigenvalues_near(op_refined, sigma=0.25, k=4)
    assert not np.any((vals.real > 0) & (vals.real < 0.5))


def test_singular_shift_detected_and_retried():
    g = Grid.stretched(1.0, 10)
    ab = np.zeros((3, g.size))
    ab[1] = 1.0
    op = OperatorMatrix(ab, g)
    with pytest.raises(ShiftSingular):
        _inverse_iteration(op.interior(), 1.0, 1e-8, 10)
    assert eigen_principal(op, shift=1.0).eigenvalue == pytest.approx(1.0)


def test_iteration_cap(op_default):
    with pytest.raises(NonConvergence):
        eigen_principal(op_default, shift=1.4, tol=1e-30, max_iter=2)


def test_export(op_default, table, tmp_path):
    pair = eigen_principal(op_default)
    export_eigenpair(pair, op_default, table, tmp_path / "e.csv", tmp_path / "e.json")
    lines = (tmp_path / "e.csv").read_text().splitlines()
    assert lines[0] == "Y,eigvec,analytic" and len(lines) == op_default.size + 1
    rec = json.loads((tmp_path / "e.json").read_text())
    assert set(rec) == {"eigenvalue", "residual", "grid_size"}
