import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import solve_ivp

from prandtl_lab.blasius import eval_f, eval_profile, inverse_f, solve_blasius
from prandtl_lab.errors import NonConvergence

# classical tabulated Blasius values (f''' + f f''/2 = 0 normalization)
CLASSICAL = {1.0: (0.16557, 0.32978, 0.32301), 2.0: (0.65002, 0.62977, 0.26675)}
# sup over [1, 12] of f''(eta) exp(0.2 eta^2), measured once on the default table
TAIL_K = 4.5155


def _rk4_shoot(fpp0, h=2e-3, eta_max=12.0):
    """Plain-python RK4 for (f, f', f''), independent of the package integrator."""
    def rhs(z):
        return (z[1], z[2], -0.5 * z[0] * z[2])

    z = (0.0, 0.0, fpp0)
    for _ in range(int(round(eta_max / h))):
        k1 = rhs(z)
        k2 = rhs(tuple(a + 0.5 * h * b for a, b in zip(z, k1)))
        k3 = rhs(tuple(a + 0.5 * h * b for a, b in zip(z, k2)))
        k4 = rhs(tuple(a + h * b for a, b in zip(z, k3)))
        z = tuple(a + h / 6 * (b + 2 * c + 2 * d + e) for a, b, c, d, e in zip(z, k1, k2, k3, k4))
    return z


@pytest.fixture(scope="module")
def oracle_fpp0():
    lo, hi = 0.1, 1.0
    for _ in range(40):
        mid = 0.5 * (lo + hi)
        if _rk4_shoot(mid)[1] > 1.0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def test_shooting_value_matches_independent_rk4(table, oracle_fpp0):
    assert abs(table.fpp0 - oracle_fpp0) <= 1e-5
    assert abs(table.fpp0 - 0.3320573) <= 1e-5


def test_boundary_values(table):
    assert table.f[0] == 0.0 and table.fp[0] == 0.0
    assert abs(table.fp[-1] - 1.0) <= 1e-9
    assert table.nodes[0] == 0.0 and table.nodes[-1] == 12.0
    assert np.all(np.diff(table.nodes) > 0)


def test_sign_ladder_and_monotone_fp(table):
    assert np.all(table.f >= 0) and np.all(table.fp >= 0) and np.all(table.fpp >= 0)
    assert np.all(table.fppp <= 0)
    assert np.all(np.diff(table.fp) >= 0)


def test_ode_residual(table):
    assert table.residual().max() <= 1e-8


def test_derivative_consistency(table):
    h = table.step
    dfd = (table.f[2:] - table.f[:-2]) / (2 * h)
    assert np.max(np.abs(dfd - table.fp[1:-1])) <= 10 * h**2


@pytest.mark.parametrize("eta", [1.0, 2.0])
def test_classical_table_values(table, eta):
    f, fp, fpp, _ = eval_f(table, eta)
    assert (f, fp, fpp) == pytest.approx(CLASSICAL[eta], abs=1e-5)


def test_eval_at_one_against_refined_integration(table):
    sol = solve_ivp(lambda t, z: (z[1], z[2], -0.5 * z[0] * z[2]), (0, 1.0),
                    (0, 0, table.fpp0), method="DOP853", rtol=1e-13, atol=1e-15)
    assert abs(eval_f(table, 1.0)[0] - sol.y[0, -1]) <= 1e-6


def test_eval_at_wall_and_far_field(table):
    assert eval_f(table, 0.0) == (0.0, 0.0, table.fpp0, 0.0)
    f, fp, fpp, fppp = eval_f(table, 20.0)
    assert fp == 1.0 and fpp == 0.0 and fppp == 0.0
    assert f == pytest.approx(table.f_end + 8.0)


def test_eval_rejects_negative(table):
    with pytest.raises(ValueError):
        eval_f(table, -1.0)


def test_small_eta_equivalences(table):
    e = table.nodes[(table.nodes > 0) & (table.nodes <= 1)]
    f, fp, fpp, fppp = eval_f(table, e)
    for ratio in (f / e**2, fp / e, fpp, -fppp[e > 0.01] / e[e > 0.01] ** 2):
        assert 0.01 < ratio.min() and ratio.max() < 10


def test_gaussian_tail(table):
    m = table.nodes >= 1
    assert np.all(table.fpp[m] <= TAIL_K * np.exp(-0.2 * table.nodes[m] ** 2))


def test_inverse_examples(table):
    assert inverse_f(table, 0.0) == 0.0
    assert abs(inverse_f(table, eval_f(table, 2.0)[0]) - 2.0) <= 1e-9
    eta = inverse_f(table, 100.0)
    assert abs(eval_f(table, eta)[0] - 100.0) <= 1e-8
    assert eta == pytest.approx(100.0 + table.displacement, abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(st.floats(min_value=0.0, max_value=40.0))
def test_inverse_round_trip(table, eta):
    f = eval_f(table, eta)[0]
    assert abs(inverse_f(table, f) - eta) <= 1e-9 * max(1.0, eta) or abs(
        eval_f(table, inverse_f(table, f))[0] - f) <= 1e-10


def test_profile_examples(table):
    p = eval_profile(table, 0.0, 0.0)
    assert p.ubar == 0.0 and p.vbar == 0.0
    assert eval_profile(table, 3.0, 1e3).ubar == 1.0
    assert eval_profile(table, 0.0, 1.0).ubar == eval_f(table, 1.0)[1]


@settings(max_examples=40, deadline=None)
@given(st.floats(0, 50), st.floats(0, 30))
def test_profile_bounds(table, x, y):
    p = eval_profile(table, x, y)
    assert 0.0 <= p.ubar <= 1.0 + 1e-9
    assert p.ubar_yy <= 0.0
    # ubar_yy >= -C ubar^2 / (x + 1); C measured from -f'''/f'^2 -> 1/2 f f''/f'^2 <= 1/4 + O(eta^2)
    assert p.ubar_yy >= -1.0 * p.ubar**2 / (x + 1.0) - 1e-15


def test_solver_preconditions():
    with pytest.raises(ValueError):
        solve_blasius(eta_max=8.0)
    with pytest.raises(ValueError):
        solve_blasius(step=1e-2)
    with pytest.raises(ValueError):
        solve_blasius(tol=1e-13)


def test_nonconvergence_signalled():
    # a coarse step cannot hit the far-field target to 1e-12
    with pytest.raises(NonConvergence):
        solve_blasius(eta_max=10.0, step=1e-3, tol=1e-12, max_iter=5)


def test_csv_dump(table, tmp_path):
    path = tmp_path / "t.csv"
    table.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "eta,f,fp,fpp,fppp"
    assert len(lines) == table.nodes.size + 1
    assert float(lines[-1].split(",")[2]) == table.fp[-1]
    assert math.isclose(float(lines[1].split(",")[3]), table.fpp0)
