import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from prandtl_lab.errors import LinearSolveFailure, MaximumPrincipleViolation, OutOfDomain
from prandtl_lab.initial_data import barrier_seed, blasius_profile, rescale_seed, shifted_blasius
from prandtl_lab.march import (MarchConfig, MarchState, make_grid, report_stations, run,
                               scale_solution, step)
from prandtl_lab.vonmises import Field, Grid, blasius_w


def test_config_validation():
    assert MarchConfig(X_end=99.0).psi_max == pytest.approx(100.0)
    for bad in ({"n_nodes": 100}, {"picard_iters": 1}, {"clip_floor": 1e-10},
                {"psi_max": 5.0}, {"max_step_ratio": 0.2}, {"scheme": "rk4"}):
        with pytest.raises(ValueError):
            MarchConfig(**bad)


def test_refined_config():
    c = MarchConfig(X_end=10.0)
    r = c.refined()
    assert r.n_nodes == 2 * c.n_nodes and r.dX0 == c.dX0 / 2
    assert r.max_step_ratio == c.max_step_ratio / 2 and r.psi_max == c.psi_max


def test_make_grid_examples():
    g = make_grid(MarchConfig(X_end=15.0, psi_max=40.0, n_nodes=256, stretch=1.0))
    assert np.allclose(np.diff(g.nodes), 40.0 / 256)
    g = make_grid(MarchConfig())
    h = g.spacing
    assert g.nodes[1] <= 1e-3
    assert np.max(h[1:20] / h[:19]) <= 3.0 + 1e-12


def test_report_stations_include_quadrupling_pairs():
    xs = report_stations(MarchConfig(X_end=1e4))
    assert xs[-1] == 1e4 and np.all(np.diff(xs) > 0)
    assert np.any(np.isclose(xs, 1.0)) and np.any(np.isclose(xs, 127.0))
    assert np.any(np.isclose(xs, 4 * 128.0 - 1))


def _single_step_error(table, offset, dX, n=2048, X=1.0):
    cfg = MarchConfig(X_end=10.0, n_nodes=n, psi_max=40.0, picard_iters=4)
    g = make_grid(cfg)
    w = blasius_w(table, X, g, offset=offset)
    state = MarchState.initial(w)
    new = step(state, dX, cfg)
    exact = blasius_w(table, X + dX, g, offset=offset)
    return np.max(np.abs(new.w.values - exact.values))


@pytest.mark.parametrize("offset", [1.0, 2.0])
def test_single_step_local_error_is_second_order(table, offset):
    e1 = _single_step_error(table, offset, 0.02)
    e2 = _single_step_error(table, offset, 0.01)
    assert e1 < 1e-4
    assert 3.0 <= e1 / e2 <= 5.0


def test_step_preserves_boundary_values(table):
    cfg = MarchConfig(X_end=10.0, n_nodes=512)
    state = MarchState.initial(blasius_w(table, 0.0, make_grid(cfg), offset=2.0))
    new = step(step(state, 0.01, cfg), 0.012, cfg)
    assert new.w.values[0] == 0.0 and new.w.values[-1] == state.far_value
    assert new.steps_taken == 2 and new.w_prev is not None


@settings(max_examples=12, deadline=None)
@given(st.floats(0.0, 0.05), st.floats(0.0, 0.05), st.floats(0.25, 4.0),
       st.sampled_from(["bdf2", "euler"]))
def test_discrete_comparison_principle(table, k1, k2, lam, scheme):
    lo_k, hi_k = sorted((k1, k2))
    cfg = MarchConfig(X_end=1.0, n_nodes=256, scheme=scheme)
    g = make_grid(cfg)
    lower = rescale_seed(barrier_seed(table, "-", hi_k), lam).w0_field(g)
    upper = rescale_seed(barrier_seed(table, "+", lo_k), lam).w0_field(g)
    a, b = MarchState.initial(lower), MarchState.initial(upper)
    for dX in (0.01, 0.02, 0.04, 0.04):
        a, b = step(a, dX, cfg), step(b, dX, cfg)
        assert np.all(a.w.values <= b.w.values + 1e-12)


def test_maximum_principle_along_run(table):
    cfg = MarchConfig(X_end=20.0, n_nodes=512)
    seen = []
    run(barrier_seed(table, "+", 0.05), cfg,
        [lambda s: seen.append((s.w.values.min(), s.w.values.max(), s.ceiling))])
    for lo, hi, ceiling in seen:
        assert lo >= 0.0 and hi <= ceiling
    assert seen[0][2] > 1.0


def test_clipping_beyond_tolerance_raises(table):
    cfg = MarchConfig(X_end=10.0, n_nodes=256)
    w = blasius_w(table, 0.0, make_grid(cfg))
    corrupt = MarchState(X=0.0, w=w, ceiling=0.5, far_value=1.0)
    with pytest.raises(MaximumPrincipleViolation):
        step(corrupt, 0.01, cfg)


def test_linear_solve_failure(table):
    cfg = MarchConfig(X_end=10.0, n_nodes=256)
    state = MarchState.initial(blasius_w(table, 0.0, make_grid(cfg)))
    with pytest.raises(LinearSolveFailure):
        step(state, np.inf, cfg)


def test_blasius_regression_default_grid(table):
    result = run(blasius_profile(table), MarchConfig(X_end=100.0))
    final = result.final.w
    assert final.station == 100.0
    assert np.max(np.abs(final.values - blasius_w(table, 100.0, final.grid).values)) <= 5e-3


def test_hooks_are_observers(table):
    cfg = MarchConfig(X_end=5.0, n_nodes=256)
    calls = []
    a = run(shifted_blasius(table, 2.0), cfg, [lambda s: calls.append(s.X)])
    b = run(shifted_blasius(table, 2.0), cfg)
    assert np.array_equal(a.final.w.values, b.final.w.values)
    assert calls == list(a.stations)
    assert a.at(5.0) is a.snapshots[-1]


def test_scale_solution_identity_and_domain(table):
    cfg = MarchConfig(X_end=3.0, n_nodes=256)
    state = MarchState.initial(blasius_w(table, 3.0, make_grid(cfg)))
    same = scale_solution(state, 1.0)
    assert np.array_equal(same.w.values, state.w.values) and same.X == 3.0
    with pytest.raises(OutOfDomain):
        scale_solution(state, 2.0)
    half = scale_solution(state, 0.5)
    assert half.X == pytest.approx(12.0)


def test_marching_commutes_with_scaling(table):
    lam, X_end = 2.0, 4.0
    base = MarchConfig(X_end=X_end, n_nodes=2048, psi_max=120.0)
    wide = MarchConfig(X_end=lam**2 * X_end, n_nodes=4096, psi_max=240.0)
    target = make_grid(base)
    # scale then march: data w0(lam psi) evolved to X_end
    direct = run(rescale_seed(shifted_blasius(table, 2.0), lam), base).final.w
    # march then scale: evolve w0 to lam^2 X_end, then sample at lam psi
    scaled = scale_solution(run(shifted_blasius(table, 2.0), wide).final, lam, grid=target).w
    assert scaled.station == pytest.approx(X_end)
    # discretization error of the direct run against the exact shifted solution
    exact = blasius_w(table, X_end, target, offset=2.0 / lam**2)
    disc = np.max(np.abs(direct.values - exact.values))
    assert np.max(np.abs(direct.values - scaled.values)) <= 2.0 * max(disc, 1e-7)


def test_blasius_family_self_similar_at_large_X(table):
    g = Grid.stretched(200.0, 2000)
    big = Grid.stretched(400.0, 4000)
    X, lam = 400.0, 2.0
    w = blasius_w(table, lam**2 * X, big)
    scaled = scale_solution(w, lam, grid=g)
    ref = blasius_w(table, X, g)
    assert np.max(np.abs(scaled.values - ref.values)) <= 2e-3
