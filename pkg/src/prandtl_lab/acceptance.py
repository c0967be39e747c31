"""The acceptance suite: ten end-to-end checks shared by the CLI and the tests."""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from . import blasius as bl
from .diagnostics import (StationRecorder, barrier_sandwich, comparison_envelope,
                          ordering_margin)
from .initial_data import (barrier_seed, blasius_profile, order_one_profile,
                           search_sandwich_scales, shifted_blasius)
from .march import MarchConfig, make_grid, run
from .spectrum import (assemble_L, default_Y_grid, eigen_principal, eigenrelation_residual,
                       eigenvalues_near, to_similarity, wbar_profile)
from .vonmises import blasius_w

A_SHIFT = 2.0
RATE_WINDOW = (1e2, 1e4)


@dataclass(frozen=True)
class CheckInfo:
    id: str
    title: str
    anchor: str


CHECKS = (
    CheckInfo("blasius_shooting", "f''(0) against an independent shooting oracle, sign ladder, "
              "far-field match, runtime < 1 s", "Blasius similarity ODE"),
    CheckInfo("exact_regression", "march u_A (A=2) to X=100: sup error <= 5e-3 and "
              "2x refinement ratio in [3.4, 4.6]", "shifted Blasius closed form"),
    CheckInfo("sharp_rate_upper", "sup gap slopes (von Mises and physical) in [-1.1, -0.9] "
              "over X in [1e2, 1e4]", "sharp (x+1)^-1 upper rate"),
    CheckInfo("sharp_rate_lower", "(x+1)|ubar - u_A| at y = sqrt(x+1) >= 0.9 f''(2) "
              "for x in [1, 1e6]", "optimality of the rate on the shifted family"),
    CheckInfo("moment_bounded", "max I(X)/I(1) <= 10 for alpha = 19/20 and 1",
              "nearly conserved weighted moment"),
    CheckInfo("energy_slopes", "slopes: L2w <= -1.3, H1 <= -2.2, L4 <= -4.5",
              "energy decay rates"),
    CheckInfo("comparison_principle", "ordered barrier seeds stay ordered to 1e-12; "
              "envelope wbar/4 <= w <= 4 wbar", "parabolic comparison"),
    CheckInfo("order_one_pipeline", "sandwich search, ordering at every station, gap slope <= -0.9",
              "barrier sandwich for order-one data"),
    CheckInfo("spectral_eigenpair", "L(Y Wbar') = Y Wbar' residual, inverse iteration near 1, "
              "positive eigenvector", "linearized operator in the similarity frame"),
    CheckInfo("similarity_contraction", "||W(s2)-Wbar|| / ||W(s1)-Wbar|| = e^-(s2-s1) within 30%",
              "e^-s convergence in the similarity frame"),
)


@dataclass
class CheckResult:
    id: str
    passed: bool
    measured: dict = field(default_factory=dict)
    runtime: float = 0.0

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.id} ({self.runtime:.1f} s)"


def shooting_oracle(eta_max=12.0):
    """f''(0) from an adaptive DOP853 integrator and Brent's method."""
    def miss(a):
        sol = solve_ivp(lambda t, z: (z[1], z[2], -0.5 * z[0] * z[2]), (0.0, eta_max),
                        (0.0, 0.0, a), method="DOP853", rtol=1e-12, atol=1e-14)
        return sol.y[1, -1] - 1.0
    return brentq(miss, 0.1, 1.0, xtol=1e-14)


class Context:
    """Lazily built runs shared between checks."""

    def __init__(self, table=None, X_end=1e4):
        self._table = table
        self.X_end = X_end

    @cached_property
    def table(self):
        return self._table if self._table is not None else bl.default_table()

    @cached_property
    def shifted_run(self):
        """(RunResult, StationRecorder) for u_A, A = 2, marched to X_end."""
        rec = StationRecorder(self.table)
        t0 = time.perf_counter()
        result = run(shifted_blasius(self.table, A_SHIFT), MarchConfig(X_end=self.X_end), [rec])
        return result, rec, time.perf_counter() - t0


def check_blasius_shooting(ctx):
    t0 = time.perf_counter()
    table = bl.solve_blasius()
    elapsed = time.perf_counter() - t0
    oracle = shooting_oracle()
    ladder = bool(np.all(table.f >= 0) and np.all(table.fp >= 0) and np.all(table.fpp >= 0)
                  and np.all(table.fppp <= 0))
    far = abs(table.fp[-1] - 1.0)
    m = {"fpp0": table.fpp0, "oracle": oracle, "difference": abs(table.fpp0 - oracle),
         "sign_ladder": ladder, "far_field_miss": far, "solve_seconds": elapsed}
    ok = m["difference"] <= 1e-5 and ladder and far <= 1e-9 and elapsed < 1.0
    return ok, m


def check_exact_regression(ctx):
    table = ctx.table
    profile = shifted_blasius(table, A_SHIFT)
    base = MarchConfig(X_end=100.0)
    errors = []
    for cfg in (base, base.refined()):
        final = run(profile, cfg).final.w
        exact = blasius_w(table, cfg.X_end, final.grid, offset=A_SHIFT)
        errors.append(float(np.max(np.abs(final.values - exact.values))))
    # truncation of the psi domain, measured with psi_max doubled
    wide = MarchConfig(X_end=100.0, psi_max=2.0 * base.psi_max)
    final = run(profile, wide).final.w
    wide_err = float(np.max(np.abs(final.values - blasius_w(table, 100.0, final.grid,
                                                                offset=A_SHIFT).values)))
    ratio = errors[0] / errors[1]
    m = {"error_default": errors[0], "error_refined": errors[1], "refinement_ratio": ratio,
         "error_psi_max_doubled": wide_err}
    return errors[0] <= 5e-3 and 3.4 <= ratio <= 4.6, m


def check_sharp_rate_upper(ctx):
    _, rec, secs = ctx.shifted_run
    vm = rec.fit("sup_gap_vonmises", RATE_WINDOW)
    ph = rec.fit("sup_gap_physical", RATE_WINDOW)
    m = {"slope_vonmises": vm.fitted_slope, "ci_vonmises": vm.slope_ci,
         "slope_physical": ph.fitted_slope, "ci_physical": ph.slope_ci, "march_seconds": secs}
    ok = all(-1.1 <= s <= -0.9 for s in (vm.fitted_slope, ph.fitted_slope)) and secs < 300
    return ok, m


def lower_rate_profile(table, x, A=A_SHIFT):
    """``(x+1) |ubar(x, sqrt(x+1)) - u_A(x, sqrt(x+1))|`` on the closed forms."""
    x = np.asarray(x, dtype=float)
    return (x + 1.0) * np.abs(bl.eval_f(table, 1.0)[1]
                              - bl.eval_f(table, np.sqrt((x + 1.0) / (x + A)))[1])


def check_sharp_rate_lower(ctx):
    table = ctx.table
    x = np.logspace(0.0, 6.0, 4001)
    vals = lower_rate_profile(table, x)
    fpp2 = bl.eval_f(table, 2.0)[2]
    fpp1 = bl.eval_f(table, 1.0)[2]
    m = {"min_scaled_gap": float(vals.min()), "x_of_min": float(x[np.argmin(vals)]),
         "threshold": 0.9 * fpp2, "fpp2": fpp2,
         "large_x_limit": fpp1 * abs(A_SHIFT - 1.0) / 2.0,
         # the mean-value bound before the final step, which does hold
         "mean_value_bound_holds": bool(np.all(
             vals >= fpp2 * (x + 1.0) * np.abs(1.0 - np.sqrt((x + 1.0) / (x + A_SHIFT))) - 1e-12))}
    return bool(vals.min() >= 0.9 * fpp2), m


def check_moment_bounded(ctx):
    _, rec, _ = ctx.shifted_run
    x = rec.stations
    sel = x >= 1.0
    m = {}
    ok = True
    for a in (19.0 / 20.0, 1.0):
        v = rec.column(f"I_{a:g}")[sel]
        r = float(v.max() / v[0])
        m[f"max_ratio_alpha_{a:g}"] = r
        ok &= r <= 10.0
    return bool(ok), m


def check_energy_slopes(ctx):
    _, rec, _ = ctx.shifted_run
    limits = {"L2_weighted": -1.3, "H1": -2.2, "L4": -4.5}
    m = {name: rec.fit(name, RATE_WINDOW).fitted_slope for name in limits}
    return all(m[k] <= v for k, v in limits.items()), m


def check_comparison_principle(ctx):
    table = ctx.table
    cfg = MarchConfig(X_end=100.0)
    runs = [run(barrier_seed(table, "-", 0.05), cfg), run(barrier_seed(table, "-", 0.01), cfg),
            run(blasius_profile(table), cfg),
            run(barrier_seed(table, "+", 0.01), cfg), run(barrier_seed(table, "+", 0.05), cfg)]
    margin = min(ordering_margin(runs[i], runs[j])
                 for i in range(len(runs)) for j in range(i + 1, len(runs)))
    env_runs = runs + [run(shifted_blasius(table, 1.05), cfg)]
    env = []
    for r in env_runs:
        for snap in r.snapshots:
            env.append(comparison_envelope(snap, blasius_w(table, snap.station, snap.grid)))
    m = {"min_ordering_margin": margin,
         "envelope_lower_margin": min(e.details["lower_margin"] for e in env),
         "envelope_upper_margin": min(e.details["upper_margin"] for e in env)}
    return margin >= -1e-12 and all(e.passed for e in env), m


def check_order_one_pipeline(ctx):
    table = ctx.table
    t0 = time.perf_counter()
    cfg = MarchConfig(X_end=ctx.X_end)
    profile = order_one_profile(table)
    lam0, Lam0, g_minus, g_plus = search_sandwich_scales(profile, make_grid(cfg))
    rec = StationRecorder(table)
    runs = [run(profile, cfg, [rec]), run(g_minus, cfg), run(g_plus, cfg)]
    report = barrier_sandwich(*runs)
    slope = rec.fit("sup_gap_vonmises", RATE_WINDOW)
    slope_phys = rec.fit("sup_gap_physical", RATE_WINDOW)
    elapsed = time.perf_counter() - t0
    m = {"lambda0": lam0, "Lambda0": Lam0, "sandwich_min_margin": report.sup_ratio,
         "slope_vonmises": slope.fitted_slope, "slope_physical": slope_phys.fitted_slope,
         "seconds": elapsed}
    return report.passed and slope.fitted_slope <= -0.9 and elapsed < 600, m


def check_spectral_eigenpair(ctx):
    table = ctx.table
    t0 = time.perf_counter()
    m = {}
    ok = True
    for label, n, tol in (("default", 4096, 0.05), ("refined", 8192, 0.01)):
        grid = default_Y_grid(n)
        W, _ = wbar_profile(table, grid)
        op = assemble_L(W, table)
        res = eigenrelation_residual(op, table)
        pair = eigen_principal(op, shift=1.0)
        positive = bool(np.all(pair.vector[1:-1] > 0))
        m[f"residual_{label}"] = res
        m[f"eigenvalue_{label}"] = pair.eigenvalue
        m[f"positive_{label}"] = positive
        ok &= abs(pair.eigenvalue - 1.0) <= tol and positive
        if label == "refined":
            near = eigenvalues_near(op, sigma=0.25, k=4)
            m["eigenvalues_near_quarter"] = [float(v.real) for v in near]
            m["gap_clear"] = bool(not np.any((near.real > 0) & (near.real < 0.5)))
    elapsed = time.perf_counter() - t0
    m["seconds"] = elapsed
    ok &= m["residual_default"] <= 1e-3 and m["residual_refined"] < m["residual_default"]
    return bool(ok and elapsed < 30), m


def check_similarity_contraction(ctx):
    result, _, _ = ctx.shifted_run
    table = ctx.table
    grid = default_Y_grid()
    Wbar, _ = wbar_profile(table, grid)
    xs = result.stations
    ratios = []
    for i, X1 in enumerate(xs):
        if X1 < 100:
            continue
        j = np.flatnonzero(np.isclose(xs + 1.0, 4.0 * (X1 + 1.0), rtol=1e-9))
        if not j.size:
            continue
        a = to_similarity(result.snapshots[i], grid).W.values
        b = to_similarity(result.snapshots[j[0]], grid).W.values
        r = np.max(np.abs(b - Wbar.values)) / np.max(np.abs(a - Wbar.values))
        ratios.append(r / 0.25)
    ratios = np.array(ratios)
    m = {"pairs": int(ratios.size), "min_normalized_ratio": float(ratios.min()),
         "max_normalized_ratio": float(ratios.max())}
    return bool(ratios.size > 0 and np.all(np.abs(ratios - 1.0) <= 0.3)), m


_RUNNERS = {
    "blasius_shooting": check_blasius_shooting,
    "exact_regression": check_exact_regression,
    "sharp_rate_upper": check_sharp_rate_upper,
    "sharp_rate_lower": check_sharp_rate_lower,
    "moment_bounded": check_moment_bounded,
    "energy_slopes": check_energy_slopes,
    "comparison_principle": check_comparison_principle,
    "order_one_pipeline": check_order_one_pipeline,
    "spectral_eigenpair": check_spectral_eigenpair,
    "similarity_contraction": check_similarity_contraction,
}


def run_check(check_id, ctx=None):
    ctx = ctx or Context()
    t0 = time.perf_counter()
    passed, measured = _RUNNERS[check_id](ctx)
    return CheckResult(check_id, bool(passed), measured, time.perf_counter() - t0)


def run_all(ids=None, ctx=None):
    ctx = ctx or Context()
    return [run_check(c.id, ctx) for c in CHECKS if ids is None or c.id in ids]
