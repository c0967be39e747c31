"""Blasius similarity profile: shooting solve, tabulation and evaluation.

The ODE is ``f''' + f f'' / 2 = 0`` with ``f(0) = f'(0) = 0`` and ``f'(inf) = 1``.
The self-similar boundary layer built from it is

    ubar = f'(eta),  vbar = (eta f'(eta) - f(eta)) / (2 sqrt(x + 1)),  eta = y / sqrt(x + 1).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numba
import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .errors import NonConvergence

SHOOT_BRACKET = (0.1, 1.0)


@numba.njit(cache=True)
def _rk4_endpoint(fpp0, h, n):
    f = 0.0
    g = 0.0
    k = fpp0
    for _ in range(n):
        a1 = g
        b1 = k
        c1 = -0.5 * f * k
        a2 = g + 0.5 * h * b1
        b2 = k + 0.5 * h * c1
        c2 = -0.5 * (f + 0.5 * h * a1) * b2
        a3 = g + 0.5 * h * b2
        b3 = k + 0.5 * h * c2
        c3 = -0.5 * (f + 0.5 * h * a2) * b3
        a4 = g + h * b3
        b4 = k + h * c3
        c4 = -0.5 * (f + h * a3) * b4
        f += h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
        g += h / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
        k += h / 6.0 * (c1 + 2.0 * c2 + 2.0 * c3 + c4)
    return g


@numba.njit(cache=True)
def _rk4_table(fpp0, h, n):
    out = np.empty((3, n + 1))
    f = 0.0
    g = 0.0
    k = fpp0
    out[0, 0] = f
    out[1, 0] = g
    out[2, 0] = k
    for i in range(n):
        a1 = g
        b1 = k
        c1 = -0.5 * f * k
        a2 = g + 0.5 * h * b1
        b2 = k + 0.5 * h * c1
        c2 = -0.5 * (f + 0.5 * h * a1) * b2
        a3 = g + 0.5 * h * b2
        b3 = k + 0.5 * h * c2
        c3 = -0.5 * (f + 0.5 * h * a2) * b3
        a4 = g + h * b3
        b4 = k + h * c3
        c4 = -0.5 * (f + h * a3) * b4
        f += h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
        g += h / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
        k += h / 6.0 * (c1 + 2.0 * c2 + 2.0 * c3 + c4)
        out[0, i + 1] = f
        out[1, i + 1] = g
        out[2, i + 1] = k
    return out


@dataclass(frozen=True)
class BlasiusTable:
    """Dense tabulation of f and its first three derivatives on [0, eta_max].

    Immutable after construction. Evaluation beyond ``eta_max`` uses the
    far-field asymptote f' = 1.
    """

    eta_max: float
    nodes: np.ndarray
    f: np.ndarray
    fp: np.ndarray
    fpp: np.ndarray
    fppp: np.ndarray
    fpp0: float
    _splines: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        for name in ("nodes", "f", "fp", "fpp", "fppp"):
            arr = np.asarray(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        # Hermite pieces use the exact derivative data carried by the table.
        splines = {
            "f": CubicHermiteSpline(self.nodes, self.f, self.fp),
            "fp": CubicHermiteSpline(self.nodes, self.fp, self.fpp),
            "fpp": CubicHermiteSpline(self.nodes, self.fpp, self.fppp),
        }
        object.__setattr__(self, "_splines", splines)

    @property
    def step(self):
        return float(self.nodes[1] - self.nodes[0])

    @property
    def f_end(self):
        return float(self.f[-1])

    @property
    def displacement(self):
        """Far-field offset ``lim (eta - f(eta))``."""
        return float(self.eta_max - self.f[-1])

    def residual(self):
        """ODE residual at interior nodes with f''' differenced from tabulated f''."""
        h = self.step
        dfpp = (self.fpp[2:] - self.fpp[:-2]) / (2.0 * h)
        return np.abs(dfpp + 0.5 * self.f[1:-1] * self.fpp[1:-1])

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["eta", "f", "fp", "fpp", "fppp"])
            for row in zip(self.nodes, self.f, self.fp, self.fpp, self.fppp):
                writer.writerow([f"{v:.17g}" for v in row])


def solve_blasius(eta_max=12.0, step=1e-4, tol=1e-10, max_iter=200):
    """Shoot on f''(0) by bisection over [0.1, 1] so that f'(eta_max) = 1.

    Classical RK4 with a fixed step. Returns a :class:`BlasiusTable`.
    """
    if eta_max < 10.0:
        raise ValueError("eta_max must be >= 10")
    if not 0.0 < step <= 1e-3:
        raise ValueError("step must lie in (0, 1e-3]")
    if tol < 1e-12:
        raise ValueError("tol must be >= 1e-12")
    n = int(round(eta_max / step))
    if abs(n * step - eta_max) > 1e-9 * eta_max:
        raise ValueError("eta_max must be an integer multiple of step")
    h = eta_max / n

    lo, hi = SHOOT_BRACKET
    g_lo = _rk4_endpoint(lo, h, n) - 1.0
    g_hi = _rk4_endpoint(hi, h, n) - 1.0
    if not g_lo < 0.0 < g_hi:
        raise NonConvergence(f"bracket [{lo}, {hi}] does not straddle f'(eta_max) = 1")

    mid = 0.5 * (lo + hi)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        g = _rk4_endpoint(mid, h, n) - 1.0
        if abs(g) <= tol:
            break
        if g > 0.0:
            hi = mid
        else:
            lo = mid
        if hi - lo <= 4.0 * np.finfo(float).eps * mid:
            raise NonConvergence(
                f"bracket collapsed at f''(0) = {mid!r} with residual {g:.3e} > tol; "
                "step/eta_max combination cannot reach the tolerance"
            )
    else:
        raise NonConvergence(f"bisection did not reach tol={tol} in {max_iter} iterations")

    sol = _rk4_table(mid, h, n)
    nodes = np.linspace(0.0, eta_max, n + 1)
    f, fp, fpp = sol
    fppp = -0.5 * f * fpp
    return BlasiusTable(eta_max=float(eta_max), nodes=nodes, f=f, fp=fp, fpp=fpp,
                        fppp=fppp, fpp0=float(mid))


_DEFAULT_TABLE = None


def default_table():
    """Module-level cached table with the default parameters."""
    global _DEFAULT_TABLE
    if _DEFAULT_TABLE is None:
        _DEFAULT_TABLE = solve_blasius()
    return _DEFAULT_TABLE


def eval_f(table, eta):
    """Return ``(f, f', f'', f''')`` at ``eta >= 0`` (scalar or array).

    f''' is formed from the ODE identity at the evaluation point, so its sign
    is exact.
    """
    eta_arr = np.asarray(eta, dtype=float)
    if np.any(eta_arr < 0):
        raise ValueError("eta must be non-negative")
    e = np.atleast_1d(eta_arr)
    inside = e <= table.eta_max
    f = np.empty_like(e)
    fp = np.ones_like(e)
    fpp = np.zeros_like(e)
    sp = table._splines
    if np.any(inside):
        ei = e[inside]
        f[inside] = sp["f"](ei)
        fp[inside] = sp["fp"](ei)
        fpp[inside] = np.maximum(sp["fpp"](ei), 0.0)
    outside = ~inside
    f[outside] = table.f_end + (e[outside] - table.eta_max)
    fppp = -0.5 * f * fpp
    if eta_arr.ndim == 0:
        return float(f[0]), float(fp[0]), float(fpp[0]), float(fppp[0])
    return f, fp, fpp, fppp


def inverse_f(table, psi_scaled, rtol=1e-14, max_iter=12):
    """Solve ``f(eta) = psi_scaled`` for eta (vectorised Newton)."""
    s_arr = np.asarray(psi_scaled, dtype=float)
    if np.any(s_arr < 0):
        raise ValueError("psi_scaled must be non-negative")
    s = np.atleast_1d(s_arr)
    eta = np.interp(s, table.f, table.nodes)
    far = s >= table.f_end
    eta[far] = table.eta_max + (s[far] - table.f_end)
    # near the wall f ~ fpp0 eta^2 / 2
    small = s < table.f[min(200, len(table.f) - 1)]
    eta[small] = np.sqrt(2.0 * s[small] / table.fpp0)
    active = (~far) & (s > 0)
    sp_f = table._splines["f"]
    sp_fp = table._splines["fp"]
    for _ in range(max_iter):
        if not np.any(active):
            break
        ea = eta[active]
        err = sp_f(ea) - s[active]
        eta[active] = np.clip(ea - err / sp_fp(ea), 0.0, table.eta_max)
        done = np.abs(err) <= rtol * np.maximum(s[active], 1e-300)
        idx = np.flatnonzero(active)
        active[idx[done]] = False
    eta[s == 0] = 0.0
    if s_arr.ndim == 0:
        return float(eta[0])
    return eta


@dataclass(frozen=True)
class ProfilePoint:
    ubar: np.ndarray
    vbar: np.ndarray
    ubar_y: np.ndarray
    ubar_yy: np.ndarray


def eval_profile(table, x, y):
    """Blasius velocity field and its y-derivatives at physical ``(x, y)``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(x < 0) or np.any(y < 0):
        raise ValueError("x and y must be non-negative")
    root = np.sqrt(x + 1.0)
    eta = y / root
    f, fp, fpp, fppp = eval_f(table, eta)
    return ProfilePoint(
        ubar=fp,
        vbar=(eta * fp - f) / (2.0 * root),
        ubar_y=fpp / root,
        ubar_yy=fppp / (x + 1.0),
    )
