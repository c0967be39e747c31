"""Norms, moments, pointwise bounds and decay-rate fits evaluated on marched fields.

Everything works on ``phi = w - wbar`` on the shared psi grid.  Integrands
carrying ``1/u = 1/sqrt(w)`` are singular at the wall; on the first cell they
are integrated under the power-law model that holds when ``w ~ c psi``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from .blasius import eval_f, inverse_f
from .errors import (DegenerateDenominator, InsufficientHistory, NonPositiveValue,
                     OrderingViolation)
from .vonmises import _check_pair, blasius_w, recover_physical

THETA = 1.0 / 1000.0
MU = 1.0 / 500.0
DELTA = 1.0 / 100.0
MODES = ("L2w", "H1", "L4", "E0", "E1", "E2")


def _inverse_root(w):
    v = w.values
    if np.any(v[1:] <= 0.0):
        bad = int(np.flatnonzero(v[1:] <= 0.0)[0]) + 1
        raise DegenerateDenominator(f"w vanishes at interior psi = {w.nodes[bad]:.3g}")
    out = np.zeros_like(v)
    out[1:] = 1.0 / np.sqrt(v[1:])
    return out


def _integrate(grid, g, wall_power=None):
    """Trapezoid rule; with ``wall_power = p`` the first cell uses ``g ~ psi**p``."""
    if wall_power is None:
        return grid.integrate(g)
    h = grid.spacing[0]
    return float(g[1] * h / (wall_power + 1.0) + np.dot(grid.weights[1:], g[1:]) - 0.5 * h * g[1])


# ---------------------------------------------------------------- gaps

def sup_norm_gap(w, wbar, table):
    """``(max |sqrt w - sqrt wbar|, max_y |u(x, y) - ubar(x, y)|)`` at the shared station."""
    _check_pair(w, wbar)
    vm = float(np.max(np.abs(np.sqrt(w.values) - np.sqrt(wbar.values))))
    y, u = recover_physical(w)
    ubar = eval_f(table, y / np.sqrt(w.station + 1.0))[1]
    return vm, float(np.max(np.abs(u - ubar)))


@dataclass(frozen=True)
class GapDecomposition:
    physical: float
    vonmises: float
    twist: float

    @property
    def consistent(self):
        return self.physical <= (self.vonmises + self.twist) * (1 + 1e-9) + 1e-15


def physical_gap_decomposition(w, wbar, table):
    """Split the physical gap into the von Mises gap plus ``sup ubar_y |y - y*|``.

    ``y*`` is the Blasius height of the same streamline; ``ubar_y`` is taken at
    the lower end of ``[y, y*]`` where it is largest (f'' is decreasing).
    """
    vm, phys = sup_norm_gap(w, wbar, table)
    root = np.sqrt(w.station + 1.0)
    y, _ = recover_physical(w)
    y_star = root * inverse_f(table, w.nodes / root)
    low = np.minimum(y, y_star)
    ubar_y = eval_f(table, low / root)[2] / root
    return GapDecomposition(phys, vm, float(np.max(ubar_y * np.abs(y - y_star))))


# ---------------------------------------------------------------- moments and norms

def weighted_moment(w, wbar, alpha=19.0 / 20.0):
    """``I = int |phi| psi**alpha / sqrt(w) dpsi``."""
    _check_pair(w, wbar)
    inv_u = _inverse_root(w)
    phi = np.abs(w.values - wbar.values)
    g = phi * w.nodes**alpha * inv_u
    return _integrate(w.grid, g, alpha + 0.5)


def weighted_norms(w, wbar, mode, history=None):
    """Named quadratures of phi at one station.

    ``L2w``: int phi**2 / u;  ``H1``: int phi_psi**2;  ``L4``: int phi_psi**4.
    ``E0``, ``E1``, ``E2`` are the station densities of the weighted energies
    with ``rho = 1 + psi**(1/2 - mu)``::

        E0 = int phi**2 rho**2 / u + int phi_psi**2 rho**2
        E1 = (X+1)**(1 - 2 theta) [int phi_psi**2 rho**2 + int phi_X**2 rho**2 / u]
        E2 = (X+1)**(2 - 2 theta) [int phi_X**2 rho**2 / u + int phi_Xpsi**2 rho**2]

    ``phi_X`` is the backward difference against ``history = (w_prev, wbar_prev)``
    (first order in the station spacing).
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    _check_pair(w, wbar)
    grid = w.grid
    psi = w.nodes
    phi = w.values - wbar.values
    if not np.any(phi):
        return 0.0
    if mode == "L2w":
        return _integrate(grid, phi**2 * _inverse_root(w), 1.5)
    dphi = grid.d1(phi)
    if mode == "H1":
        return grid.integrate(dphi**2)
    if mode == "L4":
        return grid.integrate(dphi**4)

    rho2 = (1.0 + psi ** (0.5 - MU)) ** 2
    inv_u = _inverse_root(w)
    if mode == "E0":
        return _integrate(grid, phi**2 * rho2 * inv_u, 1.5) + grid.integrate(dphi**2 * rho2)
    if history is None:
        raise InsufficientHistory(f"{mode} needs the previous station")
    w_prev, wbar_prev = history
    _check_pair(w_prev, wbar_prev)
    dX = w.station - w_prev.station
    if not w_prev.grid.same_as(grid) or dX <= 0:
        raise InsufficientHistory("previous station must share the grid and precede X")
    phi_x = (phi - (w_prev.values - wbar_prev.values)) / dX
    X1 = w.station + 1.0
    if mode == "E1":
        return X1 ** (1 - 2 * THETA) * (grid.integrate(dphi**2 * rho2)
                                        + _integrate(grid, phi_x**2 * rho2 * inv_u, 0.5))
    return X1 ** (2 - 2 * THETA) * (_integrate(grid, phi_x**2 * rho2 * inv_u, 0.5)
                                    + grid.integrate(grid.d1(phi_x) ** 2 * rho2))


# ---------------------------------------------------------------- rate fits

@dataclass(frozen=True)
class RateSeries:
    stations: np.ndarray
    values: np.ndarray
    window: tuple
    fitted_slope: float
    slope_ci: float
    intercept: float = 0.0

    def to_dict(self):
        return {"window": list(self.window), "slope": self.fitted_slope,
                "slope_ci": self.slope_ci, "n_points": int(self._mask().sum())}

    def _mask(self):
        return (self.stations >= self.window[0]) & (self.stations <= self.window[1])


def fit_decay_rate(stations, values, window=None, min_points=8):
    """OLS slope of ``log(value)`` against ``log(X + 1)`` over ``window``.

    The default window is ``[X_end / 100, X_end]``; the band is the 95% t-interval.
    """
    x = np.asarray(stations, dtype=float)
    v = np.asarray(values, dtype=float)
    if x.shape != v.shape or np.any(np.diff(x) <= 0):
        raise ValueError("stations must be increasing and match values")
    if window is None:
        window = (x[-1] / 100.0, x[-1])
    lo, hi = window
    if lo < x[0] * (1 - 1e-12) or hi > x[-1] * (1 + 1e-12):
        raise ValueError("window must lie inside the sampled range")
    m = (x >= lo * (1 - 1e-12)) & (x <= hi * (1 + 1e-12))
    if m.sum() < min_points:
        raise ValueError(f"need at least {min_points} stations in the window, got {m.sum()}")
    if np.any(v[m] <= 0):
        bad = x[m][np.flatnonzero(v[m] <= 0)[0]]
        raise NonPositiveValue(f"non-positive value at X = {bad:.6g}")
    fit = stats.linregress(np.log(x[m] + 1.0), np.log(v[m]))
    ci = float(stats.t.ppf(0.975, m.sum() - 2) * fit.stderr)
    return RateSeries(x, v, (float(lo), float(hi)), float(fit.slope), ci, float(fit.intercept))


# ---------------------------------------------------------------- bound reports

@dataclass
class BoundReport:
    name: str
    sup_ratio: float
    station_of_max: float
    passed: bool
    details: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)


def bound_M(X, psi):
    """Pointwise envelope: ``psi**(1/4) (X+1)**(-9/8)`` below ``sqrt(X+1)``, ``(X+1)**-1`` above."""
    X1 = X + 1.0
    psi = np.asarray(psi, dtype=float)
    return np.where(psi <= np.sqrt(X1), psi**0.25 * X1 ** (-9.0 / 8.0), 1.0 / X1)


def pointwise_bound_ratio(w, wbar):
    """sup over psi > 0 of ``|sqrt w - sqrt wbar| / M(X, psi)``, split inner/outer."""
    _check_pair(w, wbar)
    X = w.station
    if X < 1:
        raise ValueError("station must satisfy X >= 1")
    psi = w.nodes[1:]
    gap = np.abs(np.sqrt(w.values[1:]) - np.sqrt(wbar.values[1:]))
    ratio = gap / bound_M(X, psi)
    inner = psi <= np.sqrt(X + 1.0)
    r_in = float(ratio[inner].max()) if inner.any() else 0.0
    r_out = float(ratio[~inner].max()) if (~inner).any() else 0.0
    sup = max(r_in, r_out)
    return BoundReport("pointwise_M", sup, X, bool(np.isfinite(sup)),
                       {"inner": r_in, "outer": r_out, "wall_nodes": ratio[:5].tolist()})


def comparison_envelope(w, wbar):
    """Check ``wbar/4 <= w <= 4 wbar`` for psi > 0; margins are ``min 4w/wbar`` and ``min 4wbar/w``."""
    _check_pair(w, wbar)
    a, b = w.values[1:], wbar.values[1:]
    lower = float(np.min(4.0 * a / b))
    upper = float(np.min(4.0 * b / a))
    ok = lower >= 1.0 and upper >= 1.0
    return BoundReport("comparison_envelope", min(lower, upper), w.station, ok,
                       {"lower_margin": lower, "upper_margin": upper})


def _fields(run):
    return list(run.snapshots) if hasattr(run, "snapshots") else list(run)


def barrier_sandwich(w_run, minus_run, plus_run, tol=1e-12):
    """Check ``w_minus <= w <= w_plus`` nodewise at every shared station."""
    runs = [_fields(r) for r in (w_run, minus_run, plus_run)]
    if len({len(r) for r in runs}) != 1:
        raise ValueError("runs must share the station schedule")
    worst = np.inf
    worst_at = 0.0
    for mid, lo, hi in zip(*runs):
        _check_pair(mid, lo)
        _check_pair(mid, hi)
        for lower, upper in ((lo.values, mid.values), (mid.values, hi.values)):
            d = upper - lower
            if np.any(d < -tol):
                node = int(np.argmin(d))
                raise OrderingViolation(
                    f"ordering broken by {-d[node]:.3e} at X = {mid.station:.6g}, "
                    f"psi = {mid.nodes[node]:.6g}", station=mid.station, node=node)
            if d.min() < worst:
                worst, worst_at = float(d.min()), mid.station
    return BoundReport("barrier_sandwich", worst, worst_at, True,
                       {"stations": len(runs[0])})


def ordering_margin(lower_run, upper_run):
    """Smallest ``upper - lower`` over all stations and nodes."""
    return float(min(np.min(b.values - a.values)
                     for a, b in zip(_fields(lower_run), _fields(upper_run))))


# ---------------------------------------------------------------- station log

CSV_COLUMNS = ("X", "sup_gap_vonmises", "sup_gap_physical", "I_alpha", "L2_weighted",
               "H1", "L4", "ratio_M")


class StationRecorder:
    """Run hook that records the station-log quantities at every report station."""

    def __init__(self, table, alphas=(19.0 / 20.0, 1.0), offset=1.0, energies=False):
        self.table = table
        self.alphas = tuple(alphas)
        self.offset = offset
        self.energies = energies
        self.rows = []
        self._prev = None

    def __call__(self, state):
        w = state.w
        wbar = blasius_w(self.table, w.station, w.grid, offset=self.offset)
        vm, phys = sup_norm_gap(w, wbar, self.table)
        row = {"X": w.station, "sup_gap_vonmises": vm, "sup_gap_physical": phys}
        for a in self.alphas:
            row[f"I_{a:g}"] = weighted_moment(w, wbar, a)
        row["I_alpha"] = row[f"I_{self.alphas[0]:g}"]
        row["L2_weighted"] = weighted_norms(w, wbar, "L2w")
        row["H1"] = weighted_norms(w, wbar, "H1")
        row["L4"] = weighted_norms(w, wbar, "L4")
        row["ratio_M"] = pointwise_bound_ratio(w, wbar).sup_ratio if w.station >= 1 else np.nan
        env = comparison_envelope(w, wbar)
        row["envelope_lower"] = env.details["lower_margin"]
        row["envelope_upper"] = env.details["upper_margin"]
        row["twist"] = physical_gap_decomposition(w, wbar, self.table).twist
        if self.energies:
            row["E0"] = weighted_norms(w, wbar, "E0")
            if self._prev is not None:
                row["E1"] = weighted_norms(w, wbar, "E1", self._prev)
                row["E2"] = weighted_norms(w, wbar, "E2", self._prev)
        self._prev = (w, wbar)
        self.rows.append(row)

    def column(self, name):
        return np.array([r.get(name, np.nan) for r in self.rows], dtype=float)

    @property
    def stations(self):
        return self.column("X")

    def fit(self, name, window):
        x = self.stations
        m = x > 0
        return fit_decay_rate(x[m], self.column(name)[m], window)

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write(",".join(CSV_COLUMNS) + "\n")
            for r in self.rows:
                fh.write(",".join(f"{r[c]:.10g}" for c in CSV_COLUMNS) + "\n")
