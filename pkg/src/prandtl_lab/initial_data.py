"""Admissible initial profiles for the w-equation and their diagnostics.

Every profile carries its von Mises data as callables of psi:

    w0(psi), dw0(psi) = d w0 / d psi, wx0(psi) = w_X(0, psi) = sqrt(w0) w0''

so that the twisted subtraction and its psi- and X-derivatives at X = 0 are
available in closed form wherever the profile itself is.  Profiles defined by a
physical velocity u0(y) also keep u0, u0', u0''.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import CubicHermiteSpline, CubicSpline
from scipy.special import gamma, gammainc

from .blasius import eval_f, inverse_f
from .errors import AmplitudeTooLarge, QuadratureDivergence, SandwichSearchFailed
from .vonmises import Field, Grid

THETA = 1.0 / 1000.0
MU = 1.0 / 500.0
KAPPA_MAX = 0.05

# dense sampling used for physical-space norms and y <-> psi inversion
_Y_MAX = 100.0
_PSI_MAX = 200.0
_N_DENSE = 20000


@dataclass(frozen=True)
class InitialProfile:
    kind: str
    params: dict
    table: object = field(repr=False)
    w0: Callable = field(repr=False)
    dw0: Callable = field(repr=False)
    wx0: Callable = field(repr=False)
    u0: Optional[Callable] = field(default=None, repr=False)
    du0: Optional[Callable] = field(default=None, repr=False)
    d2u0: Optional[Callable] = field(default=None, repr=False)
    y_of_psi: Optional[Callable] = field(default=None, repr=False)

    def w0_field(self, grid):
        values = np.asarray(self.w0(grid.nodes), dtype=float)
        values[0] = 0.0
        return Field(grid, 0.0, values)

    def physical_samples(self, y_max=_Y_MAX, n=_N_DENSE):
        """Return ``(y, u0, u0', u0'')`` on a dense wall-clustered sample."""
        if self.u0 is not None:
            y = Grid.stretched(y_max, n, 2.0).nodes
            return y, self.u0(y), self.du0(y), self.d2u0(y)
        grid = Grid.stretched(_PSI_MAX, n, 2.0)
        psi = grid.nodes
        w = np.maximum(self.w0(psi), 0.0)
        w[0] = 0.0
        root = np.sqrt(w)
        y = np.empty_like(psi)
        y[0] = 0.0
        y[1:] = np.cumsum(2.0 * grid.spacing / (root[:-1] + root[1:]))
        keep = y <= y_max
        return y[keep], root[keep], 0.5 * self.dw0(psi)[keep], 0.5 * self.wx0(psi)[keep]

    def to_csv(self, path, y_max=30.0, n=3000):
        y, u = self.physical_samples(y_max, n)[:2]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["y", "u0"])
            for a, b in zip(y, u):
                writer.writerow([f"{a:.10g}", f"{b:.10g}"])

    def write_sidecar(self, path, report=None):
        payload = {"kind": self.kind, "params": self.params}
        if report is not None:
            payload["admissibility"] = asdict(report)
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2)


def _blasius_w_funcs(table, A=1.0):
    """(w, dw/dpsi, w_X) at X = 0 for the profile f'(y / sqrt(A))."""
    root_a = np.sqrt(A)

    def parts(psi):
        eta = inverse_f(table, np.asarray(psi, dtype=float) / root_a)
        return eval_f(table, eta)

    def w0(psi):
        return parts(psi)[1] ** 2

    def dw0(psi):
        return 2.0 * parts(psi)[2] / root_a

    def wx0(psi):
        return 2.0 * parts(psi)[3] / A

    return w0, dw0, wx0


def _invert_monotone(psi_of_y, u_of_y, psi, y_max=_Y_MAX, n=_N_DENSE, iters=8):
    """Invert the streamfunction map psi(y) by interpolation plus Newton."""
    psi = np.asarray(psi, dtype=float)
    ys = Grid.stretched(y_max, n, 2.0).nodes
    ps = psi_of_y(ys)
    y = np.interp(psi, ps, ys)
    far = psi > ps[-1]
    y[far] = y_max + (psi[far] - ps[-1]) / u_of_y(np.array([y_max]))[0]
    pos = psi > 0
    for _ in range(iters):
        yp = y[pos]
        y[pos] = np.maximum(yp - (psi_of_y(yp) - psi[pos]) / u_of_y(yp), 0.5 * yp)
    y[~pos] = 0.0
    return y


def _from_physical(kind, params, table, u0, du0, d2u0, psi_of_y):
    def y_of_psi(psi):
        return _invert_monotone(psi_of_y, u0, psi)

    def w0(psi):
        return u0(y_of_psi(psi)) ** 2

    def dw0(psi):
        return 2.0 * du0(y_of_psi(psi))

    def wx0(psi):
        return 2.0 * d2u0(y_of_psi(psi))

    return InitialProfile(kind, params, table, w0, dw0, wx0, u0, du0, d2u0, y_of_psi)


def blasius_profile(table):
    return shifted_blasius(table, 1.0)


def shifted_blasius(table, A):
    """``u0(y) = f'(y / sqrt(A))``, the X = 0 trace of ``u_A = f'(y / sqrt(x + A))``."""
    if A <= 0:
        raise ValueError("A must be positive")
    root_a = np.sqrt(A)
    w0, dw0, wx0 = _blasius_w_funcs(table, A)

    def u0(y):
        return eval_f(table, np.asarray(y, dtype=float) / root_a)[1]

    def du0(y):
        return eval_f(table, np.asarray(y, dtype=float) / root_a)[2] / root_a

    def d2u0(y):
        return eval_f(table, np.asarray(y, dtype=float) / root_a)[3] / A

    def y_of_psi(psi):
        return root_a * inverse_f(table, np.asarray(psi, dtype=float) / root_a)

    kind = "blasius" if A == 1.0 else "shifted_blasius"
    return InitialProfile(kind, {"A": float(A)}, table, w0, dw0, wx0, u0, du0, d2u0, y_of_psi)


_BUMP_POWERS = {"bump2": 2, "bump4": 4}


def perturbed_blasius(table, kappa, shape="bump2"):
    """Blasius plus ``kappa * y**k * exp(-y)`` (k = 2 for ``bump2``, 4 for ``bump4``)."""
    if shape not in _BUMP_POWERS:
        raise ValueError(f"unknown shape {shape!r}")
    k = _BUMP_POWERS[shape]
    kappa = float(kappa)
    mass = gamma(k + 1)

    def u0(y):
        y = np.asarray(y, dtype=float)
        return eval_f(table, y)[1] + kappa * y**k * np.exp(-y)

    def du0(y):
        y = np.asarray(y, dtype=float)
        return eval_f(table, y)[2] + kappa * (k * y ** (k - 1) - y**k) * np.exp(-y)

    def d2u0(y):
        y = np.asarray(y, dtype=float)
        poly = k * (k - 1) * y ** (k - 2) - 2 * k * y ** (k - 1) + y**k
        return eval_f(table, y)[3] + kappa * poly * np.exp(-y)

    def psi_of_y(y):
        y = np.asarray(y, dtype=float)
        return eval_f(table, y)[0] + kappa * mass * gammainc(k + 1, y)

    if np.any(u0(Grid.stretched(_Y_MAX, 2000).nodes[1:]) <= 0):
        raise AmplitudeTooLarge("perturbed profile is not positive")
    return _from_physical("perturbed_blasius", {"kappa": kappa, "shape": shape}, table,
                          u0, du0, d2u0, psi_of_y)


def _cumulative_gauss(func, y, order=4):
    """Cumulative integral of ``func`` on the nodes ``y`` with per-cell Gauss-Legendre."""
    xg, wg = np.polynomial.legendre.leggauss(order)
    a, b = y[:-1], y[1:]
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    pts = mid[:, None] + half[:, None] * xg[None, :]
    cell = half * (func(pts.ravel()).reshape(pts.shape) @ wg)
    out = np.empty_like(y)
    out[0] = 0.0
    out[1:] = np.cumsum(cell)
    return out


def general_profile(table, u0, du0, d2u0, kind="general", params=None, y_max=_Y_MAX):
    """Profile from callables ``u0, u0', u0''`` (the streamfunction is integrated numerically)."""
    ys = Grid.stretched(y_max, _N_DENSE, 2.0).nodes
    psi_nodes = _cumulative_gauss(u0, ys)
    spline = CubicHermiteSpline(ys, psi_nodes, u0(ys))
    psi_end = psi_nodes[-1]

    def psi_of_y(y):
        y = np.asarray(y, dtype=float)
        out = np.empty_like(y)
        inside = y <= y_max
        out[inside] = spline(y[inside])
        out[~inside] = psi_end + (y[~inside] - y_max)
        return out

    return _from_physical(kind, dict(params or {}), table, u0, du0, d2u0, psi_of_y)


def tabulated_profile(table, y, u):
    """Profile from samples ``(y, u0)``; beyond the last sample u0 is held constant."""
    y = np.asarray(y, dtype=float)
    u = np.asarray(u, dtype=float)
    spline = CubicSpline(y, u)
    d1, d2 = spline.derivative(1), spline.derivative(2)
    y_end, u_end = y[-1], u[-1]

    def clip(fn, tail):
        def g(t):
            t = np.asarray(t, dtype=float)
            out = np.full_like(t, tail)
            m = t <= y_end
            out[m] = fn(t[m])
            return out
        return g

    return general_profile(table, clip(spline, u_end), clip(d1, 0.0), clip(d2, 0.0),
                           kind="general", params={"samples": int(y.size)},
                           y_max=min(_Y_MAX, y_end))


def order_one_profile(table, depth=0.5):
    """``u0 = f'(y) (1 - depth / (1 + y**4))``: order-one deficit with a quartic tail."""
    depth = float(depth)
    if not 0.0 <= depth < 1.0:
        raise ValueError("depth must lie in [0, 1)")

    def g(y):
        return 1.0 - depth / (1.0 + y**4)

    def dg(y):
        return depth * 4.0 * y**3 / (1.0 + y**4) ** 2

    def d2g(y):
        d = 1.0 + y**4
        return depth * (12.0 * y**2 * d - 32.0 * y**6) / d**3

    def u0(y):
        y = np.asarray(y, dtype=float)
        return eval_f(table, y)[1] * g(y)

    def du0(y):
        y = np.asarray(y, dtype=float)
        _, fp, fpp, _ = eval_f(table, y)
        return fpp * g(y) + fp * dg(y)

    def d2u0(y):
        y = np.asarray(y, dtype=float)
        _, fp, fpp, fppp = eval_f(table, y)
        return fppp * g(y) + 2.0 * fpp * dg(y) + fp * d2g(y)

    return general_profile(table, u0, du0, d2u0, kind="order_one", params={"depth": depth})


def bump(psi):
    psi = np.asarray(psi, dtype=float)
    return psi / (1.0 + psi**4)


def _bump_d1(psi):
    d = 1.0 + psi**4
    return (1.0 - 3.0 * psi**4) / d**2


def _bump_d2(psi):
    d = 1.0 + psi**4
    return psi**3 * (12.0 * psi**4 - 20.0) / d**3


def barrier_seed(table, sign, kappa):
    """``g(psi) = wbar(0, psi) + sign * kappa * psi / (1 + psi**4)`` given directly as w0."""
    s = {"+": 1.0, "-": -1.0, 1: 1.0, -1: -1.0}.get(sign)
    if s is None:
        raise ValueError("sign must be '+' or '-'")
    kappa = float(kappa)
    if not 0.0 <= kappa <= KAPPA_MAX:
        raise AmplitudeTooLarge(f"kappa = {kappa} outside [0, {KAPPA_MAX}]")
    wb, dwb, wxb = _blasius_w_funcs(table)

    def w0(psi):
        return wb(psi) + s * kappa * bump(psi)

    def dw0(psi):
        return dwb(psi) + s * kappa * _bump_d1(psi)

    def wx0(psi):
        psi = np.asarray(psi, dtype=float)
        eta = inverse_f(table, psi)
        _, fp, _, fppp = eval_f(table, eta)
        wbar_pp = np.zeros_like(psi)
        m = fp > 0
        wbar_pp[m] = 2.0 * fppp[m] / fp[m]
        return np.sqrt(np.maximum(w0(psi), 0.0)) * (wbar_pp + s * kappa * _bump_d2(psi))

    probe = np.concatenate([[0.0], np.logspace(-10, 4, 4000)])
    if np.any(w0(probe) < 0.0):
        raise AmplitudeTooLarge(f"g_- dips below zero for kappa = {kappa}")
    return InitialProfile("barrier_seed", {"sign": "+" if s > 0 else "-", "kappa": kappa,
                                           "scale": 1.0}, table, w0, dw0, wx0)


def rescale_seed(profile, lam):
    """``w0r(psi) = w0(lam * psi)``."""
    if lam <= 0:
        raise ValueError("lambda must be positive")
    if lam == 1.0:
        return profile
    w0, dw0, wx0 = profile.w0, profile.dw0, profile.wx0
    params = dict(profile.params)
    params["scale"] = params.get("scale", 1.0) * lam
    return InitialProfile(
        profile.kind, params, profile.table,
        lambda psi: w0(lam * np.asarray(psi, dtype=float)),
        lambda psi: lam * dw0(lam * np.asarray(psi, dtype=float)),
        lambda psi: lam**2 * wx0(lam * np.asarray(psi, dtype=float)),
    )


@dataclass(frozen=True)
class AdmissibilityReport:
    positive: bool
    wall_slope: float
    wall_curvature: float
    far_field_gap: float
    within_unit_interval: bool
    smallness_norm: float
    smallness_norm_rss: float
    l1_weighted: float
    tail_constant: float
    small_perturbation: bool

    @property
    def oleinik(self):
        return self.positive and self.wall_slope > 0 and self.far_field_gap < 1e-6


def _trapz(y, v):
    return float(np.sum(0.5 * (v[1:] + v[:-1]) * np.diff(y)))


def check_admissibility(profile, small_threshold=0.1):
    """Measure the Oleinik conditions and the perturbation norms of a profile.

    ``smallness_norm`` sums the three weighted L2 norms of ``d^j (u0 - ubar0)``,
    j = 0, 1, 2; ``smallness_norm_rss`` combines them in quadrature instead.
    """
    table = profile.table
    y, u, du, d2u = profile.physical_samples()
    _, fp, fpp, fppp = eval_f(table, y)
    weight = 1.0 + y
    diffs = (u - fp, du - fpp, d2u - fppp)
    parts = np.array([np.sqrt(_trapz(y, (weight * d) ** 2)) for d in diffs])
    smallness = float(parts.sum())
    l1 = _trapz(y, weight * np.abs(diffs[0]))
    tail = float(np.max((1.0 + y**4) * np.abs(u - 1.0)))
    return AdmissibilityReport(
        positive=bool(np.all(u[1:] > 0)),
        wall_slope=float(du[0]),
        wall_curvature=float(d2u[0]),
        far_field_gap=float(abs(u[-1] - 1.0)),
        within_unit_interval=bool(np.all(u >= 0.0) and np.all(u <= 1.0 + 1e-9)),
        smallness_norm=smallness,
        smallness_norm_rss=float(np.sqrt(np.sum(parts**2))),
        l1_weighted=float(l1),
        tail_constant=tail,
        small_perturbation=bool(smallness <= small_threshold),
    )


def initial_energy_norms(profile, psi_max=400.0, n=40000, tail_tol=1e-3):
    """Initial weighted energies ``(E00, E10, E20)`` of ``phi0 = w0 - wbar0``.

    Weight ``1 + psi**(1 - 2 mu)``; ``E00`` and ``E20`` carry the extra ``1/u``.
    """
    table = profile.table
    grid = Grid.stretched(psi_max, n, 2.0)
    psi = grid.nodes
    wb, dwb, wxb = _blasius_w_funcs(table)
    w0 = np.maximum(profile.w0(psi), 0.0)
    phi = w0 - wb(psi)
    dphi = profile.dw0(psi) - dwb(psi)
    phix = profile.wx0(psi) - wxb(psi)
    rho = 1.0 + psi ** (1.0 - 2.0 * MU)
    inv_u = np.zeros_like(psi)
    inv_u[1:] = 1.0 / np.sqrt(w0[1:])
    integrands = (phi**2 * inv_u * rho, dphi**2 * rho, phix**2 * inv_u * rho)

    # wall cell: integrands ~ c psi^p with p >= -1/2; integrate the model exactly
    h = psi[1]
    out = []
    for g in integrands:
        first = 2.0 / 3.0 * g[1] * h if g[0] == 0.0 else 0.5 * (g[0] + g[1]) * h
        body = np.dot(grid.weights[1:], g[1:]) - 0.5 * h * g[1]
        total = first + body
        half = psi >= 0.5 * psi_max
        tail = np.dot(grid.weights[half], g[half])
        if total > 0 and tail > tail_tol * total:
            raise QuadratureDivergence(
                f"weighted integrand does not decay: tail share {tail / total:.2e}")
        out.append(float(total))
    return tuple(out)


def search_sandwich_scales(profile, grid, kappa=0.01, max_power=20):
    """Find ``lam0 = 2**-k`` and ``Lam0 = 2**k`` with ``g_-(lam0 psi) <= w0 <= g_+(Lam0 psi)``.

    Checked nodewise on ``grid`` and on a dense log-spaced probe. Returns
    ``(lam0, Lam0, g_minus_rescaled, g_plus_rescaled)``.
    """
    table = profile.table
    minus = barrier_seed(table, "-", kappa)
    plus = barrier_seed(table, "+", kappa)
    probe = np.unique(np.concatenate([grid.nodes, np.logspace(-8, np.log10(grid.length), 2000)]))
    w = profile.w0(probe)
    w[probe == 0] = 0.0

    lam0 = next((2.0**-k for k in range(1, max_power + 1)
                 if np.all(minus.w0(2.0**-k * probe) <= w)), None)
    Lam0 = next((2.0**k for k in range(1, max_power + 1)
                 if np.all(plus.w0(2.0**k * probe) >= w)), None)
    if lam0 is None or Lam0 is None:
        raise SandwichSearchFailed(f"no admissible scales up to 2**{max_power}: "
                                   f"lambda0={lam0}, Lambda0={Lam0}")
    return lam0, Lam0, rescale_seed(minus, lam0), rescale_seed(plus, Lam0)


def build_profile(table, desc):
    """Construct a profile from a config mapping ``{"kind": ..., **params}``."""
    desc = dict(desc)
    kind = desc.pop("kind")
    if kind == "blasius":
        return blasius_profile(table)
    if kind == "shifted_blasius":
        return shifted_blasius(table, desc.get("A", 1.0))
    if kind == "perturbed_blasius":
        return perturbed_blasius(table, desc.get("kappa", 0.01), desc.get("shape", "bump2"))
    if kind == "barrier_seed":
        prof = barrier_seed(table, desc.get("sign", "+"), desc.get("kappa", 0.01))
        return rescale_seed(prof, desc.get("scale", 1.0))
    if kind == "order_one":
        return order_one_profile(table, desc.get("depth", 0.5))
    if kind == "general":
        return tabulated_profile(table, desc["y"], desc["u"])
    raise ValueError(f"unknown profile kind {kind!r}")
