"""von Mises variables: grids, fields, the Blasius profile in (X, psi), the
twisted subtraction phi = w - wbar, the coefficient of the phi-equation and the
map back to physical coordinates.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .blasius import eval_f, inverse_f
from .errors import DegenerateDenominator, GridMismatch, NonPositiveVelocity


@dataclass(frozen=True, eq=False)
class Grid:
    """Nonuniform node set on [0, psi_max] with trapezoid weights and 3-point stencils."""

    nodes: np.ndarray

    def __post_init__(self):
        nodes = np.array(self.nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size < 3:
            raise ValueError("grid needs at least 3 nodes")
        if nodes[0] != 0.0:
            raise ValueError("grid must start at 0")
        if np.any(np.diff(nodes) <= 0):
            raise ValueError("grid nodes must be strictly increasing")
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @classmethod
    def stretched(cls, length, n, stretch=2.0):
        """Nodes ``length * (i / n) ** stretch`` for i = 0..n."""
        t = np.linspace(0.0, 1.0, n + 1)
        nodes = length * t**stretch
        nodes[-1] = length
        return cls(nodes)

    @property
    def size(self):
        return self.nodes.size

    @property
    def length(self):
        return float(self.nodes[-1])

    @cached_property
    def spacing(self):
        return np.diff(self.nodes)

    @cached_property
    def weights(self):
        h = self.spacing
        w = np.zeros(self.size)
        w[:-1] += 0.5 * h
        w[1:] += 0.5 * h
        return w

    @cached_property
    def d2_coeffs(self):
        """(lower, diag, upper) of the second-difference stencil at interior nodes."""
        hl = self.spacing[:-1]
        hr = self.spacing[1:]
        s = hl + hr
        lower = 2.0 / (hl * s)
        upper = 2.0 / (hr * s)
        return lower, -(lower + upper), upper

    @cached_property
    def d1_coeffs(self):
        """(lower, diag, upper) of the centred first-difference stencil at interior nodes."""
        hl = self.spacing[:-1]
        hr = self.spacing[1:]
        s = hl + hr
        return -hr / (hl * s), (hr - hl) / (hl * hr), hl / (hr * s)

    def d2(self, values):
        """Second derivative at interior nodes."""
        lo, di, up = self.d2_coeffs
        v = np.asarray(values)
        return lo * v[:-2] + di * v[1:-1] + up * v[2:]

    def d1(self, values):
        """First derivative at every node (one-sided second order at the ends)."""
        v = np.asarray(values, dtype=float)
        lo, di, up = self.d1_coeffs
        out = np.empty_like(v)
        out[1:-1] = lo * v[:-2] + di * v[1:-1] + up * v[2:]
        h0, h1 = self.spacing[0], self.spacing[1]
        out[0] = (-(2 * h0 + h1) / (h0 * (h0 + h1)) * v[0] + (h0 + h1) / (h0 * h1) * v[1]
                  - h0 / (h1 * (h0 + h1)) * v[2])
        h0, h1 = self.spacing[-1], self.spacing[-2]
        out[-1] = ((2 * h0 + h1) / (h0 * (h0 + h1)) * v[-1] - (h0 + h1) / (h0 * h1) * v[-2]
                   + h0 / (h1 * (h0 + h1)) * v[-3])
        return out

    def integrate(self, values):
        return float(np.dot(self.weights, values))

    def same_as(self, other):
        return self is other or (self.size == other.size and np.array_equal(self.nodes, other.nodes))


@dataclass(frozen=True, eq=False)
class Field:
    """One scalar sampled on a grid at station X."""

    grid: Grid
    station: float
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != (self.grid.size,):
            raise ValueError(f"expected {self.grid.size} values, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("field values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "station", float(self.station))

    @property
    def nodes(self):
        return self.grid.nodes

    def with_values(self, values):
        return Field(self.grid, self.station, values)

    def to_csv(self, directory):
        """Write ``station_<X>.csv`` with header ``psi,value``; returns the path."""
        path = Path(directory) / f"station_{self.station:.6g}.csv"
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["psi", "value"])
            for p, v in zip(self.grid.nodes, self.values):
                writer.writerow([f"{p:.10g}", f"{v:.10g}"])
        return path


def _check_pair(a, b):
    if not a.grid.same_as(b.grid):
        raise GridMismatch("fields live on different grids")
    if a.station != b.station:
        raise GridMismatch(f"fields at different stations {a.station} and {b.station}")


def streamfunction(y, u0):
    """Cumulative streamfunction ``psi(y) = int_0^y u0`` of sampled velocity.

    Trapezoid rule; on the first cell it is exact for the linear wall
    behaviour ``u0 ~ u0'(0) y``.
    """
    y = np.asarray(y, dtype=float)
    u0 = np.asarray(u0, dtype=float)
    if y.shape != u0.shape or y.ndim != 1:
        raise ValueError("y and u0 must be 1-D arrays of equal length")
    if y[0] != 0.0 or np.any(np.diff(y) <= 0):
        raise ValueError("y must start at 0 and increase strictly")
    if np.any(u0[1:] <= 0.0):
        bad = int(np.flatnonzero(u0[1:] <= 0.0)[0]) + 1
        raise NonPositiveVelocity(f"u0({y[bad]:.6g}) = {u0[bad]:.3g} <= 0")
    psi = np.empty_like(y)
    psi[0] = 0.0
    psi[1:] = np.cumsum(0.5 * (u0[1:] + u0[:-1]) * np.diff(y))
    return psi


def blasius_w(table, X, grid, offset=1.0):
    """``wbar(X, psi) = f'(f^{-1}(psi / sqrt(X + offset)))**2``.

    ``offset = 1`` is the Blasius profile; other offsets give the shifted
    family ``u_A`` with ``A = offset``.
    """
    if X < 0:
        raise ValueError("X must be non-negative")
    eta = inverse_f(table, grid.nodes / np.sqrt(X + offset))
    fp = eval_f(table, eta)[1]
    values = fp**2
    values[0] = 0.0
    return Field(grid, X, values)


def twisted_subtraction(w, wbar):
    """phi = w - wbar on the shared psi grid."""
    _check_pair(w, wbar)
    return Field(w.grid, w.station, w.values - wbar.values)


def coefficient_A(table, w):
    """``A = -2 ubar_yy / (ubar (u + ubar))`` at every node of ``w``.

    The wall value is the analytic limit ``1 / (2 (X + 1) (1 + r0))`` with
    ``r0 = lim u / ubar``, estimated at the first interior node.
    """
    if np.any(w.values < 0):
        raise ValueError("w must be non-negative")
    X = w.station
    eta = inverse_f(table, w.nodes / np.sqrt(X + 1.0))
    _, fp, _, fppp = eval_f(table, eta)
    u = np.sqrt(w.values)
    A = np.empty_like(u)
    denom = (X + 1.0) * fp[1:] * (fp[1:] + u[1:])
    if np.any(~np.isfinite(1.0 / denom)) or np.any(denom <= 0):
        bad = int(np.flatnonzero(~(denom > 0))[0]) + 1 if np.any(~(denom > 0)) else 1
        raise DegenerateDenominator(f"u + ubar vanishes at psi = {w.nodes[bad]:.3g}")
    A[1:] = -2.0 * fppp[1:] / denom
    r0 = u[1] / fp[1]
    A[0] = 0.5 / ((X + 1.0) * (1.0 + r0))
    return Field(w.grid, X, A)


def phi_equation_residual(phi_prev, phi_next, u, A, dX):
    """Discrete L2 norm of ``(phi_next - phi_prev)/dX - u phi_psipsi + A phi``.

    ``u`` and ``A`` are either single Fields (coefficients frozen at the new
    station) or ``(prev, next)`` pairs, in which case the spatial operator is
    averaged over both stations (time-centred, second order in dX).
    """
    if dX <= 0:
        raise ValueError("dX must be positive")
    if not phi_prev.grid.same_as(phi_next.grid):
        raise GridMismatch("phi fields live on different grids")
    grid = phi_next.grid

    def operator(phi, uf, Af):
        for fld in (uf, Af):
            if not fld.grid.same_as(grid):
                raise GridMismatch("coefficient field on a different grid")
        return uf.values[1:-1] * grid.d2(phi.values) - Af.values[1:-1] * phi.values[1:-1]

    if isinstance(u, Field):
        rhs = operator(phi_next, u, A)
    else:
        rhs = 0.5 * (operator(phi_prev, u[0], A[0]) + operator(phi_next, u[1], A[1]))
    r = (phi_next.values[1:-1] - phi_prev.values[1:-1]) / dX - rhs
    return float(np.sqrt(np.dot(grid.weights[1:-1], r * r)))


def recover_physical(w):
    """Physical heights ``y(psi) = int_0^psi dpsi' / sqrt(w)`` and velocities ``u = sqrt(w)``.

    Each cell is integrated exactly under linear-in-psi w; on the wall cell
    this is the closed form ``2 sqrt(psi / c)`` for ``w = c psi``.
    """
    vals = w.values
    if np.any(vals[1:] <= 0.0):
        bad = int(np.flatnonzero(vals[1:] <= 0.0)[0]) + 1
        raise DegenerateDenominator(f"w vanishes at interior psi = {w.nodes[bad]:.3g}")
    root = np.sqrt(np.maximum(vals, 0.0))
    root[0] = 0.0
    dy = 2.0 * w.grid.spacing / (root[:-1] + root[1:])
    y = np.empty_like(vals)
    y[0] = 0.0
    y[1:] = np.cumsum(dy)
    return y, root
