"""Similarity frame and the linearized operator about the Blasius profile.

With ``s = log(X + 1)`` and ``Y = psi / sqrt(X + 1)`` the Blasius solution is the
stationary profile ``Wbar(Y) = f'(f^{-1}(Y))**2``.  Linearizing about it gives

    L = -(Y/2) d_Y - Wbar'' / (2 sqrt(Wbar)) - sqrt(Wbar) d_YY,

for which ``Y Wbar'`` is an eigenfunction with eigenvalue 1.  In terms of
``eta = f^{-1}(Y)``: ``Wbar' = 2 f''`` and ``-Wbar'' / (2 sqrt(Wbar)) = f f'' / (2 f'**2)``,
which tends to 1/4 at the wall.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.interpolate import PchipInterpolator
from scipy.linalg import LinAlgError, solve_banded
from scipy.sparse.linalg import eigs

from .blasius import eval_f, inverse_f
from .errors import NonConvergence, OutOfDomain, ShiftSingular
from .vonmises import Field, Grid

Y_MAX = 10.0
DEFAULT_NODES = 4096


def default_Y_grid(n=DEFAULT_NODES, Y_max=Y_MAX):
    return Grid.stretched(Y_max, n, 2.0)


@dataclass(frozen=True)
class SimilarityFrame:
    Y_grid: Grid
    s: float
    W: Field


def to_similarity(w, Y_grid=None):
    """Resample ``w(X, .)`` at ``psi = sqrt(X + 1) Y``."""
    Y_grid = Y_grid or default_Y_grid()
    X = w.station
    if X < 0:
        raise ValueError("station must be non-negative")
    scale = np.sqrt(X + 1.0)
    if scale * Y_grid.length > w.grid.length * (1 + 1e-12):
        raise OutOfDomain(f"sqrt(X+1) Y_max = {scale * Y_grid.length:.6g} exceeds "
                          f"psi_max = {w.grid.length:.6g}")
    psi = np.minimum(scale * Y_grid.nodes, w.grid.length)
    values = PchipInterpolator(w.nodes, w.values)(psi)
    return SimilarityFrame(Y_grid, float(np.log(X + 1.0)), Field(Y_grid, X, values))


def _blasius_at_Y(table, Y):
    return eval_f(table, inverse_f(table, Y))


def wbar_profile(table, Y_grid):
    """``(Wbar, residual)``: the similarity profile and the weighted L2 norm of the
    discrete residual of ``(Y/2) Wbar' + sqrt(Wbar) Wbar'' = 0`` at interior nodes."""
    fp = _blasius_at_Y(table, Y_grid.nodes)[1]
    W = fp**2
    W[0] = 0.0
    lo, di, up = Y_grid.d1_coeffs
    d1 = lo * W[:-2] + di * W[1:-1] + up * W[2:]
    r = 0.5 * Y_grid.nodes[1:-1] * d1 + np.sqrt(W[1:-1]) * Y_grid.d2(W)
    res = float(np.sqrt(np.dot(Y_grid.weights[1:-1], r * r)))
    return Field(Y_grid, 0.0, W), res


def potential(table, Y):
    """``-Wbar''/(2 sqrt(Wbar)) = f f'' / (2 f'**2)`` with the wall limit 1/4."""
    Y = np.asarray(Y, dtype=float)
    f, fp, fpp, _ = _blasius_at_Y(table, Y)
    out = np.full_like(Y, 0.25)
    m = Y > 0
    out[m] = 0.5 * f[m] * fpp[m] / fp[m] ** 2
    return out


def eigenfunction(table, Y):
    """``Y Wbar'(Y) = 2 f f''`` at ``eta = f^{-1}(Y)``."""
    f, _, fpp, _ = _blasius_at_Y(table, np.asarray(Y, dtype=float))
    return 2.0 * f * fpp


@dataclass(frozen=True)
class OperatorMatrix:
    """Tridiagonal L in ``solve_banded`` layout with identity rows at both ends."""

    ab: np.ndarray
    grid: Grid

    @property
    def bandwidth(self):
        return 2

    @property
    def size(self):
        return self.grid.size

    def matvec(self, v):
        v = np.asarray(v, dtype=float)
        out = self.ab[1] * v
        out[:-1] += self.ab[0, 1:] * v[1:]
        out[1:] += self.ab[2, :-1] * v[:-1]
        return out

    def interior(self):
        """Banded layout of the interior block (Dirichlet-zero eigenproblem)."""
        return np.ascontiguousarray(self.ab[:, 1:-1])

    def interior_sparse(self):
        ab = self.interior()
        return sp.diags([ab[2, :-1], ab[1], ab[0, 1:]], [-1, 0, 1], format="csc")


def assemble_L(wbar, table, grid=None):
    """Second-order nonuniform discretization of L on ``grid`` (defaults to wbar.grid)."""
    grid = grid or wbar.grid
    if not grid.same_as(wbar.grid):
        raise ValueError("wbar must live on the operator grid")
    Y = grid.nodes[1:-1]
    root = np.sqrt(wbar.values[1:-1])
    l1, d1, u1 = grid.d1_coeffs
    l2, d2, u2 = grid.d2_coeffs
    V = potential(table, Y)
    ab = np.zeros((3, grid.size))
    ab[1, 0] = ab[1, -1] = 1.0
    ab[1, 1:-1] = -0.5 * Y * d1 - root * d2 + V
    ab[0, 2:] = -0.5 * Y * u1 - root * u2
    ab[2, :-2] = -0.5 * Y * l1 - root * l2
    return OperatorMatrix(ab, grid)


def eigenrelation_residual(op, table):
    """``||L(Y Wbar') - Y Wbar'|| / ||Y Wbar'||`` over interior nodes (weighted L2)."""
    phi = eigenfunction(table, op.grid.nodes)
    r = (op.matvec(phi) - phi)[1:-1]
    w = op.grid.weights[1:-1]
    return float(np.sqrt(np.dot(w, r * r) / np.dot(w, phi[1:-1] ** 2)))


@dataclass(frozen=True)
class Eigenpair:
    eigenvalue: float
    vector: np.ndarray  # full grid, zero at both ends, max-normalized
    residual: float
    iterations: int


def _inverse_iteration(ab_int, shift, tol, max_iter):
    m = ab_int.shape[1]
    shifted = ab_int.copy()
    shifted[1] -= shift

    def apply(v):
        out = ab_int[1] * v
        out[:-1] += ab_int[0, 1:] * v[1:]
        out[1:] += ab_int[2, :-1] * v[:-1]
        return out

    v = np.ones(m) / np.sqrt(m)
    lam, res = shift, np.inf
    for it in range(1, max_iter + 1):
        try:
            x = solve_banded((1, 1), shifted, v, check_finite=False)
        except (LinAlgError, ValueError) as exc:
            raise ShiftSingular(f"shifted solve failed at shift {shift}: {exc}")
        if not np.all(np.isfinite(x)) or not np.any(x):
            raise ShiftSingular(f"shifted solve broke down at shift {shift}")
        v = x / np.linalg.norm(x)
        Av = apply(v)
        lam = float(np.dot(v, Av))
        res = float(np.linalg.norm(Av - lam * v))
        if res <= tol:
            return lam, v, res, it
    raise NonConvergence(f"inverse iteration residual {res:.3e} > {tol} after {max_iter} iterations")


def eigen_principal(op, shift=1.0, tol=1e-8, max_iter=200):
    """Shifted inverse iteration on the interior block of L.

    A singular shifted solve is retried once with the shift nudged by 1e-6.
    """
    ab_int = op.interior()
    try:
        lam, v, res, it = _inverse_iteration(ab_int, shift, tol, max_iter)
    except ShiftSingular:
        lam, v, res, it = _inverse_iteration(ab_int, shift * (1 + 1e-6) + 1e-9, tol, max_iter)
    v = v / v[np.argmax(np.abs(v))]
    full = np.zeros(op.size)
    full[1:-1] = v
    return Eigenpair(lam, full, res, it)


def eigenvalues_near(op, sigma=0.25, k=6):
    """The ``k`` eigenvalues of the interior block closest to ``sigma`` (shift-invert)."""
    vals = eigs(op.interior_sparse(), k=k, sigma=sigma, return_eigenvectors=False)
    return np.sort_complex(vals)


def export_eigenpair(pair, op, table, csv_path, json_path):
    """Write ``Y,eigvec,analytic`` (both max-normalized) and a JSON summary."""
    Y = op.grid.nodes
    analytic = eigenfunction(table, Y)
    analytic = analytic / analytic.max()
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["Y", "eigvec", "analytic"])
        for row in zip(Y, pair.vector, analytic):
            writer.writerow([f"{v:.10g}" for v in row])
    with open(json_path, "w") as fh:
        json.dump({"eigenvalue": pair.eigenvalue, "residual": pair.residual,
                   "grid_size": int(op.size)}, fh, indent=2)
