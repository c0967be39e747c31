"""Implicit marching of ``w_X = sqrt(w) w_psipsi`` on a wall-clustered psi grid.

Each step solves a tridiagonal system with the diffusion coefficient
``sqrt(w)`` lagged and refreshed by Picard sweeps.  The default scheme is
variable-step BDF2 (the first step is implicit Euler); plain implicit Euler is
available with ``scheme="euler"``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.linalg import LinAlgError, solve_banded

from .errors import LinearSolveFailure, MaximumPrincipleViolation, OutOfDomain
from .vonmises import Field, Grid

CLIP_TOL = 1e-10
MAX_STEP_RATIO_CAP = 0.1


@dataclass(frozen=True)
class MarchConfig:
    X_end: float = 1e4
    n_nodes: int = 4096
    psi_max: Optional[float] = None  # None: 10 sqrt(X_end + 1)
    stretch: float = 2.0
    dX0: float = 1e-3
    step_growth: float = 1.05
    max_step_ratio: float = 0.0025  # dX <= ratio * (X + 1)
    picard_iters: int = 3
    clip_floor: float = 1e-14
    scheme: str = "bdf2"
    reports_per_doubling: int = 4

    def __post_init__(self):
        if self.X_end <= 0:
            raise ValueError("X_end must be positive")
        if self.psi_max is None:
            object.__setattr__(self, "psi_max", 10.0 * np.sqrt(self.X_end + 1.0))
        if self.psi_max < 10.0 * np.sqrt(self.X_end + 1.0) * (1 - 1e-12):
            raise ValueError("psi_max must be >= 10 sqrt(X_end + 1)")
        if self.n_nodes < 256:
            raise ValueError("n_nodes must be >= 256")
        if self.picard_iters < 2:
            raise ValueError("picard_iters must be >= 2")
        if not 0.0 <= self.clip_floor <= 1e-14:
            raise ValueError("clip_floor must lie in [0, 1e-14]")
        if self.dX0 <= 0 or self.step_growth < 1.0:
            raise ValueError("need dX0 > 0 and step_growth >= 1")
        if not 0.0 < self.max_step_ratio <= MAX_STEP_RATIO_CAP:
            raise ValueError(f"max_step_ratio must lie in (0, {MAX_STEP_RATIO_CAP}]")
        if self.scheme not in ("bdf2", "euler"):
            raise ValueError("scheme must be 'bdf2' or 'euler'")
        if self.stretch < 1.0:
            raise ValueError("stretch must be >= 1")

    def refined(self):
        """Halve the grid spacing and every step-size parameter."""
        return replace(self, n_nodes=2 * self.n_nodes, dX0=0.5 * self.dX0,
                       step_growth=float(np.sqrt(self.step_growth)),
                       max_step_ratio=0.5 * self.max_step_ratio)


def make_grid(config):
    return Grid.stretched(config.psi_max, config.n_nodes, config.stretch)


@dataclass(frozen=True)
class MarchState:
    X: float
    w: Field
    steps_taken: int = 0
    w_prev: Optional[Field] = None
    dX_prev: float = 0.0
    ceiling: float = 1.0
    far_value: float = 1.0
    clip_max: float = 0.0

    @classmethod
    def initial(cls, w0):
        vals = np.array(w0.values)
        vals[0] = 0.0
        w = w0.with_values(vals)
        return cls(X=w0.station, w=w, ceiling=max(1.0, float(vals.max())),
                   far_value=float(vals[-1]))


def _banded_matrix(grid, coeff, dX, c0):
    lo, di, up = grid.d2_coeffs
    m = grid.size - 2
    ab = np.zeros((3, m))
    ab[0, 1:] = -dX * coeff[:-1] * up[:-1]
    ab[1, :] = c0 - dX * coeff * di
    ab[2, :-1] = -dX * coeff[1:] * lo[1:]
    return ab


def step(state, dX, config):
    """Advance one station; BDF2 when history is available, implicit Euler otherwise."""
    if dX <= 0:
        raise ValueError("dX must be positive")
    w = state.w.values
    grid = state.w.grid
    far = state.far_value
    use_bdf2 = config.scheme == "bdf2" and state.w_prev is not None
    if use_bdf2:
        omega = dX / state.dX_prev
        wp = state.w_prev.values
        c0 = (1.0 + 2.0 * omega) / (1.0 + omega)
        rhs = (1.0 + omega) * w[1:-1] - omega**2 / (1.0 + omega) * wp[1:-1]
        lag = np.clip(w + omega * (w - wp), 0.0, None)
    else:
        c0 = 1.0
        rhs = w[1:-1].copy()
        lag = w.copy()

    up_last = grid.d2_coeffs[2][-1]
    new = np.empty_like(w)
    new[0] = 0.0
    new[-1] = far
    for _ in range(config.picard_iters):
        coeff = np.sqrt(np.maximum(lag[1:-1], config.clip_floor))
        ab = _banded_matrix(grid, coeff, dX, c0)
        b = rhs.copy()
        b[-1] += dX * coeff[-1] * up_last * far
        try:
            sol = solve_banded((1, 1), ab, b, check_finite=False)
        except (LinAlgError, ValueError) as exc:
            raise LinearSolveFailure(f"tridiagonal solve failed at X = {state.X:.6g}: {exc}")
        if not np.all(np.isfinite(sol)):
            raise LinearSolveFailure(f"non-finite solution at X = {state.X:.6g}")
        new[1:-1] = sol
        lag = new.copy()

    under = float(max(0.0, -new.min()))
    over = float(max(0.0, new.max() - state.ceiling))
    clip = max(under, over)
    if clip > CLIP_TOL:
        raise MaximumPrincipleViolation(
            f"clipping of {clip:.3e} at X = {state.X + dX:.6g}; reduce the step size")
    np.clip(new, 0.0, state.ceiling, out=new)
    X_new = state.X + dX
    return MarchState(X=X_new, w=Field(grid, X_new, new), steps_taken=state.steps_taken + 1,
                      w_prev=state.w, dX_prev=dX, ceiling=state.ceiling, far_value=far,
                      clip_max=max(state.clip_max, clip))


def report_stations(config):
    """Stations ``X = 2**(j/k) - 1`` up to X_end (k = reports_per_doubling), plus X_end."""
    k = config.reports_per_doubling
    jmax = int(np.floor(k * np.log2(config.X_end + 1.0) + 1e-9))
    xs = [2.0 ** (j / k) - 1.0 for j in range(1, jmax + 1)]
    xs = [x for x in xs if x < config.X_end * (1 - 1e-12)]
    return np.array(xs + [float(config.X_end)])


@dataclass
class RunResult:
    final: MarchState
    snapshots: list = field(default_factory=list)

    @property
    def stations(self):
        return np.array([s.station for s in self.snapshots])

    def at(self, X):
        for snap in self.snapshots:
            if abs(snap.station - X) <= 1e-9 * max(1.0, X):
                return snap
        raise KeyError(f"no snapshot at X = {X}")


def run(initial, config, hooks: Sequence[Callable] = ()):
    """March from X = 0 to ``config.X_end``.

    ``initial`` is an InitialProfile or a Field at X = 0 on ``make_grid(config)``.
    Each hook is called as ``hook(state)`` at every report station (and at X = 0).
    """
    grid = make_grid(config)
    w0 = initial if isinstance(initial, Field) else initial.w0_field(grid)
    if not w0.grid.same_as(grid):
        w0 = Field(grid, w0.station, PchipInterpolator(w0.nodes, w0.values)(grid.nodes))
    state = MarchState.initial(w0)
    result = RunResult(final=state, snapshots=[state.w])
    for hook in hooks:
        hook(state)

    nominal = config.dX0
    last = None
    for target in report_stations(config):
        while state.X < target * (1 - 1e-14) - 1e-300:
            nominal = min(nominal, config.max_step_ratio * (state.X + 1.0))
            dX = nominal
            if last is not None:
                dX = min(dX, 2.0 * last)
            remaining = target - state.X
            if remaining <= dX * (1 + 1e-9):
                dX = remaining
            elif remaining < 2.0 * dX:
                dX = 0.5 * remaining
            state = step(state, dX, config)
            last = dX
            nominal *= config.step_growth
        state = replace(state, X=float(target), w=Field(grid, target, state.w.values))
        result.snapshots.append(state.w)
        for hook in hooks:
            hook(state)
    result.final = state
    return result


def scale_solution(state, lam, grid=None):
    """Rescaled solution ``w_r(X / lam**2, psi) = w(X, lam psi)`` sampled on ``grid``.

    ``grid`` defaults to the stored grid; ``lam * grid.length`` must not exceed
    the stored domain.
    """
    if lam <= 0:
        raise ValueError("lambda must be positive")
    w = state.w if isinstance(state, MarchState) else state
    target = grid if grid is not None else w.grid
    if lam * target.length > w.grid.length * (1 + 1e-12):
        raise OutOfDomain(f"lambda * psi_max = {lam * target.length:.6g} exceeds "
                          f"stored domain {w.grid.length:.6g}")
    if lam == 1.0 and target.same_as(w.grid):
        values = w.values
    else:
        values = PchipInterpolator(w.nodes, w.values)(np.minimum(lam * target.nodes, w.grid.length))
    out = Field(target, w.station / lam**2, values)
    if isinstance(state, MarchState):
        return MarchState(X=out.station, w=out, ceiling=state.ceiling,
                          far_value=float(values[-1]))
    return out
