"""Truncated correlation dynamics for orders n = 1, 2.

The renormalized generator splits into an interaction-free part V and an
interaction part scaled by epsilon (V + eps*B):

  dk1/dt (x)   = -m k1(x) - int a-(x-y) k2(x,y) dy + (a+ * k1)(x)

  dk2/dt (x,y) = -2m k2(x,y)
                 - int [a-(z-x) + a-(z-y)] k3(x,y,z) dz
                 + int [a+(x-w) k2(w,y) + a+(y-w) k2(x,w)] dw
                 + eps * [ -2 a-(x-y) k2(x,y) + a+(x-y)(k1(x) + k1(y)) ]

with k3 supplied by a pluggable closure.  At eps = 0 the system is the
truncated Vlasov hierarchy: products k2 = k1 (x) k1 stay products and k1
obeys the kinetic equation.  Pair functions are gridded, so this module
is restricted to 1-d tori.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ClosureSingularityError, InvalidParameterError
from .grid import Grid, require_same_grid
from .kinetic import Field, _clip_negatives, step_times
from .model import ModelParams

CLOSURES = ("mean-field", "kirkwood")
KIRKWOOD_FLOOR_FACTOR = 1e-8


@dataclass
class Field2:
    """Symmetric two-point function on the grid (1-d only)."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        if self.grid.dim != 1:
            raise InvalidParameterError("pair functions are gridded for 1-d tori only")
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.cells, self.grid.cells):
            raise InvalidParameterError(f"pair-function shape {v.shape} does not match grid")
        self.values = v

    @classmethod
    def product(cls, k1: Field) -> "Field2":
        return cls(k1.grid, np.outer(k1.values, k1.values))

    def symmetry_defect(self) -> float:
        return float(np.max(np.abs(self.values - self.values.T)))

    def copy(self) -> "Field2":
        return Field2(self.grid, self.values.copy())


@dataclass
class TruncatedState:
    """(k0, k1, k2) with the interaction scaling epsilon; k0 is conserved."""

    k1: Field
    k2: Field2
    epsilon: float
    k0: float = 1.0

    def __post_init__(self):
        require_same_grid(self.k1.grid, self.k2.grid)

    @classmethod
    def poisson_like(cls, k1: Field, epsilon: float) -> "TruncatedState":
        return cls(k1, Field2.product(k1), epsilon)

    @property
    def grid(self) -> Grid:
        return self.k1.grid

    @property
    def witness_C(self) -> float:
        """Grid witness for the sub-Poissonian bound at orders <= 2."""
        return max(self.k1.max, float(np.sqrt(max(self.k2.values.max(), 0.0))))


# -- closures ------------------------------------------------------------


def closure(rule: str, state: TruncatedState):
    """Return a zero-argument evaluator producing the full k3 tensor
    k3[i, j, z] = k3(x_i, x_j, x_z) for the current (k1, k2).

    mean-field: k2 k1 symmetrized over which point factors out.
    kirkwood:   k2(x,y) k2(y,z) k2(x,z) / (k1(x) k1(y) k1(z)), guarded by
                a density floor below which it errors out.
    """
    if rule not in CLOSURES:
        raise InvalidParameterError(f"unknown closure {rule!r}; choose from {CLOSURES}")
    k1 = state.k1.values
    k2 = state.k2.values

    if rule == "mean-field":

        def evaluate():
            return (
                k2[:, :, None] * k1[None, None, :]
                + k2[:, None, :] * k1[None, :, None]
                + k2[None, :, :] * k1[:, None, None]
            ) / 3.0

    else:

        def evaluate():
            floor = KIRKWOOD_FLOOR_FACTOR * max(float(k1.max()), 0.0)
            if float(k1.min()) < floor or floor == 0.0:
                raise ClosureSingularityError(
                    f"kirkwood closure needs k1 >= {floor:.3g} everywhere"
                )
            return (
                k2[:, :, None] * k2[:, None, :] * k2[None, :, :]
                / (k1[:, None, None] * k1[None, :, None] * k1[None, None, :])
            )

    return evaluate


# -- right-hand sides ----------------------------------------------------


def rhs_k1(state: TruncatedState, params: ModelParams) -> Field:
    """First truncated equation; with product k2 it reduces to the kinetic
    right-hand side for any epsilon (the interaction part vanishes at
    order one).
    """
    require_same_grid(state.grid, params.grid)
    k1 = state.k1.values
    k2 = state.k2.values
    cm = params.competition.circulant()
    cp = params.dispersal.circulant()
    pair_term = np.einsum("ij,ij->i", cm, k2)
    return Field(state.grid, -params.mortality * k1 - pair_term + cp @ k1)


def rhs_k2(state: TruncatedState, closure_rule: str, params: ModelParams) -> Field2:
    """Second truncated equation with the chosen closure for k3.

    The output is exactly symmetric in floating point: every asymmetric
    intermediate enters as (T + T.T).
    """
    require_same_grid(state.grid, params.grid)
    if state.k2.symmetry_defect() > 0:
        raise InvalidParameterError("k2 must be symmetric")
    k1 = state.k1.values
    k2 = state.k2.values
    cm = params.competition.circulant()
    cp = params.dispersal.circulant()
    am = params.competition.offset_matrix()
    ap = params.dispersal.offset_matrix()

    k3 = closure(closure_rule, state)()
    # int a-(z - x_i) k3(x_i, x_j, z) dz
    t1 = np.einsum("iz,ijz->ij", cm, k3)
    # int a+(x_i - w) k2(w, x_j) dw
    s1 = cp @ k2

    vpart = -2.0 * params.mortality * k2 - (t1 + t1.T) + (s1 + s1.T)
    bpart = -2.0 * am * k2 + ap * (k1[:, None] + k1[None, :])
    return Field2(state.grid, vpart + state.epsilon * bpart)


# -- time stepping -------------------------------------------------------


def hierarchy_stability_dt(state: TruncatedState, params: ModelParams) -> float:
    rho_scale = state.witness_C
    denom = (
        params.mortality
        + params.competition.mass * rho_scale
        + params.dispersal.mass
    )
    return 0.1 / denom if denom > 0 else np.inf


def solve_hierarchy(
    state0: TruncatedState,
    closure_rule: str,
    params: ModelParams,
    horizon: float,
    dt: float,
    snapshot_times,
) -> tuple:
    """RK4 on the coupled (k1, k2) system.

    k2 is re-symmetrized after every step and the pre-symmetrization
    drift is logged.  Returns (snapshots, diagnostics) where snapshots is
    one TruncatedState per requested time and diagnostics records the
    maximal symmetry drift per step.
    """
    require_same_grid(state0.grid, params.grid)
    times = step_times(horizon, dt, snapshot_times)
    guard = hierarchy_stability_dt(state0, params)
    if dt > guard * (1 + 1e-9):
        raise InvalidParameterError(f"dt={dt:.3g} exceeds the stability guard {guard:.3g}")
    eps = state0.epsilon
    grid = state0.grid

    def rhs(v1, v2):
        st = TruncatedState(Field(grid, v1), Field2(grid, v2), eps)
        return rhs_k1(st, params).values, rhs_k2(st, closure_rule, params).values

    v1 = state0.k1.values.copy()
    v2 = state0.k2.values.copy()
    scale1 = max(state0.k1.max, 1e-300)
    scale2 = max(float(v2.max()), 1e-300)
    max_drift = 0.0
    snapshots = []
    t = 0.0
    for target in times:
        seg = target - t
        if seg > 1e-12:
            nsteps = max(1, round(seg / dt))
            step = seg / nsteps
            for _ in range(nsteps):
                a1, a2 = rhs(v1, v2)
                b1, b2 = rhs(v1 + 0.5 * step * a1, v2 + 0.5 * step * a2)
                c1, c2 = rhs(v1 + 0.5 * step * b1, v2 + 0.5 * step * b2)
                d1, d2 = rhs(v1 + step * c1, v2 + step * c2)
                v1 = v1 + (step / 6.0) * (a1 + 2 * b1 + 2 * c1 + d1)
                v2 = v2 + (step / 6.0) * (a2 + 2 * b2 + 2 * c2 + d2)
                t += step
                drift = float(np.max(np.abs(v2 - v2.T)))
                max_drift = max(max_drift, drift)
                v2 = 0.5 * (v2 + v2.T)
                v1 = _clip_negatives(v1, t, scale1)
                v2 = _clip_negatives(v2, t, scale2)
                scale1 = max(scale1, float(v1.max()))
                scale2 = max(scale2, float(v2.max()))
            t = target
        snapshots.append(
            TruncatedState(Field(grid, v1.copy()), Field2(grid, v2.copy()), eps)
        )
    return snapshots, {"max_symmetry_drift": max_drift, "scale_k2": scale2}
