"""Banach-scale bookkeeping for the correlation hierarchy.

Weighted sup-norms over truncated correlation states, the guaranteed
existence horizon of the hierarchy dynamics, and the admissibility check
for the initial space.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import (
    InvalidIntervalError,
    InvalidParameterError,
    NoInteriorMaximumError,
)


@dataclass(frozen=True)
class NormedHierarchyState:
    """Sup-norms q_n of the stored correlation orders (truncation N <= 2)."""

    orders: tuple  # ((n, q_n), ...)
    k0: float = 1.0

    def __post_init__(self):
        orders = tuple((int(n), float(q)) for n, q in self.orders)
        for n, q in orders:
            if n < 0 or q < 0:
                raise InvalidParameterError("orders must have n >= 0 and q_n >= 0")
        if not any(n == 0 for n, _ in orders):
            orders = ((0, abs(self.k0)),) + orders
        object.__setattr__(self, "orders", orders)


def knorm_alpha(state: NormedHierarchyState, alpha: float) -> float:
    """max_n e^{alpha n} q_n over the stored orders.

    A lower bound on the full-hierarchy norm since only finitely many
    orders are kept; nonincreasing in alpha whenever some q_n > 0, n >= 1.
    """
    return max(np.exp(alpha * n) * q for n, q in state.orders)


def horizon_T(alpha_star: float, alpha_up: float, aplus_mass: float, aminus_mass: float) -> float:
    """Guaranteed existence horizon
    (alpha_up - alpha_star) / (<a+> + <a-> e^{-alpha_star}).
    """
    if alpha_up <= alpha_star:
        raise InvalidIntervalError(
            f"need alpha_up > alpha_star, got {alpha_up} <= {alpha_star}"
        )
    if aplus_mass < 0 or aminus_mass < 0:
        raise InvalidParameterError("kernel masses must be nonnegative")
    denom = aplus_mass + aminus_mass * np.exp(-alpha_star)
    if denom == 0:
        raise InvalidParameterError("both kernel masses vanish")
    return float((alpha_up - alpha_star) / denom)


def optimize_alpha(alpha_up: float, aplus_mass: float, aminus_mass: float) -> tuple:
    """(alpha_star, T_max) maximizing the horizon over alpha_star < alpha_up.

    The maximum is unique; it is located by a coarse scan followed by
    bounded scalar maximization on the bracketing interval.
    """
    if aminus_mass <= 0:
        raise NoInteriorMaximumError(
            "horizon has no interior maximum when the competition mass vanishes"
        )
    if aplus_mass < 0:
        raise InvalidParameterError("dispersal mass must be nonnegative")

    def neg_T(a):
        return -(alpha_up - a) / (aplus_mass + aminus_mass * np.exp(-a))

    # coarse scan: the maximizer sits where e^{-a} trades off against the gap
    lo = alpha_up - 50.0
    scan = np.linspace(lo, alpha_up - 1e-9, 2001)
    best = scan[np.argmin([neg_T(a) for a in scan])]
    span = (scan[1] - scan[0]) * 2
    res = minimize_scalar(
        neg_T,
        bounds=(max(lo, best - span), min(alpha_up - 1e-12, best + span)),
        method="bounded",
        options={"xatol": 1e-12},
    )
    return float(res.x), float(-res.fun)


def check_initial_space(theta: float, alpha_up: float) -> bool:
    """Admissibility of the initial space: theta * e^{alpha_up} < 1 (strict)."""
    if theta <= 0:
        raise InvalidParameterError("theta must be positive")
    return bool(theta * np.exp(alpha_up) < 1.0)
