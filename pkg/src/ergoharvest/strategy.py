"""Stationary Markov harvesting strategies v: (0, inf) -> [0, M].

Three representations: constant rate, bang-bang threshold, and tabulated
left-continuous steps.  The value at a bang-bang threshold is fixed to 0
(the closed-left-branch convention); the stationary measure puts no mass on
the single point, so this choice is free, and fixing it keeps evaluation
deterministic.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ContractError, DomainError

__all__ = [
    "Strategy",
    "make_constant",
    "make_bang_bang",
    "make_tabulated",
    "strategy_eval",
    "strategy_cap",
    "tabulated_csv_rows",
]


@dataclass(frozen=True)
class Strategy:
    kind: str  # "constant" | "bang_bang" | "tabulated"
    rate_ell: Optional[float] = None
    threshold_x_star: Optional[float] = None
    cap_M: Optional[float] = None
    grid: Optional[np.ndarray] = None
    values: Optional[np.ndarray] = None
    tie_rule: str = "zero_at_threshold"

    def descriptor(self) -> str:
        """Deterministic identifier used to tie densities to their strategy."""
        if self.kind == "constant":
            return f"constant(rate={self.rate_ell!r})"
        if self.kind == "bang_bang":
            return (f"bang_bang(threshold={self.threshold_x_star!r},"
                    f"cap={self.cap_M!r})")
        pts = ";".join(f"{x!r}:{v!r}" for x, v in zip(self.grid, self.values))
        return f"tabulated(cap={self.cap_M!r},steps=[{pts}])"


def make_constant(rate: float) -> Strategy:
    if rate < 0:
        raise ContractError("constant rate must be nonnegative")
    return Strategy(kind="constant", rate_ell=float(rate))


def make_bang_bang(threshold: float, cap: float) -> Strategy:
    """No harvesting at or below the threshold, full-rate cap above it."""
    if not (threshold > 0):
        raise ContractError("threshold must be positive")
    if not (cap > 0):
        raise ContractError("cap must be positive")
    return Strategy(kind="bang_bang", threshold_x_star=float(threshold),
                    cap_M=float(cap))


def make_tabulated(grid, values, cap: float) -> Strategy:
    grid = np.asarray(grid, dtype=float)
    values = np.asarray(values, dtype=float)
    if grid.ndim != 1 or grid.shape != values.shape or grid.size == 0:
        raise ContractError("grid and values must be equal-length 1-d arrays")
    if np.any(np.diff(grid) <= 0):
        raise ContractError("grid must be strictly increasing")
    if not (cap > 0):
        raise ContractError("cap must be positive")
    if np.any(values < 0) or np.any(values > cap):
        raise ContractError("tabulated rates must lie in [0, cap]")
    g = grid.copy()
    v = values.copy()
    g.flags.writeable = False
    v.flags.writeable = False
    return Strategy(kind="tabulated", grid=g, values=v, cap_M=float(cap))


def strategy_eval(s: Strategy, x):
    """Harvest rate v(x) for scalar or array x > 0.

    Tabulated strategies are left-continuous steps: values[i] applies on
    (grid[i], grid[i+1]], the region below grid[0] maps to 0 and the region
    above grid[-1] holds the last value.  A bang-bang strategy is therefore
    exactly the one-node table {(threshold, cap)}.
    """
    arr = np.asarray(x, dtype=float)
    if np.any(arr <= 0):
        raise DomainError("strategies are defined for x > 0 only")
    scalar = np.ndim(x) == 0
    if s.kind == "constant":
        out = np.full_like(arr, s.rate_ell, dtype=float)
    elif s.kind == "bang_bang":
        out = np.where(arr > s.threshold_x_star, s.cap_M, 0.0)
    else:
        idx = np.searchsorted(s.grid, arr, side="left")
        padded = np.concatenate(([0.0], s.values))
        out = padded[idx]
    return float(out) if scalar else out


def strategy_cap(s: Strategy, params_cap: float) -> float:
    """Effective upper bound on the strategy's rates."""
    if s.kind == "constant":
        return max(s.rate_ell, 0.0)
    return s.cap_M if s.cap_M is not None else params_cap


def tabulated_csv_rows(s: Strategy) -> list[tuple[float, float]]:
    """Two-column (x, rate) serialization of a tabulated strategy."""
    if s.kind != "tabulated":
        raise ContractError("only tabulated strategies serialize to CSV")
    return [(float(x), float(v)) for x, v in zip(s.grid, s.values)]
