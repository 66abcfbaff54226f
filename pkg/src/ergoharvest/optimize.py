"""Threshold optimization, constant-rate baselines, and parameter sweeps."""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ContractError, ExtinctionRegimeError
from .model import (ModelParams, YieldSpec, drift_mu, peak_of_x_mu,
                    persistence_margin)

__all__ = [
    "optimal_constant",
    "yield_bounds",
    "golden_max",
    "ThresholdResult",
    "optimal_threshold",
    "optimal_threshold_general",
    "SweepRow",
    "parameter_sweep",
    "parameter_sweep_detailed",
]

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0
_SWEEPABLE = ("mu_bar", "kappa", "sigma", "harvest_cap_M")


def _require_persistence(params: ModelParams) -> float:
    gap = float(drift_mu(params, 0.0)) - 0.5 * params.sigma2
    if gap <= 0.0:
        raise ExtinctionRegimeError(
            "persistence fails (mu(0) - sigma^2/2 <= 0): the long-run yield "
            "of every strategy is zero")
    return gap


def optimal_constant(params: ModelParams) -> tuple[float, float]:
    """Best constant harvesting rate and its long-run yield, (ell*, L*).

    For logistic drift L(ell) = ell*(mu_bar - ell - sigma^2/2)/kappa is a
    downward parabola, maximized at half the persistence gap.  Closed form,
    no quadrature; L* doubles as the lower end of the yield envelope.
    """
    if params.drift_kind != "logistic":
        raise ContractError("optimal_constant requires logistic drift")
    gap = _require_persistence(params)
    return gap / 2.0, gap * gap / (4.0 * params.kappa)


def yield_bounds(params: ModelParams) -> tuple[float, float]:
    """Envelope (lower, upper) for the optimal asymptotic yield.

    lower: the best admissible constant-rate yield (logistic), or 0 for a
    custom drift where no constant-rate closed form is available.  upper:
    the noise-free ceiling max_x x*mu(x), closed form mu_bar^2/4kappa for
    logistic and golden-section otherwise.

    The unconstrained best constant ell* can exceed the cap M (e.g. small-M
    sweeps); constants are admissible only up to M, and L is increasing
    there, so the lower envelope evaluates L at min(ell*, M).
    """
    _require_persistence(params)
    if params.drift_kind == "logistic":
        ell_star, lower = optimal_constant(params)
        if ell_star > params.harvest_cap_M:
            ell = params.harvest_cap_M
            lower = max(0.0, ell * (persistence_margin(params) - ell)
                        / params.kappa)
        upper = params.mu_bar * params.mu_bar / (4.0 * params.kappa)
    else:
        lower = 0.0
        _, upper = peak_of_x_mu(params)
    return lower, upper


def golden_max(f: Callable[[float], float], lo: float, hi: float,
               tol_x: float = 1e-8, max_iter: int = 200) -> tuple[float, float]:
    """Golden-section maximizer on [lo, hi]; unimodality is the caller's
    responsibility.  Returns (argmax, max)."""
    if not lo < hi:
        raise ContractError("golden_max needs lo < hi")
    a, b = lo, hi
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= tol_x:
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)


def _unimodal_witness(values: np.ndarray, tol: float = 1e-10) -> bool:
    """True iff the sequence rises then falls, up to tol-flat plateaus: the
    tolerance-collapsed sign pattern of the differences must be [+1, -1]."""
    d = np.diff(values)
    signs = np.where(d > tol, 1, np.where(d < -tol, -1, 0))
    collapsed: list[int] = []
    for s in signs:
        if s != 0 and (not collapsed or collapsed[-1] != s):
            collapsed.append(int(s))
    return collapsed == [1, -1]


@dataclass(frozen=True)
class ThresholdResult:
    """Refined scan maximum of a threshold-yield curve.

    H_at_x_star dominates every scanned value by construction; the bracket
    is the scan cell pair around the winner that the golden section
    searched; unique_max_witness records whether the whole scan is
    single-peaked (plateau tolerance 1e-10 in yield values).
    """

    x_star: float
    H_at_x_star: float
    bracket: tuple[float, float]
    scan_eta: np.ndarray
    scan_H: np.ndarray
    unique_max_witness: bool
    lower_bound: float
    upper_bound: float

    @property
    def grid_scan(self) -> list[tuple[float, float]]:
        return list(zip(self.scan_eta.tolist(), self.scan_H.tolist()))

    @property
    def within_bounds(self) -> bool:
        return self.lower_bound < self.H_at_x_star < self.upper_bound

    def to_json_dict(self) -> dict:
        return {
            "x_star": self.x_star,
            "H_at_x_star": self.H_at_x_star,
            "bracket": list(self.bracket),
            "unique_max_witness": self.unique_max_witness,
            "lower_bound": self.lower_bound,
            "upper_bound": self.upper_bound,
            "within_bounds": self.within_bounds,
            "scan_points": int(self.scan_eta.size),
        }


def _scan_and_refine(objective: Callable[[float], float],
                     params: ModelParams, scan_n: int,
                     lower: float, upper: float) -> ThresholdResult:
    from ._parallel import map_ordered
    x_ref, _ = peak_of_x_mu(params)
    etas = np.geomspace(1e-3 * x_ref, 10.0 * x_ref, scan_n)
    vals = np.array(map_ordered(objective, etas.tolist()))
    i0 = int(np.argmax(vals))
    if i0 == 0 or i0 == vals.size - 1:
        raise ContractError(
            "scan maximum sits on the boundary of (1e-3, 10) * x_ref; "
            "widen the scan before trusting a refinement")
    bracket = (float(etas[i0 - 1]), float(etas[i0 + 1]))
    x_star, h_star = golden_max(objective, *bracket)
    if vals[i0] > h_star:  # golden midpoint may sit a hair off the peak
        x_star, h_star = float(etas[i0]), float(vals[i0])
    return ThresholdResult(x_star=x_star, H_at_x_star=h_star,
                           bracket=bracket, scan_eta=etas, scan_H=vals,
                           unique_max_witness=_unimodal_witness(vals),
                           lower_bound=lower, upper_bound=upper)


def optimal_threshold(params: ModelParams, scan_n: int = 2000) -> ThresholdResult:
    """Best bang-bang threshold for the identity yield.

    Geometric scan of yield_H over (1e-3, 10) times the drift-revenue peak
    argmax x*mu(x), then golden-section refinement (interval below 1e-8)
    inside the bracket around the best scan point.  The scan is never
    skipped: it is the global-uniqueness evidence, and refinement refuses
    to run when the coarse maximum touches the scan boundary.
    """
    from .density import yield_H
    if scan_n < 16:
        raise ContractError("scan_n must be at least 16")
    lower, upper = yield_bounds(params)
    return _scan_and_refine(lambda e: yield_H(params, e), params, scan_n,
                            lower, upper)


def optimal_threshold_general(params: ModelParams, yspec: YieldSpec,
                              scan_n: int = 600) -> ThresholdResult:
    """Best bang-bang threshold for an arbitrary yield reshaping Phi.

    Same scan-then-refine scheme as optimal_threshold, driven by the
    generic density-ratio quadrature.  The identity-yield envelope does not
    apply and no finite ceiling exists in general (the population spends
    time above the drift-revenue peak, and a convex Phi amplifies exactly
    that region), so the reported envelope is the vacuous (0, inf).
    """
    from .density import threshold_yield
    if scan_n < 16:
        raise ContractError("scan_n must be at least 16")
    _require_persistence(params)
    return _scan_and_refine(lambda e: threshold_yield(params, e, yspec),
                            params, scan_n, 0.0, math.inf)


@dataclass(frozen=True)
class SweepRow:
    param: str
    value: float
    x_star: float
    H_at_x_star: float
    lower_bound: float
    upper_bound: float
    error: Optional[str] = None

    def as_csv_row(self) -> tuple:
        return (self.param, self.value, self.x_star, self.H_at_x_star,
                self.lower_bound, self.upper_bound)


def parameter_sweep_detailed(
        base: ModelParams, name: str, values: Sequence[float],
        scan_n: int = 2000) -> list[tuple[SweepRow, Optional[ThresholdResult]]]:
    """parameter_sweep, but keeping each row's full ThresholdResult (for
    overlay plots of the scan curves); failed rows carry None."""
    if name not in _SWEEPABLE:
        raise ContractError(f"cannot sweep {name!r}; one of {_SWEEPABLE}")
    out: list[tuple[SweepRow, Optional[ThresholdResult]]] = []
    for v in values:
        p = dataclasses.replace(base, **{name: float(v)})
        try:
            res = optimal_threshold(p, scan_n=scan_n)
            row = SweepRow(param=name, value=float(v), x_star=res.x_star,
                           H_at_x_star=res.H_at_x_star,
                           lower_bound=res.lower_bound,
                           upper_bound=res.upper_bound)
            out.append((row, res))
        except (ExtinctionRegimeError, ContractError) as exc:
            out.append((SweepRow(param=name, value=float(v),
                                 x_star=math.nan, H_at_x_star=math.nan,
                                 lower_bound=math.nan, upper_bound=math.nan,
                                 error=str(exc)), None))
    return out


def parameter_sweep(base: ModelParams, name: str, values: Sequence[float],
                    scan_n: int = 2000) -> list[SweepRow]:
    """optimal_threshold across a one-parameter family around base.

    Rows come back in input order.  A failing configuration (e.g. one that
    loses persistence) contributes a row with NaN numerics and the error
    message recorded, and the sweep continues; figure reproduction should
    not die at the first bad parameter value.
    """
    return [row for row, _ in
            parameter_sweep_detailed(base, name, values, scan_n=scan_n)]
