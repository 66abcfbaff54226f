"""Verification of the bang-bang optimality structure via the HJB equation.

The marginal value phi = V*_x of the ergodic problem obeys a first-order
ODE whose right-hand side switches form when phi crosses a barrier (1 for
the identity yield, Phi(xM)/(xM) for convex Phi).  Optimality of a single
threshold is equivalent to phi crossing that barrier exactly once, from
above, between the roots of g(x) = rho - x mu(x).  This module does not
solve for the optimal yield: rho comes from the density route, and the ODE
acts as an independent verifier of the crossing structure.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .errors import ContractError, DomainError
from .model import ModelParams, YieldSpec, drift_mu, peak_of_x_mu, phi_prime_inverse
from .strategy import Strategy, make_tabulated

__all__ = [
    "HjbProfile",
    "CrossingReport",
    "g_roots",
    "barrier_crossing_roots",
    "phi_rhs",
    "integrate_phi",
    "crossing_report",
    "hjb_residual",
    "concave_control",
    "convex_G",
    "convex_G_unique_min",
    "convex_control_rule",
    "barrier_functions",
]

_PHI_GUARD = 1e12
_LOCATE_TOL = 1e-10
_MAX_CROSSINGS = 16

FROM_ABOVE = "FromAbove"
FROM_BELOW = "FromBelow"


# ---------------------------------------------------------------------------
# barrier and crossing function g

def barrier_functions(params: ModelParams, yspec: YieldSpec):
    """(barrier, barrier_slope, kind) for the phi-comparison.

    Identity yield compares against the constant 1; convex yields against
    the average-yield ratio Phi(xM)/(xM), whose monotone increase is what
    makes the single-crossing argument go through.  Concave yields have no
    barrier formulation here.
    """
    M = params.harvest_cap_M
    if yspec.kind == "identity":
        def b(x):
            x = np.asarray(x, dtype=float)
            out = np.ones_like(x)
            return float(out) if out.ndim == 0 else out

        def bp(x):
            x = np.asarray(x, dtype=float)
            out = np.zeros_like(x)
            return float(out) if out.ndim == 0 else out

        return b, bp, "One"
    if yspec.kind == "convex":
        if yspec.phi_prime is None:
            raise ContractError("convex barrier needs phi_prime")
        phi, phip = yspec.phi, yspec.phi_prime

        def b(x):
            z = np.asarray(x, dtype=float) * M
            out = phi(z) / z
            return float(out) if np.ndim(out) == 0 else out

        def bp(x):
            z = np.asarray(x, dtype=float) * M
            out = M * (phip(z) * z - phi(z)) / (z * z)
            return float(out) if np.ndim(out) == 0 else out

        return b, bp, "PhiRatio"
    raise ContractError(
        f"no barrier formulation for yield kind {yspec.kind!r}; the "
        "crossing verifier handles identity and convex yields only")


def g_roots(params: ModelParams, rho: float):
    """Roots of g(x) = rho - x mu(x).

    None when min g > 0 (rho exceeds the attainable band), the single
    tangency point when |g(x_peak)| <= 1e-12, else the two bisection roots
    bracketing the peak of x mu(x), each localized to 1e-10 in x.
    """
    def g(x):
        return rho - x * float(drift_mu(params, x))

    x_peak, _ = peak_of_x_mu(params)
    g_min = g(x_peak)
    if abs(g_min) <= 1e-12:
        return (x_peak,)
    if g_min > 0.0:
        return None

    def bisect(lo, hi):
        glo = g(lo)
        while hi - lo > _LOCATE_TOL:
            mid = 0.5 * (lo + hi)
            if (g(mid) > 0.0) == (glo > 0.0):
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    lo = x_peak
    while g(lo) <= 0.0:
        lo *= 0.5
        if lo < 1e-300:
            raise ContractError("g has no sign change left of the peak")
    hi = x_peak
    while g(hi) <= 0.0:
        hi *= 2.0
        if hi > 1e300:
            raise ContractError("g has no sign change right of the peak")
    return bisect(lo, x_peak), bisect(x_peak, hi)


def barrier_crossing_roots(params: ModelParams, yspec: YieldSpec,
                           rho: float):
    """Roots of the companion function whose negativity between them forces
    barrier crossings from above.

    Identity yield: g(x) = rho - x mu(x).  Convex yield: the quantity
    sigma^2 G(x) / (2M) + rho built on convex_G, which reduces to g exactly
    when Phi is the identity.  Same tri-state convention as g_roots.
    """
    if yspec.kind == "identity":
        return g_roots(params, rho)
    if yspec.kind != "convex":
        raise ContractError("crossing roots exist for identity or convex "
                            "yields only")
    M = params.harvest_cap_M
    half_s2_over_M = 0.5 * params.sigma2 / M

    def d_fn(x):
        return half_s2_over_M * float(convex_G(params, yspec, x)) + rho

    x_ref, _ = peak_of_x_mu(params)
    grid = np.geomspace(1e-4 * x_ref, 40.0 * x_ref, 2048)
    vals = half_s2_over_M * np.asarray(convex_G(params, yspec, grid)) + rho
    i0 = int(np.argmin(vals))
    from .optimize import golden_max
    lo_b = grid[max(i0 - 1, 0)]
    hi_b = grid[min(i0 + 1, grid.size - 1)]
    x_min, neg_min = golden_max(lambda x: -d_fn(x), lo_b, hi_b, tol_x=1e-10)
    d_min = -neg_min
    if abs(d_min) <= 1e-12:
        return (x_min,)
    if d_min > 0.0:
        return None

    def bisect(lo, hi):
        dlo = d_fn(lo)
        while hi - lo > _LOCATE_TOL:
            mid = 0.5 * (lo + hi)
            if (d_fn(mid) > 0.0) == (dlo > 0.0):
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    lo = x_min
    while d_fn(lo) <= 0.0:
        lo *= 0.5
        if lo < 1e-300:
            raise ContractError("companion function has no sign change "
                                "left of its minimum")
    hi = x_min
    while d_fn(hi) <= 0.0:
        hi *= 2.0
        if hi > 1e300:
            raise ContractError("companion function has no sign change "
                                "right of its minimum")
    return bisect(lo, x_min), bisect(x_min, hi)


def phi_rhs(params: ModelParams, rho: float, x: float, phi: float,
            barrier: float) -> float:
    """dphi/dx under the regime selected by comparing phi to the barrier.

    phi > barrier (no harvesting): phi' = 2(rho - x mu phi) / (sigma^2 x^2).
    phi <= barrier (full-rate harvesting): the yield term enters as
    Phi(xM) = barrier * xM, so
    phi' = 2(rho - barrier*xM - x(mu - M) phi) / (sigma^2 x^2).
    The two branches agree when phi equals the barrier, so the right-hand
    side is continuous across the switch.
    """
    if x <= 0.0:
        raise DomainError("phi_rhs needs x > 0")
    mu = float(drift_mu(params, x))
    s2x2 = params.sigma2 * x * x
    if phi > barrier:
        return 2.0 * (rho - x * mu * phi) / s2x2
    M = params.harvest_cap_M
    return 2.0 * (rho - barrier * x * M - x * (mu - M) * phi) / s2x2


# ---------------------------------------------------------------------------
# profile integration

@dataclass(frozen=True)
class HjbProfile:
    """Stitched phi profile with per-point regime labels.

    regime[i] is "NoHarvest" where phi > barrier and "Harvest" otherwise,
    recomputed from the values (labels can never go stale).  crossings are
    the barrier crossings located during integration, anchor included.
    Profiles violating the optimality structure (wrong rho) are valid
    objects here; judging them is crossing_report's job.
    """

    grid: np.ndarray
    phi: np.ndarray
    barrier: np.ndarray
    regime: tuple[str, ...]
    barrier_kind: str
    rho: float
    x_star: float
    crossings: tuple[tuple[float, str], ...]
    truncated_left: Optional[float] = None
    truncated_right: Optional[float] = None
    notes: tuple[str, ...] = ()

    def to_csv_rows(self):
        for x, p, r, b in zip(self.grid.tolist(), self.phi.tolist(),
                              self.regime, self.barrier.tolist()):
            yield (x, p, r, b)


def _sample_points(ts: np.ndarray, per_step: int = 8) -> np.ndarray:
    chunks = [np.linspace(a, b, per_step + 2)[:-1]
              for a, b in zip(ts[:-1], ts[1:])]
    chunks.append(ts[-1:])
    xs = np.concatenate(chunks)
    return np.sort(xs)


def _locate_crossings(diff_fn, xs: np.ndarray, d: np.ndarray, skip_x: float):
    """Sign changes of the sampled diff values, refined by bisection."""
    found = []
    for i in range(xs.size - 1):
        if abs(xs[i] - skip_x) < 1e-12 or abs(xs[i + 1] - skip_x) < 1e-12:
            continue
        a, b = d[i], d[i + 1]
        if a == 0.0 or a * b >= 0.0:
            continue
        lo, hi, dlo = xs[i], xs[i + 1], a
        while hi - lo > _LOCATE_TOL:
            mid = 0.5 * (lo + hi)
            dm = diff_fn(mid)
            if dm == 0.0:
                lo = hi = mid
                break
            if (dm > 0.0) == (dlo > 0.0):
                lo, dlo = mid, dm
            else:
                hi = mid
        direction = FROM_ABOVE if a > 0.0 else FROM_BELOW
        found.append((0.5 * (lo + hi), direction))
        if len(found) >= _MAX_CROSSINGS:
            break
    return found


def integrate_phi(params: ModelParams, yspec: YieldSpec, rho: float,
                  x_star: float, domain: Optional[tuple[float, float]] = None,
                  step_n: int = 800) -> HjbProfile:
    """Integrate phi away from the anchor phi(x_star) = barrier(x_star).

    Adaptive embedded 4(5) stepping leftward and rightward from x_star;
    every barrier crossing is localized by bisection on the dense output to
    1e-10 in x and the stitched profile carries regime labels per point.
    A magnitude guard (|phi| > 1e12, the blow-up of the harvesting branch
    near 0) or solver step underflow truncates the affected side, which is
    recorded rather than raised: the verifier only needs the structure up
    to truncation.

    Default domain: (1e-4 * x_star, x_star + 7.5 sigma^2 / kappa).  The
    right edge is deliberately modest: the harvesting branch has a growing
    mode exp(2 kappa x / sigma^2) that amplifies roundoff, and 7.5 decades
    of e keep that amplification around 1e-6 of scale.  Custom drifts must
    supply the domain explicitly.
    """
    if not (x_star > 0.0) or not np.isfinite(rho) or rho < 0.0:
        raise ContractError("need x_star > 0 and finite rho >= 0")
    if step_n < 16:
        raise ContractError("step_n must be at least 16")
    if domain is None:
        if params.drift_kind != "logistic":
            raise ContractError("custom drift needs an explicit domain")
        domain = (1e-4 * x_star, x_star + 7.5 * params.sigma2 / params.kappa)
    x_lo, x_hi = float(domain[0]), float(domain[1])
    if not (0.0 < x_lo < x_star < x_hi):
        raise ContractError("domain must satisfy 0 < x_lo < x_star < x_hi")

    b, bp, kind = barrier_functions(params, yspec)
    anchor = float(b(x_star))

    def rhs(x, y):
        return [phi_rhs(params, rho, x, y[0], float(b(x)))]

    def guard(x, y):
        return _PHI_GUARD - abs(y[0])

    guard.terminal = True

    def run_side(x_end):
        return solve_ivp(rhs, (x_star, x_end), [anchor], method="RK45",
                         rtol=1e-10, atol=1e-12, dense_output=True,
                         events=[guard],
                         max_step=abs(x_end - x_star) / 64.0)

    left = run_side(x_lo)
    right = run_side(x_hi)

    notes: list[str] = []
    truncated_left = truncated_right = None
    left_end = float(left.t[-1])
    right_end = float(right.t[-1])
    if left_end > x_lo * (1.0 + 1e-12):
        truncated_left = left_end
        why = "magnitude guard" if left.status == 1 else "step underflow"
        notes.append(f"left integration truncated at x={left_end:.6g} ({why})")
    if right_end < x_hi * (1.0 - 1e-12):
        truncated_right = right_end
        why = "magnitude guard" if right.status == 1 else "step underflow"
        notes.append(f"right integration truncated at x={right_end:.6g} ({why})")

    def phi_at(xs: np.ndarray) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        out = np.empty_like(xs)
        lmask = xs < x_star
        if lmask.any():
            out[lmask] = left.sol(xs[lmask])[0]
        if (~lmask).any():
            out[~lmask] = right.sol(xs[~lmask])[0]
        return out

    def diff_fn(x):
        return float(phi_at(np.array([x]))[0]) - float(b(x))

    crossings = []
    d_anchor = phi_rhs(params, rho, x_star, anchor, anchor) - float(bp(x_star))
    crossings.append((x_star, FROM_ABOVE if d_anchor < 0.0 else FROM_BELOW))
    for sol in (left, right):
        xs = _sample_points(np.sort(sol.t))
        d = phi_at(xs) - np.asarray(b(xs), dtype=float)
        crossings.extend(_locate_crossings(diff_fn, xs, d, skip_x=x_star))
    crossings.sort(key=lambda c: c[0])
    if len(crossings) > _MAX_CROSSINGS:
        notes.append("crossing search saturated; profile chatters")

    grid = np.geomspace(left_end, right_end, step_n)
    inserts = np.array([x_star] + [c[0] for c in crossings])
    grid = np.unique(np.concatenate([grid, inserts]))
    grid = grid[(grid >= left_end) & (grid <= right_end)]
    phi_vals = phi_at(grid)
    barrier_vals = np.asarray(b(grid), dtype=float)
    regime = tuple("NoHarvest" if p > bv else "Harvest"
                   for p, bv in zip(phi_vals, barrier_vals))
    return HjbProfile(grid=grid, phi=phi_vals, barrier=barrier_vals,
                      regime=regime, barrier_kind=kind, rho=rho,
                      x_star=x_star, crossings=tuple(crossings),
                      truncated_left=truncated_left,
                      truncated_right=truncated_right, notes=tuple(notes))


# ---------------------------------------------------------------------------
# verdicts

@dataclass(frozen=True)
class CrossingReport:
    """Verdict on whether a profile certifies single-threshold optimality."""

    crossings: tuple[tuple[float, str], ...]
    alpha1: Optional[float]
    alpha2: Optional[float]
    verdict: str  # "SingleFromAbove" | "Violation"
    details: tuple[str, ...] = ()

    def to_json_dict(self) -> dict:
        return {
            "crossings": [{"x": x, "direction": d} for x, d in self.crossings],
            "alpha1": self.alpha1,
            "alpha2": self.alpha2,
            "verdict": self.verdict,
            "details": list(self.details),
        }


def crossing_report(profile: HjbProfile, params: ModelParams,
                    rho: Optional[float] = None,
                    yspec: Optional[YieldSpec] = None) -> CrossingReport:
    """Judge a phi profile against the single-crossing optimality structure.

    SingleFromAbove requires: exactly one barrier crossing, from above,
    located inside the root interval of the companion function (g for the
    identity yield, its convex generalization for PhiRatio barriers); phi
    above the barrier at the left edge and below it at the right edge (the
    truncated stand-ins for the behavior at 0 and infinity); and no negative
    phi values.  Anything else is a Violation, with every failed requirement
    listed by name.

    PhiRatio profiles need ``yspec`` to evaluate the companion function.
    """
    if rho is None:
        rho = profile.rho
    if profile.barrier_kind == "PhiRatio":
        if yspec is None:
            raise ContractError("PhiRatio profiles need the yield spec to "
                                "locate the admissible crossing interval")
        roots = barrier_crossing_roots(params, yspec, rho)
    else:
        roots = g_roots(params, rho)
    alpha1 = alpha2 = None
    if roots is not None:
        alpha1 = roots[0]
        alpha2 = roots[-1]

    details: list[str] = []
    crossings = profile.crossings
    if len(crossings) == 0:
        details.append("no_barrier_crossing")
    if len(crossings) > 1:
        details.append(f"multiple_crossings[{len(crossings)}]")
    if any(d == FROM_BELOW for _, d in crossings):
        details.append("crossing_from_below")
    if profile.regime[0] != "NoHarvest":
        details.append("below_barrier_near_zero")
    if profile.regime[-1] != "Harvest":
        details.append("above_barrier_on_tail")
    if float(np.min(profile.phi)) < -1e-9:
        details.append("negative_phi_values")

    if len(crossings) == 1 and not details:
        x_c = crossings[0][0]
        if roots is None:
            details.append("no_root_interval_for_crossing")
        elif len(roots) == 1:
            if abs(x_c - roots[0]) > 1e-6 * max(1.0, roots[0]):
                details.append("crossing_outside_root_interval")
        elif not (alpha1 - 1e-9 <= x_c <= alpha2 + 1e-9):
            details.append("crossing_outside_root_interval")

    verdict = "SingleFromAbove" if not details else "Violation"
    return CrossingReport(crossings=crossings, alpha1=alpha1, alpha2=alpha2,
                          verdict=verdict, details=tuple(details))


def hjb_residual(profile: HjbProfile, params: ModelParams,
                 yspec: YieldSpec) -> float:
    """Max relative imbalance of the HJB equation over the profile.

    phi' is reconstructed by centered differences in ln x (the profile grid
    is geometric), then each point's regime equation is solved for the
    implied rho and compared with the profile's.  Points whose log-spacing
    is not locally uniform (crossing insertions) and points within two
    cells of a crossing are skipped: the stencil is meaningless across a
    regime switch.
    """
    x = profile.grid
    if x.size < 9:
        raise ContractError("profile too small for a residual check")
    phi = profile.phi
    u = np.log(x)
    h = np.diff(u)
    idx = np.arange(1, x.size - 1)
    keep = np.isclose(h[idx - 1], h[idx], rtol=1e-8, atol=0.0)
    for x_c, _ in profile.crossings:
        j = int(np.searchsorted(x, x_c))
        keep &= (idx < j - 2) | (idx > j + 2)
    i = idx[keep]
    if i.size == 0:
        raise ContractError("no uniform interior points for the residual")
    dphi = (phi[i + 1] - phi[i - 1]) / (u[i + 1] - u[i - 1]) / x[i]
    mu = np.asarray(drift_mu(params, x[i]), dtype=float)
    M = params.harvest_cap_M
    s2x2 = params.sigma2 * x[i] * x[i]
    harvesting = np.array([profile.regime[j] == "Harvest" for j in i])
    phi_xm = profile.barrier[i] * x[i] * M
    implied = np.where(
        harvesting,
        phi_xm + x[i] * (mu - M) * phi[i] + 0.5 * s2x2 * dphi,
        x[i] * mu * phi[i] + 0.5 * s2x2 * dphi,
    )
    scale = max(abs(profile.rho), 1e-12)
    return float(np.max(np.abs(implied - profile.rho)) / scale)


# ---------------------------------------------------------------------------
# optimal controls from a marginal-value profile

def concave_control(params: ModelParams, yspec: YieldSpec,
                    vx: Callable[[float], float],
                    grid: Sequence[float]) -> Strategy:
    """Tabulate the three-branch optimal control for strictly concave Phi.

    With a = vx(x): rate 0 when a >= Phi'(0) (harvesting worthless), the
    cap M when a <= Phi'(xM), else the interior stationary point
    [Phi']^{-1}(a) / x.  The two boundary branches are decided by direct
    comparison before any inversion, so their outputs are exact.
    """
    if yspec.kind != "concave":
        raise ContractError("concave_control requires a concave yield spec")
    if yspec.phi_prime is None:
        raise ContractError("concave_control needs phi_prime")
    grid = np.asarray(list(grid), dtype=float)
    if grid.size == 0 or np.any(grid <= 0.0):
        raise ContractError("grid must be positive and non-empty")
    M = params.harvest_cap_M
    slope_at_zero = float(yspec.phi_prime(0.0))
    values = np.empty_like(grid)
    for k, x in enumerate(grid):
        a = float(vx(float(x)))
        if a < 0.0:
            raise ContractError("vx must be nonnegative")
        if a >= slope_at_zero:
            values[k] = 0.0
        elif a <= float(yspec.phi_prime(x * M)):
            values[k] = M
        else:
            omega = phi_prime_inverse(yspec, a)
            values[k] = min(max(omega / x, 0.0), M)
    return make_tabulated(grid, values, cap=M)


def convex_G(params: ModelParams, yspec: YieldSpec, x):
    """G(x) = Phi(xM) (1 - 2 mu(x)/sigma^2) - xM Phi'(xM).

    Negativity of the companion quantity D = sigma^2 G/(2M) + rho between
    the roots of g is what forces crossings from above for convex Phi; for
    the identity yield G reduces to -2 x mu(x)/sigma^2 and the comparison
    collapses to the sign of g itself.
    """
    if yspec.kind not in ("convex", "identity"):
        raise ContractError("convex_G needs a convex (or identity) yield")
    if yspec.phi_prime is None:
        raise ContractError("convex_G needs phi_prime")
    xa = np.asarray(x, dtype=float)
    if np.any(xa <= 0.0):
        raise DomainError("convex_G needs x > 0")
    z = xa * params.harvest_cap_M
    mu = np.asarray(drift_mu(params, xa), dtype=float)
    out = yspec.phi(z) * (1.0 - 2.0 * mu / params.sigma2) \
        - z * yspec.phi_prime(z)
    return float(out) if np.ndim(out) == 0 else out


def convex_G_unique_min(params: ModelParams, yspec: YieldSpec,
                        grid: Sequence[float]) -> tuple[bool, float]:
    """Scan G on a grid: does its discrete derivative change sign exactly
    once, from - to +?  Returns (verdict, argmin on the grid)."""
    grid = np.asarray(list(grid), dtype=float)
    g = np.asarray(convex_G(params, yspec, grid), dtype=float)
    d = np.diff(g)
    signs = np.where(d > 0.0, 1, np.where(d < 0.0, -1, 0))
    collapsed: list[int] = []
    for s in signs:
        if s != 0 and (not collapsed or collapsed[-1] != s):
            collapsed.append(int(s))
    return collapsed == [-1, 1], float(grid[int(np.argmin(g))])


def convex_control_rule(vx_value: float, x: float, yspec: YieldSpec,
                        cap: float) -> float:
    """Two-valued control for convex (or identity) Phi: harvest at the cap
    exactly when the marginal value vx does not exceed the average-yield
    ratio Phi(x cap)/(x cap); ties harvest.  Never an interior rate."""
    if x <= 0.0:
        raise DomainError("convex_control_rule needs x > 0")
    if yspec.kind not in ("convex", "identity"):
        raise ContractError("convex_control_rule needs convex or identity yield")
    z = x * cap
    ratio = float(yspec.phi(z)) / z
    return cap if vx_value <= ratio else 0.0
