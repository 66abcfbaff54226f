"""Stationary densities of the harvested diffusion and yield functionals.

For a one-dimensional diffusion with drift a(x) = x(mu(x) - v(x)) and noise
b(x) = sigma x, the invariant density is the normalized speed-measure
expression rho(y) = C1 / b^2(y) * exp(2 int a/b^2).  With logistic drift and
a piecewise-constant strategy the inner integral is available in closed
form, branch by branch, and every profile value is evaluated from it
directly; quadrature enters only through the normalization constant and the
tail bounds.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.integrate import quad, simpson

from .errors import ContractError, ExtinctionRegimeError
from .model import ModelParams, YieldSpec, drift_mu
from .strategy import Strategy, strategy_eval

__all__ = [
    "DensityProfile",
    "stationary_density",
    "asymptotic_yield",
    "yield_H",
    "threshold_yield",
    "fokker_planck_residual",
]

_TAIL_TARGET = 1e-9
_TRAPZ_TARGET = 8e-7
_QUAD_KW = dict(epsabs=1e-13, epsrel=1e-12, limit=300)


@dataclass(frozen=True)
class DensityProfile:
    """Stationary density tabulated on a piecewise-uniform grid.

    piece_breaks holds the indices that bound the uniform pieces (always
    starting with 0 and ending with len(grid) - 1); spacing may change only
    at those indices.  truncation = (y_min, y_max, tail_mass_bound).
    """

    grid: np.ndarray
    values: np.ndarray
    norm_constant_C1: float
    truncation: tuple[float, float, float]
    strategy_id: str
    piece_breaks: tuple[int, ...]

    def piece_slices(self) -> list[slice]:
        return [slice(a, b + 1) for a, b in
                zip(self.piece_breaks[:-1], self.piece_breaks[1:])]

    def integrate(self, weight: Optional[np.ndarray] = None) -> float:
        """Composite-Simpson integral of weight*rho piece by piece."""
        f = self.values if weight is None else self.values * weight
        total = 0.0
        for sl in self.piece_slices():
            if sl.stop - sl.start >= 3:
                total += float(simpson(f[sl], x=self.grid[sl]))
            else:
                total += float(np.trapezoid(f[sl], self.grid[sl]))
        return total

    def mean(self) -> float:
        return self.integrate(self.grid)

    def trapezoid_mass(self) -> float:
        return float(np.trapezoid(self.values, self.grid))

    def cumulative_mass(self, y: np.ndarray) -> np.ndarray:
        """Mass on (-inf, y] by trapezoid accumulation over the grid."""
        cum = np.concatenate(
            ([0.0], np.cumsum(np.diff(self.grid)
                              * 0.5 * (self.values[1:] + self.values[:-1]))))
        return np.interp(y, self.grid, cum, left=0.0, right=cum[-1])

    def to_csv_rows(self):
        return zip(self.grid.tolist(), self.values.tolist())

    def sidecar_dict(self) -> dict:
        return {
            "C1": self.norm_constant_C1,
            "y_min": self.truncation[0],
            "y_max": self.truncation[1],
            "tail_mass_bound": self.truncation[2],
            "strategy_id": self.strategy_id,
            "grid_points": int(self.grid.size),
            "piece_breaks": list(self.piece_breaks),
        }


# ---------------------------------------------------------------------------
# closed-form machinery for logistic drift + piecewise-constant strategies

def _strategy_nodes(params: ModelParams, s: Strategy) -> tuple[np.ndarray, np.ndarray]:
    """Step representation of v: rate levels[i] on (nodes[i-1], nodes[i]],
    levels[0] below nodes[0], levels[-1] above nodes[-1]."""
    if s.kind == "constant":
        return np.array([]), np.array([s.rate_ell])
    if s.kind == "bang_bang":
        return np.array([s.threshold_x_star]), np.array([0.0, s.cap_M])
    return np.asarray(s.grid, dtype=float), \
        np.concatenate(([0.0], np.asarray(s.values, dtype=float)))


def _low_exponent(params: ModelParams, levels: np.ndarray) -> float:
    # power-law exponent of the unnormalized density at 0+
    return 2.0 * (drift_mu(params, 0.0) - levels[0]) / params.sigma2 - 2.0


class _LogisticDensityShape:
    """exp(2 int a/b^2) / (sigma y)^2 anchored at a reference point r0."""

    def __init__(self, params: ModelParams, nodes: np.ndarray,
                 levels: np.ndarray, r0: float):
        self.sigma2 = params.sigma2
        self.mu_bar = params.mu_bar
        self.kappa = params.kappa
        self.nodes = nodes
        self.levels = levels
        self.r0 = r0
        # cumulative exponent at each node, measured from r0
        self._node_exp = np.array([self._exponent_scalar(t) for t in nodes])

    def _rate_at(self, y: float) -> float:
        return self.levels[int(np.searchsorted(self.nodes, y, side="left"))]

    def _stretch(self, a: float, b: float, rate: float) -> float:
        # 2 int_a^b (mu_bar - rate - kappa z) / (sigma^2 z) dz
        return (2.0 / self.sigma2) * ((self.mu_bar - rate) * math.log(b / a)
                                      - self.kappa * (b - a))

    def _exponent_scalar(self, y: float) -> float:
        lo, hi = (y, self.r0) if y < self.r0 else (self.r0, y)
        sign = -1.0 if y < self.r0 else 1.0
        cuts = [lo] + [t for t in self.nodes if lo < t < hi] + [hi]
        total = 0.0
        for a, b in zip(cuts[:-1], cuts[1:]):
            total += self._stretch(a, b, self._rate_at(0.5 * (a + b)))
        return sign * total

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        scalar = y.ndim == 0
        y = np.atleast_1d(y)
        exps = np.array([self._exponent_scalar(v) for v in y])
        out = np.exp(exps) / (self.sigma2 * y * y)
        return float(out[0]) if scalar else out


def _quad_segment(shape: Callable, a: float, b: float, low_exp: float):
    """Integrate the density shape over [a, b] (b may be inf); transforms
    away the algebraic endpoint singularity at a = 0 when low_exp < 0."""
    if a == 0.0 and low_exp < 0.0:
        p = 1.0 / (1.0 + low_exp)  # > 1; y = b t^p has bounded integrand

        def g(t):
            y = b * t ** p
            return shape(y) * b * p * t ** (p - 1.0)

        val, err = quad(g, 0.0, 1.0, **_QUAD_KW)
    else:
        val, err = quad(shape, a, b, **_QUAD_KW)
    return val, err


def _normalize(shape: Callable, nodes: np.ndarray, low_exp: float):
    """Total unnormalized mass, split at strategy nodes, plus segment fn."""
    cuts = [0.0] + [float(t) for t in nodes] + [np.inf]
    if len(cuts) == 2:
        # no interior nodes: the singular transform needs a finite right
        # endpoint, so cut at the shape's anchor
        cuts = [0.0, float(getattr(shape, "r0", 1.0)), np.inf]
    total = 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        val, _ = _quad_segment(shape, a, b, low_exp)
        total += val
    return total


def _mass_below(shape, y: float, low_exp: float) -> float:
    return _quad_segment(shape, 0.0, y, low_exp)[0]


def _mass_above(shape, y: float) -> float:
    return quad(shape, y, np.inf, **_QUAD_KW)[0]


def _allocate_counts(lengths: np.ndarray, total_intervals: int,
                     minimum: int = 16) -> np.ndarray:
    """Split an interval budget across pieces, weight ~ sqrt(length)."""
    w = np.sqrt(lengths)
    raw = total_intervals * w / w.sum()
    counts = np.maximum(minimum, np.floor(raw).astype(int))
    # deterministic remainder distribution: largest pieces first
    while counts.sum() < total_intervals:
        counts[int(np.argmax(lengths / counts))] += 1
    while counts.sum() > total_intervals and np.any(counts > minimum):
        over = np.where(counts > minimum)[0]
        counts[over[np.argmin(lengths[over] / counts[over])]] -= 1
    return counts


def _build_grid(y_min: float, y_max: float, scale: float,
                nodes: np.ndarray, grid_n: int, low_exp: float):
    """Piecewise-uniform grid with breakpoints at scale-derived points and
    at strategy nodes; prepends a geometric sub-grid when the density has a
    power-law blow-up at 0 (low_exp < 0), where uniform cells cannot hold
    the trapezoid error."""
    bps = {y_min, y_max}
    for b in (0.25 * scale, scale, 4.0 * scale):
        if y_min * 1.0001 < b < y_max * 0.9999:
            bps.add(float(b))
    for t in nodes:
        if y_min * 1.0001 < t < y_max * 0.9999:
            bps.add(float(t))
    bps = np.array(sorted(bps))

    geo = None
    if low_exp < 0.0:
        g_hi = bps[1]
        ratio = 1.003
        n_geo = int(math.ceil(math.log(g_hi / y_min) / math.log(ratio))) + 1
        geo = np.geomspace(y_min, g_hi, n_geo)
        bps = bps[1:]

    lengths = np.diff(bps)
    counts = _allocate_counts(lengths, max(grid_n - 1, 16 * lengths.size))
    segs = [np.linspace(a, b, c + 1) for a, b, c in zip(bps[:-1], bps[1:], counts)]
    parts = ([geo[:-1]] if geo is not None else []) + \
        [s[:-1] for s in segs[:-1]] + [segs[-1]]
    grid = np.concatenate(parts)

    breaks = [0]
    pos = 0
    if geo is not None:
        pos += geo.size - 1
        breaks.append(pos)
    for c in counts[:-1]:
        pos += c
        breaks.append(pos)
    breaks.append(grid.size - 1)
    return grid, tuple(dict.fromkeys(breaks))


def stationary_density(params: ModelParams, s: Strategy,
                       grid_n: int = 4000) -> DensityProfile:
    """Invariant density of the diffusion controlled by strategy s.

    Logistic drift with a constant, bang-bang, or tabulated strategy uses
    the closed-form two-branch expression (power law times exponential,
    exponent switching at each strategy node); custom drifts fall back to
    cumulative quadrature of the speed-measure integrand, with documented
    loss of accuracy.  The normalization constant comes from adaptive
    quadrature split at every strategy node, and the domain is extended
    until both tail masses drop below 1e-9.

    Raises ExtinctionRegimeError when the no-harvest branch fails the
    persistence condition, in which case the only invariant measure is the
    point mass at zero and no density exists.

    grid_n is a floor on resolution: profiles whose density blows up at 0
    receive an extra geometric sub-grid near the origin, and the piece
    counts are doubled (at most three times) if the trapezoid mass misses
    1 by more than 8e-7.
    """
    if grid_n < 64:
        raise ContractError("grid_n must be at least 64")
    nodes, levels = _strategy_nodes(params, s)
    margin0 = drift_mu(params, 0.0) - levels[0] - 0.5 * params.sigma2
    if margin0 <= 0.0:
        raise ExtinctionRegimeError(
            "effective drift at 0 fails persistence "
            f"(mu(0) - v(0+) - sigma^2/2 = {margin0:.6g} <= 0); the invariant "
            "measure degenerates to the point mass at zero")

    if params.drift_kind == "logistic":
        low_exp = _low_exponent(params, levels)
        scale = margin0 / params.kappa
        r0 = float(nodes[0]) if nodes.size else scale
        shape = _LogisticDensityShape(params, nodes, levels, r0)
    else:
        return _custom_drift_density(params, s, grid_n, nodes, levels)

    total = _normalize(shape, nodes, low_exp)
    if not np.isfinite(total) or total <= 0:
        raise ExtinctionRegimeError("speed-measure normalization diverged")
    c1 = 1.0 / total

    y_min = min(scale / 8.0, (nodes[0] / 2.0) if nodes.size else np.inf)
    while c1 * _mass_below(shape, y_min, low_exp) >= _TAIL_TARGET:
        y_min *= 0.5
    y_max = max(4.0 * scale, (2.0 * nodes[-1]) if nodes.size else 0.0)
    while c1 * _mass_above(shape, y_max) >= _TAIL_TARGET:
        y_max *= 2.0

    n = grid_n
    for _ in range(4):
        grid, breaks = _build_grid(y_min, y_max, scale, nodes, n, low_exp)
        values = c1 * shape(grid)
        if abs(np.trapezoid(values, grid) - 1.0) <= _TRAPZ_TARGET:
            break
        n *= 2
    return DensityProfile(grid=grid, values=values, norm_constant_C1=c1,
                          truncation=(y_min, y_max, 2.0 * _TAIL_TARGET),
                          strategy_id=s.descriptor(), piece_breaks=breaks)


def _custom_drift_density(params: ModelParams, s: Strategy, grid_n: int,
                          nodes: np.ndarray, levels: np.ndarray) -> DensityProfile:
    # cumulative-trapezoid path for exp(2 int (mu - v)/(sigma^2 z) dz): no
    # closed form, so the exponent is accumulated over a fine refinement of
    # the output grid.  v is evaluated at cell midpoints: strategy nodes are
    # cell boundaries, so v is constant on every open cell and the jump of
    # the integrand never smears into the accumulation.
    r0 = float(s.threshold_x_star) if s.kind == "bang_bang" else 1.0
    low_exp = _low_exponent(params, levels)
    y_min, y_max = r0 * 1e-6, params.x_max
    refine = 10

    def build(y_min, y_max, n):
        coarse, breaks = _build_grid(y_min, y_max, r0, nodes, n, low_exp)
        cells = np.linspace(coarse[:-1], coarse[1:], refine + 1, axis=1)
        fine = np.unique(cells.ravel())
        a, b = fine[:-1], fine[1:]
        v_mid = np.asarray(strategy_eval(s, 0.5 * (a + b)), dtype=float)
        mu_f = np.asarray(drift_mu(params, fine), dtype=float)
        seg = 0.5 * (b - a) * ((mu_f[:-1] - v_mid) / (params.sigma2 * a)
                               + (mu_f[1:] - v_mid) / (params.sigma2 * b))
        cum = np.concatenate(([0.0], np.cumsum(seg)))
        anchor = cum[np.searchsorted(fine, r0)]
        u = np.exp(2.0 * (cum - anchor)) / (params.sigma2 * fine * fine)
        idx = np.searchsorted(fine, coarse)
        return coarse, breaks, fine, u, u[idx]

    coarse, breaks, fine, u, vals = build(y_min, y_max, grid_n)
    # extend the domain until both tails are negligible against the bulk
    for _ in range(60):
        peak = u.max()
        grew = False
        if u[-1] * y_max > 1e-11 * peak:
            y_max *= 2.0
            grew = True
        if u[0] * y_min > 1e-11 * peak:
            y_min *= 0.5
            grew = True
        if not grew:
            break
        coarse, breaks, fine, u, vals = build(y_min, y_max, grid_n)

    n = grid_n
    for _ in range(4):
        total = np.trapezoid(u, fine)
        if not np.isfinite(total) or total <= 0:
            raise ExtinctionRegimeError("speed-measure normalization diverged")
        c1 = 1.0 / total
        values = c1 * vals
        if abs(np.trapezoid(values, coarse) - 1.0) <= _TRAPZ_TARGET:
            break
        n *= 2
        coarse, breaks, fine, u, vals = build(y_min, y_max, n)
    tail_estimate = float(c1 * (u[0] * y_min + u[-1] * y_max))
    return DensityProfile(grid=coarse, values=values, norm_constant_C1=c1,
                          truncation=(y_min, y_max, tail_estimate),
                          strategy_id=s.descriptor(), piece_breaks=breaks)


# ---------------------------------------------------------------------------
# yields

def asymptotic_yield(params: ModelParams, s: Strategy, yspec: YieldSpec,
                     profile: DensityProfile) -> float:
    """Long-run yield int Phi(y v(y)) rho(y) dy from a tabulated profile.

    Composite Simpson within each uniform piece; the grid carries the
    strategy's discontinuities as piece boundaries, so no integration step
    straddles a jump of v.
    """
    if profile.strategy_id != s.descriptor():
        raise ContractError("profile was generated from a different strategy "
                            f"({profile.strategy_id} != {s.descriptor()})")
    nodes, _ = _strategy_nodes(params, s)
    total = 0.0
    for sl in profile.piece_slices():
        seg = profile.grid[sl]
        interior_nodes = nodes[(nodes > seg[0]) & (nodes < seg[-1])]
        if interior_nodes.size == 0:
            # v is constant on the open piece; evaluating at the midpoint
            # keeps the piece-edge weights one-sided (v itself is
            # left-continuous, which would zero the first point of the
            # piece just above a threshold)
            v_mid = float(strategy_eval(s, 0.5 * (seg[0] + seg[-1])))
            w = np.asarray(yspec.phi(seg * v_mid), dtype=float)
        else:
            # custom-density grids may not split at the nodes; fall back to
            # pointwise evaluation with the documented accuracy loss
            w = np.asarray(yspec.phi(seg * strategy_eval(s, seg)), dtype=float)
        f = profile.values[sl] * w
        if seg.size >= 3:
            total += float(simpson(f, x=seg))
        else:
            total += float(np.trapezoid(f, seg))
    return total


def threshold_yield(params: ModelParams, eta: float, yspec: YieldSpec) -> float:
    """Yield of the bang-bang strategy with threshold eta, by adaptive
    quadrature of the closed-form density: int_eta^inf Phi(y M) rho(y) dy.

    Independent of any DensityProfile grid; this is the quadrature route
    that asymptotic_yield is cross-checked against.
    """
    if params.drift_kind != "logistic":
        raise ContractError("threshold_yield requires logistic drift")
    if not (eta > 0):
        raise ContractError("threshold must be positive")
    if persistence_gap(params) <= 0:
        raise ExtinctionRegimeError(
            "persistence fails (mu_bar - sigma^2/2 <= 0): the yield of any "
            "threshold strategy is zero and no stationary density exists")
    M = params.harvest_cap_M
    nodes = np.array([eta])
    levels = np.array([0.0, M])
    shape = _LogisticDensityShape(params, nodes, levels, eta)
    low_exp = _low_exponent(params, levels)
    den = _normalize(shape, nodes, low_exp)
    phi = yspec.phi
    num, _ = quad(lambda y: float(phi(y * M)) * shape(float(y)),
                  eta, np.inf, **_QUAD_KW)
    return num / den


def persistence_gap(params: ModelParams) -> float:
    return drift_mu(params, 0.0) - 0.5 * params.sigma2


def yield_H(params: ModelParams, eta: float) -> float:
    """Identity-yield bang-bang yield H(eta): the ratio of the harvested
    first moment above the threshold to the total mass of the two-branch
    stationary density.  Vanishes in the eta -> infinity limit.

    Works in the substituted variable s = y/eta, which cancels the density
    prefactor and keeps every integrand bounded by 1 at s = 1; the algebraic
    endpoint singularity s^a_lo with a_lo in (-1, 0) is removed by the
    change of variable u = s^(1+a_lo).  This route is independent of
    threshold_yield (which integrates the unsubstituted density) and the
    two are cross-checked in the tests.
    """
    if not np.isfinite(eta):
        return 0.0
    if params.drift_kind != "logistic":
        raise ContractError("yield_H requires logistic drift")
    if not (eta > 0):
        raise ContractError("threshold must be positive")
    if persistence_gap(params) <= 0:
        raise ExtinctionRegimeError(
            "persistence fails (mu_bar - sigma^2/2 <= 0): every threshold "
            "strategy drives the population extinct and the yield is zero")
    sigma2 = params.sigma2
    a_lo = 2.0 * params.mu_bar / sigma2 - 2.0
    a_hi = 2.0 * (params.mu_bar - params.harvest_cap_M) / sigma2 - 2.0
    q = 2.0 * params.kappa * eta / sigma2

    def below(s):
        return s ** a_lo * math.exp(-q * (s - 1.0))

    if a_lo < 0.0:
        # u = s^(1+a_lo): s^a_lo ds = p du exactly, p = 1/(1+a_lo)
        p = 1.0 / (1.0 + a_lo)
        d_lo, _ = quad(lambda u: p * math.exp(-q * (u ** p - 1.0)),
                       0.0, 1.0, **_QUAD_KW)
    else:
        d_lo, _ = quad(below, 0.0, 1.0, **_QUAD_KW)

    def above(s):
        return s ** a_hi * math.exp(-q * (s - 1.0))

    d_hi, _ = quad(above, 1.0, np.inf, **_QUAD_KW)
    num, _ = quad(lambda s: s * above(s), 1.0, np.inf, **_QUAD_KW)
    return eta * params.harvest_cap_M * num / (d_lo + d_hi)


# ---------------------------------------------------------------------------
# stationarity check

def fokker_planck_residual(params: ModelParams, s: Strategy,
                           profile: DensityProfile) -> float:
    """Max |d2/dy2(b^2 rho / 2) - d/dy(a rho)| over the interior grid.

    Central differences on locally-uniform triples only: points adjacent to
    a piece boundary or within two cells of a strategy discontinuity are
    skipped, since the stencil is not valid across a spacing change or a
    jump of v.
    """
    y = profile.grid
    if y.size < 7:
        raise ContractError("profile interior too small for the stencil")
    rho = profile.values
    v = strategy_eval(s, y)
    mu = np.asarray(drift_mu(params, y), dtype=float)
    f2 = 0.5 * params.sigma2 * y * y * rho
    f1 = y * (mu - v) * rho

    h = np.diff(y)
    idx = np.arange(1, y.size - 1)
    uniform = np.isclose(h[idx - 1], h[idx], rtol=1e-9, atol=0.0)
    keep = uniform.copy()
    nodes, _ = _strategy_nodes(params, s)
    for t in nodes:
        j = int(np.searchsorted(y, t))
        keep &= (idx < j - 2) | (idx > j + 2)
    for b in profile.piece_breaks:
        keep &= (idx < b - 1) | (idx > b + 1)
    i = idx[keep]
    if i.size == 0:
        raise ContractError("no uniform interior points left for the stencil")
    hh = h[i - 1]
    second = (f2[i + 1] - 2.0 * f2[i] + f2[i - 1]) / (hh * hh)
    first = (f1[i + 1] - f1[i - 1]) / (2.0 * hh)
    return float(np.max(np.abs(second - first)))
