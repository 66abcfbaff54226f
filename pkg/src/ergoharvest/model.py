"""Population model and yield-function types, plus standing-assumption checks.

The controlled population follows dX = X(mu(X) - h) dt + sigma X dB with a
harvest rate h capped at M.  The drift is either logistic, mu(x) =
mu_bar - kappa x, or a user-supplied decreasing map.  Rewards are measured
through a yield function Phi applied to the instantaneous harvested amount.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ContractError, DomainError

__all__ = [
    "ModelParams",
    "YieldSpec",
    "AssumptionCheck",
    "AssumptionReport",
    "logistic_params",
    "custom_drift_params",
    "identity_yield",
    "concave_log_yield",
    "convex_power_yield",
    "drift_mu",
    "persistence_margin",
    "peak_of_x_mu",
    "validate_assumptions",
    "validate_yield",
    "phi_prime_inverse",
]


@dataclass(frozen=True)
class ModelParams:
    """Parameters of the controlled diffusion.

    drift_kind selects the logistic closed forms ("logistic") or a tabulated
    callable ("custom").  sigma is the noise amplitude, harvest_cap_M the
    maximal admissible harvest rate, and x_max a truncation bound used by
    grid-based checks.
    """

    drift_kind: str
    sigma: float
    harvest_cap_M: float
    x_max: float
    mu_bar: Optional[float] = None
    kappa: Optional[float] = None
    custom_mu: Optional[Callable[[float], float]] = None

    def __post_init__(self) -> None:
        if self.drift_kind not in ("logistic", "custom"):
            raise ContractError(f"unknown drift_kind {self.drift_kind!r}")
        if not (self.sigma > 0):
            raise ContractError("sigma must be positive")
        if not (self.harvest_cap_M > 0):
            raise ContractError("harvest_cap_M must be positive")
        if not (self.x_max > 0):
            raise ContractError("x_max must be positive")
        if self.drift_kind == "logistic":
            if self.mu_bar is None or self.kappa is None:
                raise ContractError("logistic drift requires mu_bar and kappa")
            if not (self.mu_bar > 0 and self.kappa > 0):
                raise ContractError("mu_bar and kappa must be positive")
        elif self.custom_mu is None:
            raise ContractError("custom drift requires custom_mu")

    @property
    def sigma2(self) -> float:
        return self.sigma * self.sigma


def logistic_params(mu_bar: float, kappa: float, sigma: float,
                    harvest_cap: float, x_max: float | None = None) -> ModelParams:
    """Logistic-drift parameters; x_max defaults to ten carrying capacities."""
    if x_max is None:
        x_max = 10.0 * mu_bar / kappa
    return ModelParams(drift_kind="logistic", sigma=sigma,
                       harvest_cap_M=harvest_cap, x_max=x_max,
                       mu_bar=mu_bar, kappa=kappa)


def custom_drift_params(mu: Callable[[float], float], sigma: float,
                        harvest_cap: float, x_max: float) -> ModelParams:
    return ModelParams(drift_kind="custom", sigma=sigma,
                       harvest_cap_M=harvest_cap, x_max=x_max, custom_mu=mu)


def drift_mu(params: ModelParams, x):
    """Per-capita growth rate mu(x); accepts scalars or arrays, x >= 0."""
    if np.any(np.asarray(x) < 0):
        raise DomainError("drift is defined for x >= 0 only")
    if params.drift_kind == "logistic":
        return params.mu_bar - params.kappa * np.asarray(x, dtype=float) \
            if np.ndim(x) else params.mu_bar - params.kappa * float(x)
    try:
        if np.ndim(x):
            return np.array([params.custom_mu(float(v)) for v in np.asarray(x)])
        return float(params.custom_mu(float(x)))
    except (ArithmeticError, ValueError) as exc:
        raise DomainError(f"custom drift undefined at x={x!r}") from exc


def persistence_margin(params: ModelParams) -> float:
    """mu(0) - sigma^2/2; the population survives unharvested iff positive."""
    return drift_mu(params, 0.0) - 0.5 * params.sigma2


def peak_of_x_mu(params: ModelParams) -> tuple[float, float]:
    """Location and value of the unique maximum of x * mu(x).

    Closed form for the logistic drift; golden-section search on
    (0, x_max) otherwise.
    """
    if params.drift_kind == "logistic":
        x_iota = params.mu_bar / (2.0 * params.kappa)
        return x_iota, params.mu_bar ** 2 / (4.0 * params.kappa)
    from .optimize import golden_max
    x_iota, val = golden_max(lambda x: x * drift_mu(params, x),
                             params.x_max * 1e-9, params.x_max, tol_x=1e-10)
    return x_iota, val


@dataclass(frozen=True)
class YieldSpec:
    """Yield function Phi with curvature class.

    phi maps the harvested amount to reward, phi(0) = 0.  phi_prime is
    required for the concave and convex kinds.  growth_exponent_n is the
    integer witness used when checking subpolynomial growth.
    """

    kind: str
    phi: Callable
    phi_prime: Optional[Callable] = None
    growth_exponent_n: int = 2
    label: str = "custom"

    def __post_init__(self) -> None:
        if self.kind not in ("identity", "concave", "convex", "custom"):
            raise ContractError(f"unknown yield kind {self.kind!r}")
        if self.kind in ("concave", "convex") and self.phi_prime is None:
            raise ContractError(f"{self.kind} yield requires phi_prime")


def identity_yield() -> YieldSpec:
    return YieldSpec(kind="identity", phi=lambda z: z,
                     phi_prime=lambda z: np.ones_like(np.asarray(z, dtype=float))
                     if np.ndim(z) else 1.0,
                     growth_exponent_n=2, label="identity")


def concave_log_yield() -> YieldSpec:
    """Phi(z) = ln(1 + z), strictly concave with Phi'(0) = 1."""
    return YieldSpec(kind="concave", phi=np.log1p,
                     phi_prime=lambda z: 1.0 / (1.0 + z),
                     growth_exponent_n=1, label="log1p")


def convex_power_yield(exponent: float = 2.0) -> YieldSpec:
    if exponent < 1:
        raise ContractError("convex power yield needs exponent >= 1")
    return YieldSpec(kind="convex",
                     phi=lambda z: z ** exponent,
                     phi_prime=lambda z: exponent * z ** (exponent - 1.0),
                     growth_exponent_n=int(math.ceil(exponent)) + 1,
                     label=f"power{exponent:g}")


@dataclass(frozen=True)
class AssumptionCheck:
    name: str
    passed: bool
    witness: Optional[float] = None
    note: str = ""


@dataclass(frozen=True)
class AssumptionReport:
    checks: tuple[AssumptionCheck, ...]
    all_pass: bool = field(init=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "all_pass", all(c.passed for c in self.checks))

    def failing(self) -> list[AssumptionCheck]:
        return [c for c in self.checks if not c.passed]

    def to_json_dict(self) -> dict:
        return {
            "all_pass": self.all_pass,
            "checks": [
                {"name": c.name, "passed": c.passed,
                 "witness": c.witness, "note": c.note}
                for c in self.checks
            ],
        }


def _geometric_grid(lo: float, hi: float, n: int) -> np.ndarray:
    return np.geomspace(lo, hi, n)


def validate_assumptions(params: ModelParams, grid_n: int = 400) -> AssumptionReport:
    """Grid checks of the model's standing assumptions.

    Checks, on a geometric grid over (0, x_max]: bounded difference
    quotients of mu (a Lipschitz heuristic, see note below), mu decreasing,
    mu negative at x_max, unimodality of x*mu(x), and the persistence
    condition mu(0) - sigma^2/2 > 0.  Failures are recorded in the report,
    never raised.

    The Lipschitz property cannot be verified numerically; the quotient
    bound (10x the coarse-grid slope estimate) is a heuristic and is
    labelled as such in the report.
    """
    if grid_n < 100:
        raise ContractError("grid_n must be at least 100")
    checks: list[AssumptionCheck] = []
    grid = _geometric_grid(params.x_max * 1e-6, params.x_max, grid_n)
    try:
        mu_vals = np.asarray(drift_mu(params, grid), dtype=float)
        mu_at_0 = float(drift_mu(params, 0.0))
        eval_ok = True
    except DomainError as exc:
        checks.append(AssumptionCheck("drift_evaluates", False, None, str(exc)))
        eval_ok = False
    if eval_ok:
        dq = np.diff(mu_vals) / np.diff(grid)
        coarse = np.abs(dq[:: max(1, grid_n // 20)])
        bound = 10.0 * max(float(coarse.max()), 1e-12)
        worst = int(np.argmax(np.abs(dq)))
        checks.append(AssumptionCheck(
            "mu_locally_lipschitz_heuristic",
            bool(np.all(np.abs(dq) <= bound)),
            float(grid[worst]),
            "difference quotients within 10x coarse slope estimate (heuristic)"))

        rising = np.where(np.diff(mu_vals) > 1e-12 * (1 + np.abs(mu_vals[:-1])))[0]
        checks.append(AssumptionCheck(
            "mu_decreasing", rising.size == 0,
            float(grid[rising[0]]) if rising.size else None,
            "mu must be non-increasing"))

        checks.append(AssumptionCheck(
            "mu_negative_at_x_max", bool(mu_vals[-1] < 0.0),
            float(mu_vals[-1]),
            "x_max should sit past the drift's root"))

        p = grid * mu_vals
        dp = np.diff(p)
        s = np.sign(dp[np.abs(dp) > 1e-14 * (1 + np.abs(p[:-1]))])
        transitions = int(np.sum(np.diff(s) != 0)) if s.size else 0
        unimodal = transitions == 1 and s.size > 0 and s[0] > 0 and s[-1] < 0
        checks.append(AssumptionCheck(
            "x_mu_unimodal", bool(unimodal),
            float(grid[int(np.argmax(p))]),
            "x*mu(x) must rise to a single interior maximum then fall"))

        margin = mu_at_0 - 0.5 * params.sigma2
        checks.append(AssumptionCheck(
            "persistence", bool(margin > 0.0), margin,
            "mu(0) - sigma^2/2 must be positive for the population to survive"))
    return AssumptionReport(tuple(checks))


def validate_yield(spec: YieldSpec, grid_n: int = 400) -> AssumptionReport:
    """Grid checks of the yield function's standing assumptions.

    Verifies Phi(0) = 0, a no-jump continuity heuristic, subpolynomial
    growth (Phi(x)/x^n decreasing over the top decade of the grid for
    n = growth_exponent_n), and consistency of the declared curvature
    class with Phi'.
    """
    if grid_n < 100:
        raise ContractError("grid_n must be at least 100")
    checks: list[AssumptionCheck] = []
    grid = _geometric_grid(1e-4, 1e4, grid_n)
    vals = np.array([float(spec.phi(x)) for x in grid])

    phi0 = float(spec.phi(0.0))
    checks.append(AssumptionCheck("phi_zero_at_zero", abs(phi0) <= 1e-12, phi0,
                                  "Phi(0) must be 0"))

    jumps = np.abs(np.diff(vals))
    steps = np.diff(grid)
    slopes = jumps / steps
    # reference slope is a windowed median: on the geometric grid a global
    # median would flag any superlinear Phi as a jump at the top decades
    k = 10
    ref = np.array([np.median(slopes[max(0, i - k):i + k + 1])
                    for i in range(slopes.size)]) + 1e-12
    allowed = 50.0 * ref * steps + 1e-9
    bad = np.where(jumps > allowed)[0]
    checks.append(AssumptionCheck(
        "phi_continuous_heuristic", bad.size == 0,
        float(grid[bad[0]]) if bad.size else None,
        "no grid jump larger than 50x the median slope"))

    top = grid >= grid[-1] / 10.0
    ratio = vals[top] / grid[top] ** spec.growth_exponent_n
    growth_ok = bool(np.all(np.diff(ratio) <= 1e-15 + 1e-10 * np.abs(ratio[:-1]))
                     and ratio[-1] >= 0.0)
    checks.append(AssumptionCheck(
        "subpolynomial_growth", growth_ok, float(ratio[-1]),
        f"Phi(x)/x^{spec.growth_exponent_n} decreasing on the top decade"))

    if spec.kind in ("concave", "convex"):
        dvals = np.array([float(spec.phi_prime(x)) for x in grid])
        dd = np.diff(dvals)
        if spec.kind == "concave":
            ok = bool(np.all(dd < 0))
            note = "Phi' strictly decreasing"
        else:
            ok = bool(np.all(dd >= -1e-12 * (1 + np.abs(dvals[:-1]))))
            note = "Phi' weakly increasing"
        worst = int(np.argmax(dd) if spec.kind == "concave" else np.argmin(dd))
        checks.append(AssumptionCheck("curvature_class", ok, float(grid[worst]), note))
    return AssumptionReport(tuple(checks))


def phi_prime_inverse(spec: YieldSpec, a: float) -> Optional[float]:
    """Solve Phi'(omega) = a for omega >= 0 by monotone bisection.

    Requires a strictly concave spec (Phi' decreasing).  Returns None when
    a exceeds Phi'(0) (no nonnegative solution) or when a is at or below
    the infimum of Phi' (no finite solution); returns 0.0 exactly at
    a = Phi'(0).  Absolute tolerance 1e-10 in omega: downstream control
    formulas divide by the population density, so the omega error must sit
    far below any grid spacing.
    """
    if spec.kind != "concave":
        raise ContractError("phi_prime_inverse requires a concave yield spec")
    p0 = float(spec.phi_prime(0.0))
    if a > p0:
        return None
    if a == p0:
        return 0.0
    hi = 1.0
    while float(spec.phi_prime(hi)) >= a:
        hi *= 2.0
        if hi > 1e18:
            return None  # a at or below inf Phi'
    lo = 0.0
    while hi - lo > 1e-10:
        mid = 0.5 * (lo + hi)
        if float(spec.phi_prime(mid)) >= a:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def yield_spec_from_config(cfg: dict) -> YieldSpec:
    """Build a YieldSpec from a JSON-friendly mapping (named forms only)."""
    kind = cfg.get("kind", "identity")
    if kind == "identity":
        return identity_yield()
    form = cfg.get("form")
    if kind == "concave":
        if form in (None, "log1p"):
            return concave_log_yield()
        raise ContractError(f"unknown concave yield form {form!r}")
    if kind == "convex":
        if form in (None, "power"):
            return convex_power_yield(float(cfg.get("exponent", 2.0)))
        raise ContractError(f"unknown convex yield form {form!r}")
    raise ContractError(f"config cannot express yield kind {kind!r}")
