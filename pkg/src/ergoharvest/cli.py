"""Command-line interface: JSON configs in, CSV/JSON/SVG artifacts out.

Configs are the primary input (committed ones under configs/ are executable
documentation of the figure parameter sets); flags only override the output
directory, SVG emission, and the simulation seed.  Exit codes are a stable
scripting contract: 0 success/verified, 1 domain failure (extinction
regime, crossing violation, failed assumptions), 2 usage or parse error.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys
from typing import Optional

import numpy as np

from . import _io
from ._parallel import map_ordered
from ._svg import line_plot_svg
from .errors import ContractError, DomainError, ExtinctionRegimeError, HarvestError
from .model import (ModelParams, YieldSpec, logistic_params,
                    validate_assumptions, validate_yield,
                    yield_spec_from_config)
from .strategy import Strategy, make_bang_bang, make_constant, make_tabulated
from . import density as density_mod
from . import hjb as hjb_mod
from . import optimize as optimize_mod
from . import sim as sim_mod

_USAGE_ERROR = 2
_DOMAIN_ERROR = 1


def _params_from_config(cfg: dict) -> ModelParams:
    try:
        m = cfg["model"]
        if m.get("kind", "logistic") != "logistic":
            raise ContractError(
                "configs support logistic drift only; custom drifts are "
                "library-level (they need a callable)")
        return logistic_params(mu_bar=float(m["mu_bar"]),
                               kappa=float(m["kappa"]),
                               sigma=float(m["sigma"]),
                               harvest_cap=float(m["harvest_cap_M"]),
                               x_max=float(m["x_max"]) if "x_max" in m else None)
    except (KeyError, TypeError, ValueError) as exc:
        raise ContractError(f"bad model block: {exc}") from exc


def _yield_from_config(cfg: dict) -> YieldSpec:
    return yield_spec_from_config(cfg.get("yield", {"kind": "identity"}))


def _strategy_from_config(spec: dict, params: ModelParams) -> Strategy:
    kind = spec.get("kind")
    if kind == "none":
        return make_constant(0.0)
    if kind == "constant":
        return make_constant(float(spec["rate"]))
    if kind == "bang_bang":
        thr = spec.get("threshold", "optimal")
        if thr == "optimal":
            thr = optimize_mod.optimal_threshold(params).x_star
        cap = float(spec.get("cap", params.harvest_cap_M))
        return make_bang_bang(float(thr), cap)
    if kind == "tabulated":
        return make_tabulated(spec["grid"], spec["values"],
                              cap=float(spec.get("cap", params.harvest_cap_M)))
    raise ContractError(f"unknown strategy kind {kind!r}")


def _out_dir(cfg: dict, args) -> str:
    d = args.output_dir or cfg.get("output_dir", ".")
    return _io.ensure_dir(d)


def _emit_svg(cfg: dict, args) -> bool:
    if args.emit_svg is not None:
        return args.emit_svg
    return bool(cfg.get("emit_svg", False))


def _thin(xs, max_pts: int = 400):
    stride = max(1, math.ceil(len(xs) / max_pts))
    return list(xs[::stride])


# ---------------------------------------------------------------------------
# subcommands

def cmd_validate(cfg: dict, args) -> int:
    params = _params_from_config(cfg)
    yspec = _yield_from_config(cfg)
    model_report = validate_assumptions(params)
    yield_report = validate_yield(yspec)
    ok = model_report.all_pass and yield_report.all_pass
    out = _out_dir(cfg, args)
    _io.write_json(os.path.join(out, "validation.json"), {
        "all_pass": ok,
        "model": model_report.to_json_dict(),
        "yield": yield_report.to_json_dict(),
    })
    for c in model_report.failing() + yield_report.failing():
        print(f"FAIL {c.name}: {c.note}")
    print(f"validate: {'all assumptions hold' if ok else 'assumption failures'}"
          f" -> {os.path.join(out, 'validation.json')}")
    return 0 if ok else _DOMAIN_ERROR


def cmd_optimize(cfg: dict, args) -> int:
    params = _params_from_config(cfg)
    yspec = _yield_from_config(cfg)
    if yspec.kind != "identity":
        raise ContractError("optimize requires the identity yield")
    scan_n = int(cfg.get("optimize", {}).get("scan_n", 2000))
    res = optimize_mod.optimal_threshold(params, scan_n=scan_n)
    ell_star, l_star = optimize_mod.optimal_constant(params)
    out = _out_dir(cfg, args)
    payload = res.to_json_dict()
    payload["ell_star"] = ell_star
    payload["L_star"] = l_star
    _io.write_json(os.path.join(out, "threshold.json"), payload)
    _io.write_csv(os.path.join(out, "H_curve.csv"), ("eta", "H"),
                  zip(res.scan_eta.tolist(), res.scan_H.tolist()))
    if _emit_svg(cfg, args):
        svg = line_plot_svg([("H(eta)", _thin(res.scan_eta.tolist()),
                              _thin(res.scan_H.tolist()))],
                            x_label="eta", y_label="H",
                            title="asymptotic yield vs threshold")
        with open(os.path.join(out, "H_curve.svg"), "w", newline="\n") as fh:
            fh.write(svg)
    print(f"optimize: x_star={res.x_star:.10g} H={res.H_at_x_star:.10g} "
          f"bounds=({res.lower_bound:.10g}, {res.upper_bound:.10g}) "
          f"unique_max={res.unique_max_witness}")
    return 0


def cmd_sweep(cfg: dict, args) -> int:
    params = _params_from_config(cfg)
    block = cfg.get("sweep")
    if not block:
        raise ContractError("sweep config block is required")
    name = block["param"]
    values = [float(v) for v in block["values"]]
    scan_n = int(block.get("scan_n", 2000))
    detailed = optimize_mod.parameter_sweep_detailed(params, name, values,
                                                     scan_n=scan_n)
    out = _out_dir(cfg, args)
    _io.write_csv(os.path.join(out, "sweep.csv"),
                  ("param", "value", "x_star", "H_star", "lower", "upper"),
                  (row.as_csv_row() for row, _ in detailed))
    if _emit_svg(cfg, args):
        series = []
        for row, res in detailed:
            if res is None:
                continue
            series.append((f"{name}={row.value:g}",
                           _thin(res.scan_eta.tolist()),
                           _thin(res.scan_H.tolist())))
        svg = line_plot_svg(series, x_label="eta", y_label="H",
                            title=f"yield curves over {name}")
        with open(os.path.join(out, "sweep.svg"), "w", newline="\n") as fh:
            fh.write(svg)
    failures = [row for row, _ in detailed if row.error]
    for row in failures:
        print(f"sweep row {name}={row.value:g} failed: {row.error}")
    print(f"sweep: {len(detailed) - len(failures)}/{len(detailed)} rows -> "
          f"{os.path.join(out, 'sweep.csv')}")
    return 0


def cmd_hjb_verify(cfg: dict, args) -> int:
    params = _params_from_config(cfg)
    yspec = _yield_from_config(cfg)
    block = cfg.get("hjb", {})
    rho_cfg = block.get("rho", "optimal")
    x_star_cfg = block.get("x_star", "optimal")
    if rho_cfg == "optimal" or x_star_cfg == "optimal":
        if yspec.kind == "identity":
            res = optimize_mod.optimal_threshold(
                params, scan_n=int(block.get("scan_n", 2000)))
        else:
            res = optimize_mod.optimal_threshold_general(
                params, yspec, scan_n=int(block.get("scan_n", 600)))
        rho = res.H_at_x_star if rho_cfg == "optimal" else float(rho_cfg)
        x_star = res.x_star if x_star_cfg == "optimal" else float(x_star_cfg)
    else:
        rho, x_star = float(rho_cfg), float(x_star_cfg)
    rho *= float(block.get("rho_scale", 1.0))
    domain = tuple(block["domain"]) if "domain" in block else None
    profile = hjb_mod.integrate_phi(params, yspec, rho, x_star,
                                    domain=domain,
                                    step_n=int(block.get("step_n", 800)))
    report = hjb_mod.crossing_report(profile, params, rho, yspec=yspec)
    out = _out_dir(cfg, args)
    _io.write_csv(os.path.join(out, "hjb_profile.csv"),
                  ("x", "phi", "regime", "barrier"), profile.to_csv_rows())
    payload = report.to_json_dict()
    payload.update({
        "rho": rho,
        "x_star": x_star,
        "barrier_kind": profile.barrier_kind,
        "truncated_left": profile.truncated_left,
        "truncated_right": profile.truncated_right,
        "notes": list(profile.notes),
    })
    _io.write_json(os.path.join(out, "crossing.json"), payload)
    print(f"hjb-verify: verdict={report.verdict}"
          + (f" details={','.join(report.details)}" if report.details else "")
          + f" crossings={len(report.crossings)}")
    return 0 if report.verdict == "SingleFromAbove" else _DOMAIN_ERROR


def cmd_simulate(cfg: dict, args) -> int:
    params = _params_from_config(cfg)
    yspec = _yield_from_config(cfg)
    block = cfg.get("sim")
    if not block:
        raise ContractError("sim config block is required")
    strat = _strategy_from_config(block.get("strategy", {"kind": "none"}),
                                  params)
    seed = int(args.seed) if args.seed is not None else int(block["seed"])
    sim_cfg = sim_mod.SimConfig(
        x0=float(block.get("x0", 1.0)),
        horizon_T=float(block["horizon_T"]),
        dt=float(block["dt"]),
        seed=seed,
        burn_in_fraction=float(block.get("burn_in_fraction", 0.1)),
        record_every=int(block.get("record_every", 0)))
    replicates = int(block.get("replicates", 1))

    analytic = None
    source = None
    if params.drift_kind == "logistic" and yspec.kind == "identity":
        if strat.kind == "bang_bang":
            try:
                analytic = density_mod.yield_H(params, strat.threshold_x_star)
                source = "threshold_quadrature"
            except ExtinctionRegimeError:
                analytic, source = 0.0, "extinction_regime"
        elif strat.kind == "constant":
            ell = strat.rate_ell
            gap = params.mu_bar - ell - 0.5 * params.sigma2
            analytic = ell * gap / params.kappa if gap > 0 else 0.0
            source = "constant_closed_form"

    out = _out_dir(cfg, args)
    cfgs = [dataclasses.replace(sim_cfg, seed=seed + i)
            for i in range(replicates)]
    summaries = map_ordered(
        lambda c: sim_mod.simulate_path(params, strat, yspec, c),
        cfgs, gil_bound=False)
    ys = np.array([t.empirical_yield for t in summaries])
    mean = float(ys.mean())
    stderr = (float(ys.std(ddof=1) / math.sqrt(replicates))
              if replicates >= 2 else None)
    flags = [t.extinct_flag for t in summaries]
    first = summaries[0]
    payload = {
        "replicates": replicates,
        "mean": mean,
        "stderr": stderr,
        "extinct_count": int(sum(flags)),
        "extinct_majority": bool(sum(flags) * 2 > len(flags)),
        "flags": [bool(f) for f in flags],
        "analytic_yield": analytic,
        "analytic_source": source,
        "within_3_stderr": (bool(abs(mean - analytic) <= 3.0 * stderr)
                            if analytic is not None and stderr else None),
        "strategy": strat.descriptor(),
        "config": {"x0": sim_cfg.x0, "horizon_T": sim_cfg.horizon_T,
                   "dt": sim_cfg.dt, "seed": seed,
                   "burn_in_fraction": sim_cfg.burn_in_fraction},
        "first_path": first.to_json_dict(),
    }
    _io.write_json(os.path.join(out, "sim.json"), payload)
    if sim_cfg.record_every > 0 and first.trajectory is not None:
        _io.write_csv(os.path.join(out, "trajectory.csv"), ("t", "x", "v"),
                      (tuple(r) for r in first.trajectory.tolist()))
    line = f"simulate: yield={mean:.10g}"
    if stderr is not None:
        line += f" +/- {stderr:.10g}"
    if analytic is not None:
        line += f" (analytic {analytic:.10g})"
    line += f" extinct={int(sum(flags))}/{len(flags)}"
    print(line)
    return 0


def cmd_density(cfg: dict, args) -> int:
    params = _params_from_config(cfg)
    block = cfg.get("density", {})
    strat = _strategy_from_config(block.get("strategy", {"kind": "none"}),
                                  params)
    grid_n = int(block.get("grid_n", 4000))
    profile = density_mod.stationary_density(params, strat, grid_n=grid_n)
    residual = density_mod.fokker_planck_residual(params, strat, profile)
    out = _out_dir(cfg, args)
    _io.write_csv(os.path.join(out, "density.csv"), ("y", "rho"),
                  profile.to_csv_rows())
    sidecar = profile.sidecar_dict()
    sidecar.update({
        "trapezoid_mass": profile.trapezoid_mass(),
        "mean": profile.mean(),
        "fokker_planck_residual": residual,
    })
    _io.write_json(os.path.join(out, "density.json"), sidecar)
    if _emit_svg(cfg, args):
        svg = line_plot_svg([("rho(y)", _thin(profile.grid.tolist(), 800),
                              _thin(profile.values.tolist(), 800))],
                            x_label="y", y_label="rho",
                            title="stationary density")
        with open(os.path.join(out, "density.svg"), "w", newline="\n") as fh:
            fh.write(svg)
    print(f"density: {profile.grid.size} points, mass="
          f"{profile.trapezoid_mass():.10g}, residual={residual:.3g}")
    return 0


_COMMANDS = {
    "validate": cmd_validate,
    "optimize": cmd_optimize,
    "sweep": cmd_sweep,
    "hjb-verify": cmd_hjb_verify,
    "simulate": cmd_simulate,
    "density": cmd_density,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ergoharvest",
        description="Optimal ergodic harvesting of a stochastic logistic "
                    "population: thresholds, densities, HJB verification, "
                    "and Monte Carlo cross-checks.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("config", help="path to a JSON run configuration")
        p.add_argument("--output-dir", default=None)
        p.add_argument("--emit-svg", default=None,
                       action=argparse.BooleanOptionalAction)
        p.add_argument("--seed", default=None, type=int,
                       help="override the simulation seed")
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        with open(args.config, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return _USAGE_ERROR
    try:
        return _COMMANDS[args.command](cfg, args)
    except ExtinctionRegimeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _DOMAIN_ERROR
    except (ContractError, DomainError, KeyError, TypeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _USAGE_ERROR
    except HarvestError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _DOMAIN_ERROR


def entry() -> None:
    raise SystemExit(main())
