"""Command-line front end.

Subcommands: solve, metrics, sweep, dynamics, simulate, intervene,
calibrate.  Inputs come from flags or a JSON config file (flags override
config values); outputs are CSV or JSON with floats at 12 significant
digits, so identical config + seed reproduces byte-identical files.

Exit codes: 0 success, 2 configuration errors, 3 domain errors (with a
machine-readable JSON error record on stderr).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import equilibrium, intervention, metrics
from .densities import Biased, PointMass, TruncNormal, Uniform, density_from_dict
from .equilibrium import ContestSpec, GroupSpec, ThresholdPolicy
from .errors import ContestError
from .finite_contest import DynamicsHyper, FiniteContest, run_dynamics, simulate_contest
from .metrics import MeritFn

OUTPUT_DIR_ENV = "CONTESTEQ_OUTPUT_DIR"


def _fmt(x) -> str:
    return f"{x:.12g}"


def _round12(obj):
    """Round floats to 12 significant digits for stable serialized output."""
    if isinstance(obj, float):
        if math.isfinite(obj):
            return float(f"{obj:.12g}")
        return obj
    if isinstance(obj, dict):
        return {k: _round12(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round12(v) for v in obj]
    return obj


def _emit(text: str, output: str | None) -> None:
    if output is None:
        sys.stdout.write(text)
        return
    path = Path(output)
    base = os.environ.get(OUTPUT_DIR_ENV)
    if base and not path.is_absolute():
        path = Path(base) / path
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _emit_json(payload: dict, output: str | None) -> None:
    _emit(json.dumps(_round12(payload), sort_keys=True, indent=2) + "\n", output)


def _parse_range(text: str) -> np.ndarray:
    try:
        lo, hi, step = (float(p) for p in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"range {text!r} must look like lo:hi:step"
        ) from None
    if step <= 0 or hi < lo:
        raise argparse.ArgumentTypeError(f"range {text!r} must be increasing")
    return np.minimum(np.arange(lo, hi + step / 2, step), hi)


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    with open(path) as fh:
        cfg = json.load(fh)
    if not isinstance(cfg, dict):
        raise ValueError("config root must be an object")
    return cfg


def _merged(args: argparse.Namespace, defaults: dict) -> dict:
    """Config-file values override defaults; explicit flags override both."""
    cfg = dict(defaults)
    cfg.update(_load_config(getattr(args, "config", None)))
    for key in defaults:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    return cfg


def _contest_from(cfg: dict) -> ContestSpec:
    if cfg.get("contest") is not None:
        spec = cfg["contest"]
        if isinstance(spec, str):
            with open(spec) as fh:
                spec = json.load(fh)
        return ContestSpec.from_dict(spec)
    return equilibrium.two_group_uniform_contest(
        float(cfg["rho"]), float(cfg["c"]), float(cfg["alpha"])
    )


def _merit_from(cfg: dict) -> MeritFn:
    merit = cfg.get("merit")
    if merit is None:
        return MeritFn.identity()
    if isinstance(merit, str):
        merit = json.loads(merit)
    return MeritFn.from_dict(merit)


# -- subcommand handlers ------------------------------------------------------


def _cmd_solve(args) -> int:
    cfg = _merged(args, {"contest": None, "rho": 0.8, "c": 0.1, "alpha": 0.5, "n": None})
    spec = _contest_from(cfg)
    policy = equilibrium.solve_threshold(spec)
    if cfg.get("n") is not None:
        n = int(cfg["n"])
        delta, eps = equilibrium.finite_shift(policy, spec, n)
        policy = dataclasses.replace(policy, delta_n=delta, epsilon_n=eps, n=n)
    _emit_json(policy.to_dict(), args.output)
    return 0


def _cmd_metrics(args) -> int:
    cfg = _merged(
        args,
        {"contest": None, "rho": 0.8, "c": 0.1, "alpha": 0.5, "merit": None,
         "format": "json"},
    )
    spec = _contest_from(cfg)
    merit = _merit_from(cfg)
    policy = equilibrium.solve_threshold(spec)
    report = metrics.general_metrics(spec, policy, merit)
    if cfg["format"] == "csv":
        rho = float(cfg["rho"]) if cfg.get("contest") is None else float("nan")
        c = spec.selection_fraction
        alpha = spec.groups[-1].weight
        text = (
            metrics.metrics_csv_header()
            + "\n"
            + metrics.metrics_csv_row(rho, c, alpha, policy.t, report)
            + "\n"
        )
        _emit(text, args.output)
    else:
        payload = report.to_dict()
        payload["t"] = policy.t
        _emit_json(payload, args.output)
    return 0


def _tn_pair(rho: float, c: float, alpha: float, mu: float, sigma: float) -> ContestSpec:
    return ContestSpec(
        groups=(
            GroupSpec(weight=1.0 - alpha, valuation=TruncNormal(mu, sigma, 0.0, 1.0)),
            GroupSpec(weight=alpha, valuation=TruncNormal(rho * mu, sigma, 0.0, 1.0)),
        ),
        ability=PointMass(0.0),
        selection_fraction=c,
    )


def _cmd_sweep(args) -> int:
    cfg = _merged(
        args,
        {"family": "uniform", "rho": 0.8, "c": 0.1, "alpha": 0.5,
         "rho_range": None, "c_range": None, "mu": 0.5, "sigma": 0.1},
    )
    rhos = cfg["rho_range"] if cfg["rho_range"] is not None else [float(cfg["rho"])]
    cs = cfg["c_range"] if cfg["c_range"] is not None else [float(cfg["c"])]
    if isinstance(rhos, str):
        rhos = _parse_range(rhos)
    if isinstance(cs, str):
        cs = _parse_range(cs)
    alpha = float(cfg["alpha"])
    lines = [metrics.metrics_csv_header()]
    for rho in rhos:
        for c in cs:
            rho, c = float(rho), float(c)
            if cfg["family"] == "uniform":
                report = metrics.uniform_metrics(rho, c, alpha)
                t = equilibrium.uniform_closed_threshold(rho, c, alpha)
            elif cfg["family"] == "truncnormal":
                spec = _tn_pair(rho, c, alpha, float(cfg["mu"]), float(cfg["sigma"]))
                policy = equilibrium.solve_threshold(spec)
                report = metrics.general_metrics(spec, policy)
                t = policy.t
            else:
                raise ContestError(f"unknown sweep family {cfg['family']!r}")
            lines.append(metrics.metrics_csv_row(rho, c, alpha, t, report))
    _emit("\n".join(lines) + "\n", args.output)
    return 0


def _cmd_dynamics(args) -> int:
    cfg = _merged(
        args,
        {"n1": 600, "n2": 600, "rho": 0.8, "c": 0.2, "m_v": 101, "m_e": 101,
         "iterations": 500, "step": None, "seed": 0, "deltas_output": None},
    )
    n1, n2 = int(cfg["n1"]), int(cfg["n2"])
    rho, c = float(cfg["rho"]), float(cfg["c"])
    contest = FiniteContest(
        n1=n1,
        n2=n2,
        k=math.floor(c * (n1 + n2)),
        p1=Uniform(0.0, 1.0),
        p2=Biased(Uniform(0.0, 1.0), rho),
        seed=int(cfg["seed"]),
    )
    hyper = DynamicsHyper(
        m_v=int(cfg["m_v"]),
        m_e=int(cfg["m_e"]),
        iterations=int(cfg["iterations"]),
        step=float(cfg["step"]) if cfg["step"] is not None else 0.1,
    )
    trace = run_dynamics(contest, rho, c, hyper)
    _emit(trace.final_policies_csv(), args.output)
    if cfg.get("deltas_output"):
        _emit(trace.deltas_csv(), cfg["deltas_output"])
    return 0


def _cmd_simulate(args) -> int:
    cfg = _merged(
        args,
        {"rho": 0.9, "c": 0.1, "alpha": 0.5, "n": 1000, "trials": 200,
         "seed": 0, "shift": False},
    )
    n = int(cfg["n"])
    rho, c, alpha = float(cfg["rho"]), float(cfg["c"]), float(cfg["alpha"])
    n2 = round(alpha * n)
    n1 = n - n2
    spec = equilibrium.two_group_uniform_contest(rho, c, alpha)
    policy = equilibrium.solve_threshold(spec)
    if cfg["shift"]:
        delta, eps = equilibrium.finite_shift(policy, spec, n)
        policy = dataclasses.replace(policy, delta_n=delta, epsilon_n=eps, n=n)
    contest = FiniteContest(
        n1=n1,
        n2=n2,
        k=math.floor(c * n),
        p1=Uniform(0.0, 1.0),
        p2=Biased(Uniform(0.0, 1.0), rho),
        seed=int(cfg["seed"]),
    )
    report = simulate_contest(contest, policy, int(cfg["trials"]))
    payload = report.to_dict()
    payload["t"] = policy.t
    payload["delta_n"] = policy.delta_n
    payload["epsilon_n"] = policy.epsilon_n
    _emit_json(payload, args.output)
    return 0


def _cmd_intervene(args) -> int:
    cfg = _merged(
        args,
        {"rho": 0.882, "c": 0.268, "alpha": 0.228, "cost_coeff": 5.0,
         "cost_exponent": 1.1, "tau": 0.8, "sweep_tau": None, "merit": None},
    )
    base = intervention.InterventionSpec(
        rho=float(cfg["rho"]),
        c=float(cfg["c"]),
        alpha=float(cfg["alpha"]),
        cost_coeff=float(cfg["cost_coeff"]),
        cost_exponent=float(cfg["cost_exponent"]),
        merit=_merit_from(cfg),
        tau=float(cfg["tau"]),
    )
    if cfg["sweep_tau"] is not None:
        taus = cfg["sweep_tau"]
        if isinstance(taus, str):
            taus = _parse_range(taus)
        results = intervention.sweep_tau(base, taus)
        _emit(intervention.sweep_csv(results), args.output)
    else:
        _emit_json(intervention.optimize(base).to_dict(), args.output)
    return 0


def _cmd_calibrate(args) -> int:
    cfg = _merged(args, {"r_obs": 0.671, "c": 0.268, "alpha": 0.228})
    rho = intervention.calibrate_rho(
        float(cfg["r_obs"]), float(cfg["c"]), float(cfg["alpha"])
    )
    _emit(f"{rho:.6f}\n", args.output)
    return 0


# -- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="contesteq",
        description="Contest equilibrium thresholds, fairness metrics, dynamics, "
        "and intervention optimization.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file; flags override its values")
        p.add_argument("--output", help=f"output path (relative to ${OUTPUT_DIR_ENV} if set)")

    p = sub.add_parser("solve", help="solve the equilibrium threshold")
    common(p)
    p.add_argument("--contest", help="contest spec JSON file")
    p.add_argument("--rho", type=float)
    p.add_argument("--c", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--n", type=int, help="also compute the finite-population shift")
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("metrics", help="metrics at the solved threshold")
    common(p)
    p.add_argument("--contest")
    p.add_argument("--rho", type=float)
    p.add_argument("--c", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--merit", help="merit function JSON")
    p.add_argument("--format", choices=["json", "csv"])
    p.set_defaults(func=_cmd_metrics)

    p = sub.add_parser("sweep", help="metric grids over rho and/or c")
    common(p)
    p.add_argument("--family", choices=["uniform", "truncnormal"])
    p.add_argument("--rho", type=float)
    p.add_argument("--c", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--rho-range", dest="rho_range", help="lo:hi:step")
    p.add_argument("--c-range", dest="c_range", help="lo:hi:step")
    p.add_argument("--mu", type=float)
    p.add_argument("--sigma", type=float)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("dynamics", help="best-response dynamics trace")
    common(p)
    p.add_argument("--n1", type=int)
    p.add_argument("--n2", type=int)
    p.add_argument("--rho", type=float)
    p.add_argument("--c", type=float)
    p.add_argument("--m-v", dest="m_v", type=int)
    p.add_argument("--m-e", dest="m_e", type=int)
    p.add_argument("--iterations", type=int)
    p.add_argument("--step", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--deltas-output", dest="deltas_output")
    p.set_defaults(func=_cmd_dynamics)

    p = sub.add_parser("simulate", help="Monte-Carlo contest simulation")
    common(p)
    p.add_argument("--rho", type=float)
    p.add_argument("--c", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--n", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--shift", action="store_const", const=True,
                   help="apply the finite-population participation shift")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("intervene", help="optimal fairness intervention")
    common(p)
    p.add_argument("--rho", type=float)
    p.add_argument("--c", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--cost-coeff", dest="cost_coeff", type=float)
    p.add_argument("--cost-exponent", dest="cost_exponent", type=float)
    p.add_argument("--tau", type=float)
    p.add_argument("--sweep-tau", dest="sweep_tau", help="lo:hi:step")
    p.add_argument("--merit", help="merit function JSON")
    p.set_defaults(func=_cmd_intervene)

    p = sub.add_parser("calibrate", help="bias parameter from an observed ratio")
    common(p)
    p.add_argument("--r-obs", dest="r_obs", type=float)
    p.add_argument("--c", type=float)
    p.add_argument("--alpha", type=float)
    p.set_defaults(func=_cmd_calibrate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ContestError as exc:
        record = {"error": type(exc).__name__, "message": str(exc)}
        print(json.dumps(record, sort_keys=True), file=sys.stderr)
        return 3
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        record = {"error": type(exc).__name__, "message": str(exc)}
        print(json.dumps(record, sort_keys=True), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
