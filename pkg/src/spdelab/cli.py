"""Command-line entry point: ``spdelab <command> [options]``.

Exit status: 0 success, 2 validation/configuration error, 3 solver error,
4 partial statistical run.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

import numpy as np

from . import io
from .config import build_model, build_rng, build_scheme, config_hash, initial_datum, load_config
from .control import CostSpec, ControlFamily, TerminalPayoff, optimize_control
from .diagnostics import (
    LEDGER_COLUMNS,
    default_delta,
    energy_ledger,
    l1_contraction_probe,
    refinement_study,
    suggested_delta,
)
from .ergodic import PROFILE_COLUMNS, TestFunctional, boundedness_profile, test_function_average, time_average_measure
from .errors import ConfigurationError, DataError, NumericError, SolverError, ValidationError
from .model import validate_assumptions
from .parallel import make_mapper, resolve_threads
from .scheme import TRAJECTORY_COLUMNS, run_trajectory

logger = logging.getLogger("spdelab")

EXIT_OK, EXIT_VALIDATION, EXIT_SOLVER, EXIT_PARTIAL = 0, 2, 3, 4
COMMANDS = ("simulate", "certify", "uniqueness", "control-opt", "invariant", "check-model")


class Context:
    def __init__(self, args):
        self.cfg = load_config(args.config, args.set or (), args.seed)
        if getattr(args, "paths", None) is not None:
            key = {"simulate": "simulate", "certify": "certify", "uniqueness": "uniqueness", "control-opt": "control"}.get(
                args.command
            )
            if key is None:
                raise ConfigurationError(f"--paths is not used by {args.command}")
            self.cfg[key]["paths"] = int(args.paths)
        self.out = args.out or self.cfg["output"]["dir"]
        self.mapper = make_mapper(resolve_threads(args.threads))
        self.hash = config_hash(self.cfg)
        self.seed = int(self.cfg["rng"]["seed"])
        self.command = args.command

    @property
    def head(self):
        return io.header(self.hash, self.seed, self.command)

    def path(self, name):
        return os.path.join(self.out, name)


def cmd_simulate(ctx: Context) -> int:
    cfg = ctx.cfg
    model, scheme, rng = build_model(cfg), build_scheme(cfg), build_rng(cfg)
    n = int(cfg["simulate"]["paths"])
    trajs = ctx.mapper(lambda j: run_trajectory(model, scheme, None, rng, j), range(n))
    summary = []
    for j, tr in enumerate(trajs):
        io.write_csv(ctx.path(f"trajectory_path{j}.csv"), TRAJECTORY_COLUMNS, tr.summary_rows(), ctx.head)
        led = energy_ledger(tr, model, scheme.tol_nl)
        io.write_csv(ctx.path(f"ledger_path{j}.csv"), LEDGER_COLUMNS, led.rows(), ctx.head)
        if cfg["simulate"]["dump_states"]:
            io.write_states(ctx.path(f"states_path{j}.f64"), tr.states, ctx.head)
        bound = scheme.tol_nl * (1.0 + tr.rhs_norms)
        summary.append(
            {
                "path": j,
                "max_relative_residual": float(np.max(tr.residuals / (1.0 + tr.rhs_norms))),
                "residual_contract": bool(np.all(tr.residuals <= bound)),
                "ledger_passed": led.passed,
                "max_abs_identity_residual": float(np.max(np.abs(led.residual))),
                "newton_iters_mean": float(tr.newton_iters.mean()),
                "smoothing_slack": tr.smoothing.slack if tr.smoothing else None,
            }
        )
    io.write_json(ctx.path("simulate_summary.json"), {"paths": summary}, ctx.head, ctx.cfg)
    return EXIT_OK


def cmd_certify(ctx: Context) -> int:
    cfg = ctx.cfg
    c = cfg["certify"]
    model, scheme, rng = build_model(cfg), build_scheme(cfg), build_rng(cfg)
    u0 = np.zeros(model.mesh.node_count) if c["from_rest"] else None
    study = refinement_study(
        model, scheme, [int(v) for v in c["step_counts"]], int(c["paths"]), rng, u0=u0, coupled=bool(c["coupled"]), mapper=ctx.mapper
    )
    rows = []
    for t in study["tables"]:
        for name, est in t.to_dict().items():
            if isinstance(est, dict):
                rows.append((t.kappa, name, est["mean"], est["se"]))
    io.write_csv(ctx.path("certify_table.csv"), ("kappa", "quantity", "mean", "se"), rows, ctx.head)
    payload = {
        "tables": [t.to_dict() for t in study["tables"]],
        "trends": study["trends"],
        "gap_ratios": study["gap_ratios"],
        "coupled": study["coupled"],
    }
    io.write_json(ctx.path("certify.json"), payload, ctx.head, ctx.cfg)
    return EXIT_OK


def cmd_uniqueness(ctx: Context) -> int:
    cfg = ctx.cfg
    c = cfg["uniqueness"]
    model, scheme, rng = build_model(cfg), build_scheme(cfg), build_rng(cfg)
    ua = model.u0
    x = (model.mesh.nodes - model.mesh.a) / model.mesh.length
    ub = ua + float(c["perturbation"]) * np.sin(2.0 * np.pi * x)
    thetas = [float(t) for t in c["thetas"]]
    rep = l1_contraction_probe(model, scheme, ua, ub, rng, int(c["paths"]), thetas, mapper=ctx.mapper)
    cols = ("time", "mean_l1") + tuple(f"mean_upsilon_{t:g}" for t in thetas)
    sm = [rep.smoothed[t].mean(axis=0) for t in thetas]
    rows = [(rep.times[k], rep.mean_curve[k], *[s[k] for s in sm]) for k in range(rep.times.size)]
    io.write_csv(ctx.path("uniqueness_curves.csv"), cols, rows, ctx.head)
    io.write_json(ctx.path("uniqueness.json"), rep.to_dict(), ctx.head, ctx.cfg)
    return EXIT_OK


def _cost_spec(cfg, model, scheme, rng) -> CostSpec:
    c = cfg["cost"]
    kind = c["target"]
    mesh = model.mesh
    if kind == "zero":
        u_det = None
    elif kind == "constant":
        u_det = np.full(mesh.node_count, float(c["target_value"]))
    elif kind == "uncontrolled":
        u_det = run_trajectory(model, scheme, None, rng, 0, record_noise=False).states
    else:
        raise ConfigurationError(f"cost.target must be zero, constant or uncontrolled, got {kind!r}")
    psi = TerminalPayoff(**c["psi"])
    return CostSpec(u_det=u_det, psi=psi, control_weight=float(c["control_weight"]))


def cmd_control(ctx: Context) -> int:
    cfg = ctx.cfg
    c = cfg["control"]
    model, rng = build_model(cfg), build_rng(cfg)
    scheme = build_scheme(cfg, steps=int(c["steps"]))
    family = ControlFamily(model.mesh, scheme.horizon, int(c["time_blocks"]), int(c["modes"]))
    spec = _cost_spec(cfg, model, scheme, rng)
    res = optimize_control(
        model,
        scheme,
        family,
        spec,
        rng,
        budget=int(c["budget"]),
        n_paths=int(c["paths"]),
        step=float(c["step"]),
        shrink=float(c["shrink"]),
        min_step=float(c["min_step"]),
        mapper=ctx.mapper,
    )
    cols = ("iteration",) + tuple(f"theta_{i}" for i in range(family.size)) + ("cost_mean", "cost_se")
    rows = [(it, *th, mean, se) for it, th, mean, se in res.trace]
    io.write_csv(ctx.path("control_trace.csv"), cols, rows, ctx.head)
    partial = any(not np.isfinite(r[2]) for r in res.trace)
    payload = {
        "theta": res.theta,
        "incumbents": res.incumbents,
        "status": res.status,
        "evaluations": res.evaluations,
        "control_norm_sq": family.penalty(res.theta),
        "psi_lipschitz": spec.psi.lipschitz(model.mesh),
    }
    io.write_json(ctx.path("control_summary.json"), payload, ctx.head, ctx.cfg)
    return EXIT_PARTIAL if partial else EXIT_OK


def cmd_invariant(ctx: Context) -> int:
    cfg = ctx.cfg
    e = cfg["ergodic"]
    model, rng = build_model(cfg), build_rng(cfg)
    scheme = build_scheme(cfg, steps=int(e["steps"]), horizon=float(e["horizon"]))
    delta = default_delta(model) if e["delta"] is None else float(e["delta"])
    meas = time_average_measure(model, scheme, rng, 0, float(e["burn_in"]), int(e["stride"]), delta=delta)
    rows = boundedness_profile(meas, [float(r) for r in e["radii"]], model, delta)
    io.write_csv(ctx.path("invariant_profile.csv"), PROFILE_COLUMNS, rows, ctx.head)
    io.write_states(ctx.path("invariant_snapshots.f64"), meas.snapshots, ctx.head)
    payload = {"snapshots": meas.size, "partial": meas.partial, "error": meas.error, "min_margin": meas.min_margin}
    payload["delta"] = delta
    payload["delta_suggested"] = suggested_delta(model)
    if meas.size >= 2:
        avg = test_function_average(meas, TestFunctional("exp", float(e["phi_c"])))
        payload["phi_exp"] = {"final": avg.final, "se": avg.se, "cauchy_gap": avg.cauchy_gap}
    io.write_json(ctx.path("invariant.json"), payload, ctx.head, ctx.cfg)
    return EXIT_PARTIAL if meas.partial else EXIT_OK


def cmd_check_model(ctx: Context) -> int:
    model = build_model(ctx.cfg)
    rep = validate_assumptions(model)
    io.write_json(ctx.path("assumption_report.json"), rep.to_dict(), ctx.head, ctx.cfg)
    doc = {"header": ctx.head}
    doc.update(rep.to_dict())
    sys.stdout.write(_dump(doc) + "\n")
    if not rep.passed:
        sys.stderr.write(f"assumption checks failed: {', '.join(rep.failed())}\n")
        return EXIT_VALIDATION
    return EXIT_OK


def _dump(doc):
    import json

    return json.dumps(io._jsonable(doc), indent=2)


HANDLERS = {
    "simulate": cmd_simulate,
    "certify": cmd_certify,
    "uniqueness": cmd_uniqueness,
    "control-opt": cmd_control,
    "invariant": cmd_invariant,
    "check-model": cmd_check_model,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spdelab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", "-c", help="YAML configuration file (defaults are shipped)")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="dotted override, e.g. scheme.steps=128")
        p.add_argument("--seed", type=int, help="master seed (beats the config and the SPDELAB_SEED variable)")
        p.add_argument("--threads", type=int, default=None, help="worker threads for path-parallel runs")
        p.add_argument("--out", help="output directory")
        if name in ("simulate", "certify", "uniqueness", "control-opt"):
            p.add_argument("--paths", type=int, help="number of sample paths")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def dispatch(command: str, config_path=None, overrides=(), **options) -> int:
    argv = [command]
    if config_path:
        argv += ["--config", str(config_path)]
    for o in overrides:
        argv += ["--set", o]
    for k, v in options.items():
        if v is not None:
            argv += [f"--{k}", str(v)]
    return main(argv)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        ctx = Context(args)
        return HANDLERS[args.command](ctx)
    except (ConfigurationError, ValidationError, DataError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_VALIDATION
    except (SolverError, NumericError) as exc:
        sys.stderr.write(f"solver error: {exc}\n")
        return EXIT_SOLVER


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
