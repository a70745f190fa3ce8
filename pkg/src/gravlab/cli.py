"""Command line for the lab: run a solver, compare two, time the methods.

Configuration resolves in three layers: the named case's stock recipe,
then values from an optional config file, then individual flags, with
later layers winning.  Every run directory gets its manifest written
before any solver starts, so a crashed run still records what it was.
"""

from __future__ import annotations

import argparse
import shlex
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .benchmark import compare_case, evaluation_points, scaling_experiment
from .domain import (SOLVER_IDS, CaseConfig, ConfigError, decode_config_value,
                     parse_config_text, preset_case)
from .fd_solver import SolverError, run_case
from .io import (FormatError, default_output_root, make_manifest,
                 mismatch_report_text, scaling_report_text, write_manifest,
                 write_snapshot, write_state_snapshot)
from .linear_theory import RegimeError, evaluate_mode
from .network import CheckpointError, save_checkpoint
from .pinn import TrainingError, case_mode, predict, train

_CASE_ALIASES = {"1": "case1", "2": "case2", "3": "case3"}

# flags exposed on every subcommand, mapped onto CaseConfig fields
_CONFIG_FLAGS = (
    "solver", "amplitude", "wavelength_ratio", "gravity", "t_end",
    "grid_points", "courant", "hidden", "n_interior", "n_boundary",
    "n_initial", "adam_epochs", "learning_rate", "lbfgs_max_iters",
    "omega0", "seed",
)


def _parse_times(text: str) -> tuple[float, ...]:
    try:
        times = tuple(float(tok) for tok in text.split(",") if tok.strip())
    except ValueError as exc:
        raise ConfigError(f"bad time list {text!r}") from exc
    if not times:
        raise ConfigError("no output times given")
    return times


def _add_config_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--case", help="case id or its numeric shorthand")
    sub.add_argument("--dim", type=int,
                     help="spatial dimension; picks the oblique variant of case 1")
    sub.add_argument("--config", help="key-value configuration file")
    for name in _CONFIG_FLAGS:
        sub.add_argument("--" + name.replace("_", "-"), dest=name, metavar="V")
    sub.add_argument("--out", help="output directory (default under the run root)")


def resolve_case_id(token: str, dim: int | None) -> str:
    case_id = _CASE_ALIASES.get(token, token)
    if case_id == "case1" and dim == 3:
        case_id = "case1_oblique"
    if case_id == "case1_oblique" and dim == 1:
        case_id = "case1"
    cfg = preset_case(case_id)
    if dim is not None and cfg.dimension != dim:
        raise ConfigError(f"case {case_id!r} has no {dim}-dimensional variant")
    return case_id


def build_config(args) -> CaseConfig:
    file_text = Path(args.config).read_text() if args.config else None
    if args.case is not None:
        base = preset_case(resolve_case_id(args.case, args.dim))
        config = base
        if file_text is not None:
            config = parse_config_text(file_text, base=base)
            if config.case != base.case:
                raise ConfigError("config file names a different case than --case")
    elif file_text is not None:
        config = parse_config_text(file_text)
        if args.dim is not None and config.dimension != args.dim:
            raise ConfigError("--dim disagrees with the config file")
    else:
        raise ConfigError("give --case or --config")

    overrides = {}
    for name in _CONFIG_FLAGS:
        raw = getattr(args, name)
        if raw is not None:
            overrides[name] = decode_config_value(name, raw)
    return replace(config, **overrides) if overrides else config


def _start_run(args, config: CaseConfig, name: str) -> Path:
    out = Path(args.out) if args.out else default_output_root() / name
    command = "gravlab " + " ".join(shlex.quote(a) for a in args.raw_argv)
    write_manifest(out, make_manifest(command, config, out))
    return out


def _snapshot_name(solver: str, t: float) -> str:
    return f"snapshot_{solver}_t{t:g}.csv"


def cmd_run(args) -> int:
    config = build_config(args)
    times = _parse_times(args.times) if args.times else (config.t_end,)
    out = _start_run(args, config, f"run_{config.case}_{config.solver}")
    solver = config.solver

    if solver == "fd":
        traj = run_case(config, times)
        for t in times:
            state = traj.at_time(t)
            path = out / _snapshot_name("fd", t)
            write_state_snapshot(path, state, case=config.case)
            print(f"wrote {path}")
    elif solver == "lt":
        mode = case_mode(config)
        points = evaluation_points(config)
        for t in times:
            f = evaluate_mode(mode, points, t)
            path = out / _snapshot_name("lt", t)
            write_snapshot(path, points, t, f.rho, f.v, f.phi, case=config.case)
            print(f"wrote {path}")
    elif solver == "grinn":
        model = train(config)
        ckpt = out / "checkpoint.bin"
        save_checkpoint(ckpt, model.net_spec, model.params, model.seed)
        print(f"wrote {ckpt}")
        _write_history(out / "history.txt", model)
        points = evaluation_points(config)
        for t in times:
            q = np.column_stack([points, np.full(points.shape[0], t)])
            p = predict(model, q)
            path = out / _snapshot_name("grinn", t)
            write_snapshot(path, points, t, p.rho, p.v, p.phi, case=config.case)
            tag = " (extrapolated)" if bool(p.extrapolated.any()) else ""
            print(f"wrote {path}{tag}")
        if model.warning:
            print(f"training warning: {model.warning}")
    else:
        raise ConfigError(f"unknown solver {solver!r}")
    return 0


def _write_history(path: Path, model) -> None:
    lines = ["# training history", "columns epoch phase pde boundary initial total"]
    for rep in model.history:
        lines.append(f"{rep.epoch} {rep.phase} {rep.pde!r} {rep.boundary!r} "
                     f"{rep.initial!r} {rep.total!r}")
    path.write_text("\n".join(lines) + "\n")
    print(f"wrote {path}")


def _print_report(report) -> None:
    print(f"mismatch {report.solver_a} vs {report.solver_b} on {report.case}")
    print(f"{'time':>8} {'field':>6} {'kind':>8} {'mean%':>10} {'max%':>10}")
    for r in report.records:
        print(f"{r.time:8.3f} {r.fieldname:>6} {r.kind:>8} "
              f"{r.mean:10.4f} {r.max:10.4f}")


def cmd_compare(args) -> int:
    config = build_config(args)
    try:
        solver_a, solver_b = (s.strip() for s in args.solvers.split(","))
    except ValueError as exc:
        raise ConfigError("--solvers takes exactly two comma-separated ids") from exc
    for s in (solver_a, solver_b):
        if s not in SOLVER_IDS:
            raise ConfigError(f"unknown solver {s!r}")
    times = _parse_times(args.times)
    out = _start_run(args, config,
                     f"compare_{config.case}_{solver_a}_vs_{solver_b}")
    report = compare_case(config, solver_a, solver_b, times,
                          per_axis=args.per_axis)
    path = out / f"mismatch_{solver_a}_vs_{solver_b}.txt"
    path.write_text(mismatch_report_text(report))
    _print_report(report)
    print(f"wrote {path}")
    return 0


def cmd_scale(args) -> int:
    config = preset_case("case1")
    args.config = None
    out = _start_run(args, config, f"scale_{args.kind}")
    report = scaling_experiment(args.kind, repeats=args.repeats)
    path = out / f"scaling_{args.kind}.txt"
    path.write_text(scaling_report_text(report))
    for r in report.records:
        print(f"{r.solver:>6} {r.label:>8} {r.quantity:<22} {r.value:.6g}")
    print(f"wrote {path}")
    return 0


def cmd_extrapolate(args) -> int:
    config = build_config(args)
    train_to = float(args.train_to)
    predict_to = float(args.predict_to)
    if predict_to <= train_to:
        raise ConfigError("--predict-to must exceed --train-to")
    train_cfg = replace(config, t_end=train_to, solver="grinn")
    out = _start_run(args, train_cfg, f"extrapolate_{config.case}")
    model = train(train_cfg)
    ckpt = out / "checkpoint.bin"
    save_checkpoint(ckpt, model.net_spec, model.params, model.seed)
    times = _parse_times(args.times) if args.times else (predict_to,)
    fd_cfg = replace(config, t_end=predict_to, solver="fd")
    report = compare_case(fd_cfg, "grinn", "fd", times,
                          artifacts={"grinn": model})
    path = out / "mismatch_grinn_vs_fd.txt"
    path.write_text(mismatch_report_text(report))
    _print_report(report)
    print(f"trained on [0, {train_to:g}], compared at "
          + ", ".join(f"t={t:g}" for t in times))
    print(f"wrote {ckpt}")
    print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gravlab",
        description="Isothermal self-gravitating hydrodynamics laboratory")
    subs = parser.add_subparsers(dest="command", required=True)

    p_run = subs.add_parser("run", help="run one solver on one case")
    _add_config_flags(p_run)
    p_run.add_argument("--times", help="comma-separated output times")
    p_run.set_defaults(func=cmd_run)

    p_cmp = subs.add_parser("compare", help="mismatch between two solvers")
    _add_config_flags(p_cmp)
    p_cmp.add_argument("--solvers", required=True,
                       help="two solver ids, e.g. grinn,lt")
    p_cmp.add_argument("--times", required=True,
                       help="comma-separated comparison times")
    p_cmp.add_argument("--per-axis", type=int, default=None,
                       help="evaluation nodes per axis")
    p_cmp.set_defaults(func=cmd_compare)

    p_scl = subs.add_parser("scale", help="relative cost studies")
    p_scl.add_argument("--kind", choices=("dimension", "time"),
                       required=True)
    p_scl.add_argument("--repeats", type=int, default=3)
    p_scl.add_argument("--out", help="output directory")
    p_scl.set_defaults(func=cmd_scale)

    p_ext = subs.add_parser("extrapolate",
                            help="train on a short window, predict beyond it")
    _add_config_flags(p_ext)
    p_ext.add_argument("--train-to", required=True,
                       help="end of the training window")
    p_ext.add_argument("--predict-to", required=True,
                       help="time to predict and compare against the grid run")
    p_ext.add_argument("--times", help="comparison times (default: predict-to)")
    p_ext.set_defaults(func=cmd_extrapolate)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    args.raw_argv = argv
    try:
        return args.func(args)
    except (ConfigError, SolverError, RegimeError, TrainingError,
            CheckpointError, FormatError, OSError) as exc:
        print(f"gravlab-error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
