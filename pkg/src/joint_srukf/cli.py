"""Command-line interface: ``joint-srukf <subcommand> [options]``."""
import argparse
import csv
import os
import sys

import numpy as np

from . import io
from .analysis import cumulative_error, pca_dominance, reconstruct_g
from .config import OBSERVERS, ExperimentConfig, parse_value
from .errors import ConfigError, JointSRUKFError
from .experiment import (
    compare_observers,
    dominance_lines,
    horseshoe_spec,
    load_logs,
    run_experiment,
    simulate,
    write_outputs,
)
from .models import FunctionLibrary, JointState, duffing_joint_model, duffing_missing_term
from .observability import check_observability
from .prior import density_comparison, sigma_star
from .srukf import PseudoMeasurement

EXIT_NOT_OBSERVABLE = 1
EXIT_CONFIG = 2
EXIT_FILTER = 3


def _load_config(args):
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "out", None) is not None:
        overrides["output_dir"] = args.out
    if getattr(args, "observer", None):
        overrides["observer"] = args.observer[0]
    for item in getattr(args, "set", None) or []:
        if "=" not in item:
            raise ConfigError(item, "expected KEY=VALUE")
        k, v = item.split("=", 1)
        overrides[k.strip()] = parse_value(v)
    if args.config:
        return ExperimentConfig.from_file(args.config, **overrides)
    return ExperimentConfig.from_dict(overrides)


def cmd_simulate(cfg, args):
    traj = simulate(cfg)
    out = cfg["output_dir"]
    path = os.path.join(out, "states_true.csv")
    io.write_truth(path, traj.t, traj.x, traj.y, traj.u)
    print(f"wrote {path} ({len(traj.t)} samples)")
    return 0


def cmd_estimate(cfg, args):
    observers = args.observer or [cfg["observer"]]
    runs, traj = run_experiment(cfg, observers, out_dir=cfg["output_dir"])
    for name, run in runs.items():
        ce = cumulative_error(run.log)[-1]
        print(f"{name}: final cumulative error {ce:.6g}")
    print(f"results in {cfg['output_dir']}")
    return 0


def cmd_compare(cfg, args):
    observers = args.observer or list(cfg.compare_observers)
    rows, runs, traj = compare_observers(cfg, observers)
    write_outputs(cfg, runs, traj, cfg["output_dir"], rows)
    keys = [k for k in rows[0] if k != "wall_clock_s"]
    with open(os.path.join(cfg["output_dir"], "comparison.csv"), "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(keys)
        for row in rows:
            w.writerow([row[k] if isinstance(row[k], str) else io.FLOAT_FMT % row[k] for k in keys])
    print(f"{'observer':<16}{'cum.err':>12}{'rmse x1':>12}{'rmse x2':>12}{'sparse>10%':>12}{'time[s]':>10}")
    for row in rows:
        print(
            f"{row['observer']:<16}{row['final_cumulative_error']:>12.5g}{row['rmse_x1']:>12.5g}"
            f"{row['rmse_x2']:>12.5g}{row['sparsity_count']:>12d}{row['wall_clock_s']:>10.2f}"
        )
    return 0


def cmd_analyze(cfg, args):
    in_dir = args.input or cfg["output_dir"]
    out_dir = cfg["output_dir"]
    logs = load_logs(in_dir)
    if args.observer:
        logs = {k: v for k, v in logs.items() if k in args.observer}
    if not logs:
        raise ConfigError("input", f"no estimate files found in {in_dir}")
    burn = float(cfg["analysis.burn_in"])
    thr = float(cfg["analysis.threshold"])
    p = cfg.floats("model.p", 3)
    lines = [f"# analysis of {in_dir}"]
    for name, log in logs.items():
        ce = cumulative_error(log)
        lines += ["", f"## {name}", f"final cumulative error: {ce[-1]:.17g}"]
        if log.theta.shape[0] == 0:
            continue
        lines += dominance_lines(log, burn, thr, p)
        rep = pca_dominance(log, burn, thr)
        lib = FunctionLibrary.from_names(log.term_names)
        io.write_csv(
            os.path.join(out_dir, f"g_curves_{name}.csv"),
            ["t", "g_true", "g_all", "g_selected"],
            [
                log.times,
                duffing_missing_term(log.x_true.T, p=p),
                reconstruct_g(log, lib),
                reconstruct_g(log, lib, rep.selected),
            ],
        )
        io.write_csv(
            os.path.join(out_dir, f"dominance_{name}.csv"),
            ["term", "share"],
            [np.arange(1, len(rep.shares) + 1), rep.shares],
        )
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "analysis_report.txt")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    print("\n".join(lines))
    return 0


def _parse_floats(text):
    return [float(v) for v in str(text).split(",") if v.strip()]


def cmd_observability(cfg, args):
    lib = FunctionLibrary.from_names(cfg.library_names)
    model = duffing_joint_model(lib, dt=float(cfg["time.dt"]), p=cfg.floats("model.p", 3))
    pm = None if args.no_pm else PseudoMeasurement(model.n_x, model.n_theta, float(cfg["pm.epsilon"]), float(cfg["pm.r_pm"]))
    x = _parse_floats(args.probe_x)
    theta = _parse_floats(args.probe_theta)
    if len(theta) == 1:
        theta = theta * model.n_theta
    if len(x) != model.n_x or len(theta) != model.n_theta:
        raise ConfigError("probe", f"expected {model.n_x} states and {model.n_theta} parameters")
    probe = JointState(np.array(x), np.array(theta))
    rep = check_observability(model, pm, probe, args.u, args.tol)
    print(rep.format())
    return 0 if rep.observable else EXIT_NOT_OBSERVABLE


def cmd_prior(cfg, args):
    spec = horseshoe_spec(cfg)
    n = args.n_samples or int(cfg["horseshoe.n_samples"])
    seed = int(cfg["horseshoe.seed"]) if args.seed is None else args.seed
    est = sigma_star(spec, n, seed)
    print(f"sigma_star^2 = {est.value:.17g}")
    print(f"standard error = {est.stderr:.17g}")
    print(f"samples = {est.n_samples}")
    for conv in ("distribution", "scale"):
        header, table = density_comparison(convention=conv)
        path = os.path.join(cfg["output_dir"], f"density_comparison_{conv}.csv")
        io.write_csv(path, header, list(table.T))
        print(f"wrote {path}")
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "estimate": cmd_estimate,
    "compare": cmd_compare,
    "analyze": cmd_analyze,
    "observability": cmd_observability,
    "prior": cmd_prior,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="joint-srukf", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value configuration file")
    common.add_argument("--seed", type=int, help="noise seed (horseshoe seed for 'prior')")
    common.add_argument("--out", help="output directory")
    common.add_argument("--observer", action="append", choices=OBSERVERS, help="observer name (repeatable)")
    common.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one configuration key")
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common])
        if name == "analyze":
            p.add_argument("--input", help="directory with CSV results (default: --out)")
        elif name == "observability":
            p.add_argument("--probe-x", default="1,0.5")
            p.add_argument("--probe-theta", default="0.1")
            p.add_argument("--u", type=float, default=0.0)
            p.add_argument("--tol", type=float, default=1e-8)
            p.add_argument("--no-pm", action="store_true", help="drop the pseudo-measurement")
        elif name == "prior":
            p.add_argument("--n-samples", type=int)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = _load_config(args)
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except JointSRUKFError as exc:
        print(f"run failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FILTER


if __name__ == "__main__":
    sys.exit(main())
