"""Experiment runner: simulate the truth once, run observers on the same data, write results."""
import os
import time
from dataclasses import dataclass

import numpy as np

from . import io
from .analysis import (
    EstimateLog,
    cumulative_error,
    pca_dominance,
    reconstruct_g,
    rms,
    sparsity_count,
    state_rmse,
)
from .config import ExperimentConfig
from .models import (
    FunctionLibrary,
    NoiseSpec,
    Sinusoid,
    duffing_joint_model,
    duffing_missing_term,
    simulate_truth,
)
from .prior import HorseshoeSpec, sigma_star
from .srukf import FilterState, JointSRUKF, PseudoMeasurement, UTParams, srukf_step


def noise_spec(cfg, seed=None):
    return NoiseSpec(
        q_x=cfg.floats("noise.q_x", 2),
        q_theta=cfg.floats("noise.q_theta"),
        r=cfg.floats("noise.r"),
        seed=int(cfg["seed"] if seed is None else seed),
    )


def horseshoe_spec(cfg):
    xi = cfg["horseshoe.xi"]
    return HorseshoeSpec(
        tau0=float(cfg["horseshoe.tau0"]),
        a=float(cfg["horseshoe.a"]),
        b=float(cfg["horseshoe.b"]),
        xi=None if xi is None else cfg.floats("horseshoe.xi"),
    )


def input_signal(cfg):
    return Sinusoid(float(cfg["input.amplitude"]), float(cfg["input.omega"]), float(cfg["input.phase"]))


def simulate(cfg, seed=None):
    return simulate_truth(
        np.array(cfg.floats("model.x0_true", 2)),
        input_signal(cfg),
        float(cfg["time.t_end"]),
        noise_spec(cfg, seed),
        dt=float(cfg["time.dt"]),
        p=cfg.floats("model.p", 3),
    )


_SIGMA_STAR_CACHE = {}


def cached_sigma_star(spec, n_samples, seed):
    key = (spec.tau0, spec.a, spec.b, int(n_samples), seed)
    if key not in _SIGMA_STAR_CACHE:
        _SIGMA_STAR_CACHE[key] = sigma_star(spec, int(n_samples), seed)
    return _SIGMA_STAR_CACHE[key]


@dataclass
class ObserverRun:
    name: str
    log: EstimateLog
    state: FilterState
    wall_clock: float


def build_model(cfg, observer):
    lib = FunctionLibrary((), ()) if observer == "classical" else FunctionLibrary.from_names(cfg.library_names)
    return duffing_joint_model(lib, dt=float(cfg["time.dt"]), p=cfg.floats("model.p", 3))


def run_observer(cfg, observer, traj):
    """Run one observer over a simulated trajectory."""
    model = build_model(cfg, observer)
    n_x, n_th = model.n_x, model.n_theta
    hs = horseshoe_spec(cfg)
    noise = noise_spec(cfg)
    q = np.r_[noise.q_x, noise.theta_std(n_th)]
    r = noise.r_std(model.m)

    mean0 = np.r_[cfg.floats("model.x0_est", 2), np.full(n_th, float(cfg["model.theta0"]))]
    std_theta = cfg["model.p0_std_theta"]
    s2 = None
    if n_th:
        s2 = cached_sigma_star(hs, cfg["horseshoe.n_samples"], cfg["horseshoe.seed"]).value
    if n_th and std_theta == "prior":
        th_std = np.sqrt(s2) * hs.scales(n_th)
    else:
        th_std = np.broadcast_to(np.asarray(cfg.floats("model.p0_std_theta"), float), (n_th,)) if n_th else np.zeros(0)
    fs = FilterState(mean0, np.diag(np.r_[cfg.floats("model.p0_std_x", 2), th_std]))

    start = time.perf_counter()
    N = len(traj.t)
    est = np.empty((N, model.dim))
    est[0] = mean0
    if observer == "classical":
        p = UTParams(float(cfg["ut.alpha"]), float(cfg["ut.beta"]), 3.0 - model.dim, model.dim)
        for k in range(N - 1):
            fs = srukf_step(fs, model.step, model.observe, q, r, traj.u[k], traj.y[k + 1], p)
            est[k + 1] = fs.mean
    else:
        flt = JointSRUKF(
            model=model,
            pm=PseudoMeasurement(n_x, n_th, float(cfg["pm.epsilon"]), float(cfg["pm.r_pm"])),
            q_sqrt=q,
            r_sqrt=r,
            sigma_star2=s2,
            alpha=float(cfg["ut.alpha"]),
            beta=float(cfg["ut.beta"]),
            pass2=observer == "joint",
            unscaled_pass2=bool(cfg["ut.unscaled_pass2"]),
            pass2_process_noise=bool(cfg["pm.process_noise"]),
            horseshoe=hs,
            resample_sigma_star=bool(cfg["horseshoe.per_step"]),
            seed=int(cfg["horseshoe.seed"]),
        )
        for k in range(N - 1):
            fs = flt.step(fs, traj.u[k], traj.y[k + 1])
            est[k + 1] = fs.mean
    elapsed = time.perf_counter() - start
    log = EstimateLog(
        times=traj.t,
        x_true=traj.x,
        x_est=est[:, :n_x],
        theta=est[:, n_x:].T,
        y=traj.y,
        u=traj.u,
        term_names=model.library.names,
    )
    return ObserverRun(observer, log, fs, elapsed)


def observer_metrics(cfg, run):
    burn = float(cfg["analysis.burn_in"])
    log = run.log
    rmse = state_rmse(log, burn)
    row = {
        "observer": run.name,
        "final_cumulative_error": float(cumulative_error(log)[-1]),
        **{f"rmse_x{i + 1}": float(v) for i, v in enumerate(rmse)},
        "sparsity_count": sparsity_count(log, burn, float(cfg["analysis.sparsity_fraction"])),
        "breakdowns": run.state.breakdowns,
        "merge_fallbacks": run.state.merge_fallbacks,
        "wall_clock_s": run.wall_clock,
    }
    return row


def compare_observers(cfg, observers, seed=None):
    """Run several observers on one simulated trajectory; rows ordered by observer name."""
    if len(observers) < 2:
        raise ValueError("compare_observers needs at least two observers")
    traj = simulate(cfg, seed)
    runs = {name: run_observer(cfg, name, traj) for name in dict.fromkeys(observers)}
    rows = [observer_metrics(cfg, runs[name]) for name in observers]
    return rows, runs, traj


def _report_lines(cfg, runs, rows):
    # output_dir is left out so that reruns into another directory match byte for byte
    lines = ["# joint SRUKF experiment report", "", "## effective configuration", cfg.dump(skip=("output_dir",))]
    lines.append("## observers")
    for row in rows:
        fields = {k: v for k, v in row.items() if k != "wall_clock_s"}
        lines.append(", ".join(f"{k}={v:.17g}" if isinstance(v, float) else f"{k}={v}" for k, v in fields.items()))
    burn = float(cfg["analysis.burn_in"])
    thr = float(cfg["analysis.threshold"])
    p = cfg.floats("model.p", 3)
    for name, run in runs.items():
        if run.log.theta.shape[0] == 0:
            continue
        lines += ["", f"## dominant terms ({name})"]
        lines += dominance_lines(run.log, burn, thr, p)
    return lines


def dominance_lines(log, burn, thr, p):
    rep = pca_dominance(log, burn, thr)
    lib = FunctionLibrary.from_names(log.term_names)
    lines = []
    cum = 0.0
    for i in rep.ranking:
        cum += rep.shares[i]
        lines.append(f"psi_{i + 1} = {log.term_names[i]}: share {rep.shares[i]:.6f} (cumulative {cum:.6f})")
    sel = [f"psi_{i + 1}" for i in rep.selected]
    lines.append(f"selected (threshold {thr:g}): {', '.join(sel)}")
    mask = log.after(burn)
    g_true = duffing_missing_term(log.x_true.T, p=p)
    g_all = reconstruct_g(log, lib)
    g_sel = reconstruct_g(log, lib, rep.selected)
    lines.append(f"rms(g_all - g_true) after burn-in: {rms((g_all - g_true)[mask]):.17g}")
    lines.append(f"rms(g_selected - g_true) after burn-in: {rms((g_sel - g_true)[mask]):.17g}")
    return lines


def write_outputs(cfg, runs, traj, out_dir, rows=None):
    """Write truth, per-observer estimates/theta, cumulative errors and a report."""
    os.makedirs(out_dir, exist_ok=True)
    io.write_truth(os.path.join(out_dir, "states_true.csv"), traj.t, traj.x, traj.y, traj.u)
    names = list(runs)
    for name in names:
        log = runs[name].log
        io.write_estimate(os.path.join(out_dir, f"states_est_{name}.csv"), log.times, log.x_est)
        if log.theta.shape[0]:
            io.write_theta(os.path.join(out_dir, f"theta_{name}.csv"), log.times, log.theta, log.term_names)
    io.write_csv(
        os.path.join(out_dir, "error.csv"),
        ["t"] + names,
        [traj.t] + [cumulative_error(runs[n].log) for n in names],
    )
    rows = rows if rows is not None else [observer_metrics(cfg, runs[n]) for n in names]
    with open(os.path.join(out_dir, "report.txt"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(_report_lines(cfg, runs, rows)) + "\n")
    return rows


def run_experiment(cfg, observers=None, out_dir=None, seed=None):
    """Simulate once, run ``observers`` (default: ``cfg['observer']``), optionally write files."""
    observers = list(observers or [cfg["observer"]])
    traj = simulate(cfg, seed)
    runs = {name: run_observer(cfg, name, traj) for name in dict.fromkeys(observers)}
    if out_dir is not None:
        write_outputs(cfg, runs, traj, out_dir)
    return runs, traj


def load_logs(in_dir):
    """Rebuild one :class:`EstimateLog` per ``states_est_<name>.csv`` found in ``in_dir``."""
    truth = io.read_columns(os.path.join(in_dir, "states_true.csv"))
    xcols = sorted((k for k in truth if k.startswith("x")), key=lambda k: int(k[1:]))
    x_true = np.column_stack([truth[k] for k in xcols])
    logs = {}
    for fname in sorted(os.listdir(in_dir)):
        if not (fname.startswith("states_est_") and fname.endswith(".csv")):
            continue
        name = fname[len("states_est_"):-len(".csv")]
        est = io.read_columns(os.path.join(in_dir, fname))
        x_est = np.column_stack([est[k] for k in xcols])
        theta_path = os.path.join(in_dir, f"theta_{name}.csv")
        if os.path.exists(theta_path):
            _, theta, names = io.read_theta(theta_path)
        else:
            theta, names = np.zeros((0, len(truth["t"]))), ()
        logs[name] = EstimateLog(truth["t"], x_true, x_est, theta, truth["y"], truth["u"], names)
    return logs


__all__ = [
    "ExperimentConfig",
    "ObserverRun",
    "compare_observers",
    "load_logs",
    "run_experiment",
    "run_observer",
    "simulate",
    "write_outputs",
]
