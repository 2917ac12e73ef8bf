"""Command-line experiment harness.

Usage: asyncmb <command> --config <path> [--seed N] [--out PATH]
Commands: run, verify-bounds, speedup, estimate, replay.
Exit codes: 0 success, 2 config error, 3 runtime error, 4 bound violation.

Configs are flat INI files with sections [problem], [schedule], [run],
[verify], [speedup], [output]; see the README for the full key list.
"""

from __future__ import annotations

import argparse
import configparser
import math
import os
import sys

import numpy as np

from . import data_io, engine, oracle as _oracle, schedules
from .composite import ProblemSpec, Regularizer, phi_value
from .geometry import (ENTROPY, EUCLIDEAN, L1, L2, DistanceGenerator,
                       NormPair, bregman, variance_constant)
from .oracle import StochasticOracle, estimate_sigma, lipschitz_bound

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3
EXIT_BOUND = 4


class ConfigError(Exception):
    def __init__(self, field: str, message: str):
        super().__init__(f"config field [{field}]: {message}")
        self.field = field


def _get(cfg, section, key, cast, default=None, required=False):
    try:
        raw = cfg.get(section, key)
    except (configparser.NoSectionError, configparser.NoOptionError):
        if required:
            raise ConfigError(f"{section}.{key}", "required but missing")
        return default
    if raw.strip() == "":
        if required:
            raise ConfigError(f"{section}.{key}", "required but empty")
        return default
    try:
        return cast(raw)
    except ValueError:
        raise ConfigError(f"{section}.{key}", f"cannot parse {raw!r}")


def _build_problem(cfg, seed):
    """Returns (dataset, problem, x_star, phi_star)."""
    source = _get(cfg, "problem", "source", str, required=True)
    if source == "lasso":
        sp = data_io.gen_lasso(
            n=_get(cfg, "problem", "n", int, required=True),
            m=_get(cfg, "problem", "m", int, required=True),
            sparsity=_get(cfg, "problem", "sparsity", int, 5),
            noise=_get(cfg, "problem", "noise", float, 0.1),
            lam=_get(cfg, "problem", "lam", float, 0.1),
            seed=seed)
        return sp.dataset, sp.problem, sp.x_star, sp.phi_star
    if source == "strongly_convex":
        sp = data_io.gen_strongly_convex(
            n=_get(cfg, "problem", "n", int, required=True),
            m=_get(cfg, "problem", "m", int, required=True),
            rho=_get(cfg, "problem", "rho", float, 1.0),
            seed=seed,
            noise=_get(cfg, "problem", "noise", float, 0.1))
        return sp.dataset, sp.problem, sp.x_star, sp.phi_star
    if source == "logistic_ball":
        sp = data_io.gen_logistic_ball(
            n=_get(cfg, "problem", "n", int, required=True),
            m=_get(cfg, "problem", "m", int, required=True),
            radius=_get(cfg, "problem", "radius", float, 1.0),
            seed=seed)
        return sp.dataset, sp.problem, sp.x_star, sp.phi_star
    if source == "sparse_logistic":
        dataset, problem = data_io.gen_sparse_logistic(
            n=_get(cfg, "problem", "n", int, required=True),
            m=_get(cfg, "problem", "m", int, required=True),
            nnz_per_row=_get(cfg, "problem", "nnz_per_row", int, 10),
            seed=seed)
        return dataset, problem, None, None
    if source == "libsvm":
        path = _get(cfg, "problem", "path", str, required=True)
        loss = _get(cfg, "problem", "loss", str, "logistic")
        dataset = data_io.read_libsvm(path, coerce_labels=loss == "logistic")
        geometry = _get(cfg, "problem", "geometry", str, "euclidean")
        regk = _get(cfg, "problem", "regularizer", str, "l1")
        reg = Regularizer(regk,
                          lam=_get(cfg, "problem", "lam", float, 0.01),
                          rho=_get(cfg, "problem", "rho", float, 1.0)
                          if regk in ("l2", "elastic_net") else 0.0,
                          radius=_get(cfg, "problem", "radius", float, 100.0)
                          if regk in ("l2_ball", "l1_l2_ball") else 0.0)
        if geometry not in (EUCLIDEAN, ENTROPY):
            raise ConfigError("problem.geometry", f"unknown geometry {geometry!r}")
        dg = DistanceGenerator(geometry, dataset.n)
        norms = NormPair(L2 if geometry == EUCLIDEAN else L1)
        try:
            problem = ProblemSpec(loss, reg, dg, norms, dataset.n)
        except ValueError as exc:
            raise ConfigError("problem.regularizer", str(exc))
        return dataset, problem, None, None
    raise ConfigError("problem.source", f"unknown source {source!r}")


def _build_delay(cfg, seed):
    kind = _get(cfg, "run", "delay", str, "none")
    if kind == "none":
        return engine.DelayModel(engine.NONE)
    if kind == "cyclic":
        return engine.DelayModel(engine.CYCLIC,
                                 p=_get(cfg, "run", "p", int, required=True))
    if kind == "random":
        return engine.DelayModel(
            engine.RANDOM_BOUNDED,
            tau_max=_get(cfg, "run", "tau_max", int, required=True), seed=seed)
    if kind == "trace":
        path = _get(cfg, "run", "trace_path", str, required=True)
        return engine.DelayModel(engine.TRACE, trace=engine.read_delay_trace(path))
    raise ConfigError("run.delay", f"unknown delay model {kind!r}")


def _estimate_constants(cfg, dataset, problem, x_star, seed):
    b = _get(cfg, "run", "b", int, 1)
    L = lipschitz_bound(problem.loss, dataset, problem.norms)
    c = variance_constant(problem.dg, problem.norms, b)
    oracle = StochasticOracle(dataset, problem.loss, seed)
    rng = np.random.default_rng(seed)
    probes = [engine.default_start(problem)]
    if x_star is not None:
        probes.append(x_star)
    for _ in range(3):
        if problem.dg.kind == ENTROPY:
            v = rng.random(problem.n)
            probes.append(v / v.sum())
        else:
            probes.append(rng.standard_normal(problem.n) / math.sqrt(problem.n))
    samples = _get(cfg, "schedule", "sigma_samples", int, 200)
    sigma = estimate_sigma(oracle, probes, samples, problem.norms, seed=seed)
    return L, sigma, c, b


def _build_schedule(cfg, dataset, problem, x_star, delay, seed):
    kind = _get(cfg, "schedule", "kind", str, required=True)
    L, sigma, c, b = _estimate_constants(cfg, dataset, problem, x_star, seed)
    tau_max = _get(cfg, "schedule", "tau_max", int, delay.bound)
    D0 = _get(cfg, "schedule", "D0", float, None)
    if D0 is None and x_star is not None:
        D0 = bregman(problem.dg, engine.default_start(problem), x_star)
    R = _get(cfg, "schedule", "R", float, None)
    if R is None and problem.reg.kind in ("l2_ball", "l1_l2_ball"):
        R = math.sqrt(2.0) * problem.reg.radius
    params = schedules.ScheduleParams(
        L=L, tau_max=tau_max, sigma=sigma, c=c, b=b, R=R,
        mu_psi=problem.reg.mu_psi,
        Q=1.0 if problem.dg.kind == EUCLIDEAN else
        _get(cfg, "schedule", "Q", float, 1.0),
        epsilon=_get(cfg, "schedule", "epsilon", float, None),
        T_F=_get(cfg, "schedule", "T_F", int, None),
        D0=D0)
    try:
        if kind == "constant":
            gamma = _get(cfg, "schedule", "gamma", float, required=True)
            return schedules.Schedule(schedules.CONSTANT, params, gamma=gamma)
        if kind == "epsilon":
            gamma = schedules.epsilon_targeted_gamma(params)
            return schedules.Schedule(schedules.CONSTANT, params, gamma=gamma)
        if kind == "horizon":
            gamma = schedules.horizon_gamma(params)
            return schedules.Schedule(schedules.CONSTANT, params, gamma=gamma)
        if kind == "time_varying":
            return schedules.Schedule(schedules.TIME_VARYING, params)
        if kind == "strongly_convex":
            return schedules.Schedule(schedules.STRONGLY_CONVEX, params)
    except schedules.ConfigurationError as exc:
        raise ConfigError("schedule", str(exc))
    raise ConfigError("schedule.kind", f"unknown schedule kind {kind!r}")


def _checkpoints(cfg, T):
    count = _get(cfg, "run", "checkpoints", int, None)
    if count is None:
        return None
    return np.unique(np.linspace(1, T, num=min(count, T), dtype=int))


def _execute(cfg, dataset, problem, x_star, schedule, seed, out_csv=None):
    T = _get(cfg, "run", "T", int, required=True)
    b = _get(cfg, "run", "b", int, 1)
    threads = _get(cfg, "run", "threads", int, 0)
    sub = _get(cfg, "run", "eval_subsample", int, 2048)
    cps = _checkpoints(cfg, T)
    if threads > 0:
        report = engine.run_threaded(problem, dataset, schedule, threads, T, b,
                                     seed, x_star=x_star, checkpoints=cps,
                                     eval_subsample=sub)
    else:
        delay = _build_delay(cfg, seed)
        report = engine.simulate(problem, dataset, schedule, delay, T, b, seed,
                                 x_star=x_star, checkpoints=cps,
                                 eval_subsample=sub)
    if out_csv:
        data_io.write_csv(report, out_csv)
    return report


def cmd_run(cfg, seed, out):
    dataset, problem, x_star, phi_star = _build_problem(cfg, seed)
    delay = _build_delay(cfg, seed)
    schedule = _build_schedule(cfg, dataset, problem, x_star, delay, seed)
    out_csv = out or _get(cfg, "output", "csv", str, None)
    report = _execute(cfg, dataset, problem, x_star, schedule, seed, out_csv)
    trace_out = _get(cfg, "output", "trace", str, None)
    if trace_out:
        engine.write_delay_trace(report.d_trace, trace_out)
    final_phi = phi_value(problem, dataset, report.cesaro_x)
    print(f"updates           : {len(report.d_trace)}")
    if phi_star is not None:
        print(f"final suboptimality (cesaro): {final_phi - phi_star:.6e}")
    else:
        print(f"final objective (cesaro): {final_phi:.6e}")
    print(f"realized tau_max  : {report.realized_tau_max}"
          + ("  (exceeds schedule tau_max!)" if report.tau_warning else ""))
    print(f"wall time         : {report.total_wall_s:.3f} s")
    if out_csv:
        print(f"trace csv         : {out_csv}")
    return EXIT_OK


def cmd_estimate(cfg, seed, out):
    dataset, problem, x_star, _ = _build_problem(cfg, seed)
    delay = _build_delay(cfg, seed)
    L, sigma, c, b = _estimate_constants(cfg, dataset, problem, x_star, seed)
    tau_max = _get(cfg, "schedule", "tau_max", int, delay.bound)
    print(f"L_hat     = {L:.6g}")
    print(f"sigma_hat = {sigma:.6g}")
    print(f"c_hat     = {c:.6g}")
    params = schedules.ScheduleParams(L=L, tau_max=tau_max, sigma=sigma, c=c,
                                      b=b,
                                      R=_get(cfg, "schedule", "R", float, None),
                                      mu_psi=problem.reg.mu_psi,
                                      epsilon=_get(cfg, "schedule", "epsilon",
                                                   float, 0.1),
                                      D0=_get(cfg, "schedule", "D0", float, None))
    print(f"gamma (accuracy-targeted)  = {schedules.epsilon_targeted_gamma(params):.6g}")
    if params.R:
        sched = schedules.Schedule(schedules.TIME_VARYING, params)
        print(f"gamma(0) (time-varying)    = {schedules.gamma_at(sched, 0):.6g}")
    if params.mu_psi > 0:
        sched = schedules.Schedule(schedules.STRONGLY_CONVEX, params)
        print(f"gamma(0) (strongly convex) = {schedules.gamma_at(sched, 0):.6g}")
    return EXIT_OK


def cmd_verify_bounds(cfg, seed, out):
    dataset, problem, x_star, phi_star = _build_problem(cfg, seed)
    if x_star is None:
        print("error: verify-bounds needs a synthetic problem with a known "
              "optimizer (sources: lasso, strongly_convex, logistic_ball)",
              file=sys.stderr)
        return EXIT_RUNTIME
    delay = _build_delay(cfg, seed)
    schedule = _build_schedule(cfg, dataset, problem, x_star, delay, seed)
    which = _get(cfg, "verify", "bound", str,
                 "strongly_convex" if schedule.kind == schedules.STRONGLY_CONVEX
                 else "constant")
    n_rep = _get(cfg, "verify", "replicates", int, 20)
    slack = _get(cfg, "verify", "slack", float, 1.1)
    T = _get(cfg, "run", "T", int, required=True)

    traces = []
    for r in range(n_rep):
        rep = _execute(cfg, dataset, problem, x_star, schedule, seed + r)
        ks, phis = rep.phi_trace()
        _, dists = rep.dist_trace()
        traces.append((ks, phis, dists))
    ks = traces[0][0]
    mean_sub = np.mean([p for _, p, _ in traces], axis=0) - phi_star
    mean_dist = np.mean([d for _, _, d in traces], axis=0)

    p = schedule.params
    violated = False
    print(f"{'T':>10} {'measured':>14} {'bound':>14} {'margin':>10}")
    for i, T_k in enumerate(ks):
        if which == "constant":
            bd = schedules.bound_constant_step(p, schedule.gamma, int(T_k))
            meas = mean_sub[i]
        elif which == "time_varying":
            bd = schedules.bound_time_varying(p, int(T_k))
            meas = mean_sub[i]
        elif which == "strongly_convex":
            bd = schedules.bound_strongly_convex(p, int(T_k))
            meas = mean_dist[i]
        else:
            raise ConfigError("verify.bound", f"unknown bound {which!r}")
        ok = meas <= slack * bd
        violated |= not ok
        print(f"{T_k:>10} {meas:>14.6e} {bd:>14.6e} {bd - meas:>10.2e}"
              + ("" if ok else "  VIOLATED"))
    print("bound satisfied" if not violated else "bound VIOLATED")
    return EXIT_OK if not violated else EXIT_BOUND


def cmd_speedup(cfg, seed, out):
    dataset, problem, x_star, phi_star = _build_problem(cfg, seed)
    delay = engine.DelayModel(engine.NONE)
    schedule = _build_schedule(cfg, dataset, problem, x_star, delay, seed)
    p_list = [int(s) for s in
              _get(cfg, "speedup", "p_list", str, "1,2,4").split(",")]
    runs = _get(cfg, "speedup", "runs", int, 10)
    target = _get(cfg, "speedup", "epsilon", float, required=True)
    T = _get(cfg, "run", "T", int, required=True)
    b = _get(cfg, "run", "b", int, 1)
    sub = _get(cfg, "run", "eval_subsample", int, 2048)
    ncores = os.cpu_count() or 1

    def time_to_target(p, run_seed):
        rep = engine.run_threaded(problem, dataset, schedule, p, T, b, run_seed,
                                  x_star=x_star, eval_subsample=sub)
        t0 = rep.config["t0_ns"]
        for c in rep.checkpoints:
            if c.phi <= target:
                return (c.wall_ns - t0) / 1e9, rep.realized_tau_max
        return None, rep.realized_tau_max

    results = {}
    for p in p_list:
        if p > ncores:
            print(f"warning: p={p} exceeds available cores ({ncores})",
                  file=sys.stderr)
        times = []
        worst_tau = 0
        for r in range(runs):
            t, tau = time_to_target(p, seed + r)
            worst_tau = max(worst_tau, tau)
            if t is None:
                print(f"error: p={p} seed={seed + r} did not reach the target "
                      f"objective {target:g} within T={T}", file=sys.stderr)
                return EXIT_RUNTIME
            times.append(t)
        results[p] = (float(np.mean(times)), worst_tau)

    t1 = results[p_list[0]][0] if p_list[0] == 1 else None
    print(f"{'p':>4} {'mean t_p (s)':>14} {'S(p)':>8} {'tau_max':>8}")
    for p in p_list:
        tp, tau = results[p]
        s = (t1 / tp) if t1 else float("nan")
        print(f"{p:>4} {tp:>14.4f} {s:>8.2f} {tau:>8}")
    return EXIT_OK


def cmd_replay(cfg, seed, out):
    dataset, problem, x_star, phi_star = _build_problem(cfg, seed)
    path = _get(cfg, "run", "trace_path", str, required=True)
    trace = engine.read_delay_trace(path)
    delay = engine.DelayModel(engine.TRACE, trace=trace)
    schedule = _build_schedule(cfg, dataset, problem, x_star, delay, seed)
    T = _get(cfg, "run", "T", int, len(trace))
    b = _get(cfg, "run", "b", int, 1)
    sub = _get(cfg, "run", "eval_subsample", int, 2048)
    cps = _checkpoints(cfg, T)
    report = engine.replay(trace, problem, dataset, schedule, T, b, seed,
                           x_star=x_star, checkpoints=cps, eval_subsample=sub)
    out_csv = out or _get(cfg, "output", "csv", str, None)
    if out_csv:
        data_io.write_csv(report, out_csv)
    final_phi = phi_value(problem, dataset, report.cesaro_x)
    print(f"replayed {T} updates; final objective (cesaro): {final_phi:.6e}")
    print(f"realized tau_max  : {report.realized_tau_max}")
    return EXIT_OK


_COMMANDS = {
    "run": cmd_run,
    "verify-bounds": cmd_verify_bounds,
    "speedup": cmd_speedup,
    "estimate": cmd_estimate,
    "replay": cmd_replay,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="asyncmb", description=__doc__)
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("--config", required=True)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default=None)
    args = parser.parse_args(argv)

    cfg = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    if not cfg.read(args.config):
        print(f"error: cannot read config {args.config}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return _COMMANDS[args.command](cfg, args.seed, args.out)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
