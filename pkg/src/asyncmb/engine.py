"""Delay models, the deterministic delayed-update simulator, the threaded
shared-memory runner, and deterministic replay.

A single global counter k orders all updates.  Update k applies a batch
gradient evaluated at the iterate that was current at time d(k) <= k; the
staleness tau(k) = k - d(k) is bounded by the delay model (simulator) or
measured (threaded runner).
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass, field

import numpy as np

from .composite import CesaroAverage, ProblemSpec, mirror_step, phi_value
from .geometry import ENTROPY, primal_norm
from .oracle import StochasticOracle, batch_indices
from .schedules import Schedule, gamma_at

NONE = "none"
CYCLIC = "cyclic"
RANDOM_BOUNDED = "random"
TRACE = "trace"

_DELAY_STREAM = 2_000_003  # hash stream reserved for random delay draws


class DelayError(ValueError):
    """A produced delay index violates 0 <= d(k) <= k or the tau bound."""


@dataclass
class DelayModel:
    kind: str
    p: int = 1
    tau_max: int = 0
    seed: int = 0
    trace: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in (NONE, CYCLIC, RANDOM_BOUNDED, TRACE):
            raise ValueError(f"unknown delay model: {self.kind!r}")
        if self.kind == CYCLIC and self.p < 1:
            raise ValueError("cyclic delay needs p >= 1")
        if self.kind == RANDOM_BOUNDED and self.tau_max < 0:
            raise ValueError("tau_max must be nonnegative")
        if self.kind == TRACE:
            if self.trace is None:
                raise ValueError("trace delay model needs a trace")
            self.trace = np.asarray(self.trace, dtype=np.int64)

    @property
    def bound(self) -> int:
        """Largest staleness the model can produce."""
        if self.kind == NONE:
            return 0
        if self.kind == CYCLIC:
            return self.p - 1
        if self.kind == RANDOM_BOUNDED:
            return self.tau_max
        if len(self.trace) == 0:
            return 0
        k = np.arange(len(self.trace))
        return int(np.max(k - self.trace, initial=0))

    def d(self, k: int) -> int:
        if self.kind == NONE:
            return k
        if self.kind == CYCLIC:
            # warm-up clamp: early updates read the initial point
            return max(0, k - self.p + 1)
        if self.kind == RANDOM_BOUNDED:
            hi = min(k, self.tau_max) + 1
            tau = int(batch_indices(self.seed, _DELAY_STREAM, k, 1, hi)[0])
            return k - tau
        if k >= len(self.trace):
            raise DelayError(f"delay trace shorter than requested horizon (k={k})")
        dk = int(self.trace[k])
        if dk < 0 or dk > k:
            raise DelayError(f"trace entry d({k})={dk} violates 0 <= d(k) <= k")
        return dk


@dataclass
class CheckpointRecord:
    k: int
    phi: float
    dist_sq: float
    tau: int
    gamma: float
    wall_ns: int


@dataclass
class RunReport:
    final_x: np.ndarray
    cesaro_x: np.ndarray
    checkpoints: list[CheckpointRecord]
    realized_tau_max: int
    d_trace: np.ndarray
    rng_log: np.ndarray  # shape (T, 2): (stream, counter) per update
    gammas: np.ndarray
    total_wall_s: float
    config: dict
    tau_warning: bool = False

    def phi_trace(self) -> tuple[np.ndarray, np.ndarray]:
        ks = np.array([c.k for c in self.checkpoints])
        phis = np.array([c.phi for c in self.checkpoints])
        return ks, phis

    def dist_trace(self) -> tuple[np.ndarray, np.ndarray]:
        ks = np.array([c.k for c in self.checkpoints])
        ds = np.array([c.dist_sq for c in self.checkpoints])
        return ks, ds


def default_start(problem: ProblemSpec) -> np.ndarray:
    if problem.dg.kind == ENTROPY:
        return np.full(problem.n, 1.0 / problem.n)
    return np.zeros(problem.n)


def _checkpoint_set(T: int, checkpoints) -> set[int]:
    if checkpoints is not None:
        return {int(c) for c in checkpoints if 1 <= int(c) <= T}
    stride = max(1, -(-T // 500))
    ks = set(range(stride, T + 1, stride))
    ks.add(T)
    return ks

def _eval_rows(dataset, eval_subsample, seed):
    m = len(dataset.points)
    if eval_subsample is None or eval_subsample >= m:
        return None
    return batch_indices(seed, _DELAY_STREAM + 1, 0, eval_subsample, m)


def simulate(problem: ProblemSpec, dataset, schedule: Schedule, delay: DelayModel,
             T: int, b: int, seed: int, x0: np.ndarray | None = None,
             x_star: np.ndarray | None = None, checkpoints=None,
             eval_subsample: int | None = 2048,
             rng_log: np.ndarray | None = None) -> RunReport:
    """Single-threaded deterministic execution of the delayed update loop.

    With rng_log (an array of (stream, counter) pairs) the sampling of a
    previous run is replayed draw for draw; otherwise update k draws batch k
    of stream 0.
    """
    if T < 0:
        raise ValueError("T must be nonnegative")
    oracle = StochasticOracle(dataset, problem.loss, seed)
    x = default_start(problem) if x0 is None else np.asarray(x0, dtype=float).copy()

    bound = delay.bound
    if schedule.params.tau_max < bound:
        import warnings
        warnings.warn("delay model can exceed the schedule's tau_max parameter")
    size = bound + 1
    buf = [x.copy() for _ in range(size)]
    cesaro = CesaroAverage(problem.n)
    marks = _checkpoint_set(T, checkpoints)
    rows = _eval_rows(dataset, eval_subsample, seed)

    d_trace = np.empty(T, dtype=np.int64)
    gammas = np.empty(T)
    log = np.empty((T, 2), dtype=np.int64)
    records: list[CheckpointRecord] = []
    realized = 0
    t0 = time.perf_counter()
    t0_ns = time.perf_counter_ns()

    for k in range(T):
        j = delay.d(k)
        tau = k - j
        if j < 0 or j > k or tau > bound:
            raise DelayError(f"d({k})={j} violates the delay bound {bound}")
        realized = max(realized, tau)
        stream, counter = (0, k) if rng_log is None else map(int, rng_log[k])
        g = oracle.batch_gradient(buf[j % size], b, stream, counter)
        gamma = gamma_at(schedule, k)
        xnew = mirror_step(problem.dg, problem.reg, buf[k % size], g, gamma)
        buf[(k + 1) % size] = xnew
        cesaro.update(xnew)
        d_trace[k] = j
        gammas[k] = gamma
        log[k] = (stream, counter)
        if k + 1 in marks:
            phi = phi_value(problem, dataset, cesaro.value, rows)
            dist = (primal_norm(problem.norms, xnew - x_star) ** 2
                    if x_star is not None else float("nan"))
            records.append(CheckpointRecord(k + 1, phi, dist, tau, gamma,
                                            time.perf_counter_ns()))

    final = buf[T % size].copy() if T > 0 else x
    ces = cesaro.value if T > 0 else x.copy()
    return RunReport(
        final_x=final, cesaro_x=ces, checkpoints=records,
        realized_tau_max=realized, d_trace=d_trace, rng_log=log, gammas=gammas,
        total_wall_s=time.perf_counter() - t0,
        config={"T": T, "b": b, "seed": seed, "delay": delay.kind,
                "schedule": schedule.kind, "t0_ns": t0_ns},
        tau_warning=realized > schedule.params.tau_max)


def replay(trace, problem: ProblemSpec, dataset, schedule: Schedule, T: int,
           b: int, seed: int, rng_log: np.ndarray | None = None,
           **kwargs) -> RunReport:
    """Re-execute a run from its recorded read-index trace (and, for threaded
    runs, its recorded sampling log); bit-identical to the original."""
    model = DelayModel(TRACE, trace=np.asarray(trace, dtype=np.int64))
    if T > 0 and len(model.trace) < T:
        raise DelayError("delay trace shorter than requested horizon")
    return simulate(problem, dataset, schedule, model, T, b, seed,
                    rng_log=rng_log, **kwargs)


def run_threaded(problem: ProblemSpec, dataset, schedule: Schedule, p: int,
                 T: int, b: int, seed: int, x0: np.ndarray | None = None,
                 x_star: np.ndarray | None = None, checkpoints=None,
                 eval_subsample: int | None = 2048) -> RunReport:
    """Shared-memory realization with p worker threads.

    Workers snapshot the decision vector under a brief lock, compute the
    batch gradient lock-free on the private copy, then re-acquire the lock to
    apply the composite step atomically.  Worker w draws batch j of stream w,
    so the run is replayable from the recorded (d(k), stream, counter) log.
    """
    if p < 1:
        raise ValueError("worker count must be >= 1")
    if T < 1:
        raise ValueError("T must be >= 1")
    oracle = StochasticOracle(dataset, problem.loss, seed)
    x = default_start(problem) if x0 is None else np.asarray(x0, dtype=float).copy()
    cesaro = CesaroAverage(problem.n)
    marks = _checkpoint_set(T, checkpoints)
    rows = _eval_rows(dataset, eval_subsample, seed)

    lock = threading.Lock()
    state = {"x": x, "k": 0}
    d_trace = np.empty(T, dtype=np.int64)
    gammas = np.empty(T)
    log = np.empty((T, 2), dtype=np.int64)
    walls = np.empty(T, dtype=np.int64)
    snapshots: list[tuple[int, np.ndarray, np.ndarray, int, float, int]] = []
    t0 = time.perf_counter()
    t0_ns = time.perf_counter_ns()

    def worker(w: int) -> None:
        j = 0
        while True:
            with lock:
                k_read = state["k"]
                if k_read >= T:
                    return
                x_snap = state["x"].copy()
            g = oracle.batch_gradient(x_snap, b, stream=w, counter=j)
            with lock:
                k = state["k"]
                if k >= T:
                    return
                gamma = gamma_at(schedule, k)
                xnew = mirror_step(problem.dg, problem.reg, state["x"], g, gamma)
                state["x"] = xnew
                state["k"] = k + 1
                cesaro.update(xnew)
                d_trace[k] = k_read
                gammas[k] = gamma
                log[k] = (w, j)
                walls[k] = time.perf_counter_ns()
                if k + 1 in marks:
                    snapshots.append((k + 1, xnew.copy(), cesaro.value.copy(),
                                      k - k_read, gamma, walls[k]))
            j += 1
            # brief sleep hands the interpreter lock to a waiting worker;
            # without it one thread can monopolize the loop and the others'
            # snapshots grow arbitrarily stale
            time.sleep(1e-6)

    threads = [threading.Thread(target=worker, args=(w,)) for w in range(p)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    total = time.perf_counter() - t0

    records = []
    for kk, xk, ces, tau, gamma, wall in sorted(snapshots):
        phi = phi_value(problem, dataset, ces, rows)
        dist = (primal_norm(problem.norms, xk - x_star) ** 2
                if x_star is not None else float("nan"))
        records.append(CheckpointRecord(kk, phi, dist, tau, gamma, wall))

    realized = int(np.max(np.arange(T) - d_trace)) if T > 0 else 0
    return RunReport(
        final_x=state["x"].copy(), cesaro_x=cesaro.value, checkpoints=records,
        realized_tau_max=realized, d_trace=d_trace, rng_log=log, gammas=gammas,
        total_wall_s=total,
        config={"T": T, "b": b, "seed": seed, "p": p, "threaded": True,
                "schedule": schedule.kind, "t0_ns": t0_ns},
        tau_warning=realized > schedule.params.tau_max)


def write_delay_trace(trace: np.ndarray, path) -> None:
    """One integer d(k) per line; line number = k."""
    with open(path, "w") as fh:
        for d in np.asarray(trace, dtype=np.int64):
            fh.write(f"{int(d)}\n")


def read_delay_trace(path) -> np.ndarray:
    with open(path) as fh:
        return np.array([int(line.strip()) for line in fh if line.strip()],
                        dtype=np.int64)
