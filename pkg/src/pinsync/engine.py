"""Closed-loop simulation of the event-triggered pinned network.

One trial integrates the m coupled nodes plus the target trajectory with
fixed-step Euler, holding each node's diffusion and pinning terms at its
last event snapshot.  Mode switches split integration steps so switch
handling happens at the exact switching instants.  Within one time
instant the processing order is: (1) mode-switch handling, (2) due
discrete deadlines or continuous rule checks, (3) broadcast fan-out and
re-anchoring, (4) the Euler update to the next instant.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from pinsync import events as ev
from pinsync.bounds import ClosedFormBounds, PairedIntegrationBounds, default_mu
from pinsync.dynamics import NodeDynamics
from pinsync.markov import ModePath, generate_path
from pinsync.stability import StabilityCertificate, lambda_bounds, threshold_coefficient
from pinsync.topology import SwitchingNetwork

log = logging.getLogger(__name__)

# Deadlines are compared against grid times with this slack; inter-event
# intervals are at least one integration step, so no double firing.
_TIME_EPS = 1e-9


class BlowUpError(RuntimeError):
    """Integration left the finite range."""


@dataclass
class SimConfig:
    """Fully resolved description of one simulation run."""

    network: SwitchingNetwork
    dynamics: NodeDynamics
    c: float
    epsilon: float
    delta: float
    a: float
    b: float
    rule: str
    dt: float
    horizon: float
    x0: np.ndarray
    s0: np.ndarray
    record_stride: int = 10
    trials: int = 1
    seed: int = 0
    initial_mode: int | None = None
    P: tuple[np.ndarray, ...] | None = None
    mu: float | None = None
    xi_max: float = 1.0
    bounds_generator: str = "closed-form"
    margin_factor: float = 1.1
    oracle_dt: float = 1e-4
    certificate: StabilityCertificate | None = None

    @property
    def monitoring(self) -> str:
        return "continuous" if self.rule in (ev.RULE_CONT_STATE, ev.RULE_CONT_EXP) else "discrete"

    def p_family(self) -> list[np.ndarray]:
        m = self.network.num_nodes
        if self.P is None:
            return [np.ones(m) for _ in range(self.network.num_modes)]
        return [np.asarray(p, dtype=float) for p in self.P]


@dataclass(frozen=True)
class DerivedConstants:
    """Constants the trigger rules need, derived once per configuration."""

    beta: float
    lipschitz: float
    one_sided: float
    mu: float
    lambda_lo: float
    lambda_hi: float
    coeff: float | None


def derive_constants(config: SimConfig) -> DerivedConstants:
    quad = config.dynamics.quad
    lo, hi = lambda_bounds(config.p_family(), quad.G)
    coeff = None
    if config.rule in (ev.RULE_CONT_STATE, ev.RULE_DISC_STATE):
        # c = 0 is the degenerate uncoupled limit: the threshold diverges
        # and the state-proportional rules never fire
        coeff = math.inf if config.c == 0.0 else threshold_coefficient(
            quad.beta, lo, hi, config.delta, config.c)
    mu = config.mu if config.mu is not None else default_mu(config.dynamics.one_sided)
    return DerivedConstants(
        beta=quad.beta,
        lipschitz=config.dynamics.lipschitz,
        one_sided=config.dynamics.one_sided,
        mu=mu,
        lambda_lo=lo,
        lambda_hi=hi,
        coeff=coeff,
    )


def euler_step(states: np.ndarray, target: np.ndarray, held_controls: np.ndarray,
               field_fn, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """One explicit Euler step of nodes and target with held controls."""
    new_states = states + dt * (field_fn(states) + held_controls)
    new_target = target + dt * field_fn(target)
    if not (np.isfinite(new_states).all() and np.isfinite(new_target).all()):
        raise BlowUpError("euler step produced a non-finite state")
    return new_states, new_target


def lyapunov_value(xhat: np.ndarray, mode_index: int, P, G: np.ndarray) -> float:
    """Weighted quadratic error: 1/2 sum_i P(u)_ii xhat_i^T G xhat_i."""
    p = np.asarray(P[mode_index], dtype=float)
    quad_rows = np.einsum("ij,ij->i", xhat @ G, xhat)
    return 0.5 * float(np.dot(p, quad_rows))


@dataclass
class TrajectoryRecord:
    times: np.ndarray
    states: np.ndarray
    target: np.ndarray
    lyapunov: np.ndarray
    sq_err: np.ndarray
    max_err_full: float


@dataclass
class EventLog:
    """Ordered trigger events with counting and interval statistics."""

    events: list[ev.TriggerEvent]
    num_nodes: int

    def counts_by_cause(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for e in self.events:
            out[e.cause] = out.get(e.cause, 0) + 1
        return out

    def per_node_counts(self, causes=ev.TRIGGER_CAUSES) -> np.ndarray:
        counts = np.zeros(self.num_nodes, dtype=int)
        causes = set(causes)
        for e in self.events:
            if e.cause in causes:
                counts[e.node] += 1
        return counts

    def trigger_count(self) -> int:
        """Control updates driven by the rule itself (own firings + broadcasts)."""
        return int(self.per_node_counts(ev.TRIGGER_CAUSES).sum())

    def intervals(self, causes=(ev.CAUSE_INIT, ev.CAUSE_RULE)) -> list[np.ndarray]:
        """Per-node gaps between consecutive events of the given causes."""
        causes = set(causes)
        times: list[list[float]] = [[] for _ in range(self.num_nodes)]
        for e in self.events:
            if e.cause in causes:
                times[e.node].append(e.time)
        return [np.diff(np.asarray(ts)) for ts in times]

    def min_interval(self, causes=(ev.CAUSE_INIT, ev.CAUSE_RULE)) -> float:
        gaps = [g.min() for g in self.intervals(causes) if g.size]
        return float(min(gaps)) if gaps else math.inf

    def in_window(self, t0: float, t1: float, causes=ev.TRIGGER_CAUSES) -> np.ndarray:
        counts = np.zeros(self.num_nodes, dtype=int)
        causes = set(causes)
        for e in self.events:
            if e.cause in causes and t0 <= e.time <= t1:
                counts[e.node] += 1
        return counts


@dataclass
class DebugTrace:
    """Full-resolution internals for consistency tests (small runs only).

    Per-step entries snapshot the engine state at each base grid point
    before events at that instant are processed; ``refreshes`` records
    the exact states each per-node snapshot was taken from.
    """

    times: list[float] = field(default_factory=list)
    states: list[np.ndarray] = field(default_factory=list)
    targets: list[np.ndarray] = field(default_factory=list)
    z_rows: list[np.ndarray] = field(default_factory=list)
    theta_rows: list[np.ndarray] = field(default_factory=list)
    mode_indices: list[int] = field(default_factory=list)
    refreshes: list[tuple[float, tuple[int, ...], np.ndarray, np.ndarray]] = field(default_factory=list)
    lyapunov_full: list[float] = field(default_factory=list)


@dataclass
class TrialResult:
    record: TrajectoryRecord
    events: EventLog
    path: ModePath
    seed: int
    xi_min_clamps: int = 0
    debug: DebugTrace | None = None


def _make_solver(config: SimConfig, derived: DerivedConstants) -> ev.DeadlineSolver:
    if config.bounds_generator == "closed-form":
        bounds = ClosedFormBounds(lipschitz=derived.lipschitz,
                                  one_sided=derived.one_sided, mu=derived.mu)
    elif config.bounds_generator == "paired-integration":
        bounds = PairedIntegrationBounds(field=config.dynamics.field, dt=config.oracle_dt,
                                         margin_factor=config.margin_factor)
    else:
        raise ValueError(f"unknown bounds generator {config.bounds_generator!r}")
    return ev.DeadlineSolver(rule=config.rule, bounds=bounds, epsilon=config.epsilon,
                             xi_grid=config.dt, xi_max=config.xi_max,
                             coeff=derived.coeff, a=config.a, b=config.b)


def _validate_trial_inputs(config: SimConfig) -> None:
    m, n = config.network.num_nodes, config.dynamics.dimension
    if config.rule not in ev.RULES:
        raise ValueError(f"unknown rule {config.rule!r}")
    if config.dt <= 0.0 or config.horizon < config.dt:
        raise ValueError("need dt > 0 and horizon >= dt")
    n_steps = round(config.horizon / config.dt)
    if abs(n_steps * config.dt - config.horizon) > 1e-9 * max(1.0, config.horizon):
        raise ValueError("horizon must be an integer number of steps")
    if config.x0.shape != (m, n):
        raise ValueError(f"x0 shape {config.x0.shape} != ({m}, {n})")
    if config.s0.shape != (n,):
        raise ValueError(f"s0 shape {config.s0.shape} != ({n},)")
    if config.rule in (ev.RULE_CONT_EXP, ev.RULE_DISC_EXP) and (config.a <= 0 or config.b <= 0):
        raise ValueError("exponential-envelope rules need a > 0 and b > 0")
    if config.record_stride < 1:
        raise ValueError("record_stride must be >= 1")


def _timeline(n_steps: int, dt: float, switch_times: list[float]):
    """Base grid merged with switching instants: (time, base_index|-1, is_switch)."""
    pts = []
    si, ns = 0, len(switch_times)
    for j in range(n_steps + 1):
        tb = j * dt
        while si < ns and switch_times[si] < tb - 1e-12:
            pts.append((switch_times[si], -1, True))
            si += 1
        if si < ns and abs(switch_times[si] - tb) <= 1e-12:
            pts.append((tb, j, True))
            si += 1
        else:
            pts.append((tb, j, False))
    return pts


def run_trial(config: SimConfig, seed: int, debug: bool = False) -> TrialResult:
    """Run one closed-loop trial; a pure function of (config, seed).

    If a stability certificate is attached and infeasible, the run
    proceeds as exploratory with a warning.
    """
    _validate_trial_inputs(config)
    if config.certificate is not None and not config.certificate.feasible:
        log.warning("stability certificate infeasible; proceeding with an exploratory run")

    net, dyn = config.network, config.dynamics
    m, n = net.num_nodes, dyn.dimension
    c, epsilon = config.c, config.epsilon
    G, Gamma = dyn.quad.G, dyn.quad.Gamma
    p_family = config.p_family()
    derived = derive_constants(config)
    continuous = config.monitoring == "continuous"
    # with zero coupling gain the controls are identically zero and there
    # is nothing to resample: monitoring stays inert
    monitoring_active = c != 0.0
    solver = None if (continuous or not monitoring_active) else _make_solver(config, derived)

    rng = np.random.default_rng(seed)
    u0 = config.initial_mode if config.initial_mode is not None else int(rng.integers(net.num_modes))
    path = generate_path(net, u0, config.horizon, rng)
    n_steps = round(config.horizon / config.dt)
    pts = _timeline(n_steps, config.dt, path.switch_times())

    # combined integration state: rows 0..m-1 nodes, row m target
    state = np.vstack([np.asarray(config.x0, dtype=float), np.asarray(config.s0, dtype=float)])
    controls = np.zeros((m + 1, n))
    X = state[:m]
    theta = controls[:m]

    seg_ptr = 0
    mode = net.modes[path.segments[0].mode]

    last_event = np.zeros(m)
    held_coupling = np.zeros((m, n))
    held_err = np.zeros((m, n))
    deadlines = np.full(m, math.inf)
    broadcast_table = np.zeros((m, m, n)) if not continuous else None

    event_list: list[ev.TriggerEvent] = []
    clamps = 0
    trace = DebugTrace() if debug else None

    rec_times, rec_states, rec_target, rec_V, rec_sq = [], [], [], [], []
    max_err_full = 0.0

    def refresh(idx: np.ndarray, t: float, cause: str) -> None:
        nonlocal clamps
        if idx.size == 0:
            return
        S = state[m]
        th_full = ev.theta_rows(mode, X, S, c, epsilon, Gamma)
        coupling = ev.coupling_rows(mode.laplacian, X)
        held_coupling[idx] = coupling[idx]
        held_err[idx] = X[idx] - S
        theta[idx] = th_full[idx]
        last_event[idx] = t
        for i in idx:
            event_list.append(ev.TriggerEvent(int(i), t, cause))
        if not continuous:
            if cause in (ev.CAUSE_INIT, ev.CAUSE_SWITCH):
                np.copyto(broadcast_table, th_full[None, :, :])
            if solver is not None:
                for i in idx:
                    ctx = ev.build_context(int(i), t, mode, X, S, theta[i], broadcast_table[i])
                    xi = solver.next_interval(ctx)
                    if xi <= solver.xi_grid:
                        clamps += 1
                    deadlines[i] = t + xi
        if trace is not None:
            trace.refreshes.append((t, tuple(int(i) for i in idx), X.copy(), state[m].copy()))

    def record_point(bidx: int, t: float) -> None:
        nonlocal max_err_full
        S = state[m]
        xhat = X - S
        sq = np.einsum("ij,ij->i", xhat, xhat)
        max_err_full = max(max_err_full, math.sqrt(float(sq.max())))
        V = lyapunov_value(xhat, path.segments[seg_ptr].mode, p_family, G)
        if trace is not None:
            trace.lyapunov_full.append(V)
        if bidx % config.record_stride == 0:
            rec_times.append(t)
            rec_states.append(X.copy())
            rec_target.append(S.copy())
            rec_V.append(V)
            rec_sq.append(sq.copy())

    all_nodes = np.arange(m)
    refresh(all_nodes, 0.0, ev.CAUSE_INIT)
    record_point(0, 0.0)

    for p in range(1, len(pts)):
        t_prev = pts[p - 1][0]
        t, bidx, is_switch = pts[p]
        dt_seg = t - t_prev
        if dt_seg > 0.0:
            state += dt_seg * (dyn.field(state) + controls)
        if not np.isfinite(state).all():
            raise BlowUpError(f"state became non-finite at t={t:g}")

        if is_switch:
            seg_ptr += 1
            mode = net.modes[path.segments[seg_ptr].mode]
            refresh(all_nodes, t, ev.CAUSE_SWITCH)

        if bidx >= 0:
            S = state[m]

            def snap_trace(z=None):
                if z is None:
                    z = ev.zi_rows(mode, X, S, held_coupling, held_err, epsilon, Gamma)
                trace.times.append(t)
                trace.states.append(X.copy())
                trace.targets.append(S.copy())
                trace.z_rows.append(z.copy())
                trace.theta_rows.append(theta.copy())
                trace.mode_indices.append(path.segments[seg_ptr].mode)

            if not monitoring_active:
                if trace is not None:
                    snap_trace()
            elif continuous:
                z = ev.zi_rows(mode, X, S, held_coupling, held_err, epsilon, Gamma)
                nz = np.sqrt(np.einsum("ij,ij->i", z, z))
                xhat = X - S
                nx = np.sqrt(np.einsum("ij,ij->i", xhat, xhat))
                if config.rule == ev.RULE_CONT_STATE:
                    due = np.flatnonzero(nz > derived.coeff * nx)
                else:
                    due = np.flatnonzero(nz > config.a * math.exp(-config.b * t))
                if trace is not None:
                    snap_trace(z)
                refresh(due, t, ev.CAUSE_RULE)
            else:
                due = np.flatnonzero(deadlines <= t + _TIME_EPS)
                if trace is not None:
                    snap_trace()
                if due.size:
                    refresh(due, t, ev.CAUSE_RULE)
                    receivers: set[int] = set()
                    for d in due:
                        nb = mode.neighbors(int(d))
                        broadcast_table[nb, int(d)] = theta[int(d)]
                        receivers.update(int(k) for k in nb)
                    receivers -= set(int(d) for d in due)
                    refresh(np.asarray(sorted(receivers), dtype=int), t, ev.CAUSE_BROADCAST)
            record_point(bidx, t)

    record = TrajectoryRecord(
        times=np.asarray(rec_times),
        states=np.asarray(rec_states),
        target=np.asarray(rec_target),
        lyapunov=np.asarray(rec_V),
        sq_err=np.asarray(rec_sq),
        max_err_full=max_err_full,
    )
    return TrialResult(record=record, events=EventLog(event_list, m), path=path,
                       seed=seed, xi_min_clamps=clamps, debug=trace)


def fit_decay_rate(times: np.ndarray, values: np.ndarray) -> float:
    """Exponential rate from least squares on the log of the sample curve.

    Only samples above a tiny floor enter the fit: trajectories that reach
    the target exactly would otherwise drag the regression onto the
    floating-point floor.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    mask = values > 1e-250
    if mask.sum() < 2:
        return 0.0
    slope, _ = np.polyfit(times[mask], np.log(values[mask]), 1)
    return -float(slope)


@dataclass
class EnsembleResult:
    """Pointwise statistics over independent trials with shared initial state."""

    times: np.ndarray
    mean_sq: np.ndarray
    ci95_sq: np.ndarray
    mean_max_sq: np.ndarray
    ci95_max_sq: np.ndarray
    mean_lyapunov: np.ndarray
    decay_rate: float
    lyapunov_decay_rate: float
    seeds: list[int]
    trigger_counts: list[int]
    min_intervals: list[float]
    xi_min_clamps: int


def run_ensemble(config: SimConfig, trials: int | None = None,
                 base_seed: int | None = None) -> EnsembleResult:
    """Monte-Carlo ensemble: identical initial conditions, independent chains.

    Trial k uses seed base_seed + k.  Any failed trial propagates and
    invalidates the whole ensemble.
    """
    trials = config.trials if trials is None else trials
    base_seed = config.seed if base_seed is None else base_seed
    if trials < 1:
        raise ValueError("need at least one trial")
    seeds = [base_seed + k for k in range(trials)]

    sq_curves, max_curves, v_curves = [], [], []
    counts, min_gaps = [], []
    clamps = 0
    times = None
    for k, seed in enumerate(seeds):
        try:
            result = run_trial(config, seed)
        except Exception as exc:
            raise RuntimeError(f"trial {k} (seed {seed}) failed: {exc}") from exc
        rec = result.record
        times = rec.times
        sq_curves.append(rec.sq_err)
        max_curves.append(rec.sq_err.max(axis=1))
        v_curves.append(rec.lyapunov)
        counts.append(result.events.trigger_count())
        min_gaps.append(result.events.min_interval())
        clamps += result.xi_min_clamps

    sq = np.asarray(sq_curves)
    mx = np.asarray(max_curves)
    vs = np.asarray(v_curves)
    scale = 1.96 / math.sqrt(trials) if trials > 1 else 0.0
    mean_sq = sq.mean(axis=0)
    mean_max = mx.mean(axis=0)
    mean_v = vs.mean(axis=0)
    return EnsembleResult(
        times=times,
        mean_sq=mean_sq,
        ci95_sq=sq.std(axis=0, ddof=1) * scale if trials > 1 else np.zeros_like(mean_sq),
        mean_max_sq=mean_max,
        ci95_max_sq=mx.std(axis=0, ddof=1) * scale if trials > 1 else np.zeros_like(mean_max),
        mean_lyapunov=mean_v,
        decay_rate=fit_decay_rate(times, mean_max),
        lyapunov_decay_rate=fit_decay_rate(times, mean_v),
        seeds=seeds,
        trigger_counts=counts,
        min_intervals=min_gaps,
        xi_min_clamps=clamps,
    )
