"""Trigger rules and per-node event bookkeeping.

Between events the diffusion and pinning terms of node i are frozen at
the snapshot taken at its last event time.  Two continuous-monitoring
rules fire when the drift signal z_i leaves a state-proportional or an
exponentially decaying envelope; two discrete-monitoring rules instead
precompute the next event deadline from worst-case trajectory bounds and
re-anchor whenever a neighbor broadcasts a new control or the coupling
mode switches.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from pinsync.bounds import ClosedFormBounds
from pinsync.topology import GraphMode

log = logging.getLogger(__name__)

RULE_CONT_STATE = "cont-state"
RULE_CONT_EXP = "cont-exp"
RULE_DISC_STATE = "disc-state"
RULE_DISC_EXP = "disc-exp"
RULES = (RULE_CONT_STATE, RULE_CONT_EXP, RULE_DISC_STATE, RULE_DISC_EXP)

CAUSE_INIT = "initialization"
CAUSE_RULE = "rule-violation"
CAUSE_BROADCAST = "neighbor-broadcast"
CAUSE_SWITCH = "mode-switch"
# Causes that update a node's control because of its own rule firing or a
# neighborhood broadcast; mode switches and initialization are shared by
# every rule and excluded from trigger-count comparisons.
TRIGGER_CAUSES = (CAUSE_RULE, CAUSE_BROADCAST)


@dataclass(frozen=True)
class TriggerEvent:
    node: int
    time: float
    cause: str


def coupling_rows(laplacian: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Row i = sum_j L_ij (x_j - x_i).

    Evaluated in pairwise-difference form (not L @ x, which is equal only
    in exact arithmetic) so the rows vanish bit-exactly at consensus;
    this keeps the consensus manifold invariant under roundoff.
    """
    diffs = x[None, :, :] - x[:, None, :]
    return np.einsum("ij,ijk->ik", laplacian, diffs)


def theta_rows(mode: GraphMode, x: np.ndarray, s: np.ndarray, c: float,
               epsilon: float, Gamma: np.ndarray) -> np.ndarray:
    """Control rows for every node from one state snapshot (x, s).

    Row i is -c sum_j L_ij Gamma (x_j - x_i) - c eps D_i (x_i - s).
    Built with full-matrix expressions so the batched engine path and the
    per-node contract path agree bit for bit.
    """
    coupling = coupling_rows(mode.laplacian, x) @ Gamma.T
    pin = mode.pin_vector()[:, None]
    return -c * coupling - (c * epsilon) * pin * (x - s)


def compute_theta(i: int, mode: GraphMode, held_x: np.ndarray, held_s: np.ndarray,
                  c: float, epsilon: float, Gamma: np.ndarray) -> np.ndarray:
    """Held control of node ``i`` from the snapshot taken at its last event."""
    row = mode.laplacian[i]
    needed = np.flatnonzero(row != 0.0)
    if not np.isfinite(held_x[needed]).all() or not np.isfinite(held_s).all():
        raise RuntimeError(f"node {i + 1}: held snapshot missing or non-finite for a neighbor")
    return theta_rows(mode, held_x, held_s, c, epsilon, Gamma)[i]


def zi_rows(mode: GraphMode, x: np.ndarray, s: np.ndarray, held_coupling: np.ndarray,
            held_err: np.ndarray, epsilon: float, Gamma: np.ndarray) -> np.ndarray:
    """Drift rows since the per-node snapshots.

    ``held_coupling`` row i caches sum_j L_ij (x_j - x_i) at node i's
    snapshot and ``held_err`` row i caches x_i - s there, so each row
    mixes a different snapshot time.
    """
    drift = (coupling_rows(mode.laplacian, x) - held_coupling) @ Gamma.T
    pin = mode.pin_vector()[:, None]
    return drift + epsilon * pin * ((x - s) - held_err)


def compute_zi(i: int, x: np.ndarray, s: np.ndarray, held_x: np.ndarray, held_s: np.ndarray,
               mode: GraphMode, epsilon: float, Gamma: np.ndarray) -> np.ndarray:
    """Drift signal of node ``i``: current minus snapshot relative states."""
    held_coupling = coupling_rows(mode.laplacian, held_x)
    held_err = held_x - held_s
    return zi_rows(mode, x, s, held_coupling, held_err, epsilon, Gamma)[i]


def rule1_check(z_norm: float, xhat_norm: float, coeff: float) -> bool:
    """State-proportional rule: trigger iff ||z_i|| exceeds coeff*||x_i - s||.

    Comparison is strict; boundary equality keeps the control held.
    """
    return z_norm > coeff * xhat_norm


def rule2_check(z_norm: float, t: float, a: float, b: float) -> bool:
    """Exponential-envelope rule: trigger iff ||z_i|| exceeds a e^{-b t}."""
    return z_norm > a * math.exp(-b * t)


@dataclass(frozen=True)
class TriggerContext:
    """Anchor snapshot a discrete-monitoring deadline is computed from."""

    node: int
    anchor_time: float
    theta_i: np.ndarray
    neighbor_idx: np.ndarray
    neighbor_weights: np.ndarray
    neighbor_thetas: np.ndarray
    anchor_x_i: np.ndarray
    anchor_x_nb: np.ndarray
    anchor_s: np.ndarray
    pinned: bool


def build_context(i: int, t: float, mode: GraphMode, x: np.ndarray, s: np.ndarray,
                  theta_i: np.ndarray, neighbor_thetas: np.ndarray) -> TriggerContext:
    """Freeze the rule inputs of node ``i`` at time ``t``.

    ``neighbor_thetas`` is the (m, n) table of last-broadcast controls as
    seen by node ``i``; only the rows of current-mode neighbors are read.
    """
    nb = mode.neighbors(i)
    return TriggerContext(
        node=i,
        anchor_time=t,
        theta_i=np.array(theta_i, dtype=float),
        neighbor_idx=nb,
        neighbor_weights=-mode.laplacian[i, nb],
        neighbor_thetas=np.array(neighbor_thetas[nb], dtype=float),
        anchor_x_i=np.array(x[i], dtype=float),
        anchor_x_nb=np.array(x[nb], dtype=float),
        anchor_s=np.array(s, dtype=float),
        pinned=i in mode.pinned,
    )


def largest_feasible_interval(ok: Callable[[float], bool], xi_grid: float,
                              xi_min: float | None, xi_max: float) -> float:
    """Largest xi satisfying ``ok`` before its first violation on the grid.

    Marches multiples of ``xi_grid`` up to ``xi_max``, then refines the
    bracket around the first violation by bisection to xi_grid/100.  If
    ``ok`` already fails at xi_min the clamp value is returned.
    """
    if xi_grid <= 0.0:
        raise ValueError("xi_grid must be positive")
    xi_min = xi_grid if xi_min is None else xi_min
    if not ok(xi_min):
        log.debug("deadline rule violated at the minimum interval %g; clamping", xi_min)
        return xi_min
    lo = xi_min
    xi = xi_min
    k = int(math.floor(xi_min / xi_grid + 1e-12))
    while xi < xi_max:
        k += 1
        xi = min(k * xi_grid, xi_max)
        if not ok(xi):
            hi = xi
            while hi - lo > xi_grid / 100.0:
                mid = 0.5 * (lo + hi)
                if ok(mid):
                    lo = mid
                else:
                    hi = mid
            return max(lo, xi_min)
        lo = xi
    return xi_max


def _lhs_closure(ctx: TriggerContext, epsilon: float, bounds) -> Callable[[float], float]:
    """Sum of neighbor and pinning drift bounds as a function of xi."""
    if isinstance(bounds, ClosedFormBounds):
        lip = bounds.lipschitz
        dth = ctx.neighbor_thetas - ctx.theta_i
        dx = ctx.anchor_x_nb - ctx.anchor_x_i
        coef = float(np.dot(ctx.neighbor_weights,
                            np.sqrt(np.einsum("ij,ij->i", dth, dth))
                            + lip * np.sqrt(np.einsum("ij,ij->i", dx, dx))))
        if ctx.pinned:
            coef += epsilon * (float(np.linalg.norm(ctx.theta_i))
                               + lip * float(np.linalg.norm(ctx.anchor_x_i - ctx.anchor_s)))
        if lip == 0.0:
            return lambda xi: coef * xi
        coef /= lip
        return lambda xi: coef * math.expm1(lip * xi)

    zero = np.zeros_like(ctx.theta_i)

    def lhs(xi: float) -> float:
        total = 0.0
        for w, th_j, x_j in zip(ctx.neighbor_weights, ctx.neighbor_thetas, ctx.anchor_x_nb):
            total += w * bounds.rho(xi, ctx.theta_i, th_j, ctx.anchor_x_i, x_j)
        if ctx.pinned:
            total += epsilon * bounds.rho(xi, ctx.theta_i, zero, ctx.anchor_x_i, ctx.anchor_s)
        return total

    return lhs


def _target_varrho_closure(ctx: TriggerContext, bounds) -> Callable[[float], float]:
    if isinstance(bounds, ClosedFormBounds):
        s_rate = 2.0 * bounds.one_sided - bounds.mu
        err2 = float(np.sum((ctx.anchor_x_i - ctx.anchor_s) ** 2))
        th2 = float(np.sum(ctx.theta_i ** 2))

        def varrho(xi: float) -> float:
            if s_rate == 0.0:
                value = err2 - (th2 / bounds.mu) * xi
            else:
                growth = math.exp(s_rate * xi)
                value = growth * err2 - (th2 / bounds.mu) / s_rate * (growth - 1.0)
            return math.sqrt(value) if value > 0.0 else 0.0

        return varrho

    zero = np.zeros_like(ctx.theta_i)
    return lambda xi: bounds.varrho(xi, ctx.theta_i, zero, ctx.anchor_x_i, ctx.anchor_s)


def rule3_next_interval(ctx: TriggerContext, epsilon: float, coeff: float, bounds,
                        xi_grid: float, xi_min: float | None = None,
                        xi_max: float = 1.0) -> float:
    """Deadline under the state-proportional discrete rule.

    Largest xi with sum_j w_j rho(xi, theta_i, theta_j, x_i, x_j)
    + eps D_i rho(xi, theta_i, 0, x_i, s) <= coeff * varrho(xi, theta_i, 0, x_i, s).
    Each inequality evaluation costs one drift-bound term per neighbor
    plus a pinning term and one distance bound, at most m+1 bound
    evaluations in total.
    """
    if coeff <= 0.0:
        raise ValueError("threshold coefficient must be positive")
    lhs = _lhs_closure(ctx, epsilon, bounds)
    varrho = _target_varrho_closure(ctx, bounds)
    return largest_feasible_interval(lambda xi: lhs(xi) <= coeff * varrho(xi),
                                     xi_grid, xi_min, xi_max)


def rule4_next_interval(ctx: TriggerContext, epsilon: float, a: float, b: float, bounds,
                        xi_grid: float, xi_min: float | None = None,
                        xi_max: float = 1.0) -> float:
    """Deadline under the exponential-envelope discrete rule.

    Same left-hand side as the state-proportional rule against the
    envelope a e^{-b (xi + t_anchor)}.
    """
    if a <= 0.0 or b <= 0.0:
        raise ValueError("envelope constants a, b must be positive")
    lhs = _lhs_closure(ctx, epsilon, bounds)
    t0 = ctx.anchor_time
    return largest_feasible_interval(lambda xi: lhs(xi) <= a * math.exp(-b * (xi + t0)),
                                     xi_grid, xi_min, xi_max)


@dataclass(frozen=True)
class DeadlineSolver:
    """Bundles one discrete rule with its bound generator and search grid."""

    rule: str
    bounds: object
    epsilon: float
    xi_grid: float
    xi_max: float = 1.0
    coeff: float | None = None
    a: float | None = None
    b: float | None = None

    def next_interval(self, ctx: TriggerContext) -> float:
        if self.rule == RULE_DISC_STATE:
            return rule3_next_interval(ctx, self.epsilon, self.coeff, self.bounds,
                                       self.xi_grid, xi_max=self.xi_max)
        if self.rule == RULE_DISC_EXP:
            return rule4_next_interval(ctx, self.epsilon, self.a, self.b, self.bounds,
                                       self.xi_grid, xi_max=self.xi_max)
        raise ValueError(f"not a discrete-monitoring rule: {self.rule}")


@dataclass(frozen=True)
class NodeTriggerState:
    """Per-node event bookkeeping: snapshot, held control and next deadline."""

    node: int
    last_event_time: float
    held_x: np.ndarray
    held_s: np.ndarray
    theta: np.ndarray
    neighbor_thetas: np.ndarray | None = None
    context: TriggerContext | None = None
    next_deadline: float | None = None


def refresh_state(state: NodeTriggerState, t: float, mode: GraphMode, x: np.ndarray,
                  s: np.ndarray, c: float, epsilon: float, Gamma: np.ndarray,
                  solver: DeadlineSolver | None = None) -> NodeTriggerState:
    """Re-anchor a node at the current states: new snapshot, control, deadline."""
    i = state.node
    theta_i = compute_theta(i, mode, x, s, c, epsilon, Gamma)
    ctx = None
    deadline = None
    if solver is not None:
        ctx = build_context(i, t, mode, x, s, theta_i, state.neighbor_thetas)
        deadline = t + solver.next_interval(ctx)
    return replace(state, last_event_time=t, held_x=np.array(x, dtype=float),
                   held_s=np.array(s, dtype=float), theta=theta_i,
                   context=ctx, next_deadline=deadline)


def on_neighbor_broadcast(state: NodeTriggerState, j: int, theta_j: np.ndarray, t: float,
                          mode: GraphMode, x: np.ndarray, s: np.ndarray, c: float,
                          epsilon: float, Gamma: np.ndarray,
                          solver: DeadlineSolver) -> NodeTriggerState:
    """Absorb a broadcast from neighbor ``j``: replace its law and re-anchor.

    The receiving node refreshes its own control from the current states
    but does not broadcast in turn, so broadcasts never cascade.
    """
    if j not in set(mode.neighbors(state.node).tolist()):
        raise ValueError(f"node {j + 1} is not a current-mode neighbor of {state.node + 1}")
    table = np.array(state.neighbor_thetas, dtype=float)
    table[j] = theta_j
    return refresh_state(replace(state, neighbor_thetas=table), t, mode, x, s,
                         c, epsilon, Gamma, solver)


def on_mode_switch(state: NodeTriggerState, new_mode: GraphMode, t: float, x: np.ndarray,
                   s: np.ndarray, all_thetas: np.ndarray, c: float, epsilon: float,
                   Gamma: np.ndarray, solver: DeadlineSolver | None = None) -> NodeTriggerState:
    """Re-anchor at a switching instant under the new mode.

    Every node refreshes simultaneously at a switch, so the broadcast
    table syncs to the actual new controls of all nodes.
    """
    table = None
    if state.neighbor_thetas is not None:
        table = np.array(all_thetas, dtype=float)
    return refresh_state(replace(state, neighbor_thetas=table), t, new_mode, x, s,
                         c, epsilon, Gamma, solver)


def zeno_lower_bound(m: int, lipschitz: float, c: float, epsilon: float,
                     a: float, b: float) -> float:
    """Closed-form lower bound on expected inter-event intervals (envelope rule)."""
    if min(m, lipschitz, c, a, b) <= 0 or epsilon < 0:
        raise ValueError("m, lipschitz, c, a, b must be positive and epsilon nonnegative")
    big_a = (2.0 * m * lipschitz + 2.0 * c * m * (m + epsilon) + lipschitz + c * m) / (a * b)
    big_b = (2.0 * m + 1.0) / b
    return math.log(1.0 + 1.0 / (big_a + big_b)) / b
