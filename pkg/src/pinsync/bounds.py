"""Worst-case trajectory bounds for the discrete-monitoring trigger rules.

Two forced copies of the node dynamics

    du/dt = f(u) + theta,   u(0) = u0
    dv/dt = f(v) + vartheta, v(0) = v0

are compared through two one-sided estimates: ``rho`` bounds the drift of
the mismatch (u(t)-u0) - (v(t)-v0) from above via a Gronwall argument with
the Lipschitz constant of f, and ``varrho`` bounds the distance u(t)-v(t)
from below via the one-sided constant of f.  A paired fixed-step
integrator serves as the reference generator for both maps and doubles as
the soundness oracle in tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np


def _norm(x) -> float:
    x = np.asarray(x, dtype=float)
    return float(math.sqrt(float(np.dot(x.ravel(), x.ravel()))))


def default_mu(one_sided: float) -> float:
    """Splitting constant keeping 2*sigma - mu negative and well conditioned."""
    return max(1.0, -2.0 * one_sided)


def rho_lipschitz(t: float, theta, vartheta, u0, v0, lipschitz: float) -> float:
    """Upper bound on ||(u(t)-u0) - (v(t)-v0)||.

    Closed form ((||theta-vartheta|| + L ||u0-v0||)/L) (e^{L t} - 1); for
    L = 0 the analytic limit ||theta-vartheta|| t applies.  Vanishes at
    t = 0 by construction.
    """
    if t < 0.0:
        raise ValueError("t must be nonnegative")
    dtheta = _norm(np.asarray(theta, dtype=float) - np.asarray(vartheta, dtype=float))
    dx = _norm(np.asarray(u0, dtype=float) - np.asarray(v0, dtype=float))
    if lipschitz < 0.0:
        raise ValueError("lipschitz must be nonnegative")
    if lipschitz == 0.0:
        return dtheta * t
    return (dtheta + lipschitz * dx) / lipschitz * math.expm1(lipschitz * t)


def varrho_one_sided(t: float, theta, vartheta, u0, v0, one_sided: float, mu: float) -> float:
    """Lower bound on ||u(t) - v(t)||, clamped at zero where vacuous.

    With sigma the one-sided constant and r = 2*sigma - mu, the squared
    bound is e^{r t} ||u0-v0||^2 - (||theta-vartheta||^2/mu)/r (e^{r t} - 1);
    at r = 0 the second term degenerates to -(||theta-vartheta||^2/mu) t.
    """
    if t < 0.0:
        raise ValueError("t must be nonnegative")
    if mu <= 0.0:
        raise ValueError("mu must be positive")
    dtheta2 = float(np.sum((np.asarray(theta, dtype=float) - np.asarray(vartheta, dtype=float)) ** 2))
    dx2 = float(np.sum((np.asarray(u0, dtype=float) - np.asarray(v0, dtype=float)) ** 2))
    s = 2.0 * one_sided - mu
    if s == 0.0:
        value = dx2 - (dtheta2 / mu) * t
    else:
        growth = math.exp(s * t)
        value = growth * dx2 - (dtheta2 / mu) / s * (growth - 1.0)
    return math.sqrt(value) if value > 0.0 else 0.0


def paired_integration_oracle(field: Callable[[np.ndarray], np.ndarray], theta, vartheta,
                              u0, v0, t: float, dt: float) -> tuple[float, float]:
    """Integrate both forced systems with fixed-step Euler.

    Returns (||(u(t)-u0)-(v(t)-v0)||, ||u(t)-v(t)||).  ``dt`` must divide
    ``t`` up to rounding; integration aborts if the state leaves the
    finite range.
    """
    devs, dists = paired_integration_curve(field, theta, vartheta, u0, v0, [t], dt)
    return devs[0], dists[0]


def paired_integration_curve(field, theta, vartheta, u0, v0, ts, dt: float) -> tuple[list[float], list[float]]:
    """Paired Euler integration reporting at several increasing times at once."""
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    ts = [float(t) for t in ts]
    if any(t < 0.0 for t in ts) or sorted(ts) != ts:
        raise ValueError("report times must be nonnegative and increasing")
    steps = []
    for t in ts:
        k = round(t / dt)
        if abs(k * dt - t) > 1e-9 * max(1.0, t):
            raise ValueError(f"dt={dt} does not divide t={t}")
        steps.append(k)

    state = np.vstack([np.asarray(u0, dtype=float), np.asarray(v0, dtype=float)])
    force = np.vstack([np.asarray(theta, dtype=float), np.asarray(vartheta, dtype=float)])
    start = state.copy()
    devs, dists = [], []
    k = 0
    for target in steps:
        while k < target:
            state = state + dt * (field(state) + force)
            k += 1
            if not np.isfinite(state).all():
                raise FloatingPointError(f"paired integration blew up at t={k * dt:g}")
        moved = state - start
        devs.append(_norm(moved[0] - moved[1]))
        dists.append(_norm(state[0] - state[1]))
    return devs, dists


@dataclass(frozen=True)
class SoundnessRow:
    trial: int
    t: float
    rho: float
    deviation: float
    varrho: float
    distance: float

    def rho_ok(self, slack: float = 1e-6) -> bool:
        return self.deviation <= self.rho + slack

    def varrho_ok(self, slack: float = 1e-6) -> bool:
        return self.distance >= self.varrho - slack


def soundness_scan(field, lipschitz: float, one_sided: float, mu: float,
                   trials: int, ts, dt: float, rng: np.random.Generator,
                   dimension: int = 3, state_range: float = 5.0,
                   force_range: float = 50.0) -> list[SoundnessRow]:
    """Randomized check that rho/varrho bracket the paired-integration truth.

    Draws initial states uniformly in [-state_range, state_range]^n and
    held inputs in [-force_range, force_range]^n, then compares the
    closed-form bounds against the integrator at each report time.
    """
    rows = []
    ts = sorted(float(t) for t in ts)
    for trial in range(trials):
        u0 = rng.uniform(-state_range, state_range, dimension)
        v0 = rng.uniform(-state_range, state_range, dimension)
        theta = rng.uniform(-force_range, force_range, dimension)
        vartheta = rng.uniform(-force_range, force_range, dimension)
        devs, dists = paired_integration_curve(field, theta, vartheta, u0, v0, ts, dt)
        for t, dev, dist in zip(ts, devs, dists):
            rows.append(SoundnessRow(
                trial=trial,
                t=t,
                rho=rho_lipschitz(t, theta, vartheta, u0, v0, lipschitz),
                deviation=dev,
                varrho=varrho_one_sided(t, theta, vartheta, u0, v0, one_sided, mu),
                distance=dist,
            ))
    return rows


@dataclass(frozen=True)
class ClosedFormBounds:
    """Production bound generator backed by the two closed forms."""

    lipschitz: float
    one_sided: float
    mu: float

    def rho(self, t, theta, vartheta, u0, v0) -> float:
        return rho_lipschitz(t, theta, vartheta, u0, v0, self.lipschitz)

    def varrho(self, t, theta, vartheta, u0, v0) -> float:
        return varrho_one_sided(t, theta, vartheta, u0, v0, self.one_sided, self.mu)


@dataclass(frozen=True)
class PairedIntegrationBounds:
    """Numeric bound generator built on the paired integrator.

    The exact paired-trajectory values are widened by ``margin_factor``
    (rho inflated, varrho deflated) so the generator stays conservative
    against integration error; the factor is a configuration knob.
    """

    field: Callable[[np.ndarray], np.ndarray]
    dt: float
    margin_factor: float = 1.1

    def _evaluate(self, t, theta, vartheta, u0, v0) -> tuple[float, float]:
        if t == 0.0:
            return 0.0, _norm(np.asarray(u0, dtype=float) - np.asarray(v0, dtype=float))
        # snap t onto the integrator grid, rounding up to stay conservative
        k = max(1, math.ceil(t / self.dt - 1e-9))
        dev, dist = paired_integration_oracle(self.field, theta, vartheta, u0, v0, k * self.dt, self.dt)
        return dev, dist

    def rho(self, t, theta, vartheta, u0, v0) -> float:
        dev, _ = self._evaluate(t, theta, vartheta, u0, v0)
        return dev * self.margin_factor

    def varrho(self, t, theta, vartheta, u0, v0) -> float:
        _, dist = self._evaluate(t, theta, vartheta, u0, v0)
        return dist / self.margin_factor
