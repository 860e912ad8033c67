"""Continuous-time Markov chain sampling for the switching signal.

The chain lives on the mode indices of a :class:`~pinsync.topology.SwitchingNetwork`.
Sojourn times in mode u are exponential with rate -Q[u,u]; on leaving u
the chain jumps to v != u with probability -Q[u,v]/Q[u,u].
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from pinsync.topology import SwitchingNetwork

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ModeSegment:
    mode: int
    start: float
    end: float

    @property
    def duration(self) -> float:
        return self.end - self.start


@dataclass(frozen=True)
class ModePath:
    """Piecewise-constant mode signal tiling [0, horizon].

    Segments are contiguous, consecutive segments carry distinct modes,
    and the final segment ends exactly at the horizon.
    """

    segments: tuple[ModeSegment, ...]
    horizon: float

    def switch_times(self) -> list[float]:
        """Interior switching instants (segment boundaries except 0 and horizon)."""
        return [seg.start for seg in self.segments[1:]]

    def mode_at(self, t: float) -> int:
        for seg in self.segments:
            if seg.start <= t < seg.end:
                return seg.mode
        return self.segments[-1].mode

    def to_rows(self) -> list[tuple[int, float, float]]:
        """(mode, t_start, t_end) rows with 1-based mode labels, for CSV dumps."""
        return [(seg.mode + 1, seg.start, seg.end) for seg in self.segments]


def sojourn_rate(net: SwitchingNetwork, u: int) -> float:
    """Exponential holding rate of mode ``u``: the negated generator diagonal."""
    return -float(net.generator[u, u])


def sample_transition(net: SwitchingNetwork, u: int, rng: np.random.Generator) -> int:
    """Draw the jump destination from mode ``u`` (probability -Q[u,v]/Q[u,u])."""
    rate = sojourn_rate(net, u)
    if rate <= 0.0:
        raise ValueError(f"no transition from absorbing mode {u + 1}")
    probs = net.generator[u] / rate
    r = rng.random()
    acc = 0.0
    last = None
    for v in range(net.num_modes):
        if v == u:
            continue
        p = probs[v]
        if p <= 0.0:
            continue
        acc += p
        last = v
        if r < acc:
            return v
    # acc can fall a rounding error short of 1; the final candidate absorbs it
    if last is None:
        raise ValueError(f"no transition from absorbing mode {u + 1}")
    return last


def generate_path(net: SwitchingNetwork, u0: int, horizon: float, rng: np.random.Generator) -> ModePath:
    """Sample a mode path on [0, horizon] starting from mode ``u0``.

    The result is a pure function of (net, u0, horizon, rng state): feeding
    a generator seeded identically reproduces the path bit for bit.
    """
    if horizon <= 0.0:
        raise ValueError("horizon must be positive")
    segments = []
    t = 0.0
    u = int(u0)
    while t < horizon:
        rate = sojourn_rate(net, u)
        if rate <= 0.0:
            log.info("mode %d is absorbing; path stays there until the horizon", u + 1)
            segments.append(ModeSegment(u, t, horizon))
            break
        stay = rng.exponential(1.0 / rate)
        t_next = t + stay
        if t_next >= horizon:
            segments.append(ModeSegment(u, t, horizon))
            break
        segments.append(ModeSegment(u, t, t_next))
        u = sample_transition(net, u, rng)
        t = t_next
    return ModePath(segments=tuple(segments), horizon=horizon)
