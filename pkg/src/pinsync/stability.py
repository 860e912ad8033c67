"""Mode-wise stability certificate for the switched pinned network.

For each mode u the checker assembles the symmetric block matrix

    M(u) = sym( P(u)[alpha I - c L(u) - c eps D(u)] (x) G Gamma )
           + 1/2 sum_v Q[u,v] P(v) (x) G

((x) is the Kronecker product, sym(S) = (S + S^T)/2).  The certificate is
feasible when every M(u) is negative semidefinite up to a tolerance; the
same spectral constants feed the trigger-threshold coefficient used by
the state-dependent rules.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from pinsync.topology import SwitchingNetwork

# Constructed condition matrices are symmetric by construction; a larger
# asymmetry indicates a bug rather than roundoff.
_SYMMETRY_TOL = 1e-12


@dataclass(frozen=True)
class StabilityCertificate:
    """Per-mode margins plus the spectral constants of the weighting family."""

    margins: tuple[float, ...]
    feasible: bool
    lambda_lo: float
    lambda_hi: float
    tolerance: float
    threshold_coeff: float | None = None


def _as_p_family(P, num_modes: int, m: int) -> list[np.ndarray]:
    if P is None:
        return [np.ones(m) for _ in range(num_modes)]
    fam = [np.asarray(p, dtype=float).reshape(-1) for p in P]
    if len(fam) != num_modes:
        raise ValueError(f"need {num_modes} diagonal weight vectors, got {len(fam)}")
    for p in fam:
        if p.shape != (m,):
            raise ValueError(f"diagonal weight vector has length {p.shape[0]}, expected {m}")
    return fam


def condition_matrix(net: SwitchingNetwork, u: int, P, G: np.ndarray, Gamma: np.ndarray,
                     alpha: float, c: float, epsilon: float) -> np.ndarray:
    """Assemble M(u) for mode ``u``; ``P`` is a per-mode list of diagonal vectors."""
    m = net.num_nodes
    G = np.asarray(G, dtype=float)
    Gamma = np.asarray(Gamma, dtype=float)
    if not np.allclose(G, G.T, atol=_SYMMETRY_TOL):
        raise ValueError("G must be symmetric positive definite")
    fam = _as_p_family(P, net.num_modes, m)
    mode = net.modes[u]
    core = alpha * np.eye(m) - c * mode.laplacian - (c * epsilon) * np.diag(mode.pin_vector())
    block = np.kron(fam[u][:, None] * core, G @ Gamma)
    mat = (block + block.T) / 2.0
    for v in range(net.num_modes):
        q_uv = net.generator[u, v]
        if q_uv != 0.0:
            mat += 0.5 * q_uv * np.kron(np.diag(fam[v]), G)
    asym = np.max(np.abs(mat - mat.T)) if mat.size else 0.0
    if asym > _SYMMETRY_TOL:
        raise RuntimeError(f"condition matrix asymmetry {asym:g} exceeds {_SYMMETRY_TOL:g}")
    return mat


def lambda_bounds(P, G: np.ndarray, num_modes: int | None = None) -> tuple[float, float]:
    """Smallest/largest eigenvalues of P(v) (x) G across the mode family."""
    G = np.asarray(G, dtype=float)
    fam = [np.asarray(p, dtype=float).reshape(-1) for p in P]
    if num_modes is not None and len(fam) != num_modes:
        raise ValueError(f"need {num_modes} diagonal weight vectors, got {len(fam)}")
    lo = math.inf
    hi = -math.inf
    for p in fam:
        eigs = np.linalg.eigvalsh(np.kron(np.diag(p), G))
        lo = min(lo, float(eigs[0]))
        hi = max(hi, float(eigs[-1]))
    if lo <= 0.0:
        raise ValueError("P or G not positive definite")
    return lo, hi


def threshold_coefficient(beta: float, lambda_lo: float, lambda_hi: float,
                          delta: float, c: float) -> float:
    """State-dependent trigger threshold (beta*lam_lo - delta*lam_hi/2) / (sqrt(c)*lam_hi)."""
    if c <= 0.0:
        raise ValueError("coupling strength c must be positive")
    limit = 2.0 * beta * lambda_lo / lambda_hi
    if not 0.0 < delta <= limit:
        raise ValueError(f"decay constant delta must lie in (0, {limit:g}], got {delta:g}")
    return (beta * lambda_lo - 0.5 * delta * lambda_hi) / (math.sqrt(c) * lambda_hi)


def check_condition(net: SwitchingNetwork, P, G: np.ndarray, Gamma: np.ndarray,
                    alpha: float, c: float, epsilon: float, tol: float = 1e-9,
                    beta: float | None = None, delta: float | None = None) -> StabilityCertificate:
    """Evaluate every mode margin with a dense symmetric eigensolver.

    Feasible iff max eigenvalue of each M(u) is at most ``tol``.  When
    ``beta`` and ``delta`` are supplied, the trigger-threshold coefficient
    is attached to the certificate.
    """
    if tol < 0.0:
        raise ValueError("tolerance must be nonnegative")
    m = net.num_nodes
    fam = _as_p_family(P, net.num_modes, m)
    margins = []
    for u in range(net.num_modes):
        mat = condition_matrix(net, u, fam, G, Gamma, alpha, c, epsilon)
        margins.append(float(np.linalg.eigvalsh(mat)[-1]))
    lo, hi = lambda_bounds(fam, G)
    coeff = None
    if beta is not None and delta is not None:
        coeff = threshold_coefficient(beta, lo, hi, delta, c)
    return StabilityCertificate(
        margins=tuple(margins),
        feasible=all(mu <= tol for mu in margins),
        lambda_lo=lo,
        lambda_hi=hi,
        tolerance=tol,
        threshold_coeff=coeff,
    )
