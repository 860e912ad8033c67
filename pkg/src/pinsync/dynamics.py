"""Node vector fields and the constants the trigger rules depend on.

The built-in benchmark is the Chua circuit, a piecewise-linear chaotic
oscillator.  For piecewise-linear fields the one-sided and Lipschitz
constants, and the quadratic decrement margin used by the state-dependent
trigger rules, all follow from the finitely many Jacobian matrices.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class ChuaParams:
    p: float = 9.78
    q: float = 14.97
    m0: float = -1.31
    m1: float = -0.75


def chua_field(params: ChuaParams, z: np.ndarray) -> np.ndarray:
    """Chua circuit vector field, vectorized over leading axes of ``z``.

    f(z) = [p(-z1 + z2 - g(z1)), z1 - z2 + z3, -q z2] with the three-segment
    piecewise-linear nonlinearity g(z1) = m1 z1 + (m0-m1)(|z1+1| - |z1-1|)/2.
    """
    z = np.asarray(z, dtype=float)
    z1 = z[..., 0]
    z2 = z[..., 1]
    z3 = z[..., 2]
    g = params.m1 * z1 + 0.5 * (params.m0 - params.m1) * (np.abs(z1 + 1.0) - np.abs(z1 - 1.0))
    out = np.empty_like(z)
    out[..., 0] = params.p * (-z1 + z2 - g)
    out[..., 1] = z1 - z2 + z3
    out[..., 2] = -params.q * z2
    return out


def chua_jacobians(params: ChuaParams) -> tuple[np.ndarray, np.ndarray]:
    """Jacobians of the two linear regions: |z1| > 1 (slope m1), |z1| < 1 (slope m0)."""
    outer = np.array([
        [params.p * (-1.0 - params.m1), params.p, 0.0],
        [1.0, -1.0, 1.0],
        [0.0, -params.q, 0.0],
    ])
    inner = outer.copy()
    inner[0, 0] = params.p * (-1.0 - params.m0)
    return outer, inner


def _symmetric_part(a: np.ndarray) -> np.ndarray:
    return (a + a.T) / 2.0


def estimate_quad_beta(alpha: float, jacobian_regions) -> float:
    """Quadratic decrement margin: alpha minus the largest symmetric-part eigenvalue.

    Valid for continuous piecewise-linear fields with G = Gamma = I, where
    the decrement inequality holds with this margin on every region.
    """
    if not len(jacobian_regions):
        raise ValueError("jacobian_regions must be nonempty")
    lam = max(float(np.linalg.eigvalsh(_symmetric_part(np.asarray(a, dtype=float)))[-1])
              for a in jacobian_regions)
    beta = alpha - lam
    if beta <= 0.0:
        warnings.warn("quadratic decrement margin nonpositive; state-dependent rules inapplicable",
                      stacklevel=2)
    return beta


def estimate_lipschitz(jacobian_regions) -> float:
    """Global Lipschitz constant: the largest spectral norm over the regions."""
    if not len(jacobian_regions):
        raise ValueError("jacobian_regions must be nonempty")
    return max(float(np.linalg.norm(np.asarray(a, dtype=float), 2)) for a in jacobian_regions)


def estimate_one_sided(jacobian_regions) -> float:
    """One-sided constant: the smallest symmetric-part eigenvalue over the regions.

    Bounds (u-v)^T (f(u)-f(v)) >= sigma ||u-v||^2 for piecewise-linear f.
    """
    if not len(jacobian_regions):
        raise ValueError("jacobian_regions must be nonempty")
    return min(float(np.linalg.eigvalsh(_symmetric_part(np.asarray(a, dtype=float)))[0])
               for a in jacobian_regions)


@dataclass(frozen=True)
class QuadParams:
    """Quadratic decrement constants (G, alpha, Gamma, beta)."""

    G: np.ndarray
    alpha: float
    Gamma: np.ndarray
    beta: float


@dataclass(frozen=True)
class NodeDynamics:
    """A node vector field together with its derived analysis constants."""

    name: str
    dimension: int
    field: Callable[[np.ndarray], np.ndarray]
    jacobian_regions: tuple[np.ndarray, ...]
    lipschitz: float
    one_sided: float
    quad: QuadParams
    params: dict = field(default_factory=dict)


def make_chua(params: ChuaParams | None = None, alpha: float = 10.0,
              G: np.ndarray | None = None, Gamma: np.ndarray | None = None,
              beta: float | None = None, lipschitz: float | None = None,
              one_sided: float | None = None) -> NodeDynamics:
    """Chua benchmark dynamics; constants derived from the region Jacobians.

    ``beta``, ``lipschitz`` and ``one_sided`` may be pinned explicitly to
    reproduce externally reported values instead of the derived ones.
    """
    params = params or ChuaParams()
    regions = chua_jacobians(params)
    G = np.eye(3) if G is None else np.asarray(G, dtype=float)
    Gamma = np.eye(3) if Gamma is None else np.asarray(Gamma, dtype=float)
    beta_val = estimate_quad_beta(alpha, regions) if beta is None else float(beta)
    return NodeDynamics(
        name="chua",
        dimension=3,
        field=lambda z: chua_field(params, z),
        jacobian_regions=regions,
        lipschitz=estimate_lipschitz(regions) if lipschitz is None else float(lipschitz),
        one_sided=estimate_one_sided(regions) if one_sided is None else float(one_sided),
        quad=QuadParams(G=G, alpha=float(alpha), Gamma=Gamma, beta=beta_val),
        params={"p": params.p, "q": params.q, "m0": params.m0, "m1": params.m1},
    )


def make_linear(A: np.ndarray, alpha: float = 1.0, beta: float | None = None,
                G: np.ndarray | None = None, Gamma: np.ndarray | None = None) -> NodeDynamics:
    """Linear dynamics f(x) = A x; useful for closed-form checks."""
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    regions = (A,)
    G = np.eye(n) if G is None else np.asarray(G, dtype=float)
    Gamma = np.eye(n) if Gamma is None else np.asarray(Gamma, dtype=float)
    beta_val = estimate_quad_beta(alpha, regions) if beta is None else float(beta)
    return NodeDynamics(
        name="linear",
        dimension=n,
        field=lambda z: z @ A.T,
        jacobian_regions=regions,
        lipschitz=estimate_lipschitz(regions),
        one_sided=estimate_one_sided(regions),
        quad=QuadParams(G=G, alpha=float(alpha), Gamma=Gamma, beta=beta_val),
        params={"A": A.tolist()},
    )


def _chua_factory(block: dict) -> NodeDynamics:
    raw = dict(block.get("params") or {})
    params = ChuaParams(**{k: float(v) for k, v in raw.items()})
    return make_chua(
        params=params,
        alpha=float(block.get("alpha", 10.0)),
        G=block.get("G"),
        Gamma=block.get("Gamma"),
        beta=block.get("beta"),
        lipschitz=block.get("lipschitz"),
        one_sided=block.get("one_sided"),
    )


def _linear_factory(block: dict) -> NodeDynamics:
    raw = dict(block.get("params") or {})
    if "A" not in raw:
        raise ValueError("linear dynamics require params.A")
    return make_linear(np.asarray(raw["A"], dtype=float),
                       alpha=float(block.get("alpha", 1.0)),
                       beta=block.get("beta"),
                       G=block.get("G"), Gamma=block.get("Gamma"))


DYNAMICS_REGISTRY: dict[str, Callable[[dict], NodeDynamics]] = {
    "chua": _chua_factory,
    "linear": _linear_factory,
}


def resolve_dynamics(block: dict) -> NodeDynamics:
    """Instantiate a named built-in dynamics from its configuration block."""
    name = block.get("name")
    if name not in DYNAMICS_REGISTRY:
        known = ", ".join(sorted(DYNAMICS_REGISTRY))
        raise ValueError(f"unknown dynamics {name!r}; built-ins: {known}")
    return DYNAMICS_REGISTRY[name](block)
