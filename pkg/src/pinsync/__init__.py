"""Event-triggered pinning control of coupled dynamical networks.

The package simulates m identical nonlinear nodes coupled through a
unit-weight graph Laplacian whose topology and pinned-node set jump
between finitely many modes, driven by a continuous-time Markov chain.
Diffusion and pinning feedback terms are held constant between trigger
events; four triggering rules are provided, two based on continuous
monitoring of neighborhood states and two that predict the next event
from worst-case trajectory bounds (discrete monitoring).
"""

__version__ = "0.1.0"

from pinsync.topology import GraphMode, SwitchingNetwork, laplacian_from_edges, validate_network
from pinsync.markov import ModePath, ModeSegment, generate_path, sample_transition, sojourn_rate
from pinsync.dynamics import ChuaParams, NodeDynamics, chua_field, chua_jacobians
from pinsync.stability import StabilityCertificate, check_condition, threshold_coefficient
from pinsync.engine import SimConfig, run_ensemble, run_trial

__all__ = [
    "GraphMode",
    "SwitchingNetwork",
    "laplacian_from_edges",
    "validate_network",
    "ModePath",
    "ModeSegment",
    "sojourn_rate",
    "sample_transition",
    "generate_path",
    "ChuaParams",
    "NodeDynamics",
    "chua_field",
    "chua_jacobians",
    "StabilityCertificate",
    "check_condition",
    "threshold_coefficient",
    "SimConfig",
    "run_trial",
    "run_ensemble",
    "__version__",
]
