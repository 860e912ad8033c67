"""Configuration ingestion, run manifests, and CSV persistence.

Runs are described by a single YAML file (key/value sections plus nested
tables).  Loading resolves and validates everything up front: graph
modes, generator, dynamics, rule scalars, and initial conditions.  Every
violation found is reported, not just the first.

Output files are CSV with a leading ``# columns:`` comment declaring the
schema.  Column reference (node and mode labels are 1-based):

    trajectory.csv  t,node,x1..xn,s1..sn,V
    events.csv      t,node,cause
    modes.csv       u,t_start,t_end
    event_hist.csv  node,cause,count,window_start,window_end
    ensemble.csv    t,mean_sq_err_node_1..m,ci95_node_1..m,max_sq_err_mean,max_sq_err_ci95
    bounds_test.csv trial,t,rho,deviation,varrho,distance

``check`` additionally writes a flat key=value report (check.txt), and
``run``/``ensemble`` write a manifest.json with the config digest, seed,
tool version, output paths and wall-clock duration.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from pinsync import events as ev
from pinsync.bounds import SoundnessRow, default_mu, soundness_scan
from pinsync.dynamics import NodeDynamics, resolve_dynamics
from pinsync.engine import (DerivedConstants, EnsembleResult, SimConfig, TrialResult,
                            derive_constants)
from pinsync.markov import ModePath
from pinsync.stability import StabilityCertificate, check_condition, lambda_bounds
from pinsync.topology import (SwitchingNetwork, TopologyError, graph_mode_from_edges,
                              validate_network)


class ConfigError(ValueError):
    """Invalid or unparsable run configuration; carries all diagnostics."""

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.diagnostics))


@dataclass
class LoadedConfig:
    """A validated run description plus its canonical form and digest."""

    sim: SimConfig
    raw: dict
    canonical: str
    digest: str

    @property
    def derived(self) -> DerivedConstants:
        return derive_constants(self.sim)


def canonical_text(raw: dict) -> str:
    """Stable serialization of a configuration mapping (sorted keys)."""
    return yaml.safe_dump(raw, sort_keys=True, default_flow_style=False)


def config_digest(raw: dict) -> str:
    return hashlib.sha256(canonical_text(raw).encode()).hexdigest()


def preset_path(name: str) -> Path:
    """Filesystem path of a bundled preset configuration."""
    path = resources.files("pinsync") / "presets" / f"{name}.yaml"
    if not path.is_file():
        raise FileNotFoundError(f"no bundled preset named {name!r}")
    return Path(str(path))


def resolve_config_path(value: str) -> Path:
    """Interpret ``value`` as a file path, falling back to a preset name."""
    path = Path(value)
    if path.is_file():
        return path
    try:
        return preset_path(value)
    except FileNotFoundError:
        raise ConfigError([f"config file not found: {value}"]) from None


def _section(raw: dict, name: str, diags: list[str]) -> dict:
    block = raw.get(name)
    if not isinstance(block, dict):
        diags.append(f"missing or malformed section '{name}'")
        return {}
    return block


def _num(block: dict, key: str, diags: list[str], section: str, default=None,
         minimum=None, strict=False) -> float | None:
    if key not in block:
        if default is None:
            diags.append(f"{section}.{key} is required")
            return None
        return default
    try:
        val = float(block[key])
    except (TypeError, ValueError):
        diags.append(f"{section}.{key} is not a number: {block[key]!r}")
        return None
    if minimum is not None and (val <= minimum if strict else val < minimum):
        rel = ">" if strict else ">="
        diags.append(f"{section}.{key} must be {rel} {minimum:g}, got {val:g}")
        return None
    return val


def _build_network(raw: dict, diags: list[str]) -> SwitchingNetwork | None:
    block = _section(raw, "network", diags)
    if not block:
        return None
    try:
        m = int(block["nodes"])
    except (KeyError, TypeError, ValueError):
        diags.append("network.nodes must be a positive integer")
        return None
    if m < 1:
        diags.append("network.nodes must be a positive integer")
        return None
    modes_raw = block.get("modes")
    if not isinstance(modes_raw, list) or not modes_raw:
        diags.append("network.modes must be a nonempty list")
        return None
    modes = []
    for k, entry in enumerate(modes_raw):
        if not isinstance(entry, dict) or "edges" not in entry:
            diags.append(f"network.modes[{k + 1}] must define 'edges'")
            continue
        if "pinned" not in entry:
            diags.append(f"network.modes[{k + 1}] is missing its pinned set")
            continue
        try:
            modes.append(graph_mode_from_edges(entry["edges"], entry["pinned"], m))
        except TopologyError as exc:
            diags.append(f"network.modes[{k + 1}]: {exc}")
    gen_raw = block.get("generator")
    if gen_raw is None:
        diags.append("network.generator is required")
        return None
    gen = np.asarray(gen_raw, dtype=float)
    if len(modes) != len(modes_raw):
        return None
    net = SwitchingNetwork(modes=tuple(modes), generator=gen)
    problems = validate_network(net)
    if problems:
        diags.extend(f"network: {p}" for p in problems)
        return None
    return net


def _build_dynamics(raw: dict, diags: list[str]) -> NodeDynamics | None:
    block = _section(raw, "dynamics", diags)
    if not block:
        return None
    try:
        return resolve_dynamics(block)
    except Exception as exc:
        diags.append(f"dynamics: {exc}")
        return None


def load_config(path: str | Path) -> LoadedConfig:
    """Parse, validate, and resolve a run configuration file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError([f"cannot read config: {exc}"]) from exc
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" (line {mark.line + 1}, column {mark.column + 1})" if mark else ""
        raise ConfigError([f"parse error{where}: {exc}"]) from exc
    if not isinstance(raw, dict):
        raise ConfigError(["config root must be a mapping"])
    return resolve_config(raw)


def resolve_config(raw: dict) -> LoadedConfig:
    """Validate a parsed configuration mapping and resolve all pieces."""
    diags: list[str] = []
    net = _build_network(raw, diags)
    dyn = _build_dynamics(raw, diags)

    control = _section(raw, "control", diags)
    c = _num(control, "c", diags, "control", minimum=0.0, strict=True)
    epsilon = _num(control, "epsilon", diags, "control", minimum=0.0, strict=True)
    delta = _num(control, "delta", diags, "control", default=0.0)
    a = _num(control, "a", diags, "control", default=0.0)
    b = _num(control, "b", diags, "control", default=0.0)
    rule = control.get("rule", ev.RULE_CONT_STATE)
    if rule not in ev.RULES:
        diags.append(f"control.rule must be one of {', '.join(ev.RULES)}; got {rule!r}")

    p_family = None
    if "P" in control and net is not None:
        try:
            p_family = tuple(np.asarray(p, dtype=float) for p in control["P"])
            if len(p_family) != net.num_modes:
                diags.append(f"control.P needs {net.num_modes} diagonal vectors")
            elif any(p.shape != (net.num_nodes,) or (p <= 0).any() for p in p_family):
                diags.append("control.P entries must be positive length-m vectors")
        except (TypeError, ValueError):
            diags.append("control.P must be a list of per-mode diagonal vectors")
            p_family = None

    sim = _section(raw, "simulation", diags)
    dt = _num(sim, "dt", diags, "simulation", minimum=0.0, strict=True)
    horizon = _num(sim, "horizon", diags, "simulation", minimum=0.0, strict=True)
    if dt and horizon:
        if horizon < dt:
            diags.append("simulation.horizon must be at least one step")
        elif abs(round(horizon / dt) * dt - horizon) > 1e-9 * max(1.0, horizon):
            diags.append("simulation.horizon must be an integer number of steps")
    stride = int(sim.get("record_stride", 10) or 0)
    if stride < 1:
        diags.append("simulation.record_stride must be >= 1")
    trials = int(sim.get("trials", 1) or 0)
    if trials < 1:
        diags.append("simulation.trials must be >= 1")
    seed = sim.get("seed", 0)
    if not isinstance(seed, int):
        diags.append("simulation.seed must be an integer")
        seed = 0

    bounds = raw.get("bounds") or {}
    mu_raw = bounds.get("mu", "auto")
    mu = None
    if mu_raw != "auto":
        mu = _num(bounds, "mu", diags, "bounds", minimum=0.0, strict=True)
    generator_kind = bounds.get("generator", "closed-form")
    if generator_kind not in ("closed-form", "paired-integration"):
        diags.append(f"bounds.generator must be closed-form or paired-integration, got {generator_kind!r}")
    margin = _num(bounds, "margin_factor", diags, "bounds", default=1.1, minimum=1.0)
    oracle_dt = _num(bounds, "oracle_dt", diags, "bounds", default=1e-4, minimum=0.0, strict=True)
    xi_max = _num(bounds, "xi_max", diags, "bounds", default=1.0, minimum=0.0, strict=True)

    x0 = s0 = None
    initial_mode = None
    if net is not None and dyn is not None and not diags:
        m, n = net.num_nodes, dyn.dimension
        s0_raw = sim.get("s0")
        if s0_raw is None:
            diags.append("simulation.s0 is required")
        else:
            s0 = np.asarray(s0_raw, dtype=float)
            if s0.shape != (n,):
                diags.append(f"simulation.s0 must have length {n}")
        initial = sim.get("initial", "uniform")
        if initial == "uniform":
            r = _num(sim, "initial_range", diags, "simulation", default=1.0, minimum=0.0, strict=True)
            if r is not None and s0 is not None:
                # shared across trials; trial seeds only drive the mode chains
                init_rng = np.random.default_rng([seed, 1])
                x0 = init_rng.uniform(-r, r, (m, n))
        elif initial == "target":
            if s0 is not None:
                x0 = np.tile(s0, (m, 1))
        else:
            x0 = np.asarray(initial, dtype=float)
            if x0.shape != (m, n):
                diags.append(f"simulation.initial must be 'uniform', 'target', or an {m}x{n} table")
                x0 = None
        mode_raw = sim.get("initial_mode", "uniform")
        if mode_raw != "uniform":
            if not isinstance(mode_raw, int) or not 1 <= mode_raw <= net.num_modes:
                diags.append(f"simulation.initial_mode must be 'uniform' or 1..{net.num_modes}")
            else:
                initial_mode = mode_raw - 1

        if rule in (ev.RULE_CONT_STATE, ev.RULE_DISC_STATE) and delta is not None:
            fam = p_family or tuple(np.ones(m) for _ in range(net.num_modes))
            lo, hi = lambda_bounds(fam, dyn.quad.G)
            limit = 2.0 * dyn.quad.beta * lo / hi
            if not 0.0 < delta <= limit:
                diags.append(f"control.delta must lie in (0, {limit:g}] for rule {rule}, got {delta:g}")
        if rule in (ev.RULE_CONT_EXP, ev.RULE_DISC_EXP):
            if a is None or a <= 0.0 or b is None or b <= 0.0:
                diags.append(f"control.a and control.b must be positive for rule {rule}")

    if diags:
        raise ConfigError(diags)

    config = SimConfig(
        network=net,
        dynamics=dyn,
        c=c,
        epsilon=epsilon,
        delta=delta,
        a=a,
        b=b,
        rule=rule,
        dt=dt,
        horizon=horizon,
        x0=x0,
        s0=s0,
        record_stride=stride,
        trials=trials,
        seed=seed,
        initial_mode=initial_mode,
        P=p_family,
        mu=mu,
        xi_max=xi_max,
        bounds_generator=generator_kind,
        margin_factor=margin,
        oracle_dt=oracle_dt,
    )
    return LoadedConfig(sim=config, raw=raw, canonical=canonical_text(raw),
                        digest=config_digest(raw))


def certificate_for(loaded: LoadedConfig, tol: float = 1e-9) -> StabilityCertificate:
    """Run the mode-wise certificate check for a loaded configuration."""
    cfg = loaded.sim
    quad = cfg.dynamics.quad
    beta = quad.beta
    delta = cfg.delta if cfg.delta and cfg.delta > 0 else None
    try:
        return check_condition(cfg.network, cfg.p_family(), quad.G, quad.Gamma,
                               quad.alpha, cfg.c, cfg.epsilon, tol=tol,
                               beta=beta, delta=delta)
    except ValueError:
        # delta outside the admissible range: report margins without a coefficient
        return check_condition(cfg.network, cfg.p_family(), quad.G, quad.Gamma,
                               quad.alpha, cfg.c, cfg.epsilon, tol=tol)


# ---------------------------------------------------------------------------
# output writers


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _write_csv(path: Path, columns: list[str], rows) -> None:
    lines = ["# columns: " + ",".join(columns), ",".join(columns)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


def write_trajectory_csv(path: Path, result: TrialResult, n: int) -> None:
    rec = result.record
    m = rec.states.shape[1]
    cols = ["t", "node"] + [f"x{k + 1}" for k in range(n)] + [f"s{k + 1}" for k in range(n)] + ["V"]

    def rows():
        for idx, t in enumerate(rec.times):
            for i in range(m):
                yield [t, i + 1, *rec.states[idx, i], *rec.target[idx], rec.lyapunov[idx]]

    _write_csv(path, cols, rows())


def write_events_csv(path: Path, result: TrialResult) -> None:
    _write_csv(path, ["t", "node", "cause"],
               ([e.time, e.node + 1, e.cause] for e in result.events.events))


def write_modes_csv(path: Path, mode_path: ModePath) -> None:
    _write_csv(path, ["u", "t_start", "t_end"], mode_path.to_rows())


def write_event_hist_csv(path: Path, result: TrialResult, window: tuple[float, float]) -> None:
    t0, t1 = window

    def rows():
        for cause in ev.TRIGGER_CAUSES:
            counts = result.events.in_window(t0, t1, causes=(cause,))
            for i in range(len(counts)):
                yield [i + 1, cause, int(counts[i]), t0, t1]

    _write_csv(path, ["node", "cause", "count", "window_start", "window_end"], rows())


def write_ensemble_csv(path: Path, ens: EnsembleResult) -> None:
    m = ens.mean_sq.shape[1]
    cols = (["t"] + [f"mean_sq_err_node_{i + 1}" for i in range(m)]
            + [f"ci95_node_{i + 1}" for i in range(m)]
            + ["max_sq_err_mean", "max_sq_err_ci95"])

    def rows():
        for idx, t in enumerate(ens.times):
            yield [t, *ens.mean_sq[idx], *ens.ci95_sq[idx],
                   ens.mean_max_sq[idx], ens.ci95_max_sq[idx]]

    _write_csv(path, cols, rows())


def write_bounds_csv(path: Path, rows: list[SoundnessRow]) -> None:
    _write_csv(path, ["trial", "t", "rho", "deviation", "varrho", "distance"],
               ([r.trial, r.t, r.rho, r.deviation, r.varrho, r.distance] for r in rows))


def write_check_report(path: Path, cert: StabilityCertificate, derived: DerivedConstants,
                       zeno_bound: float | None) -> None:
    lines = []
    for u, margin in enumerate(cert.margins):
        lines.append(f"margin_mode_{u + 1}={_fmt(margin)}")
    lines.append(f"feasible={'true' if cert.feasible else 'false'}")
    lines.append(f"tolerance={_fmt(cert.tolerance)}")
    lines.append(f"lambda_lo={_fmt(cert.lambda_lo)}")
    lines.append(f"lambda_hi={_fmt(cert.lambda_hi)}")
    coeff = cert.threshold_coeff
    lines.append(f"threshold_coeff={_fmt(coeff) if coeff is not None else 'n/a'}")
    lines.append(f"beta={_fmt(derived.beta)}")
    lines.append(f"lipschitz={_fmt(derived.lipschitz)}")
    lines.append(f"one_sided={_fmt(derived.one_sided)}")
    if zeno_bound is not None:
        lines.append(f"zeno_lower_bound={_fmt(zeno_bound)}")
    path.write_text("\n".join(lines) + "\n")


@dataclass
class RunManifest:
    """Provenance of one CLI invocation."""

    config_digest: str
    seed: int
    tool_version: str
    outputs: dict[str, str]
    duration_seconds: float
    extra: dict

    def write(self, path: Path) -> None:
        payload = {
            "config_digest": self.config_digest,
            "seed": self.seed,
            "tool_version": self.tool_version,
            "outputs": self.outputs,
            "duration_seconds": self.duration_seconds,
        }
        payload.update(self.extra)
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


class StopWatch:
    def __enter__(self):
        self._t0 = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self._t0
        return False


def run_bounds_soundness(loaded: LoadedConfig, trials: int = 1000,
                         seed: int | None = None) -> list[SoundnessRow]:
    """The randomized bound-soundness sampling behind ``bounds-test``."""
    cfg = loaded.sim
    dyn = cfg.dynamics
    mu = cfg.mu if cfg.mu is not None else default_mu(dyn.one_sided)
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    return soundness_scan(dyn.field, dyn.lipschitz, dyn.one_sided, mu,
                          trials=trials, ts=(0.01, 0.05, 0.1), dt=cfg.oracle_dt,
                          rng=rng, dimension=dyn.dimension)
