"""Acceptance suite: one test per release criterion, one PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines as
they complete.  The heavyweight Monte-Carlo fixture (four rules times
twenty trials on the full benchmark) is shared by the stabilization,
trade-off, and inter-event-interval criteria.
"""

import dataclasses
import math
import time

import numpy as np
import pytest

from oracles import charpoly_max_eig
from pinsync import cli, harness
from pinsync import events as ev
from pinsync.dynamics import ChuaParams, chua_field, chua_jacobians, estimate_quad_beta
from pinsync.engine import run_ensemble, run_trial
from pinsync.markov import generate_path, sample_transition
from pinsync.stability import check_condition, condition_matrix
from pinsync.topology import SwitchingNetwork, graph_mode_from_edges

RULE_ORDER = (ev.RULE_CONT_STATE, ev.RULE_CONT_EXP, ev.RULE_DISC_STATE, ev.RULE_DISC_EXP)


def _report(number: int, description: str, ok: bool, detail: str = "") -> None:
    status = "PASS" if ok else "FAIL"
    suffix = f" ({detail})" if detail else ""
    print(f"[ACCEPTANCE {number:>2}] {description}: {status}{suffix}", flush=True)
    assert ok, f"criterion {number} failed: {description}{suffix}"


@pytest.fixture(scope="module")
def rule_ensembles(benchmark):
    """Twenty-trial ensembles for each rule on matched seeds, with timing."""
    results = {}
    start = time.perf_counter()
    for rule in RULE_ORDER:
        cfg = dataclasses.replace(benchmark.sim, rule=rule, trials=20)
        results[rule] = run_ensemble(cfg)
    elapsed = time.perf_counter() - start
    return results, elapsed


def test_criterion_1_certificate(benchmark):
    start = time.perf_counter()
    cert = harness.certificate_for(benchmark)
    elapsed = time.perf_counter() - start
    ok = cert.feasible and max(cert.margins) <= 1e-9 and elapsed < 1.0
    _report(1, "benchmark certificate feasible", ok,
            f"max margin {max(cert.margins):.2e}, {elapsed * 1000:.0f} ms")


def test_criterion_2_eigen_oracle_agreement():
    rng = np.random.default_rng(777)
    agreements = 0
    for _ in range(100):
        m = int(rng.integers(1, 4))
        n = int(rng.integers(1, 3))
        while m * n > 6:
            n = 1
        n_modes = int(rng.integers(1, 4))
        pairs = [(i, j) for i in range(1, m + 1) for j in range(i + 1, m + 1)]
        modes = []
        for _ in range(n_modes):
            edges = [p for p in pairs if rng.random() < 0.6]
            pinned = [i + 1 for i in range(m) if rng.random() < 0.5]
            modes.append(graph_mode_from_edges(edges, pinned, m))
        gen = np.zeros((n_modes, n_modes))
        for u in range(n_modes):
            for v in range(n_modes):
                if u != v:
                    gen[u, v] = rng.uniform(0.0, 4.0)
            gen[u, u] = -gen[u].sum()
        net = SwitchingNetwork(modes=tuple(modes), generator=gen)
        P = [rng.uniform(0.2, 3.0, m) for _ in range(n_modes)]
        root = rng.uniform(-1, 1, (n, n))
        G = root @ root.T + 0.3 * np.eye(n)
        Gamma = rng.uniform(-1, 1, (n, n))
        alpha, c, eps = rng.uniform(0.1, 10.0), rng.uniform(0.1, 10.0), rng.uniform(0.0, 2.0)
        cert = check_condition(net, P, G, Gamma, alpha, c, eps, tol=1e-9)
        ref = [charpoly_max_eig(condition_matrix(net, u, P, G, Gamma, alpha, c, eps))
               for u in range(n_modes)]
        if (all(abs(a - b) <= 1e-8 for a, b in zip(cert.margins, ref))
                and cert.feasible == all(r <= 1e-9 for r in ref)):
            agreements += 1
    _report(2, "eigensolver agrees with characteristic-polynomial oracle",
            agreements == 100, f"{agreements}/100 instances")


def test_criterion_3_quad_constants():
    regions = chua_jacobians(ChuaParams())
    beta = estimate_quad_beta(10.0, regions)
    in_bracket = 0.875 <= beta <= 0.885
    rng = np.random.default_rng(31)
    xi = rng.uniform(-5, 5, (10_000, 3))
    zeta = rng.uniform(-5, 5, (10_000, 3))
    d = xi - zeta
    df = chua_field(ChuaParams(), xi) - chua_field(ChuaParams(), zeta)
    lhs = np.einsum("ij,ij->i", d, df - 10.0 * d)
    rhs = -beta * np.einsum("ij,ij->i", d, d)
    violations = int(np.sum(lhs > rhs + 1e-9))
    _report(3, "quadratic decrement margin and empirical inequality",
            in_bracket and violations == 0,
            f"beta={beta:.4f}, {violations} violations in 10^4 samples")


def test_criterion_4_bound_soundness(benchmark):
    start = time.perf_counter()
    rows = harness.run_bounds_soundness(benchmark, trials=1000, seed=4242)
    elapsed = time.perf_counter() - start
    bad = [r for r in rows if not (r.rho_ok() and r.varrho_ok())]
    ok = not bad and elapsed < 30.0
    _report(4, "trajectory bounds sound on 10^3 randomized trials", ok,
            f"{len(bad)} violations, {elapsed:.1f} s")


def test_criterion_5_stabilization(rule_ensembles):
    results, elapsed = rule_ensembles
    ok = elapsed < 300.0
    details = [f"{elapsed:.0f} s total"]
    for rule in RULE_ORDER:
        ens = results[rule]
        ratio = float(ens.mean_max_sq[-1] / ens.mean_max_sq[0])
        rate = ens.decay_rate
        details.append(f"{rule}: ratio {ratio:.1e}, rate {rate:.2f}")
        ok = ok and ratio < 1e-2 and rate > 0.0
    _report(5, "benchmark stabilizes under all four rules", ok, "; ".join(details))


def test_criterion_6_monitoring_tradeoff(rule_ensembles):
    results, _ = rule_ensembles
    count = {rule: sum(results[rule].trigger_counts) for rule in RULE_ORDER}
    vrate = {rule: results[rule].lyapunov_decay_rate for rule in RULE_ORDER}
    ok = (count[ev.RULE_DISC_STATE] > count[ev.RULE_CONT_STATE]
          and count[ev.RULE_DISC_EXP] > count[ev.RULE_CONT_EXP]
          and vrate[ev.RULE_CONT_STATE] >= vrate[ev.RULE_CONT_EXP]
          and vrate[ev.RULE_DISC_STATE] >= vrate[ev.RULE_DISC_EXP])
    _report(6, "discrete monitoring triggers more; state rules decay faster", ok,
            f"counts {count}, V-rates " + ", ".join(f"{r}={vrate[r]:.2f}" for r in RULE_ORDER))


def test_criterion_7_zeno(rule_ensembles, benchmark):
    results, _ = rule_ensembles
    dt = benchmark.sim.dt
    min_exp = min(results[ev.RULE_CONT_EXP].min_intervals)
    min_disc = min(results[ev.RULE_DISC_EXP].min_intervals)
    bound = ev.zeno_lower_bound(1, 1.0, 1.0, 0.0, 1.0, 1.0)
    bound_ok = abs(bound - math.log(10.0 / 9.0)) <= 1e-6
    ok = min_exp > 0.0 and min_disc > 0.0 and min_exp >= dt and min_disc >= dt and bound_ok
    _report(7, "inter-event intervals positive with closed-form floor", ok,
            f"min intervals {min_exp:.4f}/{min_disc:.4f} s, unit-case bound {bound:.6f}")


def test_criterion_8_determinism(tmp_path, benchmark):
    import yaml
    raw = yaml.safe_load(benchmark.canonical)
    cfg_path = tmp_path / "cfg.yaml"
    cfg_path.write_text(yaml.safe_dump(raw))
    identical = True
    for rule in (ev.RULE_CONT_STATE, ev.RULE_DISC_STATE):
        out_a = tmp_path / f"a-{rule}"
        out_b = tmp_path / f"b-{rule}"
        for out in (out_a, out_b):
            rc = cli.main(["run", "--config", str(cfg_path), "--out", str(out),
                           "--seed", "1234", "--rule", rule])
            assert rc == 0
        for name in ("trajectory.csv", "events.csv", "modes.csv", "event_hist.csv"):
            identical = identical and ((out_a / name).read_bytes() == (out_b / name).read_bytes())
    _report(8, "identical (config, seed) gives bit-identical CSV outputs", identical)


def test_criterion_9_equilibrium_invariance(benchmark):
    cfg = benchmark.sim
    eq_x0 = np.tile(cfg.s0, (cfg.network.num_nodes, 1))
    worst = 0.0
    for rule in RULE_ORDER:
        run_cfg = dataclasses.replace(cfg, rule=rule, x0=eq_x0)
        result = run_trial(run_cfg, seed=77)
        worst = max(worst, result.record.max_err_full)
    _report(9, "target trajectory is absorbing for all rules", worst <= 1e-9,
            f"worst deviation {worst:.2e}")


def test_criterion_10_ctmc_statistics(benchmark):
    net = benchmark.sim.network
    rng = np.random.default_rng(2026)
    durations = []
    while len(durations) < 100_000:
        path = generate_path(net, int(rng.integers(net.num_modes)), 2000.0, rng)
        durations.extend(seg.duration for seg in path.segments[:-1])
    mean = float(np.mean(durations[:100_000]))
    mean_ok = abs(mean - 0.1) < 0.005

    freq_ok = True
    worst = 0.0
    n = 100_000
    for u in range(net.num_modes):
        draws = np.array([sample_transition(net, u, rng) for _ in range(n)])
        freq = np.bincount(draws, minlength=net.num_modes) / n
        rate = -net.generator[u, u]
        for v in range(net.num_modes):
            if v == u:
                continue
            p = net.generator[u, v] / rate
            err = abs(freq[v] - p)
            worst = max(worst, err)
            freq_ok = freq_ok and err <= 0.01
    _report(10, "chain sojourn and jump statistics match the generator",
            mean_ok and freq_ok, f"mean sojourn {mean:.4f} s, worst jump error {worst:.4f}")
