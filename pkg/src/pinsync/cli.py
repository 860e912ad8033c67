"""Command-line entry point.

Subcommands:
    check        verify the mode-wise stability certificate of a config
    run          simulate one trial and persist trajectory/event/mode CSVs
    ensemble     Monte-Carlo ensemble with mean-square statistics
    bounds-test  randomized soundness check of the trajectory bounds

Exit status: 0 on success (and a feasible certificate / sound bounds),
1 when the certificate is infeasible or a bound is violated, 2 on
usage or configuration errors.  ``--out`` defaults to the
PINSYNC_OUT_DIR environment variable, then ./pinsync-out.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from pinsync import __version__, harness
from pinsync.engine import run_ensemble, run_trial
from pinsync.events import zeno_lower_bound


def _out_dir(args) -> Path:
    out = Path(args.out or os.environ.get("PINSYNC_OUT_DIR", "pinsync-out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load(args) -> harness.LoadedConfig:
    loaded = harness.load_config(harness.resolve_config_path(args.config))
    raw = loaded.raw
    changed = False
    if getattr(args, "rule", None):
        raw = dict(raw, control=dict(raw["control"], rule=args.rule))
        changed = True
    if getattr(args, "seed", None) is not None:
        raw = dict(raw, simulation=dict(raw["simulation"], seed=args.seed))
        changed = True
    if getattr(args, "trials", None) is not None:
        raw = dict(raw, simulation=dict(raw["simulation"], trials=args.trials))
        changed = True
    return harness.resolve_config(raw) if changed else loaded


def cmd_check(args) -> int:
    loaded = _load(args)
    cfg = loaded.sim
    derived = loaded.derived
    cert = harness.certificate_for(loaded)
    zeno = None
    if cfg.a > 0 and cfg.b > 0:
        zeno = zeno_lower_bound(cfg.network.num_nodes, cfg.dynamics.lipschitz,
                                cfg.c, cfg.epsilon, cfg.a, cfg.b)
    print(f"modes: {cfg.network.num_modes}, nodes: {cfg.network.num_nodes}")
    for u, margin in enumerate(cert.margins):
        print(f"  mode {u + 1}: margin {margin:+.6e}")
    print(f"lambda_lo={cert.lambda_lo:.6g} lambda_hi={cert.lambda_hi:.6g}")
    if cert.threshold_coeff is not None:
        print(f"threshold coefficient: {cert.threshold_coeff:.6g}")
    if zeno is not None:
        print(f"zeno lower bound (envelope rule): {zeno:.6g}")
    print(f"certificate: {'FEASIBLE' if cert.feasible else 'INFEASIBLE'} (tol {cert.tolerance:g})")
    out = _out_dir(args)
    harness.write_check_report(out / "check.txt", cert, derived, zeno)
    return 0 if cert.feasible else 1


def cmd_run(args) -> int:
    loaded = _load(args)
    cfg = loaded.sim
    cfg.certificate = harness.certificate_for(loaded)
    seed = cfg.seed
    out = _out_dir(args)
    with harness.StopWatch() as watch:
        result = run_trial(cfg, seed)
    files = {
        "trajectory": out / "trajectory.csv",
        "events": out / "events.csv",
        "modes": out / "modes.csv",
        "event_hist": out / "event_hist.csv",
    }
    harness.write_trajectory_csv(files["trajectory"], result, cfg.dynamics.dimension)
    harness.write_events_csv(files["events"], result)
    harness.write_modes_csv(files["modes"], result.path)
    window = (max(0.0, cfg.horizon - args.hist_window), cfg.horizon)
    harness.write_event_hist_csv(files["event_hist"], result, window)
    manifest = harness.RunManifest(
        config_digest=loaded.digest,
        seed=seed,
        tool_version=__version__,
        outputs={k: str(v) for k, v in files.items()},
        duration_seconds=watch.elapsed,
        extra={
            "rule": cfg.rule,
            "trigger_count": result.events.trigger_count(),
            "min_rule_interval": result.events.min_interval(),
            "max_err_full": result.record.max_err_full,
            "certificate_feasible": cfg.certificate.feasible,
        },
    )
    manifest.write(out / "manifest.json")
    print(f"trial complete: {result.events.trigger_count()} triggers, "
          f"outputs in {out}")
    return 0


def cmd_ensemble(args) -> int:
    loaded = _load(args)
    cfg = loaded.sim
    cfg.certificate = harness.certificate_for(loaded)
    out = _out_dir(args)
    with harness.StopWatch() as watch:
        ens = run_ensemble(cfg)
    path = out / "ensemble.csv"
    harness.write_ensemble_csv(path, ens)
    manifest = harness.RunManifest(
        config_digest=loaded.digest,
        seed=cfg.seed,
        tool_version=__version__,
        outputs={"ensemble": str(path)},
        duration_seconds=watch.elapsed,
        extra={
            "rule": cfg.rule,
            "trials": len(ens.seeds),
            "fitted_rate": ens.decay_rate,
            "fitted_rate_lyapunov": ens.lyapunov_decay_rate,
            "mean_trigger_count": sum(ens.trigger_counts) / len(ens.trigger_counts),
            "certificate_feasible": cfg.certificate.feasible,
        },
    )
    manifest.write(out / "manifest.json")
    print(f"ensemble of {len(ens.seeds)} trials: fitted decay rate {ens.decay_rate:.4g}, "
          f"outputs in {out}")
    return 0


def cmd_bounds_test(args) -> int:
    loaded = _load(args)
    out = _out_dir(args)
    rows = harness.run_bounds_soundness(loaded, trials=args.trials or 1000)
    harness.write_bounds_csv(out / "bounds_test.csv", rows)
    bad = [r for r in rows if not (r.rho_ok() and r.varrho_ok())]
    print(f"{len(rows)} bound evaluations, {len(bad)} violations; CSV in {out}")
    for r in bad[:10]:
        print(f"  violation: trial={r.trial} t={r.t} rho={r.rho:.6g} deviation={r.deviation:.6g} "
              f"varrho={r.varrho:.6g} distance={r.distance:.6g}", file=sys.stderr)
    return 1 if bad else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pinsync", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=f"pinsync {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, trials=False, seed=True, rule=False):
        p.add_argument("--config", required=True,
                       help="path to a YAML run configuration or a bundled preset name")
        p.add_argument("--out", default=None, help="output directory")
        if seed:
            p.add_argument("--seed", type=int, default=None, help="override simulation.seed")
        if trials:
            p.add_argument("--trials", type=int, default=None, help="override simulation.trials")
        if rule:
            p.add_argument("--rule", choices=["cont-state", "cont-exp", "disc-state", "disc-exp"],
                           default=None, help="override control.rule")

    p_check = sub.add_parser("check", help="verify the stability certificate")
    common(p_check, seed=False)
    p_check.set_defaults(func=cmd_check)

    p_run = sub.add_parser("run", help="simulate one trial")
    common(p_run, rule=True)
    p_run.add_argument("--hist-window", type=float, default=1.0,
                       help="trailing window length for the trigger histogram")
    p_run.set_defaults(func=cmd_run)

    p_ens = sub.add_parser("ensemble", help="Monte-Carlo ensemble")
    common(p_ens, trials=True, rule=True)
    p_ens.set_defaults(func=cmd_ensemble)

    p_bt = sub.add_parser("bounds-test", help="randomized bound soundness check")
    common(p_bt, trials=True)
    p_bt.set_defaults(func=cmd_bounds_test)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except harness.ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
