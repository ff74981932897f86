"""Command-line entry point: ``mucc run|sweep|snapshot|audit``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import harness
from .model import ExperimentConfig, Scenario, ScenarioError, generate_scenario, load_config
from .oracle import SearchLimitError

log = logging.getLogger("mucc")


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _name_list(text: str) -> tuple[str, ...]:
    names = tuple(x.strip() for x in text.split(",") if x.strip())
    bad = [x for x in names if x not in harness.ALGORITHMS]
    if bad:
        raise argparse.ArgumentTypeError(
            f"unknown algorithms {bad}; choose from {','.join(harness.ALGORITHMS)}")
    return names


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML file with SystemParams/ExperimentConfig keys")
    common.add_argument("--seeds", type=int, help="seeds per UE count")
    common.add_argument("--n-list", type=_int_list, help="UE counts, e.g. 2,4,6,8")
    common.add_argument("--algos", type=_name_list,
                        help=f"subset of {','.join(harness.ALGORITHMS)}")
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("--trace", action="store_true", default=None,
                        help="write per-round RSO traces as JSON")
    common.add_argument("--no-rso", dest="rso", action="store_false", default=None,
                        help="skip rotation swaps")
    common.add_argument("--es-limit", type=int, help="largest N exhaustive search accepts")
    common.add_argument("--workers", type=int, help="parallel worker processes")
    common.add_argument("--no-charts", dest="charts", action="store_false",
                        help="skip SVG output")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="mucc", description="Cooperative computing simulator.")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", parents=[common], help="optimize one scenario and print the plan")
    run.add_argument("--n", type=int, default=10, help="number of UEs (default 10)")
    run.add_argument("--seed", type=int, help="scenario seed (default: config rng_seed)")
    run.add_argument("--scenario", type=Path, help="scenario JSON instead of a random draw")

    sub.add_parser("sweep", parents=[common], help="energy versus N for the selected algorithms")

    snap = sub.add_parser("snapshot", parents=[common], help="offloads before and after RSO")
    src = snap.add_mutually_exclusive_group()
    src.add_argument("--scenario", type=Path, help="scenario JSON")
    src.add_argument("--demo", action="store_true", help="bundled cabal instance")
    snap.add_argument("--n", type=int, default=10)
    snap.add_argument("--seed", type=int)

    sub.add_parser("audit", parents=[common], help="stability and ordering checks over many seeds")
    return p


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    updates = {}
    for key, attr in (("seeds", "seeds"), ("n_list", "n_list"), ("algos", "algos"),
                      ("out_dir", "out"), ("trace", "trace"), ("rso", "rso"),
                      ("es_limit", "es_limit"), ("workers", "workers")):
        val = getattr(args, attr, None)
        if val is not None:
            updates[key] = str(val) if key == "out_dir" else val
    return replace(cfg, **updates) if updates else cfg


def _one_scenario(args, cfg: ExperimentConfig) -> Scenario:
    if getattr(args, "demo", False):
        return harness.demo_cabal_scenario()
    if args.scenario:
        return Scenario.from_json(args.scenario.read_text())
    params = cfg.params if args.seed is None else replace(cfg.params, rng_seed=args.seed)
    return generate_scenario(params, args.n, cfg.task_bits_range)


def cmd_run(args, cfg: ExperimentConfig) -> int:
    from .pipeline import run_pipeline

    sc = _one_scenario(args, cfg)
    res = run_pipeline(sc, rso=cfg.rso)
    rec = harness.record_from_pipeline(res, sc.params.rng_seed, trace=True)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    payload = {
        "seed": rec.seed, "n": rec.n, "energy_j": res.energy,
        "rso_rounds": rec.rso_rounds, "rso_accepted": rec.rso_accepted,
        "rso_truncated": rec.rso_truncated, "sca_iterations": rec.sca_iterations,
        "ues": rec.ues, "stage_seconds": res.stage_times,
    }
    (out / "run.json").write_text(json.dumps(payload, indent=1))
    if cfg.trace:
        (out / "trace.json").write_text(json.dumps(rec.trace or [], indent=1))
    print(f"N={rec.n} seed={rec.seed} energy={res.energy:.6g} J "
          f"rso_rounds={rec.rso_rounds} accepted={rec.rso_accepted}")
    for u in rec.ues:
        print(f"  UE {u['ue']:>3} {u['role']:<2} partners={u['partners']} "
              f"bits={u['offloaded_bits']:.0f} p={u['tx_power']:.3g} W")
    return 0


def cmd_sweep(args, cfg: ExperimentConfig) -> int:
    records, summary = harness.sweep(cfg)
    files = harness.emit_outputs(records, summary, cfg.out_dir, charts=args.charts)
    for row in summary:
        print(f"{row['algo']:>10} N={row['n']:<3} mean={row['mean_energy_j']:.6g} J "
              f"se={row['stderr_j']:.3g}")
    log.info("wrote %s", ", ".join(str(f) for f in files))
    return 0


def cmd_snapshot(args, cfg: ExperimentConfig) -> int:
    snap = harness.offload_snapshot(_one_scenario(args, cfg))
    harness.emit_snapshot(snap, cfg.out_dir, charts=args.charts)
    print(f"energy before RSO {snap.before.energy:.6g} J, after {snap.after.energy:.6g} J")
    for r in snap.rows():
        print(f"  RD {r['ue']:>3} {r['before_bits']:>10.0f} -> {r['after_bits']:>10.0f} bits")
    return 0


def cmd_audit(args, cfg: ExperimentConfig) -> int:
    rows = harness.audit(cfg)
    harness.emit_audit(rows, cfg.out_dir)
    failed = [r for r in rows if not r["ok"]]
    checks = sorted({r["check"] for r in rows})
    for c in checks:
        n_ok = sum(1 for r in rows if r["check"] == c and r["ok"])
        n_all = sum(1 for r in rows if r["check"] == c)
        print(f"{c:<22} {n_ok}/{n_all}")
    for r in failed[:20]:
        print(f"FAIL {r['check']} n={r['n']} seed={r['seed']} {r['detail']}")
    return 1 if failed else 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = resolve_config(args)
        handler = {"run": cmd_run, "sweep": cmd_sweep, "snapshot": cmd_snapshot,
                   "audit": cmd_audit}[args.command]
        return handler(args, cfg)
    except (ScenarioError, SearchLimitError, ValueError) as exc:
        print(f"mucc: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
