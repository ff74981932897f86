"""Experiment sweeps, output files and the before/after-RSO snapshot."""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

from .model import ExperimentConfig, Scenario, generate_scenario
from .oracle import (
    baseline_irving,
    baseline_local,
    baseline_random_pairs,
    exhaustive_search,
)
from .pipeline import PipelineResult, run_pipeline

ALGORITHMS = ("pipeline", "irving_gs", "irving", "random", "local", "es")

RUNS_HEADER = ["n", "seed", "algo", "energy_j", "rso_rounds", "rso_accepted", "rso_truncated",
               "sca_iterations"]
UES_HEADER = ["n", "seed", "ue", "role", "partners", "offloaded_bits", "tx_power_w"]
SUMMARY_HEADER = ["algo", "n", "runs", "mean_energy_j", "stderr_j"]


@dataclass
class RunRecord:
    seed: int
    n: int
    energies: dict[str, float]
    ues: list[dict]
    rso_rounds: int
    rso_accepted: int
    rso_truncated: bool
    sca_iterations: list[int]
    wall_time: dict[str, float] = field(default_factory=dict)
    trace: list[dict] | None = None

    def check(self) -> None:
        bad = [a for a, e in self.energies.items() if not math.isfinite(e)]
        if bad:
            raise ValueError(f"non-finite energy for {bad} at n={self.n}, seed={self.seed}")


def cell_scenario(config: ExperimentConfig, n: int, k: int) -> Scenario:
    """Scenario of sweep cell (n, k); every algorithm of the cell sees this one."""
    params = replace(config.params, rng_seed=config.params.rng_seed + k)
    return generate_scenario(params, n, config.task_bits_range)


def record_from_pipeline(result: PipelineResult, seed: int, trace: bool = False) -> RunRecord:
    rso = result.rso
    return RunRecord(
        seed=seed,
        n=len(result.scenario),
        energies={"pipeline": result.energy},
        ues=result.ue_rows(),
        rso_rounds=rso.rounds if rso else 0,
        rso_accepted=rso.accepted if rso else 0,
        rso_truncated=rso.truncated if rso else False,
        sca_iterations=[p.iterations for p in result.plans],
        wall_time={f"pipeline_{k}": v for k, v in result.stage_times.items()},
        trace=rso.trace if (trace and rso) else None,
    )


def run_cell(config: ExperimentConfig, n: int, k: int) -> RunRecord:
    sc = cell_scenario(config, n, k)
    seed = sc.params.rng_seed
    times: dict[str, float] = {}

    def timed(name, fn):
        t = time.perf_counter()
        out = fn()
        times[name] = time.perf_counter() - t
        return out

    res = timed("pipeline", lambda: run_pipeline(sc, rso=config.rso))
    rec = record_from_pipeline(res, seed, config.trace)
    energies: dict[str, float] = {}
    for algo in config.algos:
        if algo == "pipeline":
            energies[algo] = res.energy
        elif algo == "irving_gs":
            energies[algo] = timed(algo, lambda: run_pipeline(sc, rso=False).energy)
        elif algo == "irving":
            energies[algo] = timed(algo, lambda: baseline_irving(sc))
        elif algo == "random":
            energies[algo] = timed(algo, lambda: baseline_random_pairs(sc, seed))
        elif algo == "local":
            energies[algo] = timed(algo, lambda: baseline_local(sc))
        elif algo == "es":
            energies[algo] = timed(algo, lambda: exhaustive_search(sc, config.es_limit).energy)
        else:
            raise ValueError(f"unknown algorithm {algo!r}; choose from {', '.join(ALGORITHMS)}")
    rec.energies = energies
    rec.wall_time.update(times)
    rec.check()
    return rec


def _run_cell_args(args) -> RunRecord:
    return run_cell(*args)


def sweep(config: ExperimentConfig) -> tuple[list[RunRecord], list[dict]]:
    """Run every selected algorithm on every (N, seed) cell and aggregate per (algo, N)."""
    unknown = set(config.algos) - set(ALGORITHMS)
    if unknown:
        raise ValueError(f"unknown algorithms {sorted(unknown)}")
    cells = [(config, n, k) for n in config.n_list for k in range(config.seeds)]
    if config.workers > 1:
        with ProcessPoolExecutor(config.workers) as pool:
            records = list(pool.map(_run_cell_args, cells))
    else:
        records = [run_cell(*c) for c in cells]
    return records, summarize(records, config.algos)


def summarize(records: list[RunRecord], algos) -> list[dict]:
    rows = []
    for algo in algos:
        for n in sorted({r.n for r in records}):
            vals = [r.energies[algo] for r in records if r.n == n and algo in r.energies]
            if not vals:
                continue
            mean = math.fsum(vals) / len(vals)
            if len(vals) > 1:
                var = math.fsum((v - mean) ** 2 for v in vals) / (len(vals) - 1)
                se = math.sqrt(var / len(vals))
            else:
                se = 0.0
            rows.append({"algo": algo, "n": n, "runs": len(vals), "mean_energy_j": mean,
                         "stderr_j": se})
    return rows


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(float(v))
    if isinstance(v, (list, tuple)):
        return " ".join(str(x) for x in v)
    return str(v)


def _write_csv(path: Path, header: list[str], rows: list[dict]) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(row[h]) for h in header])


def emit_outputs(records: list[RunRecord], summary: list[dict], out_dir: str | Path,
                 charts: bool = True) -> list[Path]:
    """Write runs.csv, ues.csv, summary.csv, timings.json and optional trace/SVG files.

    The CSV files depend only on the configuration; wall times go to JSON.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    runs = []
    ues = []
    for r in records:
        for algo, e in r.energies.items():
            runs.append({"n": r.n, "seed": r.seed, "algo": algo, "energy_j": e,
                         "rso_rounds": r.rso_rounds, "rso_accepted": r.rso_accepted,
                         "rso_truncated": int(r.rso_truncated),
                         "sca_iterations": r.sca_iterations})
        for u in r.ues:
            ues.append({"n": r.n, "seed": r.seed, "ue": u["ue"], "role": u["role"],
                        "partners": u["partners"], "offloaded_bits": float(u["offloaded_bits"]),
                        "tx_power_w": float(u["tx_power"])})
    written = [out / "runs.csv", out / "ues.csv", out / "summary.csv", out / "timings.json"]
    _write_csv(written[0], RUNS_HEADER, runs)
    _write_csv(written[1], UES_HEADER, ues)
    _write_csv(written[2], SUMMARY_HEADER, summary)
    timings = [{"n": r.n, "seed": r.seed, **r.wall_time} for r in records]
    written[3].write_text(json.dumps(timings, indent=1))
    traces = [{"n": r.n, "seed": r.seed, "rounds": r.trace} for r in records if r.trace]
    if traces:
        written.append(out / "trace.json")
        written[-1].write_text(json.dumps(traces, indent=1))
    if charts and summary:
        written.append(plot_energy_vs_n(summary, out / "energy_vs_n.svg"))
    return written


def plot_energy_vs_n(summary: list[dict], path: Path) -> Path:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    for algo in dict.fromkeys(r["algo"] for r in summary):
        rows = [r for r in summary if r["algo"] == algo]
        ax.errorbar([r["n"] for r in rows], [r["mean_energy_j"] for r in rows],
                    yerr=[r["stderr_j"] for r in rows], marker="o", capsize=3, label=algo)
    ax.set_xlabel("number of UEs")
    ax.set_ylabel("overall energy (J)")
    ax.grid(alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


# --- before/after rotation swaps ---------------------------------------------------

@dataclass
class Snapshot:
    before: PipelineResult
    after: PipelineResult

    def rows(self) -> list[dict]:
        b, a = self.before.offloads(), self.after.offloads()
        return [{"ue": i, "before_bits": b.get(i, 0.0), "after_bits": a.get(i, 0.0)}
                for i in sorted(set(b) | set(a))]


def offload_snapshot(scenario: Scenario) -> Snapshot:
    """The pipeline on one scenario with rotation swaps off and on."""
    return Snapshot(run_pipeline(scenario, rso=False), run_pipeline(scenario, rso=True))


def demo_cabal_scenario() -> Scenario:
    """Ten-UE instance whose association contains a two-RD cabal with one accomplice."""
    text = resources.files("mucc").joinpath("data/cabal_demo.json").read_text()
    return Scenario.from_json(text)


def emit_snapshot(snap: Snapshot, out_dir: str | Path, charts: bool = True) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = snap.rows()
    path = out / "snapshot.csv"
    _write_csv(path, ["ue", "before_bits", "after_bits"], rows)
    meta = out / "snapshot.json"
    rso = snap.after.rso
    meta.write_text(json.dumps({
        "energy_before_j": snap.before.energy,
        "energy_after_j": snap.after.energy,
        "rso_rounds": rso.rounds if rso else 0,
        "rso_accepted": rso.accepted if rso else 0,
        "trace": rso.trace if rso else [],
    }, indent=1))
    written = [path, meta]
    if charts and rows:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
        import numpy as np

        x = np.arange(len(rows))
        fig, ax = plt.subplots(figsize=(6, 3.5))
        ax.bar(x - 0.2, [r["before_bits"] / 1e3 for r in rows], 0.4, label="before RSO")
        ax.bar(x + 0.2, [r["after_bits"] / 1e3 for r in rows], 0.4, label="after RSO")
        ax.set_xticks(x, [str(r["ue"]) for r in rows])
        ax.set_xlabel("RD")
        ax.set_ylabel("offloaded data (kbit)")
        ax.legend()
        fig.tight_layout()
        svg = out / "offload_snapshot.svg"
        fig.savefig(svg, format="svg", metadata={"Date": None})
        plt.close(fig)
        written.append(svg)
    return written


# --- property audit over many seeds ----------------------------------------------

AUDIT_HEADER = ["n", "seed", "check", "ok", "detail"]


def audit_cell(config: ExperimentConfig, n: int, k: int) -> list[dict]:
    """Stability, rotation and ordering checks on one sweep cell."""
    from .matching import (
        Association, assign_roles, find_blocking_pairs, gale_shapley, role_control,
    )
    from .pairwise import build_association_prefs, build_roommate_prefs
    from .rso import weakly_improves

    sc = cell_scenario(config, n, k)
    seed = sc.params.rng_seed
    rows = []

    def add(check: str, ok: bool, detail: str = "") -> None:
        rows.append({"n": n, "seed": seed, "check": check, "ok": int(ok), "detail": detail})

    table = build_roommate_prefs(sc, role_control(sc))
    part = assign_roles(table)
    bp = find_blocking_pairs("roommate", part, table.lists)
    add("roommate_stable", not bp, str(bp) if bp else "")
    rd_prefs, rp_prefs = build_association_prefs(part, sc)
    quotas = {j: sc.ues[j].quota for j in rp_prefs}
    assoc = gale_shapley(rd_prefs, rp_prefs, quotas)
    bp = find_blocking_pairs("admission", assoc, (rd_prefs, rp_prefs), quotas)
    add("association_stable", not bp, str(bp) if bp else "")

    before = run_pipeline(sc, rso=False)
    after = run_pipeline(sc, rso=True)  # both runs pass the constraint audit or raise
    add("constraints", True)
    ok = True
    for rnd in after.rso.trace if after.rso else []:
        if rnd["accepted"]:
            old = {int(j): ms for j, ms in rnd["before"].items()}
            new = {int(j): ms for j, ms in rnd["after"].items()}
            ok &= weakly_improves(Association.from_mapping(old), Association.from_mapping(new),
                                  rd_prefs)
    add("rso_weak_improvement", ok, f"rounds={after.rso.rounds if after.rso else 0}")
    add("rso_energy", after.energy <= before.energy + 1e-9,
        f"{before.energy!r} -> {after.energy!r}")
    local = baseline_local(sc)
    add("pipeline_le_local", after.energy <= local * (1 + 1e-6), f"{after.energy!r} vs {local!r}")
    if "es" in config.algos and n <= config.es_limit:
        es = exhaustive_search(sc, config.es_limit).energy
        add("es_le_pipeline", es <= after.energy * (1 + 1e-6), f"{es!r} vs {after.energy!r}")
    return rows


def _audit_cell_args(args) -> list[dict]:
    return audit_cell(*args)


def audit(config: ExperimentConfig) -> list[dict]:
    cells = [(config, n, k) for n in config.n_list for k in range(config.seeds)]
    if config.workers > 1:
        with ProcessPoolExecutor(config.workers) as pool:
            chunks = list(pool.map(_audit_cell_args, cells))
    else:
        chunks = [audit_cell(*c) for c in cells]
    return [row for chunk in chunks for row in chunk]


def emit_audit(rows: list[dict], out_dir: str | Path) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "audit.csv"
    _write_csv(path, AUDIT_HEADER, rows)
    return path
