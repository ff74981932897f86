import csv
import json

import pytest

from mucc import harness
from mucc.model import ExperimentConfig, SystemParams


def small_config(tmp_path, **kw):
    base = dict(n_list=(2, 4), seeds=3, algos=("pipeline", "irving_gs", "irving", "random", "local", "es"),
                out_dir=str(tmp_path))
    base.update(kw)
    return ExperimentConfig(**base)


def test_cells_share_scenarios(tmp_path):
    cfg = small_config(tmp_path)
    a = harness.cell_scenario(cfg, 4, 2)
    assert a == harness.cell_scenario(cfg, 4, 2)
    assert a.params.rng_seed == cfg.params.rng_seed + 2
    assert a != harness.cell_scenario(cfg, 4, 1)


def test_sweep_records_and_summary(tmp_path):
    cfg = small_config(tmp_path)
    records, summary = harness.sweep(cfg)
    assert len(records) == 6
    for r in records:
        assert set(r.energies) == set(cfg.algos)
        assert r.energies["es"] <= r.energies["pipeline"] * (1 + 1e-6)
        assert r.energies["pipeline"] <= r.energies["local"] * (1 + 1e-6)
        assert len(r.ues) == r.n
    assert {(row["algo"], row["n"]) for row in summary} == {(a, n) for a in cfg.algos for n in (2, 4)}
    for row in summary:
        assert row["runs"] == 3 and row["stderr_j"] >= 0


def test_outputs_written_with_headers(tmp_path):
    cfg = small_config(tmp_path, trace=True)
    records, summary = harness.sweep(cfg)
    files = harness.emit_outputs(records, summary, tmp_path)
    names = {f.name for f in files}
    assert {"runs.csv", "ues.csv", "summary.csv", "timings.json", "energy_vs_n.svg"} <= names
    with (tmp_path / "runs.csv").open() as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == harness.RUNS_HEADER
    assert len(rows) == 1 + 6 * len(cfg.algos)
    with (tmp_path / "ues.csv").open() as fh:
        assert next(csv.reader(fh)) == harness.UES_HEADER
    with (tmp_path / "summary.csv").open() as fh:
        assert next(csv.reader(fh)) == harness.SUMMARY_HEADER
    timings = json.loads((tmp_path / "timings.json").read_text())
    assert len(timings) == 6 and "pipeline" in timings[0]


def test_csv_outputs_are_byte_identical(tmp_path):
    cfg = small_config(tmp_path, algos=("pipeline", "irving_gs", "random", "local"))
    outs = []
    for name in ("a", "b"):
        records, summary = harness.sweep(cfg)
        harness.emit_outputs(records, summary, tmp_path / name, charts=False)
        outs.append({f: (tmp_path / name / f).read_bytes()
                     for f in ("runs.csv", "ues.csv", "summary.csv")})
    assert outs[0] == outs[1]


def test_parallel_sweep_matches_serial(tmp_path):
    cfg = small_config(tmp_path, algos=("pipeline", "local"))
    serial, s1 = harness.sweep(cfg)
    par, s2 = harness.sweep(ExperimentConfig(**{**cfg.__dict__, "workers": 2}))
    assert [r.energies for r in serial] == [r.energies for r in par]
    assert s1 == s2


def test_unknown_algorithm_rejected(tmp_path):
    cfg = small_config(tmp_path, algos=("pipeline", "magic"))
    with pytest.raises(ValueError):
        harness.sweep(cfg)


def test_snapshot_outputs(tmp_path):
    snap = harness.offload_snapshot(harness.demo_cabal_scenario())
    files = harness.emit_snapshot(snap, tmp_path)
    assert {f.name for f in files} == {"snapshot.csv", "snapshot.json", "offload_snapshot.svg"}
    meta = json.loads((tmp_path / "snapshot.json").read_text())
    assert meta["energy_after_j"] <= meta["energy_before_j"] + 1e-9
    assert meta["rso_accepted"] >= 1


def test_audit_cell_checks_pass(tmp_path):
    cfg = small_config(tmp_path, n_list=(6,), seeds=2)
    rows = harness.audit(cfg)
    assert {r["check"] for r in rows} >= {"roommate_stable", "association_stable", "constraints",
                                         "rso_weak_improvement", "rso_energy", "pipeline_le_local",
                                         "es_le_pipeline"}
    assert all(r["ok"] for r in rows)
    path = harness.emit_audit(rows, tmp_path)
    assert path.read_text().splitlines()[0] == ",".join(harness.AUDIT_HEADER)


def test_run_record_rejects_non_finite():
    rec = harness.RunRecord(0, 2, {"pipeline": float("nan")}, [], 0, 0, False, [])
    with pytest.raises(ValueError):
        rec.check()
