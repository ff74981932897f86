import math

import numpy as np
import pytest

from conftest import make_scenario
from mucc.energy import standalone_energy
from mucc.model import SystemParams, generate_scenario
from mucc.oracle import (
    SearchLimitError,
    baseline_irving,
    baseline_irving_gs,
    baseline_local,
    baseline_random_pairs,
    best_group_plan,
    exhaustive_search,
)
from mucc.pairwise import pair_optimal_offload
from mucc.pipeline import run_pipeline
from mucc.sca import make_group, solve_group

P = SystemParams()


def test_two_ues_by_hand():
    sc = make_scenario([9e5, 2e5], 1e-4)
    local = baseline_local(sc)
    # three configurations: both alone, 0 -> 1, 1 -> 0
    options = [local]
    for rd, rp in ((0, 1), (1, 0)):
        pb = pair_optimal_offload(sc.ues[rd], sc.ues[rp], 1e-4, P)
        options.append(local - pb.benefit)
    es = exhaustive_search(sc)
    assert es.energy == pytest.approx(min(options), rel=1e-9)
    assert es.energy < local
    assert es.partition.roommate_pairs == ((0, 1),)


def test_single_ue():
    sc = make_scenario([7e5], 1e-4)
    es = exhaustive_search(sc)
    assert es.energy == standalone_energy(sc.ues[0], 0.2)
    assert es.partition.sus == {0} and es.groups == ()


def test_refuses_large_instances():
    sc = generate_scenario(P, 9)
    with pytest.raises(SearchLimitError):
        exhaustive_search(sc)
    assert exhaustive_search(generate_scenario(P, 3), n_limit=3).energy > 0


def test_es_below_pipeline_below_local():
    for seed in range(6):
        sc = generate_scenario(SystemParams(rng_seed=seed), 6)
        es = exhaustive_search(sc)
        pipe = run_pipeline(sc).energy
        local = baseline_local(sc)
        assert es.energy <= pipe * (1 + 1e-6)
        assert pipe <= local * (1 + 1e-6)
        rds = {i for g in es.groups for i in g.members}
        assert len(rds) == sum(len(g.members) for g in es.groups)
        for g in es.groups:
            assert len(g.members) <= sc.ues[g.rp].quota


def test_es_respects_role_control():
    sc = make_scenario([9e5, 1e5, 5e5], 1e-4, available_energy=[5.0, 0.0, 0.0],
                       energy_threshold=1.0)
    es = exhaustive_search(sc)
    assert es.partition.rps <= {0}


def test_best_group_plan_not_worse_than_sca():
    G = np.full((3, 3), 1e-6)
    G[0, 2] = G[2, 0] = 1e-3
    G[1, 2] = G[2, 1] = 1e-4
    sc = make_scenario([1e6, 1e6, 1e6], G)
    e, D = best_group_plan(sc, 2, (0, 1))
    assert e <= solve_group(make_group(sc, 2, (0, 1))).objective
    assert np.all(D >= 0) and np.all(D <= 1e6)


def test_local_baseline_is_sum():
    for seed in range(3):
        sc = generate_scenario(SystemParams(rng_seed=seed), 5)
        assert baseline_local(sc) == pytest.approx(
            math.fsum(standalone_energy(u, 0.2) for u in sc.ues), rel=1e-15)


def test_random_pairs_single_ue_and_determinism():
    sc = make_scenario([7e5], 1e-4)
    assert baseline_random_pairs(sc, 0) == baseline_local(sc)
    sc = generate_scenario(P, 8)
    assert baseline_random_pairs(sc, 3) == baseline_random_pairs(sc, 3)
    assert baseline_random_pairs(sc, 3) <= baseline_local(sc) * (1 + 1e-12)


def test_random_pairs_respect_role_control():
    # nobody may serve, so nothing can pair
    sc = make_scenario([9e5, 1e5, 5e5, 2e5], 1e-4, available_energy=0.0, energy_threshold=1.0)
    for seed in range(5):
        assert baseline_random_pairs(sc, seed) == baseline_local(sc)


def test_baselines_not_above_local():
    for seed in range(10):
        sc = generate_scenario(SystemParams(rng_seed=seed), 10)
        local = baseline_local(sc)
        for e in (baseline_irving(sc), baseline_irving_gs(sc)):
            assert e <= local * (1 + 1e-9)
