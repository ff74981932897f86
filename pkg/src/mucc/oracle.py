"""Exhaustive search and the baselines the pipeline is compared against."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .energy import GroupLoads, standalone_energy
from .matching import RolePartition, assign_roles, role_control
from .model import Scenario
from .pairwise import build_roommate_prefs, pair_optimal_offload
from .pipeline import run_pipeline
from .sca import ScaConfig, group_objective, grid_oracle, make_group, powers, solve_group


class SearchLimitError(ValueError):
    pass


@dataclass(frozen=True)
class EsResult:
    energy: float
    groups: tuple[GroupLoads, ...]
    partition: RolePartition


def refine_local(group, D: np.ndarray, F: float, step: float, min_step: float = 1e-3):
    """Compass search from ``D`` inside the box and the true power caps."""
    cap = group.p_max
    m = group.size
    dirs = [e for k in range(m) for e in (np.eye(m)[k], -np.eye(m)[k])]
    while step >= min_step:
        moved = False
        for d in dirs:
            cand = np.clip(D + step * d, 0.0, group.task)
            if np.array_equal(cand, D) or np.any(powers(group, cand) > cap):
                continue
            Fc = group_objective(group, cand)
            if Fc < F:
                D, F, moved = cand, Fc, True
                break
        if not moved:
            step *= 0.5
    return D, F


def best_group_plan(scenario: Scenario, rp: int, members: tuple[int, ...],
                    grid: int = 101, config: ScaConfig = ScaConfig()) -> tuple[float, np.ndarray]:
    """Lowest group energy found by SCA and, for up to two RDs, a refined grid scan."""
    group = make_group(scenario, rp, members)
    res = solve_group(group, config)
    best, D = res.objective, res.loads
    if group.size == 1:
        ues = scenario.ues
        pb = pair_optimal_offload(ues[members[0]], ues[rp], scenario.gain(members[0], rp),
                                  scenario.params)
        E = group_objective(group, np.array([pb.optimal_load]))
        if E < best:
            best, D = E, np.array([pb.optimal_load])
    elif group.size == 2:
        Dg, Eg = grid_oracle(group, grid)
        Dg, Eg = refine_local(group, Dg, Eg, float(np.max(group.task)) / (grid - 1))
        if Eg < best:
            best, D = Eg, Dg
    return best, D


def exhaustive_search(scenario: Scenario, n_limit: int = 8) -> EsResult:
    """Minimum-energy configuration over all roles, associations and offloads.

    Dynamic programming over UE subsets: the lowest UE of a subset either
    computes alone or belongs to one cooperation group (as RP or RD), with
    every group's energy optimized once and cached. Ties go to fewer groups.
    """
    n = len(scenario)
    if n > n_limit:
        raise SearchLimitError(f"exhaustive search refused for N={n} > limit {n_limit}")
    ues, slot = scenario.ues, scenario.params.slot_length
    alone = [standalone_energy(u, slot) for u in ues]
    eligible = role_control(scenario)
    plans: dict[tuple[int, tuple[int, ...]], tuple[float, np.ndarray]] = {}

    def plan(rp: int, members: tuple[int, ...]) -> tuple[float, np.ndarray]:
        key = (rp, members)
        if key not in plans:
            plans[key] = best_group_plan(scenario, rp, members)
        return plans[key]

    def groups_with(m: int, rest: tuple[int, ...]):
        # every group inside {m} + rest that contains m
        for rp in (m, *rest):
            if rp not in eligible:
                continue
            pool = [x for x in (m, *rest) if x != rp]
            for size in range(1, ues[rp].quota + 1):
                for members in itertools.combinations(pool, size):
                    if rp == m or m in members:
                        yield rp, members

    @lru_cache(maxsize=None)
    def best(subset: tuple[int, ...]) -> tuple[float, int, tuple]:
        if not subset:
            return 0.0, 0, ()
        m, rest = subset[0], subset[1:]
        e, k, chosen = best(rest)
        out = (alone[m] + e, k, chosen)
        for rp, members in groups_with(m, rest):
            used = {rp, *members}
            e, k, chosen = best(tuple(x for x in rest if x not in used))
            cand = (plan(rp, members)[0] + e, k + 1, ((rp, members), *chosen))
            if cand[:2] < out[:2]:
                out = cand
        return out

    energy, _, chosen = best(tuple(range(n)))
    groups = tuple(
        GroupLoads(rp, members, tuple(float(x) for x in plan(rp, members)[1]))
        for rp, members in sorted(chosen)
    )
    rds = frozenset(i for g in groups for i in g.members)
    rps = frozenset(g.rp for g in groups)
    pairs = tuple((g.members[0], g.rp) for g in groups if len(g.members) == 1)
    partition = RolePartition(n, rds, rps, frozenset(range(n)) - rds - rps, pairs)
    return EsResult(float(energy), groups, partition)


def baseline_local(scenario: Scenario) -> float:
    slot = scenario.params.slot_length
    return math.fsum(standalone_energy(u, slot) for u in scenario.ues)


def _pair_energy(scenario: Scenario, rd: int, rp: int) -> float:
    ues, slot = scenario.ues, scenario.params.slot_length
    pb = pair_optimal_offload(ues[rd], ues[rp], scenario.gain(rd, rp), scenario.params)
    return standalone_energy(ues[rd], slot) + standalone_energy(ues[rp], slot) - pb.benefit


def baseline_random_pairs(scenario: Scenario, seed: int) -> float:
    """Uniformly random disjoint pairs with random orientation.

    A pair needs at least one role-control-eligible UE, which then serves as
    the RP (chosen at random when both qualify). Pairs offload at their
    one-to-one optimum; everyone else computes alone.
    """
    rng = np.random.default_rng(seed)
    eligible = role_control(scenario)
    slot = scenario.params.slot_length
    order = [int(m) for m in rng.permutation(len(scenario))]
    total = []
    free = []
    for m in order:
        mate = next((k for k in free if k in eligible or m in eligible), None)
        if mate is None:
            free.append(m)
            continue
        free.remove(mate)
        choices = [(a, b) for a, b in ((m, mate), (mate, m)) if b in eligible]
        rd, rp = choices[int(rng.integers(len(choices)))]
        total.append(_pair_energy(scenario, rd, rp))
    total.extend(standalone_energy(scenario.ues[m], slot) for m in free)
    return math.fsum(total)


def baseline_irving(scenario: Scenario) -> float:
    """Roommate role assignment only; each pair offloads at its one-to-one optimum."""
    partition = assign_roles(build_roommate_prefs(scenario, role_control(scenario)))
    slot = scenario.params.slot_length
    total = [standalone_energy(scenario.ues[m], slot) for m in partition.sus]
    total.extend(_pair_energy(scenario, rd, rp) for rd, rp in partition.roommate_pairs)
    return math.fsum(total)


def baseline_irving_gs(scenario: Scenario) -> float:
    return run_pipeline(scenario, rso=False).energy
