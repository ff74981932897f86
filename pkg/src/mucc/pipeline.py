"""End-to-end slot optimization: roles, association, rotation swaps, offloading."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

from .energy import GroupLoads, standalone_energy, system_energy, tx_power
from .matching import (
    Association,
    RolePartition,
    assign_roles,
    gale_shapley,
    role_control,
)
from .pairwise import build_association_prefs, build_roommate_prefs
from .rso import Guard, RsoResult, rso_loop
from .sca import ScaConfig, ScaResult, make_group, solve_group
from .model import Scenario

POWER_RTOL = 1e-9


class ConstraintViolation(RuntimeError):
    """A produced configuration breaks a system constraint; always a defect."""

    def __init__(self, constraint: str, detail: str) -> None:
        super().__init__(f"{constraint} violated: {detail}")
        self.constraint = constraint


class GroupSolver:
    """Memoized per-group offload optimization keyed by (rp, members)."""

    def __init__(self, scenario: Scenario, config: ScaConfig = ScaConfig()) -> None:
        self.scenario = scenario
        self.config = config
        self._cache: dict[tuple[int, tuple[int, ...]], ScaResult] = {}

    def solve(self, rp: int, members: tuple[int, ...]) -> ScaResult:
        key = (rp, tuple(sorted(members)))
        hit = self._cache.get(key)
        if hit is None:
            hit = solve_group(make_group(self.scenario, rp, key[1]), self.config)
            self._cache[key] = hit
        return hit

    def saving(self, rp: int, members: tuple[int, ...]) -> float:
        """Standalone energy of the group's UEs minus its optimized energy."""
        if not members:
            return 0.0
        ues, slot = self.scenario.ues, self.scenario.params.slot_length
        alone = standalone_energy(ues[rp], slot) + math.fsum(
            standalone_energy(ues[i], slot) for i in members
        )
        return alone - self.solve(rp, members).objective


def energy_guard(solver: GroupSolver) -> Guard:
    """Accept a rotation only if the summed group savings do not shrink.

    The system energy is the standalone total minus the group savings, so an
    accepted rotation never raises it.
    """

    def guard(old: Association, new: Association) -> bool:
        before, after = old.as_dict(), new.as_dict()
        changed = [j for j in sorted(set(before) | set(after)) if before.get(j, ()) != after.get(j, ())]
        gain = math.fsum(solver.saving(j, after.get(j, ())) for j in changed)
        loss = math.fsum(solver.saving(j, before.get(j, ())) for j in changed)
        return gain >= loss

    return guard


@dataclass
class PipelineResult:
    scenario: Scenario
    partition: RolePartition
    association: Association
    plans: list[ScaResult]
    energy: float
    rso: RsoResult | None
    stage_times: dict[str, float] = field(default_factory=dict)

    def group_loads(self) -> list[GroupLoads]:
        return [p.group_loads() for p in self.plans]

    def offloads(self) -> dict[int, float]:
        """Offloaded bits of every RD (0 for unserved RDs)."""
        out = {i: 0.0 for i in sorted(self.partition.rds)}
        for p in self.plans:
            for i, l in zip(p.members, p.loads):
                out[i] = float(l)
        return out

    def ue_rows(self) -> list[dict]:
        sc = self.scenario
        partner = self.association.partner_map()
        groups = self.association.as_dict()
        loads = {g.rp: g for g in self.group_loads()}
        rows = []
        for m in range(len(sc)):
            role = self.partition.role(m)
            bits = power = 0.0
            if role == "RD" and m in partner:
                g = loads[partner[m]]
                bits = g.load_of(m)
                power = tx_power(g, m, sc.channels, sc.params) if bits > 0 else 0.0
                mates = [partner[m]]
            elif role == "RP":
                mates = list(groups.get(m, ()))
            else:
                mates = []
            rows.append({"ue": m, "role": role, "partners": mates, "offloaded_bits": bits,
                         "tx_power": power})
        return rows


def run_pipeline(
    scenario: Scenario,
    rso: bool = True,
    max_rounds: int = 50,
    sca_config: ScaConfig = ScaConfig(),
) -> PipelineResult:
    """Role control, role assignment, association, rotation swaps, then per-group SCA.

    The resulting configuration is audited before it is returned.
    """
    times: dict[str, float] = {}
    t0 = time.perf_counter()
    eligible = role_control(scenario)
    table = build_roommate_prefs(scenario, eligible)
    partition = assign_roles(table)
    t1 = time.perf_counter()
    times["roles"] = t1 - t0

    rd_prefs, rp_prefs = build_association_prefs(partition, scenario)
    quotas = {j: scenario.ues[j].quota for j in rp_prefs}
    association = gale_shapley(rd_prefs, rp_prefs, quotas)
    t2 = time.perf_counter()
    times["association"] = t2 - t1

    solver = GroupSolver(scenario, sca_config)
    result = None
    if rso:
        result = rso_loop(rd_prefs, rp_prefs, quotas, association, max_rounds, energy_guard(solver))
        association = result.association
    t3 = time.perf_counter()
    times["rso"] = t3 - t2

    plans = [solver.solve(j, ms) for j, ms in association.nonempty()]
    t4 = time.perf_counter()
    times["sca"] = t4 - t3

    energy = system_energy(partition, [p.group_loads() for p in plans], scenario)
    audit(scenario, partition, association, plans, eligible)
    times["total"] = time.perf_counter() - t0
    return PipelineResult(scenario, partition, association, plans, energy, result, times)


def audit(
    scenario: Scenario,
    partition: RolePartition,
    association: Association,
    plans: list[ScaResult],
    eligible: frozenset[int] | None = None,
) -> None:
    """Raise ConstraintViolation naming the first broken system constraint."""
    n = len(scenario)
    sets = (partition.rds, partition.rps, partition.sus)
    if sum(len(s) for s in sets) != n or frozenset().union(*sets) != frozenset(range(n)):
        raise ConstraintViolation("role partition", "RD/RP/SU sets must split the UEs")
    if eligible is None:
        eligible = role_control(scenario)
    bad = sorted(partition.rps - eligible)
    if bad:
        raise ConstraintViolation("role control", f"depleted UEs {bad} act as RPs")
    seen: dict[int, int] = {}
    for j, ms in association.groups:
        if ms and j not in partition.rps:
            raise ConstraintViolation("role partition", f"UE {j} serves RDs but is not an RP")
        if len(ms) > scenario.ues[j].quota:
            raise ConstraintViolation("quota", f"RP {j} serves {len(ms)} RDs")
        for i in ms:
            if i not in partition.rds:
                raise ConstraintViolation("role partition", f"UE {i} offloads but is not an RD")
            if i in seen:
                raise ConstraintViolation("single provider", f"RD {i} uses RPs {seen[i]} and {j}")
            seen[i] = j
    groups = association.as_dict()
    for p in plans:
        if tuple(sorted(groups.get(p.rp, ()))) != tuple(sorted(p.members)):
            raise ConstraintViolation("single provider", f"plan for RP {p.rp} disagrees with association")
        gl = p.group_loads()
        for i, l in zip(gl.members, gl.loads):
            L = scenario.ues[i].task_bits
            if not 0.0 <= l <= L:
                raise ConstraintViolation("offload box", f"RD {i} offloads {l} of {L} bits")
            if l > 0:
                pw = tx_power(gl, i, scenario.channels, scenario.params)
                cap = scenario.ues[i].max_tx_power
                if not pw <= cap * (1 + POWER_RTOL):
                    raise ConstraintViolation("power cap", f"RD {i} needs {pw} W > {cap} W")
