"""Role control, roommate-style role assignment and quota-constrained association."""

from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import Iterable, Literal, Mapping

from .model import Scenario
from .pairwise import PreferenceList, RoommateTable


@dataclass(frozen=True)
class RolePartition:
    n: int
    rds: frozenset[int]
    rps: frozenset[int]
    sus: frozenset[int]
    roommate_pairs: tuple[tuple[int, int], ...] = ()

    def __post_init__(self) -> None:
        for name in ("rds", "rps", "sus"):
            object.__setattr__(self, name, frozenset(getattr(self, name)))
        object.__setattr__(self, "roommate_pairs", tuple(tuple(p) for p in self.roommate_pairs))
        if self.rds & self.rps or self.rds & self.sus or self.rps & self.sus:
            raise ValueError("role sets must be pairwise disjoint")
        if self.rds | self.rps | self.sus != frozenset(range(self.n)):
            raise ValueError("role sets must cover every UE")
        for rd, rp in self.roommate_pairs:
            if rd not in self.rds or rp not in self.rps:
                raise ValueError(f"pair ({rd}, {rp}) is not oriented RD -> RP")

    @classmethod
    def all_standalone(cls, n: int) -> "RolePartition":
        return cls(n, frozenset(), frozenset(), frozenset(range(n)))

    def role(self, m: int) -> str:
        if m in self.rds:
            return "RD"
        if m in self.rps:
            return "RP"
        return "SU"

    def roommate_partner(self) -> dict[int, int | None]:
        partner: dict[int, int | None] = {m: None for m in range(self.n)}
        for rd, rp in self.roommate_pairs:
            partner[rd], partner[rp] = rp, rd
        return partner


@dataclass(frozen=True)
class Association:
    """Many-to-one map from each RP to the RDs it serves (member ids ascending)."""

    groups: tuple[tuple[int, tuple[int, ...]], ...]

    @classmethod
    def from_mapping(cls, mapping: Mapping[int, Iterable[int]]) -> "Association":
        return cls(tuple(sorted((j, tuple(sorted(ms))) for j, ms in mapping.items())))

    def as_dict(self) -> dict[int, tuple[int, ...]]:
        return dict(self.groups)

    def members(self, j: int) -> tuple[int, ...]:
        return self.as_dict().get(j, ())

    def partner_map(self) -> dict[int, int]:
        return {i: j for j, ms in self.groups for i in ms}

    def partner(self, i: int) -> int | None:
        return self.partner_map().get(i)

    def nonempty(self) -> list[tuple[int, tuple[int, ...]]]:
        return [(j, ms) for j, ms in self.groups if ms]

    def check(self, quotas: Mapping[int, int]) -> None:
        seen: set[int] = set()
        for j, ms in self.groups:
            if len(ms) > quotas[j]:
                raise ValueError(f"RP {j} serves {len(ms)} RDs over its quota {quotas[j]}")
            for i in ms:
                if i in seen:
                    raise ValueError(f"RD {i} is associated with more than one RP")
                seen.add(i)


def role_control(scenario: Scenario) -> frozenset[int]:
    """UEs whose available energy meets their threshold and may therefore act as RPs."""
    return frozenset(ue.id for ue in scenario.ues if ue.available_energy >= ue.energy_threshold)


def propose_roommates(lists: Mapping[int, PreferenceList]) -> dict[int, int | None]:
    """Proposal phase: returns who holds whose proposal (``held[k]`` proposed to ``k``).

    Free UEs propose in ascending id order, each down its own list. A proposee
    keeps the better of its held proposal and the new one; the loser resumes
    proposing from its next candidate. UEs rejected by their whole list drop out.
    """
    held: dict[int, int | None] = {m: None for m in lists}
    nxt = {m: 0 for m in lists}
    free = list(lists)
    heapq.heapify(free)
    while free:
        m = heapq.heappop(free)
        pl = lists[m]
        while nxt[m] < len(pl):
            k = pl.ranked[nxt[m]]
            current = held[k]
            if m in lists[k] and (current is None or lists[k].prefers(m, current)):
                held[k] = m
                if current is not None:
                    nxt[current] += 1
                    heapq.heappush(free, current)
                break
            nxt[m] += 1
    return held


def assign_roles(table: RoommateTable) -> RolePartition:
    """Partition UEs into RDs, RPs and SUs from mutually held roommate proposals."""
    held = propose_roommates(table.lists)
    n = len(table.lists)
    pairs = []
    for k, m in held.items():
        if m is not None and m < k and held.get(m) == k:
            pairs.append(table.orientation(m, k))
    pairs.sort()
    rds = {rd for rd, _ in pairs}
    rps = {rp for _, rp in pairs}
    sus = set(range(n)) - rds - rps
    return RolePartition(n, frozenset(rds), frozenset(rps), frozenset(sus), tuple(pairs))


def gale_shapley(
    rd_prefs: Mapping[int, PreferenceList],
    rp_prefs: Mapping[int, PreferenceList],
    quotas: Mapping[int, int],
) -> Association:
    """RD-proposing deferred acceptance with per-RP quotas.

    Unmatched RDs propose in ascending id order. A full RP holding a proposal
    it likes less than the newcomer releases its least preferred RD.
    """
    held: dict[int, list[int]] = {j: [] for j in rp_prefs}
    nxt = {i: 0 for i in rd_prefs}
    free = list(rd_prefs)
    heapq.heapify(free)
    while free:
        i = heapq.heappop(free)
        pl = rd_prefs[i]
        while nxt[i] < len(pl):
            j = pl.ranked[nxt[i]]
            if j not in rp_prefs or i not in rp_prefs[j]:
                nxt[i] += 1
                continue
            rank = rp_prefs[j].rank
            if len(held[j]) < quotas[j]:
                held[j].append(i)
                break
            worst = max(held[j], key=rank)
            if rank(i) < rank(worst):
                held[j].remove(worst)
                held[j].append(i)
                nxt[worst] += 1
                heapq.heappush(free, worst)
                break
            nxt[i] += 1
    return Association.from_mapping(held)


def roommate_blocking_pairs(
    partner: Mapping[int, int | None], lists: Mapping[int, PreferenceList]
) -> list[tuple[int, int]]:
    out = []
    ids = sorted(lists)
    for a_pos, m in enumerate(ids):
        for k in ids[a_pos + 1:]:
            if partner.get(m) == k:
                continue
            if lists[m].prefers(k, partner.get(m)) and lists[k].prefers(m, partner.get(k)):
                out.append((m, k))
    return out


def admission_blocking_pairs(
    association: Association,
    rd_prefs: Mapping[int, PreferenceList],
    rp_prefs: Mapping[int, PreferenceList],
    quotas: Mapping[int, int],
) -> list[tuple[int, int]]:
    partner = association.partner_map()
    groups = association.as_dict()
    out = []
    for i in sorted(rd_prefs):
        for j in rd_prefs[i]:
            if j not in rp_prefs or not rd_prefs[i].prefers(j, partner.get(i)):
                continue
            pl = rp_prefs[j]
            if i not in pl:
                continue
            held = groups.get(j, ())
            if len(held) < quotas[j] or any(pl.prefers(i, h) for h in held):
                out.append((i, j))
    return out


def find_blocking_pairs(
    kind: Literal["roommate", "admission"],
    state,
    prefs,
    quotas: Mapping[int, int] | None = None,
) -> list[tuple[int, int]]:
    """Blocking pairs of a roommate matching or of an RD-RP association.

    ``roommate``: ``state`` is a RolePartition or a partner map, ``prefs`` the
    roommate lists. ``admission``: ``state`` is an Association, ``prefs`` the
    pair ``(rd_prefs, rp_prefs)`` and ``quotas`` the RP quotas.
    """
    if kind == "roommate":
        partner = state.roommate_partner() if isinstance(state, RolePartition) else state
        return roommate_blocking_pairs(partner, prefs)
    if kind == "admission":
        if quotas is None:
            raise ValueError("admission stability needs quotas")
        rd_prefs, rp_prefs = prefs
        return admission_blocking_pairs(state, rd_prefs, rp_prefs, quotas)
    raise ValueError(f"unknown matching kind {kind!r}")
