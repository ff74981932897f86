"""One-demander/one-provider offloading and the preference lists built from it."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Callable, Iterable, Mapping

import numpy as np

from .energy import LN2
from .model import Scenario, SystemParams, UeProfile

if TYPE_CHECKING:
    from .matching import RolePartition

BISECTION_STEPS = 64


@dataclass(frozen=True)
class PairBenefit:
    rd: int
    rp: int
    benefit: float
    optimal_load: float


@dataclass(frozen=True)
class PreferenceList:
    """Strict ranking of acceptable partners, most preferred first."""

    owner: int
    ranked: tuple[int, ...]
    _rank: dict[int, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "ranked", tuple(self.ranked))
        if len(set(self.ranked)) != len(self.ranked):
            raise ValueError(f"duplicate candidates in list of {self.owner}")
        if self.owner in self.ranked:
            raise ValueError(f"{self.owner} lists itself")
        object.__setattr__(self, "_rank", {c: r for r, c in enumerate(self.ranked)})

    def __len__(self) -> int:
        return len(self.ranked)

    def __iter__(self):
        return iter(self.ranked)

    def __contains__(self, c: object) -> bool:
        return c in self._rank

    def rank(self, c: int | None) -> float:
        """Position of ``c``; unlisted candidates and ``None`` rank after everyone."""
        if c is None:
            return math.inf
        return self._rank.get(c, math.inf)

    def prefers(self, a: int | None, b: int | None) -> bool:
        """True when ``a`` is strictly preferred to ``b``; ``None`` means unmatched."""
        if a is None or a not in self._rank:
            return False
        return self.rank(a) < self.rank(b)


@dataclass(frozen=True)
class RoommateTable:
    lists: dict[int, PreferenceList]
    # (min id, max id) -> oriented benefit of that pair
    pairs: dict[tuple[int, int], PairBenefit]

    def orientation(self, m: int, k: int) -> tuple[int, int]:
        pb = self.pairs[(min(m, k), max(m, k))]
        return pb.rd, pb.rp


# --- 1D convex search ----------------------------------------------------------

def _argmin_convex(deriv: Callable[[float], float], hi: float) -> float:
    """Minimizer on [0, hi] of a convex function given its nondecreasing derivative."""
    if hi <= 0 or deriv(0.0) >= 0:
        return 0.0
    if deriv(hi) <= 0:
        return hi
    lo = 0.0
    for _ in range(BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        if deriv(mid) < 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-6:
            break
    return 0.5 * (lo + hi)


def load_cap(rd: UeProfile, gain: float, params: SystemParams) -> float:
    """Largest single-link offload meeting the RD's power cap, clipped to its task."""
    n0 = params.noise_power / gain
    by_power = params.slot_bits * math.log2(1.0 + rd.max_tx_power / n0)
    return min(rd.task_bits, by_power)


def _local_saving(ue: UeProfile, l: float, slot: float) -> float:
    # coeff * (L^3 - (L - l)^3) without the cancellation
    L = ue.task_bits
    return ue.energy_coeff / slot**2 * l * (3 * L * L - 3 * L * l + l * l)


def _provider_extra(ue: UeProfile, l: float, slot: float) -> float:
    # coeff * ((L + l)^3 - L^3)
    L = ue.task_bits
    return ue.energy_coeff / slot**2 * l * (3 * L * L + 3 * L * l + l * l)


def _tx_energy_single(l: float, gain: float, params: SystemParams) -> float:
    n0 = params.noise_power / gain
    return params.slot_length * n0 * math.expm1(l * LN2 / params.slot_bits)


def pair_saving(rd: UeProfile, rp: UeProfile, l: float, gain: float, params: SystemParams) -> float:
    """Joint energy saved by the pair when the RD offloads ``l`` bits."""
    slot = params.slot_length
    return (
        _local_saving(rd, l, slot)
        - _provider_extra(rp, l, slot)
        - _tx_energy_single(l, gain, params)
    )


def rd_saving(rd: UeProfile, l: float, gain: float, params: SystemParams) -> float:
    """Energy the RD alone saves by offloading ``l`` bits (provider cost ignored)."""
    return _local_saving(rd, l, params.slot_length) - _tx_energy_single(l, gain, params)


def _derivatives(rd: UeProfile, rp: UeProfile | None, gain: float, params: SystemParams):
    slot = params.slot_length
    a_d = 3 * rd.energy_coeff / slot**2
    a_p = 3 * rp.energy_coeff / slot**2 if rp is not None else 0.0
    Ld = rd.task_bits
    Lp = rp.task_bits if rp is not None else 0.0
    c = LN2 / params.slot_bits
    tx = slot * params.noise_power / gain * c

    def deriv(l: float) -> float:
        return -a_d * (Ld - l) ** 2 + a_p * (Lp + l) ** 2 + tx * math.exp(c * l)

    return deriv


def pair_optimal_offload(
    rd: UeProfile, rp: UeProfile, gain: float, params: SystemParams
) -> PairBenefit:
    """Offload that maximizes the pair's joint saving, and that saving."""
    if rd.id == rp.id:
        raise ValueError("a UE cannot cooperate with itself")
    if gain <= 0:
        raise ValueError("gain must be positive")
    cap = load_cap(rd, gain, params)
    l = _argmin_convex(_derivatives(rd, rp, gain, params), cap)
    benefit = max(0.0, pair_saving(rd, rp, l, gain, params)) if l > 0 else 0.0
    if benefit == 0.0:
        l = 0.0
    return PairBenefit(rd.id, rp.id, benefit, l)


def rd_optimal_offload(rd: UeProfile, rp_id: int, gain: float, params: SystemParams) -> PairBenefit:
    cap = load_cap(rd, gain, params)
    l = _argmin_convex(_derivatives(rd, None, gain, params), cap)
    benefit = max(0.0, rd_saving(rd, l, gain, params)) if l > 0 else 0.0
    if benefit == 0.0:
        l = 0.0
    return PairBenefit(rd.id, rp_id, benefit, l)


def rd_benefit(i: int, j: int, scenario: Scenario) -> float:
    """Saving of RD ``i`` when served alone by RP ``j``."""
    return rd_optimal_offload(scenario.ues[i], j, scenario.gain(i, j), scenario.params).benefit


def rp_benefit(j: int, i: int, scenario: Scenario) -> float:
    """Joint saving RP ``j`` attributes to serving RD ``i`` alone."""
    ues = scenario.ues
    return pair_optimal_offload(ues[i], ues[j], scenario.gain(i, j), scenario.params).benefit


def oriented_pair_benefit(
    m: int, k: int, scenario: Scenario, eligible_rps: Iterable[int] | None = None
) -> PairBenefit:
    """Best orientation of the pair {m, k}; ties go to the lower id as RD.

    A UE outside ``eligible_rps`` is only tried as the demander.
    """
    eligible = set(range(len(scenario))) if eligible_rps is None else set(eligible_rps)
    lo, hi = min(m, k), max(m, k)
    ues, params, g = scenario.ues, scenario.params, scenario.gain(m, k)
    best = PairBenefit(lo, hi, 0.0, 0.0)
    found = False
    for rd, rp in ((lo, hi), (hi, lo)):
        if rp not in eligible:
            continue
        pb = pair_optimal_offload(ues[rd], ues[rp], g, params)
        if not found or pb.benefit > best.benefit:
            best, found = pb, True
    return best


def _ranked(owner: int, scores: Mapping[int, float], eps: float) -> PreferenceList:
    keep = [(c, s) for c, s in scores.items() if s > eps]
    keep.sort(key=lambda cs: (-cs[1], cs[0]))
    return PreferenceList(owner, tuple(c for c, _ in keep))


def build_roommate_prefs(scenario: Scenario, eligible_rps: Iterable[int]) -> RoommateTable:
    n = len(scenario)
    eligible = set(eligible_rps)
    eps = scenario.params.coop_epsilon
    pairs: dict[tuple[int, int], PairBenefit] = {}
    for m in range(n):
        for k in range(m + 1, n):
            pairs[(m, k)] = oriented_pair_benefit(m, k, scenario, eligible)
    lists = {}
    for m in range(n):
        scores = {k: pairs[(min(m, k), max(m, k))].benefit for k in range(n) if k != m}
        lists[m] = _ranked(m, scores, eps)
    return RoommateTable(lists, pairs)


def build_association_prefs(
    partition: "RolePartition", scenario: Scenario
) -> tuple[dict[int, PreferenceList], dict[int, PreferenceList]]:
    """RD lists over RPs by the RD's own saving, RP lists over RDs by joint saving."""
    eps = scenario.params.coop_epsilon
    rds, rps = sorted(partition.rds), sorted(partition.rps)
    rd_lists = {i: _ranked(i, {j: rd_benefit(i, j, scenario) for j in rps}, eps) for i in rds}
    rp_lists = {j: _ranked(j, {i: rp_benefit(j, i, scenario) for i in rds}, eps) for j in rps}
    return rd_lists, rp_lists


# --- brute-force oracles for tests ---------------------------------------------

def grid_pair_benefit(
    rd: UeProfile, rp: UeProfile | None, gain: float, params: SystemParams, points: int
) -> tuple[float, float]:
    """Grid scan of the pair (or RD-only when ``rp`` is None) saving over the feasible range."""
    cap = load_cap(rd, gain, params)
    l = np.linspace(0.0, cap, points)
    slot = params.slot_length
    Ld = rd.task_bits
    save = rd.energy_coeff / slot**2 * (Ld**3 - (Ld - l) ** 3)
    if rp is not None:
        Lp = rp.task_bits
        save -= rp.energy_coeff / slot**2 * ((Lp + l) ** 3 - Lp**3)
    save -= slot * params.noise_power / gain * np.expm1(l * LN2 / params.slot_bits)
    k = int(np.argmax(save))
    return float(save[k]), float(l[k])
