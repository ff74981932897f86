"""Energy and power evaluators for local computing, NOMA uplink and cooperative processing.

All quantities are SI: bits, seconds, watts, joules, Hz.
"""

from __future__ import annotations

import decimal
import math
from dataclasses import dataclass
from decimal import Decimal
from typing import TYPE_CHECKING, Iterable, Sequence

from .model import ChannelGains, Scenario, SystemParams, UeProfile

if TYPE_CHECKING:
    from .matching import RolePartition

LN2 = math.log(2.0)


@dataclass(frozen=True)
class GroupLoads:
    """One cooperation group: a provider, its demanders and the bits each offloads."""

    rp: int
    members: tuple[int, ...]
    loads: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "members", tuple(int(m) for m in self.members))
        object.__setattr__(self, "loads", tuple(float(x) for x in self.loads))
        if len(self.members) != len(self.loads):
            raise ValueError("members and loads must have equal length")
        if len(set(self.members)) != len(self.members) or self.rp in self.members:
            raise ValueError("members must be distinct and exclude the provider")
        if any(x < 0 for x in self.loads):
            raise ValueError("offloaded bits must be non-negative")

    def load_of(self, i: int) -> float:
        return self.loads[self.members.index(i)]

    @property
    def total(self) -> float:
        return math.fsum(self.loads)

    def check_box(self, ues: Sequence[UeProfile]) -> None:
        for i, l in zip(self.members, self.loads):
            if l > ues[i].task_bits:
                raise ValueError(f"RD {i} offloads {l} bits but has only {ues[i].task_bits}")


def compute_energy(ue: UeProfile, bits: float, slot: float) -> float:
    """DVFS energy to process ``bits`` within one slot on ``ue``'s CPU.

    Written as gamma * f^2 per cycle at the frequency f that just meets the
    slot; this ordering keeps round reference values exact.
    """
    cycles = ue.cycles_per_bit * bits
    f = cycles / slot
    return ue.cap_coeff * (f * f) * cycles


def standalone_energy(ue: UeProfile, slot: float) -> float:
    return compute_energy(ue, ue.task_bits, slot)


def noise_over_gain(gain: float, params: SystemParams) -> float:
    return params.noise_power / gain


def tx_power(loads: GroupLoads, i: int, gains: ChannelGains, params: SystemParams) -> float:
    """Minimum transmit power of member ``i`` (a UE id) for its offload under NOMA.

    ``(sigma^2/g) * (2^(l_i/tw) - 1) * 2^(sum_{n != i} l_n / tw)``.
    The caller checks the result against the device's power cap.
    """
    tw = params.slot_bits
    own = loads.load_of(i)
    others = loads.total - own
    n0 = noise_over_gain(gains[i, loads.rp], params)
    return n0 * math.expm1(own * LN2 / tw) * math.exp(others * LN2 / tw)


def tx_power_difference_form(
    loads: GroupLoads, i: int, gains: ChannelGains, params: SystemParams
) -> float:
    """Same power written as ``N0 * (alpha^sum_all - alpha^sum_others)``.

    The two powers of alpha nearly cancel for small loads, so this form is
    evaluated in 40-digit decimal arithmetic; it serves as an independent
    reference for ``tx_power``.
    """
    with decimal.localcontext() as ctx:
        ctx.prec = 40
        ln_alpha = Decimal(2).ln() / Decimal(params.slot_bits)  # alpha = 2^(1/tw)
        others = sum((Decimal(l) for m, l in zip(loads.members, loads.loads) if m != i), Decimal(0))
        total = others + Decimal(loads.load_of(i))
        n0 = Decimal(params.noise_power) / Decimal(gains[i, loads.rp])
        return float(n0 * ((total * ln_alpha).exp() - (others * ln_alpha).exp()))


def tx_energy(power: float, slot: float) -> float:
    if power < 0:
        raise ValueError("power must be non-negative")
    return power * slot


def rp_energy(rp: UeProfile, loads: GroupLoads, slot: float) -> float:
    return compute_energy(rp, rp.task_bits + loads.total, slot)


def rd_local_energy(rd: UeProfile, offloaded: float, slot: float) -> float:
    if offloaded < 0 or offloaded > rd.task_bits:
        raise ValueError(f"offloaded bits {offloaded} outside [0, {rd.task_bits}]")
    return compute_energy(rd, rd.task_bits - offloaded, slot)


def rd_total_energy(
    rd: UeProfile, loads: GroupLoads, gains: ChannelGains, params: SystemParams
) -> float:
    l = loads.load_of(rd.id)
    local = rd_local_energy(rd, l, params.slot_length)
    if l == 0:
        return local
    return local + tx_energy(tx_power(loads, rd.id, gains, params), params.slot_length)


def achievable_rate(
    loads: GroupLoads, i: int, gains: ChannelGains, params: SystemParams
) -> float:
    """Uplink rate of member ``i`` when every member transmits at its ``tx_power``.

    Interference is the received power of all other group members, as written
    in the rate expression; no decoding order is applied.
    """
    rx = {n: tx_power(loads, n, gains, params) * gains[n, loads.rp] for n in loads.members}
    interference = math.fsum(v for n, v in rx.items() if n != i)
    return params.bandwidth * math.log2(1.0 + rx[i] / (interference + params.noise_power))


def group_energy(scenario: Scenario, loads: GroupLoads) -> float:
    """Provider processing energy plus every member's local and transmit energy."""
    ues, slot = scenario.ues, scenario.params.slot_length
    total = rp_energy(ues[loads.rp], loads, slot)
    for i in loads.members:
        total += rd_total_energy(ues[i], loads, scenario.channels, scenario.params)
    return total


def system_energy(
    partition: "RolePartition", plans: Iterable[GroupLoads], scenario: Scenario
) -> float:
    """Total slot energy of all UEs under a role partition and its group plans.

    RDs that appear in no plan compute their whole task locally.
    """
    slot = scenario.params.slot_length
    plans = list(plans)
    served = set()
    total = 0.0
    for plan in plans:
        if plan.rp not in partition.rps:
            raise ValueError(f"UE {plan.rp} provides resources but is not an RP")
        for i in plan.members:
            if i not in partition.rds:
                raise ValueError(f"UE {i} offloads but is not an RD")
            if i in served:
                raise ValueError(f"RD {i} appears in two groups")
            served.add(i)
        total += group_energy(scenario, plan)
    providers = {p.rp for p in plans}
    for m in partition.sus:
        total += standalone_energy(scenario.ues[m], slot)
    for m in partition.rds - served:
        total += standalone_energy(scenario.ues[m], slot)
    for m in partition.rps - providers:
        total += standalone_energy(scenario.ues[m], slot)
    return total
