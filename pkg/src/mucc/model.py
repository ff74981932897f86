"""Domain types, scenario generation and the D2D channel model."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Sequence

import numpy as np
import yaml

D_MIN = 1.0  # meters; pairwise distances are clamped here


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class SystemParams:
    slot_length: float = 0.2  # tau, s
    bandwidth: float = 1e6  # w, Hz
    noise_power: float = 1e-9  # sigma^2, W
    pathloss_exponent: float = 3.0
    area_side: float = 100.0  # m
    coop_epsilon: float = 1e-9  # J
    rng_seed: int = 0
    # per-UE defaults used by generate_scenario
    cycles_per_bit: float = 500.0
    cap_coeff: float = 1e-28
    max_tx_power: float = 0.1
    quota: int = 2
    energy_available_range: tuple[float, float] = (1e3, 1e3)
    energy_threshold: float = 0.0

    def __post_init__(self) -> None:
        if not self.slot_length > 0:
            raise ScenarioError("slot_length must be positive")
        if not self.bandwidth > 0:
            raise ScenarioError("bandwidth must be positive")
        if not self.noise_power > 0:
            raise ScenarioError("noise_power must be positive")
        if not self.pathloss_exponent >= 2:
            raise ScenarioError("pathloss_exponent must be >= 2")
        if not self.coop_epsilon >= 0:
            raise ScenarioError("coop_epsilon must be >= 0")
        if self.area_side <= 0:
            raise ScenarioError("area_side must be positive")
        if self.quota < 1:
            raise ScenarioError("quota must be >= 1")
        lo, hi = self.energy_available_range
        if lo > hi or lo < 0:
            raise ScenarioError("energy_available_range must satisfy 0 <= lo <= hi")
        # tuples arrive as lists from YAML/JSON
        object.__setattr__(self, "energy_available_range", (float(lo), float(hi)))

    @property
    def slot_bits(self) -> float:
        """tau * w: bits per unit of spectral efficiency in one slot."""
        return self.slot_length * self.bandwidth


@dataclass(frozen=True)
class UeProfile:
    id: int
    position: tuple[float, float]
    task_bits: float
    cycles_per_bit: float = 500.0
    cap_coeff: float = 1e-28
    max_tx_power: float = 0.1
    quota: int = 2
    available_energy: float = 1e3
    energy_threshold: float = 0.0

    def __post_init__(self) -> None:
        if self.task_bits < 0:
            raise ScenarioError(f"UE {self.id}: task_bits must be >= 0")
        if self.cycles_per_bit <= 0 or self.cap_coeff <= 0:
            raise ScenarioError(f"UE {self.id}: CPU parameters must be positive")
        if self.max_tx_power <= 0:
            raise ScenarioError(f"UE {self.id}: max_tx_power must be positive")
        if self.quota < 1:
            raise ScenarioError(f"UE {self.id}: quota must be >= 1")
        if self.available_energy < 0 or self.energy_threshold < 0:
            raise ScenarioError(f"UE {self.id}: energies must be >= 0")
        object.__setattr__(self, "position", (float(self.position[0]), float(self.position[1])))

    @property
    def energy_coeff(self) -> float:
        """gamma * C^3, so that local energy is energy_coeff * bits^3 / tau^2."""
        return self.cap_coeff * self.cycles_per_bit**3


@dataclass(frozen=True, eq=False)
class ChannelGains:
    gains: np.ndarray

    def __post_init__(self) -> None:
        g = np.array(self.gains, dtype=float)
        if g.ndim != 2 or g.shape[0] != g.shape[1]:
            raise ScenarioError("gain matrix must be square")
        np.fill_diagonal(g, 0.0)
        off = ~np.eye(g.shape[0], dtype=bool)
        if not np.all(np.isfinite(g)) or np.any(g[off] <= 0):
            raise ScenarioError("off-diagonal gains must be finite and positive")
        if not np.array_equal(g, g.T):
            raise ScenarioError("gain matrix must be symmetric")
        g.setflags(write=False)
        object.__setattr__(self, "gains", g)

    def __getitem__(self, idx: tuple[int, int]) -> float:
        return float(self.gains[idx])

    def __eq__(self, other: object) -> bool:
        return isinstance(other, ChannelGains) and np.array_equal(self.gains, other.gains)

    @property
    def size(self) -> int:
        return self.gains.shape[0]


@dataclass(frozen=True, eq=False)
class Scenario:
    params: SystemParams
    ues: tuple[UeProfile, ...]
    channels: ChannelGains

    def __post_init__(self) -> None:
        object.__setattr__(self, "ues", tuple(self.ues))
        if self.channels.size != len(self.ues):
            raise ScenarioError("channel matrix size does not match the number of UEs")
        for k, ue in enumerate(self.ues):
            if ue.id != k:
                raise ScenarioError("UE ids must equal their list position")
            x, y = ue.position
            if not (0 <= x <= self.params.area_side and 0 <= y <= self.params.area_side):
                raise ScenarioError(f"UE {k} lies outside the simulation area")

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, Scenario)
            and self.params == other.params
            and self.ues == other.ues
            and self.channels == other.channels
        )

    def __len__(self) -> int:
        return len(self.ues)

    def gain(self, m: int, k: int) -> float:
        return float(self.channels.gains[m, k])

    def to_dict(self) -> dict[str, Any]:
        return {
            "params": asdict(self.params),
            "ues": [asdict(ue) for ue in self.ues],
            "gains": self.channels.gains.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "Scenario":
        params = SystemParams(**data["params"])
        ues = tuple(UeProfile(**ue) for ue in data["ues"])
        return cls(params, ues, ChannelGains(np.array(data["gains"], dtype=float)))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "Scenario":
        return cls.from_dict(json.loads(text))


def channel_gain(distance: float, exponent: float, fading: float) -> float:
    """Small-scale fading over path loss: ``fading / distance**exponent``."""
    if distance <= 0:
        raise ScenarioError("coincident positions: distance must be positive")
    if fading <= 0:
        raise ScenarioError("fading draw must be positive")
    return fading / distance**exponent


def generate_scenario(
    params: SystemParams,
    n: int,
    task_bits_range: tuple[float, float] = (0.0, 1e6),
) -> Scenario:
    """Drop ``n`` UEs uniformly in the square and draw one block-fading realization.

    Everything is drawn from ``np.random.default_rng(params.rng_seed)``, so the
    same parameters give an identical scenario.
    """
    if n < 1:
        raise ScenarioError("need at least one UE")
    lo, hi = task_bits_range
    if lo > hi or lo < 0:
        raise ScenarioError("task_bits_range must satisfy 0 <= min <= max")

    rng = np.random.default_rng(params.rng_seed)
    pos = rng.uniform(0.0, params.area_side, size=(n, 2))
    bits = rng.uniform(lo, hi, size=n)
    e_lo, e_hi = params.energy_available_range
    avail = rng.uniform(e_lo, e_hi, size=n)
    fading = rng.exponential(1.0, size=(n, n))

    gains = np.zeros((n, n))
    for m in range(n):
        for k in range(m + 1, n):
            d = max(math.dist(pos[m], pos[k]), D_MIN)
            gains[m, k] = gains[k, m] = channel_gain(d, params.pathloss_exponent, fading[m, k])

    ues = tuple(
        UeProfile(
            id=m,
            position=(float(pos[m, 0]), float(pos[m, 1])),
            task_bits=float(bits[m]),
            cycles_per_bit=params.cycles_per_bit,
            cap_coeff=params.cap_coeff,
            max_tx_power=params.max_tx_power,
            quota=params.quota,
            available_energy=float(avail[m]),
            energy_threshold=params.energy_threshold,
        )
        for m in range(n)
    )
    return Scenario(params, ues, ChannelGains(gains))


def with_ues(scenario: Scenario, ues: Sequence[UeProfile]) -> Scenario:
    return Scenario(scenario.params, tuple(ues), scenario.channels)


def replace_ue(scenario: Scenario, idx: int, **changes: Any) -> Scenario:
    ues = list(scenario.ues)
    ues[idx] = replace(ues[idx], **changes)
    return with_ues(scenario, ues)


# --- configuration file -------------------------------------------------------

@dataclass
class ExperimentConfig:
    params: SystemParams = field(default_factory=SystemParams)
    n_list: tuple[int, ...] = (2, 4, 6, 8)
    seeds: int = 20
    algos: tuple[str, ...] = ("pipeline", "irving_gs", "irving", "random", "local")
    task_bits_range: tuple[float, float] = (0.0, 1e6)
    out_dir: str = "results"
    trace: bool = False
    rso: bool = True
    es_limit: int = 8
    workers: int = 1

    def __post_init__(self) -> None:
        if self.seeds < 1:
            raise ScenarioError("seeds must be >= 1")
        if any(n < 1 for n in self.n_list):
            raise ScenarioError("every swept UE count must be >= 1")
        if "es" in self.algos and max(self.n_list) > self.es_limit:
            raise ScenarioError(
                f"exhaustive search requested for N={max(self.n_list)} > es_limit={self.es_limit}"
            )


_PARAM_KEYS = {f for f in SystemParams.__dataclass_fields__}
_EXPERIMENT_KEYS = {f for f in ExperimentConfig.__dataclass_fields__} - {"params"}


def load_config(path: str | Path) -> ExperimentConfig:
    """Read a flat YAML mapping; keys are SystemParams and ExperimentConfig field names."""
    raw = yaml.safe_load(Path(path).read_text()) or {}
    if not isinstance(raw, dict):
        raise ScenarioError("config file must contain a key/value mapping")
    unknown = set(raw) - _PARAM_KEYS - _EXPERIMENT_KEYS
    if unknown:
        raise ScenarioError(f"unknown config keys: {sorted(unknown)}")
    params = SystemParams(**{k: v for k, v in raw.items() if k in _PARAM_KEYS})
    exp = {k: v for k, v in raw.items() if k in _EXPERIMENT_KEYS}
    for key in ("n_list", "algos", "task_bits_range"):
        if key in exp:
            exp[key] = tuple(exp[key])
    return ExperimentConfig(params=params, **exp)
