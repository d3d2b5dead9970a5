"""Physical and energetic substrate of the network.

Node placement, heterogeneity tiers and the first-order radio energy model
(electronics + two-region amplifier + data aggregation).
"""
from __future__ import annotations

import enum
import math
import dataclasses
from dataclasses import dataclass, fields, replace
from typing import Optional

import numpy as np


class ConfigError(ValueError):
    """Raised when a scenario violates its invariants."""


class Tier(enum.IntEnum):
    NORMAL = 0
    INTERMEDIATE = 1  # ESEP only
    ADVANCED = 2


class Protocol(str, enum.Enum):
    LEACH = "leach"
    SEP = "sep"
    ESEP = "esep"
    DEEC = "deec"
    ECRSEP = "ecrsep"

    @classmethod
    def parse(cls, name: "str | Protocol") -> "Protocol":
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).strip().lower())
        except ValueError:
            valid = ", ".join(p.value for p in cls)
            raise ConfigError(f"unknown protocol {name!r}; valid names: {valid}") from None


class EcrMode(str, enum.Enum):
    INVERSE_NORMALIZED = "inverse_normalized"
    AS_WRITTEN = "as_written"

    @classmethod
    def parse(cls, name: "str | EcrMode") -> "EcrMode":
        if isinstance(name, cls):
            return name
        key = str(name).strip().lower().replace("-", "_")
        aliases = {"inversenormalized": "inverse_normalized", "aswritten": "as_written"}
        try:
            return cls(aliases.get(key, key))
        except ValueError:
            valid = ", ".join(m.value for m in cls)
            raise ConfigError(f"unknown ecr_mode {name!r}; valid modes: {valid}") from None


@dataclass(frozen=True)
class RadioModel:
    """First-order radio: costs in joules per bit (amplifiers per m^2 / m^4)."""

    e_elec: float = 50e-9
    e_da: float = 5e-9
    eps_fs: float = 10e-12
    eps_mp: float = 0.0013e-12

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ConfigError(f"radio coefficient {f.name} must be > 0, got {v!r}")

    @property
    def d0(self) -> float:
        """Crossover distance between the free-space and multipath regimes."""
        return math.sqrt(self.eps_fs / self.eps_mp)


@dataclass(frozen=True)
class ScenarioConfig:
    n: int = 100
    field: tuple[float, float] = (100.0, 100.0)
    sink: Optional[tuple[float, float]] = None  # None -> field centre
    m: float = 0.1
    alpha: float = 1.0
    esep_x: Optional[float] = None  # None -> m
    esep_beta: Optional[float] = None  # None -> alpha / 2
    e0: float = 0.5
    p_opt: float = 0.1
    k_bits: int = 4000
    radio: RadioModel = dataclasses.field(default_factory=RadioModel)
    max_rounds: int = 10000
    seed: int = 0
    protocol: Protocol = Protocol.LEACH
    ecr_mode: EcrMode = EcrMode.INVERSE_NORMALIZED

    def __post_init__(self):
        # Normalise loosely-typed inputs so that equal scenarios compare equal.
        set_ = object.__setattr__
        set_(self, "protocol", Protocol.parse(self.protocol))
        set_(self, "ecr_mode", EcrMode.parse(self.ecr_mode))
        set_(self, "field", tuple(float(v) for v in self.field))
        if self.sink is None:
            set_(self, "sink", (self.field[0] / 2.0, self.field[1] / 2.0))
        else:
            set_(self, "sink", tuple(float(v) for v in self.sink))
        if self.esep_x is None:
            set_(self, "esep_x", float(self.m))
        if self.esep_beta is None:
            set_(self, "esep_beta", float(self.alpha) / 2.0)
        self.validate()

    def validate(self) -> None:
        def need(cond: bool, msg: str) -> None:
            if not cond:
                raise ConfigError(msg)

        need(isinstance(self.n, (int, np.integer)) and self.n >= 1, f"n must be a positive integer, got {self.n!r}")
        need(len(self.field) == 2 and all(v > 0 for v in self.field), f"field must be two positive lengths, got {self.field!r}")
        need(len(self.sink) == 2, f"sink must be an (x, y) pair, got {self.sink!r}")
        need(0.0 <= self.m <= 1.0, f"m must lie in [0, 1], got {self.m!r}")
        need(self.alpha >= 0.0, f"alpha must be >= 0, got {self.alpha!r}")
        need(self.e0 > 0.0, f"e0 must be > 0, got {self.e0!r}")
        need(0.0 < self.p_opt < 1.0, f"p_opt must lie in (0, 1), got {self.p_opt!r}")
        need(self.p_opt * self.n >= 1.0 - 1e-12, f"p_opt * n must be >= 1, got {self.p_opt * self.n!r}")
        need(isinstance(self.k_bits, (int, np.integer)) and self.k_bits > 0, f"k_bits must be a positive integer, got {self.k_bits!r}")
        need(isinstance(self.max_rounds, (int, np.integer)) and self.max_rounds >= 0, f"max_rounds must be >= 0, got {self.max_rounds!r}")
        need(isinstance(self.seed, (int, np.integer)) and 0 <= self.seed < 2**64, f"seed must be a 64-bit unsigned integer, got {self.seed!r}")
        if self.protocol is Protocol.ESEP:
            need(0.0 <= self.esep_x <= 1.0, f"esep_x must lie in [0, 1], got {self.esep_x!r}")
            need(self.m + self.esep_x <= 1.0 + 1e-12, f"m + esep_x must be <= 1, got {self.m + self.esep_x!r}")
            need(self.alpha >= self.esep_beta >= 0.0, f"need alpha >= esep_beta >= 0, got alpha={self.alpha!r}, esep_beta={self.esep_beta!r}")

    @property
    def three_tier(self) -> bool:
        return self.protocol is Protocol.ESEP and self.esep_x > 0

    def with_(self, **changes) -> "ScenarioConfig":
        """Copy with fields replaced; derived defaults (sink, ESEP tier) are re-derived
        unless given explicitly."""
        if "field" in changes and "sink" not in changes:
            changes["sink"] = None
        if "m" in changes and "esep_x" not in changes:
            changes["esep_x"] = None
        if "alpha" in changes and "esep_beta" not in changes:
            changes["esep_beta"] = None
        return replace(self, **changes)


@dataclass
class NodeState:
    id: int
    position: tuple[float, float]
    tier: Tier
    initial_energy: float
    residual_energy: float
    alive: bool = True
    ch_in_round: Optional[int] = None
    epoch_counter: int = 0


def tier_counts(config: ScenarioConfig) -> tuple[int, int, int]:
    """(advanced, intermediate, normal) head-counts.

    Python's round() is round-half-to-even, which is the rounding we want.
    """
    n_adv = int(round(config.m * config.n))
    n_int = int(round(config.esep_x * config.n)) if config.three_tier else 0
    if n_adv + n_int > config.n:
        raise ConfigError(f"tier counts {n_adv}+{n_int} exceed n={config.n}")
    return n_adv, n_int, config.n - n_adv - n_int


def tier_energy(config: ScenarioConfig, tier: Tier) -> float:
    if tier is Tier.ADVANCED:
        return config.e0 * (1.0 + config.alpha)
    if tier is Tier.INTERMEDIATE:
        return config.e0 * (1.0 + config.esep_beta)
    return config.e0


def build_network(config: ScenarioConfig, rng: np.random.Generator) -> list[NodeState]:
    """Place ``config.n`` nodes uniformly at random over the field.

    Ids ``0..n_adv-1`` are advanced, the next ``n_int`` intermediate and the
    rest normal.  Positions are drawn before tiers are assigned, so the same
    seed gives the same geometry whatever the protocol.
    """
    config.validate()
    n_adv, n_int, _ = tier_counts(config)
    w, h = config.field
    xs = rng.uniform(0.0, w, config.n)
    ys = rng.uniform(0.0, h, config.n)
    nodes = []
    for i in range(config.n):
        if i < n_adv:
            tier = Tier.ADVANCED
        elif i < n_adv + n_int:
            tier = Tier.INTERMEDIATE
        else:
            tier = Tier.NORMAL
        e = tier_energy(config, tier)
        nodes.append(NodeState(id=i, position=(float(xs[i]), float(ys[i])), tier=tier,
                               initial_energy=e, residual_energy=e))
    return nodes


def tx_cost(radio: RadioModel, k: int, d: float) -> float:
    """Energy to transmit ``k`` bits over ``d`` metres."""
    if k <= 0 or d < 0:
        raise ValueError(f"tx_cost needs k > 0 and d >= 0, got k={k!r}, d={d!r}")
    if d < radio.d0:
        return radio.e_elec * k + radio.eps_fs * k * d * d
    return radio.e_elec * k + radio.eps_mp * k * d ** 4


def tx_cost_array(radio: RadioModel, k: int, d: np.ndarray) -> np.ndarray:
    """Vectorised :func:`tx_cost`, elementwise over distances."""
    d = np.asarray(d, dtype=float)
    d2 = d * d
    amp = np.where(d < radio.d0, radio.eps_fs * k * d2, radio.eps_mp * k * (d2 * d2))
    return radio.e_elec * k + amp


def rx_cost(radio: RadioModel, k: int) -> float:
    if k <= 0:
        raise ValueError(f"rx_cost needs k > 0, got {k!r}")
    return radio.e_elec * k


def aggregation_cost(radio: RadioModel, k: int, signals: int) -> float:
    """Cost of fusing ``signals`` k-bit readings into one packet."""
    if k <= 0 or signals < 1:
        raise ValueError(f"aggregation_cost needs k > 0 and signals >= 1, got k={k!r}, signals={signals!r}")
    return radio.e_da * k * signals


def total_initial_energy(config: ScenarioConfig) -> float:
    """Network energy budget, n*e0*(1 + alpha*m [+ beta*x]) evaluated on the
    rounded tier counts actually deployed."""
    n_adv, n_int, n_nrm = tier_counts(config)
    return (n_nrm * config.e0
            + n_adv * config.e0 * (1.0 + config.alpha)
            + n_int * config.e0 * (1.0 + config.esep_beta))
