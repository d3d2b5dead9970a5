"""Cluster-head election rules: LEACH, SEP, ESEP, DEEC and ECRSEP.

Every rule reduces to a per-node election probability ``p_i``; the shared
rotating-epoch threshold then turns ``p_i`` into a per-round election
threshold for nodes still in the eligible set G.

The scalar ``*_probability`` functions operate on a single :class:`NodeState`
and are the reference definitions.  :func:`node_probabilities` is the
vectorised form used by the engine; the test-suite checks they agree.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import EcrMode, NodeState, Protocol, ScenarioConfig, Tier

# Guard for 1/p values that are integral up to float noise, e.g. 1/(0.1/1.4).
_EPS = 1e-9

INVERSE_RATIO_CAP = 2.0
MAX_PROBABILITY = 0.99


class ContractViolation(RuntimeError):
    """A rule was invoked outside its precondition."""


@dataclass
class ElectionContext:
    round: int = 1
    avg_residual_energy: float = 0.0
    avg_ecr: float = 0.0
    prev_round_chs: frozenset = frozenset()


@dataclass
class ProtocolState:
    """Per-node rotating-epoch bookkeeping.

    ``epoch_counter[i] > 0`` means node i is outside G for that many more
    rounds; ``last_ch_round[i]`` is 0 if node i has never served.
    """

    epoch_counter: np.ndarray
    last_ch_round: np.ndarray
    ch_count: np.ndarray = field(default=None)

    @classmethod
    def fresh(cls, n: int) -> "ProtocolState":
        return cls(epoch_counter=np.zeros(n, dtype=np.int64),
                   last_ch_round=np.zeros(n, dtype=np.int64),
                   ch_count=np.zeros(n, dtype=np.int64))

    def in_g(self) -> np.ndarray:
        return self.epoch_counter <= 0


def epoch_length(p: float) -> int:
    """Rounds in a node's rotating epoch, ceil(1/p)."""
    return int(math.ceil(1.0 / p - _EPS))


def threshold(p: float, r: int) -> float:
    """Election threshold for a node in G with probability ``p`` at round ``r``.

    Clamps to 1.0 on the final round of an epoch, where the denominator
    reaches p (or would go non-positive for non-integral 1/p).
    """
    if not 0.0 < p < 1.0:
        raise ValueError(f"threshold needs 0 < p < 1, got {p!r}")
    if r < 0:
        raise ValueError(f"threshold needs r >= 0, got {r!r}")
    period = epoch_length(p)
    denom = 1.0 - p * (r % period)
    if denom <= p + _EPS:
        return 1.0
    return min(1.0, p / denom)


def threshold_array(p: np.ndarray, r: int) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    period = np.ceil(1.0 / p - _EPS).astype(np.int64)
    denom = 1.0 - p * (r % period)
    out = np.ones_like(p)
    ok = denom > p + _EPS
    out[ok] = np.minimum(1.0, p[ok] / denom[ok])
    return out


def leach_probability(node: NodeState, config: ScenarioConfig) -> float:
    return config.p_opt


def _tier_weight(tier: Tier, config: ScenarioConfig, three_tier: bool) -> float:
    denom = 1.0 + config.alpha * config.m
    if three_tier:
        denom += config.esep_beta * config.esep_x
    if tier is Tier.ADVANCED:
        return (1.0 + config.alpha) / denom
    if tier is Tier.INTERMEDIATE:
        return (1.0 + config.esep_beta) / denom
    return 1.0 / denom


def sep_probability(node: NodeState, config: ScenarioConfig) -> float:
    """Weighted election probability; advanced nodes carry the (1+alpha) factor."""
    return config.p_opt * _tier_weight(node.tier, config, three_tier=False)


def esep_probability(node: NodeState, config: ScenarioConfig) -> float:
    return config.p_opt * _tier_weight(node.tier, config, three_tier=config.esep_x > 0)


def deec_probability(node: NodeState, ctx: ElectionContext, config: ScenarioConfig) -> float:
    if ctx.avg_residual_energy <= 0:
        raise ContractViolation("DEEC probability requested with zero average residual energy")
    p = config.p_opt * node.residual_energy / ctx.avg_residual_energy
    return min(max(p, 1e-12), MAX_PROBABILITY)


def ecr(node: NodeState, r: int) -> float:
    """Mean energy spent per elapsed round before round ``r``; 0 at r = 1."""
    if r < 1:
        raise ValueError(f"ecr needs r >= 1, got {r!r}")
    if r == 1:
        return 0.0
    return (node.initial_energy - node.residual_energy) / (r - 1)


def ecrsep_probability(node: NodeState, ctx: ElectionContext, config: ScenarioConfig) -> float:
    if node.id in ctx.prev_round_chs:
        raise ContractViolation(f"node {node.id} was CH in the previous round")
    w = _tier_weight(node.tier, config, three_tier=False)
    own = ecr(node, ctx.round)
    if config.ecr_mode is EcrMode.AS_WRITTEN:
        ratio = own / ctx.avg_ecr if ctx.avg_ecr > 0 else 1.0
    else:
        ratio = min(ctx.avg_ecr / own, INVERSE_RATIO_CAP) if own > 0 and ctx.avg_ecr > 0 else 1.0
    return min(max(config.p_opt * w * ratio, 1e-12), MAX_PROBABILITY)


def tier_weights(tiers: np.ndarray, config: ScenarioConfig, three_tier: bool) -> np.ndarray:
    lut = np.array([_tier_weight(Tier(t), config, three_tier) for t in range(3)])
    return lut[tiers]


def ecr_array(initial: np.ndarray, residual: np.ndarray, r: int) -> np.ndarray:
    if r <= 1:
        return np.zeros_like(initial, dtype=float)
    return (initial - residual) / (r - 1)


def node_probabilities(protocol: Protocol, tiers: np.ndarray, initial: np.ndarray,
                       residual: np.ndarray, ctx: ElectionContext,
                       config: ScenarioConfig) -> np.ndarray:
    """Per-node probabilities for the given (alive) nodes, vectorised."""
    protocol = Protocol.parse(protocol)
    if protocol is Protocol.LEACH:
        return np.full(len(tiers), config.p_opt)
    if protocol is Protocol.SEP:
        return config.p_opt * tier_weights(tiers, config, three_tier=False)
    if protocol is Protocol.ESEP:
        return config.p_opt * tier_weights(tiers, config, three_tier=config.esep_x > 0)
    if protocol is Protocol.DEEC:
        if ctx.avg_residual_energy <= 0:
            raise ContractViolation("DEEC probability requested with zero average residual energy")
        p = config.p_opt * residual / ctx.avg_residual_energy
        return np.clip(p, 1e-12, MAX_PROBABILITY)
    # ECRSEP
    w = tier_weights(tiers, config, three_tier=False)
    own = ecr_array(initial, residual, ctx.round)
    ratio = np.ones(len(tiers))
    if config.ecr_mode is EcrMode.AS_WRITTEN:
        if ctx.avg_ecr > 0:
            ratio = own / ctx.avg_ecr
    elif ctx.avg_ecr > 0:
        pos = own > 0
        ratio[pos] = np.minimum(ctx.avg_ecr / own[pos], INVERSE_RATIO_CAP)
    return np.clip(config.p_opt * w * ratio, 1e-12, MAX_PROBABILITY)


def elect_cluster_heads(protocol: Protocol, network, ctx: ElectionContext,
                        state: ProtocolState, rng: np.random.Generator,
                        config: ScenarioConfig) -> np.ndarray:
    """Run one round's election; returns the elected ids in ascending order.

    ``network`` is any object exposing ``alive``, ``tier``, ``initial`` and
    ``residual`` arrays indexed by node id.  One uniform variate is drawn per
    candidate, in ascending id order.  Elected nodes leave G for
    ``epoch_length(p_i) - 1`` rounds; every counter then ticks down once,
    so the caller must invoke this exactly once per round.
    """
    protocol = Protocol.parse(protocol)
    candidates = network.alive & state.in_g()
    if protocol is Protocol.ECRSEP and ctx.prev_round_chs:
        candidates[list(ctx.prev_round_chs)] = False
    ids = np.flatnonzero(candidates)
    elected = ids[:0]
    if len(ids):
        p = node_probabilities(protocol, network.tier[ids], network.initial[ids],
                               network.residual[ids], ctx, config)
        u = rng.random(len(ids))
        hit = u < threshold_array(p, ctx.round)
        elected = ids[hit]
        p_el = p[hit]
        # Counters of non-elected nodes tick first; elected ones are set after.
        np.subtract(state.epoch_counter, 1, out=state.epoch_counter, where=state.epoch_counter > 0)
        length = np.ceil(1.0 / p_el - _EPS).astype(np.int64)
        state.epoch_counter[elected] = length - 1 - ctx.round % length
        state.last_ch_round[elected] = ctx.round
        state.ch_count[elected] += 1
    else:
        np.subtract(state.epoch_counter, 1, out=state.epoch_counter, where=state.epoch_counter > 0)
    return elected
