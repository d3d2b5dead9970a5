"""Round-based simulation loop.

Each round: elect CHs, attach every other alive node to its nearest CH,
then run the steady-state phase (members -> CH -> sink) with per-node
energy debits.  A node that cannot afford a debit still performs the
action, is clamped to zero, and counts as dead from the next phase on.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .model import (NodeState, Protocol, ScenarioConfig, Tier, aggregation_cost,
                    build_network, rx_cost, tx_cost_array)
from .protocols import ElectionContext, ProtocolState, ecr_array, elect_cluster_heads

DIRECT = -1


@dataclass
class RoundMetrics:
    round: int
    alive: int
    dead: int
    ch_count: int
    packets_to_bs: int
    packets_to_bs_cum: int
    residual_energy_total: float


@dataclass
class SimulationSummary:
    fnd: Optional[int]
    hnd: Optional[int]
    lnd: Optional[int]
    total_packets: int
    series: list = field(default_factory=list)
    n: int = 0
    # nodes that served as CH in two consecutive rounds, summed over the run
    back_to_back_ch: int = 0


class Network:
    """Array view of a node population, indexed by node id."""

    def __init__(self, nodes: list[NodeState]):
        if [nd.id for nd in nodes] != list(range(len(nodes))):
            raise ValueError("node ids must be 0..n-1 in order")
        self.x = np.array([nd.position[0] for nd in nodes], dtype=float)
        self.y = np.array([nd.position[1] for nd in nodes], dtype=float)
        self.tier = np.array([int(nd.tier) for nd in nodes], dtype=np.int64)
        self.initial = np.array([nd.initial_energy for nd in nodes], dtype=float)
        self.residual = np.array([nd.residual_energy for nd in nodes], dtype=float)
        self.alive = np.array([nd.alive and nd.residual_energy > 0 for nd in nodes], dtype=bool)
        self.residual[~self.alive] = 0.0
        self.ch_in_round = np.array([nd.ch_in_round or 0 for nd in nodes], dtype=np.int64)

    def __len__(self) -> int:
        return len(self.x)

    def node(self, i: int, state: Optional[ProtocolState] = None) -> NodeState:
        return NodeState(
            id=int(i), position=(float(self.x[i]), float(self.y[i])), tier=Tier(int(self.tier[i])),
            initial_energy=float(self.initial[i]), residual_energy=float(self.residual[i]),
            alive=bool(self.alive[i]), ch_in_round=int(self.ch_in_round[i]) or None,
            epoch_counter=int(state.epoch_counter[i]) if state is not None else 0)

    def nodes(self, state: Optional[ProtocolState] = None) -> list[NodeState]:
        return [self.node(i, state) for i in range(len(self))]

    def debit(self, ids: np.ndarray, cost: np.ndarray) -> float:
        """Charge ``cost`` to alive nodes ``ids`` (clamped at zero); return joules spent.

        ``ids`` must be unique.  Death is not applied here; see :meth:`reap`.
        """
        if len(ids) == 0:
            return 0.0
        have = self.residual[ids]
        spent = np.minimum(cost, have)
        self.residual[ids] = have - spent
        return float(spent.sum())

    def reap(self) -> None:
        self.alive &= self.residual > 0.0


def form_clusters(ch_ids, alive_ids, x: np.ndarray, y: np.ndarray) -> dict[int, int]:
    """Map every non-CH alive id to its nearest CH id (ties -> lowest id), or
    to ``DIRECT`` when there is no CH."""
    ch = np.asarray(sorted(ch_ids), dtype=np.int64)
    ch_set = set(ch.tolist())
    members = np.asarray([i for i in sorted(alive_ids) if i not in ch_set], dtype=np.int64)
    if len(ch) == 0:
        return {int(i): DIRECT for i in members}
    return dict(zip(members.tolist(), ch[_nearest(members, ch, x, y)].tolist()))


def _nearest(members: np.ndarray, ch: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Index into ``ch`` (sorted ascending) of each member's nearest CH.

    argmin returns the first minimum, so ties resolve to the lowest CH id.
    """
    if len(members) == 0:
        return np.zeros(0, dtype=np.int64)
    dx = x[members, None] - x[None, ch]
    dy = y[members, None] - y[None, ch]
    return np.argmin(dx * dx + dy * dy, axis=1)


class Simulation:
    """Mutable state of one run: network, protocol bookkeeping and RNG."""

    def __init__(self, config: ScenarioConfig, network: Optional[Network] = None,
                 rng: Optional[np.random.Generator] = None):
        self.config = config
        place_ss, elect_ss = np.random.SeedSequence(config.seed).spawn(2)
        if network is None:
            network = Network(build_network(config, np.random.default_rng(place_ss)))
        self.network = network
        self.rng = rng if rng is not None else np.random.default_rng(elect_ss)
        self.state = ProtocolState.fresh(len(network))
        self.round = 0
        self.packets_cum = 0
        self.energy_spent = 0.0
        self.initial_total = float(network.residual.sum())
        sx, sy = config.sink
        self.d_sink = np.hypot(network.x - sx, network.y - sy)
        alive = network.alive
        self.ctx = ElectionContext(
            round=1,
            avg_residual_energy=float(network.residual[alive].mean()) if alive.any() else 0.0,
            avg_ecr=0.0,
            prev_round_chs=frozenset())
        self.last_clusters: dict[int, int] = {}
        self.last_chs: np.ndarray = np.zeros(0, dtype=np.int64)
        self.back_to_back_ch = 0

    @property
    def any_alive(self) -> bool:
        return bool(self.network.alive.any())

    def run_round(self) -> RoundMetrics:
        net, cfg, radio, k = self.network, self.config, self.config.radio, self.config.k_bits
        if not net.alive.any():
            raise RuntimeError("run_round called with no alive nodes")
        self.round += 1
        r = self.round
        self.ctx.round = r
        spent = 0.0

        # (1) election
        chs = elect_cluster_heads(cfg.protocol, net, self.ctx, self.state, self.rng, cfg)
        self.back_to_back_ch += int(np.count_nonzero(net.ch_in_round[chs] == r - 1)) if r > 1 else 0
        net.ch_in_round[chs] = r

        # (2) cluster formation
        alive_ids = np.flatnonzero(net.alive)
        is_ch = np.zeros(len(net), dtype=bool)
        is_ch[chs] = True
        members = alive_ids[~is_ch[alive_ids]]
        packets = 0
        if len(chs):
            head = chs[_nearest(members, chs, net.x, net.y)]
            # (3) members -> CH; each CH pays rx + one aggregation per member
            d = np.hypot(net.x[members] - net.x[head], net.y[members] - net.y[head])
            spent += net.debit(members, tx_cost_array(radio, k, d))
            n_members = np.bincount(np.searchsorted(chs, head), minlength=len(chs))
            per_member = rx_cost(radio, k) + aggregation_cost(radio, k, 1)
            spent += net.debit(chs, n_members * per_member)
            net.reap()
            # (4) surviving CHs aggregate their own reading and forward
            fwd = chs[net.alive[chs]]
            cost = aggregation_cost(radio, k, 1) + tx_cost_array(radio, k, self.d_sink[fwd])
            spent += net.debit(fwd, cost)
            packets = len(fwd)
            self.last_clusters = dict(zip(members.tolist(), head.tolist()))
        else:
            # no CH: everyone reports straight to the sink
            spent += net.debit(members, tx_cost_array(radio, k, self.d_sink[members]))
            packets = len(members)
            self.last_clusters = {int(i): DIRECT for i in members}
        net.reap()
        self.last_chs = chs

        self.energy_spent += spent
        self.packets_cum += packets

        # (6) context for the next round
        alive = net.alive
        n_alive = int(alive.sum())
        nxt = r + 1
        if n_alive:
            self.ctx.avg_residual_energy = float(net.residual[alive].mean())
            self.ctx.avg_ecr = float(ecr_array(net.initial[alive], net.residual[alive], nxt).mean())
        else:
            self.ctx.avg_residual_energy = 0.0
            self.ctx.avg_ecr = 0.0
        self.ctx.prev_round_chs = frozenset(chs.tolist())
        self.ctx.round = nxt

        return RoundMetrics(round=r, alive=n_alive, dead=len(net) - n_alive,
                            ch_count=len(chs), packets_to_bs=packets,
                            packets_to_bs_cum=self.packets_cum,
                            residual_energy_total=float(net.residual.sum()))


def run_simulation(config: ScenarioConfig, observer: Optional[Callable] = None) -> SimulationSummary:
    """Build the network from ``config.seed`` and run until every node is dead
    or ``config.max_rounds`` is reached.

    ``observer(sim, metrics)``, if given, is called after every round.
    """
    from .metrics import summarize  # deferred: metrics imports engine types

    config.validate()
    sim = Simulation(config)
    series = []
    while sim.round < config.max_rounds and sim.any_alive:
        row = sim.run_round()
        series.append(row)
        if observer is not None:
            observer(sim, row)
    fnd, hnd, lnd, total = summarize(series, config.n)
    return SimulationSummary(fnd=fnd, hnd=hnd, lnd=lnd, total_packets=total,
                             series=series, n=config.n, back_to_back_ch=sim.back_to_back_ch)

