"""Run summaries, multi-protocol comparisons and their file formats."""
from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import permutations
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .engine import RoundMetrics, SimulationSummary, run_simulation
from .model import Protocol, ScenarioConfig

CSV_HEADER = ("round", "alive", "dead", "ch_count", "packets_round", "packets_cum",
              "energy_residual_j")
SUMMARY_KEYS = ("protocol", "fnd_mean", "fnd_std", "hnd_mean", "hnd_std", "lnd_mean",
                "lnd_std", "packets_mean", "packets_std")
MEAN_CURVE_HEADER = ("round", "alive_mean", "dead_mean", "packets_cum_mean")


def summarize(series: Sequence[RoundMetrics], n: Optional[int] = None):
    """Return ``(fnd, hnd, lnd, total_packets)`` for a run.

    Rounds are the 1-indexed ``round`` field.  A death metric is ``None``
    when its dead-count level is never reached.  ``n`` defaults to
    alive + dead of the first row.
    """
    if not series:
        return None, None, None, 0
    if n is None:
        n = series[0].alive + series[0].dead
    half = math.ceil(n / 2)
    fnd = hnd = lnd = None
    for row in series:
        if fnd is None and row.dead >= 1:
            fnd = row.round
        if hnd is None and row.dead >= half:
            hnd = row.round
        if lnd is None and row.dead >= n:
            lnd = row.round
            break
    total = sum(row.packets_to_bs for row in series)
    return fnd, hnd, lnd, total


def series_to_csv(series: Iterable[RoundMetrics]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for row in series:
        w.writerow((row.round, row.alive, row.dead, row.ch_count, row.packets_to_bs,
                    row.packets_to_bs_cum, f"{row.residual_energy_total:.9f}"))
    return buf.getvalue()


def write_series_csv(series: Iterable[RoundMetrics], path) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            fh.write(series_to_csv(series))
    except OSError as exc:
        raise OSError(f"cannot write series CSV {path}: {exc.strerror or exc}") from exc
    return path


def read_series_csv(path) -> list[RoundMetrics]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != CSV_HEADER:
            raise ValueError(f"{path}: unexpected header {header!r}")
        return [RoundMetrics(round=int(r), alive=int(a), dead=int(d), ch_count=int(c),
                             packets_to_bs=int(p), packets_to_bs_cum=int(pc),
                             residual_energy_total=float(e))
                for r, a, d, c, p, pc, e in reader]


@dataclass
class ProtocolAggregate:
    protocol: str
    fnd: list
    hnd: list
    lnd: list
    packets: list
    alive_mean: np.ndarray
    dead_mean: np.ndarray
    packets_cum_mean: np.ndarray

    @staticmethod
    def _stat(values: list) -> tuple[float, float]:
        # Unreached metrics (None) are left out; all-None -> nan.
        vals = [v for v in values if v is not None]
        if not vals:
            return math.nan, math.nan
        arr = np.asarray(vals, dtype=float)
        return float(arr.mean()), float(arr.std())

    def row(self) -> dict:
        out = {"protocol": self.protocol}
        for key, vals in (("fnd", self.fnd), ("hnd", self.hnd), ("lnd", self.lnd),
                          ("packets", self.packets)):
            out[f"{key}_mean"], out[f"{key}_std"] = self._stat(vals)
        return out


@dataclass
class ComparisonReport:
    protocols: list
    replications: int
    base_seed: int
    aggregates: dict
    # tallies[(a, b)] = replications in which FND(a) > FND(b)
    tallies: dict = field(default_factory=dict)
    runs: dict = field(default_factory=dict)

    def mean(self, protocol: str, metric: str) -> float:
        return self.aggregates[protocol].row()[f"{metric}_mean"]


def _metric_or_censored(value: Optional[int], budget: int) -> float:
    # Unreached death metric: the run outlived the budget.
    return float(budget + 1) if value is None else float(value)


def _mean_curves(runs: list[SimulationSummary], n: int, rounds: int):
    alive = np.zeros(rounds)
    dead = np.zeros(rounds)
    pkts = np.zeros(rounds)
    for run in runs:
        a = np.array([row.alive for row in run.series], dtype=float)
        pc = np.array([row.packets_to_bs_cum for row in run.series], dtype=float)
        # a run that ended early (all dead) stays flat afterwards
        a_full = np.zeros(rounds)
        a_full[:len(a)] = a
        p_full = np.full(rounds, pc[-1] if len(pc) else 0.0)
        p_full[:len(pc)] = pc
        alive += a_full
        dead += n - a_full
        pkts += p_full
    k = max(len(runs), 1)
    return alive / k, dead / k, pkts / k


def _run_one(config: ScenarioConfig) -> SimulationSummary:
    return run_simulation(config)


def compare(base: ScenarioConfig, protocols: Sequence, replications: int,
            jobs: int = 1, keep_runs: bool = False) -> ComparisonReport:
    """Run ``replications`` paired-seed runs of each protocol.

    Replication k of every protocol uses seed ``base.seed + k``, so placement
    is shared across protocols.  Listing a protocol twice is allowed and
    yields identical rows.
    """
    if replications < 1:
        raise ValueError(f"replications must be >= 1, got {replications!r}")
    names = [Protocol.parse(p).value for p in protocols]
    unique = list(dict.fromkeys(names))
    jobs_list = [(name, k, base.with_(protocol=name, seed=base.seed + k))
                 for name in unique for k in range(replications)]
    # validate every config before spending time on runs
    for _, _, cfg in jobs_list:
        cfg.validate()

    results: dict = {}
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [(name, k, pool.submit(_run_one, cfg)) for name, k, cfg in jobs_list]
            for name, k, fut in futures:
                try:
                    results[(name, k)] = fut.result()
                except Exception as exc:
                    raise RuntimeError(f"protocol {name}, replication {k}: {exc}") from exc
    else:
        for name, k, cfg in jobs_list:
            try:
                results[(name, k)] = _run_one(cfg)
            except Exception as exc:
                raise RuntimeError(f"protocol {name}, replication {k}: {exc}") from exc

    rounds = max((len(s.series) for s in results.values()), default=0)
    aggregates = {}
    runs = {}
    for name in unique:
        rs = [results[(name, k)] for k in range(replications)]
        alive, dead, pkts = _mean_curves(rs, base.n, rounds)
        aggregates[name] = ProtocolAggregate(
            protocol=name, fnd=[r.fnd for r in rs], hnd=[r.hnd for r in rs],
            lnd=[r.lnd for r in rs], packets=[r.total_packets for r in rs],
            alive_mean=alive, dead_mean=dead, packets_cum_mean=pkts)
        if keep_runs:
            runs[name] = rs

    tallies = {}
    for a, b in permutations(unique, 2):
        fa = aggregates[a].fnd
        fb = aggregates[b].fnd
        tallies[(a, b)] = sum(
            _metric_or_censored(x, base.max_rounds) > _metric_or_censored(y, base.max_rounds)
            for x, y in zip(fa, fb))
    # duplicates in the request point at the same aggregate
    return ComparisonReport(protocols=names, replications=replications, base_seed=base.seed,
                            aggregates=aggregates, tallies=tallies, runs=runs)


def _fmt(v) -> str:
    if isinstance(v, float):
        return "nan" if math.isnan(v) else f"{v:.3f}"
    return str(v)


def summary_text(report: ComparisonReport) -> str:
    """Comma-separated summary, one row per protocol as requested."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_KEYS)
    for name in report.protocols:
        row = report.aggregates[name].row()
        w.writerow([_fmt(row[k]) for k in SUMMARY_KEYS])
    return buf.getvalue()


def tally_text(report: ComparisonReport) -> str:
    """Matrix of how often the row protocol's FND beat the column's."""
    names = list(dict.fromkeys(report.protocols))
    if len(names) < 2:
        return ""
    width = max(len(n) for n in names) + 2
    lines = [f"FND(row) > FND(col) over {report.replications} paired seeds",
             "".ljust(width) + "".join(n.rjust(width) for n in names)]
    for a in names:
        cells = ["-" if a == b else str(report.tallies[(a, b)]) for b in names]
        lines.append(a.ljust(width) + "".join(c.rjust(width) for c in cells))
    return "\n".join(lines) + "\n"


def mean_curve_csv(agg: ProtocolAggregate) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(MEAN_CURVE_HEADER)
    for i in range(len(agg.alive_mean)):
        w.writerow((i + 1, f"{agg.alive_mean[i]:.6f}", f"{agg.dead_mean[i]:.6f}",
                    f"{agg.packets_cum_mean[i]:.6f}"))
    return buf.getvalue()


def write_text(path, text: str) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path


def default_jobs() -> int:
    return max(1, min(8, os.cpu_count() or 1))
