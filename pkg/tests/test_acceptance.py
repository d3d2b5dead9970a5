"""Acceptance gate.  Each test checks one criterion and records a PASS/FAIL line
(shown in the terminal summary).  Tolerances are fixed here, not calibrated.

The ordering criteria run the five protocols on 30 paired seeds at alpha=2
for m=0.2 and m=0.3; those runs are shared through a session fixture.
"""
import math
import time

import numpy as np
import pytest

from wsnsim.engine import DIRECT, Simulation, run_simulation
from wsnsim.metrics import compare, series_to_csv
from wsnsim.model import (RadioModel, ScenarioConfig, Tier, aggregation_cost, rx_cost,
                          total_initial_energy, tx_cost)

PROTOCOLS = ["leach", "sep", "esep", "deec", "ecrsep"]
ORDER_SEEDS = 30
ORDER_POINTS = (0.2, 0.3)
RUNTIME_BUDGET_S = 600.0

# reported absolute values for ECRSEP; shown, never asserted
REFERENCE = {0.2: {"fnd": 5000, "lnd": 10000}, 0.3: {"lnd": 23000}}

_ecrsep_violations: list[int] = []


def _round_oracle(sim):
    """Energy this round should have cost, summed from the scalar cost functions.

    Only valid when no node ran dry during the round (no clamping)."""
    cfg, radio, k = sim.config, sim.config.radio, sim.config.k_bits
    x, y = sim.network.x, sim.network.y
    sx, sy = cfg.sink
    total = 0.0
    chs = sim.last_chs.tolist()
    if chs:
        members = {c: 0 for c in chs}
        for i, c in sim.last_clusters.items():
            total += tx_cost(radio, k, math.hypot(x[i] - x[c], y[i] - y[c]))
            members[c] += 1
        for c in chs:
            total += members[c] * (rx_cost(radio, k) + aggregation_cost(radio, k, 1))
            total += aggregation_cost(radio, k, 1) + tx_cost(radio, k, math.hypot(x[c] - sx, y[c] - sy))
    else:
        for i, c in sim.last_clusters.items():
            assert c == DIRECT
            total += tx_cost(radio, k, math.hypot(x[i] - sx, y[i] - sy))
    return total


def test_c1_energy_conservation(verdict):
    worst = 0.0
    oracle_rounds = 0
    worst_oracle = 0.0
    t0 = time.perf_counter()
    for protocol in PROTOCOLS:
        for seed in range(10):
            cfg = ScenarioConfig(protocol=protocol, seed=seed)
            state = {"initial": None}

            def check(sim, row):
                nonlocal worst, oracle_rounds, worst_oracle
                if state["initial"] is None:
                    state["initial"] = sim.initial_total
                gap = abs(state["initial"] - (row.residual_energy_total + sim.energy_spent))
                worst = max(worst, gap)
                # scalar oracle on the opening rounds (before any node can die)
                if sim.round <= 50 and row.dead == 0:
                    prev_total = state.get("prev_total", state["initial"])
                    spent = prev_total - row.residual_energy_total
                    worst_oracle = max(worst_oracle, abs(spent - _round_oracle(sim)))
                    oracle_rounds += 1
                state["prev_total"] = row.residual_energy_total

            s = run_simulation(cfg, observer=check)
            if protocol == "ecrsep":
                _ecrsep_violations.append(s.back_to_back_ch)
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-9 and worst_oracle <= 1e-9 and elapsed < 60.0
    verdict("C1 energy conservation (10 seeds x 5 protocols, 1e-9 J, < 60 s)", ok,
            f"max identity gap {worst:.2e} J, max oracle gap {worst_oracle:.2e} J over "
            f"{oracle_rounds} rounds, {elapsed:.1f} s")


def test_c2_formula_oracles(verdict):
    radio = RadioModel()
    # hand-evaluated values: 50e-9*4000, +10e-12*4000*50^2, +0.0013e-12*4000*100^4, ...
    cases = [
        ("tx d=0", tx_cost(radio, 4000, 0.0), 2.0e-4),
        ("tx d=50", tx_cost(radio, 4000, 50.0), 3.0e-4),
        ("tx d=100", tx_cost(radio, 4000, 100.0), 7.2e-4),
        ("rx k=4000", rx_cost(radio, 4000), 2.0e-4),
        ("agg 1 signal", aggregation_cost(radio, 4000, 1), 2.0e-5),
        ("agg 5 signals", aggregation_cost(radio, 4000, 5), 1.0e-4),
        ("total energy", total_initial_energy(ScenarioConfig()), 55.0),
    ]
    bad = [name for name, got, want in cases if not math.isclose(got, want, rel_tol=1e-15)]
    verdict("C2 formula oracles (1e-15 relative)", not bad, "mismatch: " + ", ".join(bad) if bad else
            f"{len(cases)} values")


def test_c3_epoch_property(verdict):
    failures = []
    for seed in range(10):
        cfg = ScenarioConfig(n=10, m=0.0, p_opt=0.1, e0=1e6, protocol="leach", seed=seed, max_rounds=59)
        history = {}
        s = run_simulation(cfg, observer=lambda sim, row: history.__setitem__(sim.round, sim.last_chs.tolist()))
        assert s.fnd is None
        for start in range(10, 60, 10):
            elected = sorted(i for r in range(start, start + 10) for i in history[r])
            if elected != list(range(10)):
                failures.append((seed, start))
    verdict("C3 LEACH epoch property (5 epochs x 10 seeds)", not failures,
            f"violations at (seed, epoch start) {failures}" if failures else "50/50 epochs exact")


def test_c4_sep_weighting(verdict):
    cfg = ScenarioConfig(alpha=1.0, m=0.1, e0=1e6, protocol="sep", seed=0)
    epoch = 11  # 1/p_opt * (1 + alpha*m)
    counts = np.zeros(cfg.n)

    def tally(sim, row):
        counts[sim.last_chs] += 1

    s = run_simulation(cfg.with_(max_rounds=50 * epoch), observer=tally)
    tiers = Simulation(cfg).network.tier
    assert s.fnd is None
    ratio = counts[tiers == Tier.ADVANCED].mean() / counts[tiers == Tier.NORMAL].mean()
    verdict("C4 SEP advanced:normal CH frequency in [1.8, 2.2] (alpha=1)", 1.8 <= ratio <= 2.2,
            f"ratio {ratio:.3f} over {50 * epoch} rounds")


@pytest.fixture(scope="session")
def ordering_runs():
    reports = {}
    t0 = time.perf_counter()
    for m in ORDER_POINTS:
        base = ScenarioConfig(alpha=2.0, m=m, seed=0)
        reports[m] = compare(base, PROTOCOLS, ORDER_SEEDS, keep_runs=True)
    elapsed = time.perf_counter() - t0
    for m, rep in reports.items():
        _ecrsep_violations.extend(r.back_to_back_ch for r in rep.runs["ecrsep"])
        ours = rep.aggregates["ecrsep"].row()
        ref = ", ".join(f"{k} reference ~{v} vs {ours[k + '_mean']:.0f} here" for k, v in REFERENCE[m].items())
        print(f"m={m}: ecrsep {ref} (not gated)")
    return reports, elapsed


def _means(rep, metric):
    return {p: rep.mean(p, metric) for p in PROTOCOLS}


def _fmt(d):
    return " ".join(f"{k}={v:.0f}" for k, v in d.items())


def _label(number, m):
    return f"C{number}" if m == 0.2 else f"C10/{number}"


@pytest.mark.parametrize("m", ORDER_POINTS)
def test_c7_stability_ordering(ordering_runs, verdict, m):
    rep = ordering_runs[0][m]
    f = _means(rep, "fnd")
    wins = rep.tallies[("ecrsep", "leach")]
    ok = f["ecrsep"] > f["esep"] >= f["sep"] > f["leach"] and wins >= 24
    verdict(f"{_label(7, m)} FND ecrsep > esep >= sep > leach, ecrsep beats leach >= 24/30 (m={m})", ok,
            f"mean FND {_fmt(f)}; ecrsep>leach in {wins}/{ORDER_SEEDS}")


@pytest.mark.parametrize("m", ORDER_POINTS)
def test_c8_lifetime_ordering(ordering_runs, verdict, m):
    lnd = _means(ordering_runs[0][m], "lnd")
    ok = all(lnd["ecrsep"] > lnd[p] for p in ("leach", "sep", "esep"))
    verdict(f"{_label(8, m)} LND ecrsep > leach, sep, esep (m={m})", ok, f"mean LND {_fmt(lnd)}")


@pytest.mark.parametrize("m", ORDER_POINTS)
def test_c9_throughput_ordering(ordering_runs, verdict, m):
    pk = _means(ordering_runs[0][m], "packets")
    ok = (all(pk["deec"] > pk[p] for p in PROTOCOLS if p != "deec")
          and all(pk[p] > pk["leach"] for p in ("sep", "esep", "ecrsep")))
    verdict(f"{_label(9, m)} packets deec max; sep, esep, ecrsep > leach (m={m})", ok,
            f"mean packets {_fmt(pk)}")


def test_c6_determinism(ordering_runs, verdict):
    mismatched = []
    pairs = 0
    # criterion-1 scenario: every protocol x 10 seeds
    for protocol in PROTOCOLS:
        for seed in range(10):
            cfg = ScenarioConfig(protocol=protocol, seed=seed)
            if series_to_csv(run_simulation(cfg).series) != series_to_csv(run_simulation(cfg).series):
                mismatched.append((protocol, seed))
            pairs += 1
    # ordering runs: re-run the first three seeds of each protocol at each point
    for m, rep in ordering_runs[0].items():
        for protocol in PROTOCOLS:
            for k in range(3):
                cfg = ScenarioConfig(alpha=2.0, m=m, seed=k, protocol=protocol)
                if series_to_csv(run_simulation(cfg).series) != series_to_csv(rep.runs[protocol][k].series):
                    mismatched.append((protocol, m, k))
                pairs += 1
    verdict("C6 byte-identical CSV on repeated runs", not mismatched,
            f"{pairs} (protocol, seed) pairs" + (f"; mismatched {mismatched}" if mismatched else ""))


def test_c5_ecrsep_exclusion(ordering_runs, verdict):
    # runs after C1 and the ordering fixture, so both sets are included
    total = sum(_ecrsep_violations)
    verdict("C5 ECRSEP never CH in consecutive rounds", total == 0 and len(_ecrsep_violations) >= 60,
            f"{total} violations over {len(_ecrsep_violations)} ECRSEP runs")


def test_runtime_budget(ordering_runs, verdict):
    elapsed = ordering_runs[1]
    verdict(f"Runtime: 5 protocols x {ORDER_SEEDS} seeds x 2 points < {RUNTIME_BUDGET_S:.0f} s",
            elapsed < RUNTIME_BUDGET_S, f"{elapsed:.1f} s")
