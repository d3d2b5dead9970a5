"""Command-line entry point: ``wsnsim run|compare|sweep``.

Precedence: command-line flags > scenario file > built-in defaults.
Exit status is 0 on success, 1 on I/O errors and 2 on invalid scenarios.
"""
from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import fields
from pathlib import Path
from typing import Optional, Sequence

import yaml

from . import __version__
from .engine import run_simulation
from .metrics import (SUMMARY_KEYS, ComparisonReport, compare, mean_curve_csv, series_to_csv,
                      summary_text, tally_text, write_text)
from .model import ConfigError, Protocol, RadioModel, ScenarioConfig

OUT_ENV = "WSNSIM_OUT"
DEFAULT_OUT = "wsnsim-out"
SWEEPABLE = ("m", "alpha", "p_opt", "n")

# Operating point used by `compare`/`sweep` when no scenario file is given.
FIG_POINT = {"alpha": 2.0, "m": 0.2}

# Reference figures for ECRSEP at alpha=2; shown for context, never asserted.
REFERENCE_ECRSEP = {0.2: {"fnd": 5000, "lnd": 10000}, 0.3: {"lnd": 23000}}

EXIT_OK, EXIT_IO, EXIT_CONFIG = 0, 1, 2

_CONFIG_KEYS = {f.name for f in fields(ScenarioConfig)} - {"radio"}
_RADIO_KEYS = {f.name for f in fields(RadioModel)}
_INT_KEYS = {"n", "k_bits", "max_rounds", "seed"}


class UsageError(Exception):
    pass


def load_scenario(path) -> dict:
    """Read a flat YAML mapping of scenario keys.  Raises OSError / ConfigError."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot read scenario file {path}: {exc.strerror or exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: not a valid key-value document: {exc}") from exc
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a flat key-value mapping")
    unknown = sorted(set(data) - _CONFIG_KEYS - _RADIO_KEYS)
    if unknown:
        raise ConfigError(f"{path}: unknown keys {', '.join(map(str, unknown))}")
    nested = [k for k, v in data.items() if isinstance(v, dict)]
    if nested:
        raise ConfigError(f"{path}: nested values not allowed for {', '.join(nested)}")
    return data


def make_config(values: dict) -> ScenarioConfig:
    values = dict(values)
    radio = {k: values.pop(k) for k in list(values) if k in _RADIO_KEYS}
    try:
        for k in _INT_KEYS & set(values):
            v = values[k]
            if isinstance(v, float) and v.is_integer():
                values[k] = int(v)
            elif not isinstance(v, int) or isinstance(v, bool):
                raise ConfigError(f"{k} must be an integer, got {v!r}")
        for k in ("field", "sink"):
            if k in values and values[k] is not None:
                values[k] = tuple(float(v) for v in values[k])
        return ScenarioConfig(radio=RadioModel(**{k: float(v) for k, v in radio.items()}), **values)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc


def _parse_set(items: Sequence[str]) -> dict:
    out = {}
    for item in items or ():
        key, sep, raw = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key = key.strip()
        if key not in _CONFIG_KEYS | _RADIO_KEYS:
            raise ConfigError(f"--set: unknown key {key!r}")
        out[key] = yaml.safe_load(raw)
    return out


def _base_values(args, defaults: Optional[dict] = None) -> dict:
    values = dict(defaults or {}) if args.scenario is None else load_scenario(args.scenario)
    values.update(_parse_set(args.set))
    if getattr(args, "seed", None) is not None:
        values["seed"] = args.seed
    if getattr(args, "rounds", None) is not None:
        values["max_rounds"] = args.rounds
    if getattr(args, "ecr_mode", None) is not None:
        values["ecr_mode"] = args.ecr_mode
    return values


def _out_dir(args) -> Path:
    return Path(args.out or os.environ.get(OUT_ENV) or DEFAULT_OUT)


def _announce(path: Path) -> None:
    print(f"wrote {path}")


def _fmt_metric(v) -> str:
    return "-" if v is None else str(v)


def _parse_protocols(text: str) -> list[str]:
    names = [t for t in (s.strip() for s in text.split(",")) if t]
    if not names:
        raise ConfigError("no protocols given")
    return [Protocol.parse(n).value for n in names]


def cmd_run(args) -> int:
    values = _base_values(args)
    if args.protocol is not None:
        values["protocol"] = args.protocol
    cfg = make_config(values)
    summary = run_simulation(cfg)
    out = _out_dir(args)
    csv_path = write_text(out / cfg.protocol.value / f"seed{cfg.seed}.csv", series_to_csv(summary.series))
    _announce(csv_path)
    report = _single_run_report(cfg, summary)
    sum_path = write_text(out / "summary.txt", summary_text(report))
    _announce(sum_path)
    print(f"protocol={cfg.protocol.value} seed={cfg.seed} rounds={len(summary.series)}")
    print(f"fnd={_fmt_metric(summary.fnd)} hnd={_fmt_metric(summary.hnd)} (extension) "
          f"lnd={_fmt_metric(summary.lnd)} packets={summary.total_packets}")
    return EXIT_OK


def _single_run_report(cfg: ScenarioConfig, summary) -> ComparisonReport:
    from .metrics import ProtocolAggregate
    import numpy as np

    alive = np.array([r.alive for r in summary.series], dtype=float)
    agg = ProtocolAggregate(protocol=cfg.protocol.value, fnd=[summary.fnd], hnd=[summary.hnd],
                            lnd=[summary.lnd], packets=[summary.total_packets],
                            alive_mean=alive, dead_mean=cfg.n - alive,
                            packets_cum_mean=np.array([r.packets_to_bs_cum for r in summary.series], dtype=float))
    return ComparisonReport(protocols=[cfg.protocol.value], replications=1, base_seed=cfg.seed,
                            aggregates={cfg.protocol.value: agg})


def _compare_into(base: ScenarioConfig, protocols: list[str], replications: int, jobs: int,
                  out: Path, write_runs: bool = True) -> ComparisonReport:
    report = compare(base, protocols, replications, jobs=jobs, keep_runs=write_runs)
    for name in dict.fromkeys(report.protocols):
        if write_runs:
            for k, run in enumerate(report.runs[name]):
                _announce(write_text(out / name / f"seed{base.seed + k}.csv", series_to_csv(run.series)))
        _announce(write_text(out / name / "mean_curve.csv", mean_curve_csv(report.aggregates[name])))
    _announce(write_text(out / "summary.txt", summary_text(report)))
    tally = tally_text(report)
    if tally:
        _announce(write_text(out / "tally.txt", tally))
    return report


def _print_report(report: ComparisonReport, base: ScenarioConfig) -> None:
    print(f"alpha={base.alpha} m={base.m} replications={report.replications} "
          f"seeds={report.base_seed}..{report.base_seed + report.replications - 1}")
    print(summary_text(report), end="")
    print("(hnd = half-node death, an extension metric)")
    tally = tally_text(report)
    if tally:
        print(tally, end="")
    ref = REFERENCE_ECRSEP.get(round(base.m, 6)) if math.isclose(base.alpha, 2.0) else None
    if ref and "ecrsep" in report.aggregates:
        ours = report.aggregates["ecrsep"].row()
        bits = [f"{k}: reference ~{v}, here {ours[k + '_mean']:.0f}" for k, v in ref.items()]
        print("ecrsep reference values (not asserted): " + "; ".join(bits))


def cmd_compare(args) -> int:
    protocols = _parse_protocols(args.protocols)
    if args.replications < 1:
        raise ConfigError(f"--replications must be >= 1, got {args.replications}")
    base = make_config(_base_values(args, FIG_POINT))
    out = _out_dir(args)
    report = _compare_into(base, protocols, args.replications, args.jobs, out,
                           write_runs=not args.no_series)
    _print_report(report, base)
    return EXIT_OK


def _parse_values(param: str, text: str) -> list:
    vals = []
    for tok in (t.strip() for t in text.split(",")):
        if not tok:
            continue
        try:
            v = float(tok)
        except ValueError:
            raise ConfigError(f"--values: {tok!r} is not numeric") from None
        if param == "n":
            if not v.is_integer():
                raise ConfigError(f"--values: n must be integral, got {tok!r}")
            v = int(v)
        vals.append(v)
    if not vals:
        raise ConfigError("--values: empty list")
    return vals


def cmd_sweep(args) -> int:
    if args.param not in SWEEPABLE:
        raise ConfigError(f"--param must be one of {', '.join(SWEEPABLE)}, got {args.param!r}")
    protocols = _parse_protocols(args.protocols)
    if args.replications < 1:
        raise ConfigError(f"--replications must be >= 1, got {args.replications}")
    values = _parse_values(args.param, args.values)
    base_values = _base_values(args, FIG_POINT)
    # validate every point (for every protocol) before running anything
    configs = []
    for v in values:
        point = dict(base_values, **{args.param: v})
        if args.param == "m" and "esep_x" not in base_values:
            point.pop("esep_x", None)
        if args.param == "alpha" and "esep_beta" not in base_values:
            point.pop("esep_beta", None)
        cfg = make_config(point)
        for p in protocols:
            cfg.with_(protocol=p).validate()
        configs.append((v, cfg))

    out = _out_dir(args)
    rows = []
    for v, cfg in configs:
        sub = out / f"{args.param}={v}"
        report = _compare_into(cfg, protocols, args.replications, args.jobs, sub,
                               write_runs=not args.no_series)
        _print_report(report, cfg)
        for line in summary_text(report).splitlines()[1:]:
            rows.append(f"{v},{line}")
    header = ",".join((args.param,) + SUMMARY_KEYS)
    _announce(write_text(out / "sweep_summary.txt", "\n".join([header] + rows) + "\n"))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wsnsim",
        description="Round-based clustered WSN simulator (LEACH, SEP, ESEP, DEEC, ECRSEP).",
        epilog=f"Flags override scenario-file keys, which override built-in defaults. "
               f"Output directory defaults to ${OUT_ENV} or ./{DEFAULT_OUT}.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, rounds=True):
        p.add_argument("scenario", nargs="?", default=None,
                       help="flat YAML scenario file (omit for defaults)")
        p.add_argument("--seed", type=int, default=None, help="(base) RNG seed")
        if rounds:
            p.add_argument("--rounds", type=int, default=None, help="round budget (max_rounds)")
        p.add_argument("--ecr-mode", choices=["inverse_normalized", "as_written"], default=None)
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override any scenario key; repeatable")
        p.add_argument("--out", default=None, help="output directory")

    p_run = sub.add_parser("run", help="run one protocol on one seed")
    common(p_run)
    p_run.add_argument("--protocol", default=None)
    p_run.set_defaults(func=cmd_run)

    def comparing(p):
        common(p)
        p.add_argument("--protocols", default=",".join(pr.value for pr in Protocol))
        p.add_argument("--replications", "-R", type=int, default=30)
        p.add_argument("--jobs", "-j", type=int, default=1, help="worker processes")
        p.add_argument("--no-series", action="store_true",
                       help="skip the per-seed CSVs (mean curves and summary only)")

    p_cmp = sub.add_parser("compare", help="paired-seed comparison of several protocols",
                           description="Without a scenario file, runs at alpha=2, m=0.2.")
    comparing(p_cmp)
    p_cmp.set_defaults(func=cmd_compare)

    p_sw = sub.add_parser("sweep", help="repeat `compare` over values of one parameter")
    comparing(p_sw)
    p_sw.add_argument("--param", required=True, help=f"one of {', '.join(SWEEPABLE)}")
    p_sw.add_argument("--values", required=True, help="comma-separated numbers")
    p_sw.set_defaults(func=cmd_sweep)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except RuntimeError as exc:
        # compare() wraps run failures; unwrap config errors
        if isinstance(exc.__cause__, ConfigError):
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        raise


if __name__ == "__main__":
    sys.exit(main())
