"""Batch experiment runner.

    aidsim run --scenario base-ddi --seed 42 --reps 10 --out results/
    aidsim run --scenario rcut-confusion --sweep confusion=0,5,10,15,20 --reps 30
    aidsim run --scenario base-ddi --sweep mpr=0,10,...,100 --out results/
    aidsim validate --scenario base-cdi
    aidsim validate --config my_scenario.yaml

`run` executes the experiment matrix and writes summary.csv / trips.csv /
bins.csv (plus trajectories.csv when enabled) and, for sweeps, ci.csv,
anova.csv and a text report. Identical command lines produce byte-identical
outputs; --jobs only changes the schedule, never the results.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import config as cfgmod
from . import stats
from .config import ConfigError, ScenarioConfig
from .engine import (delay_bin_means, measure_delay, measure_throughput,
                     run_experiment)
from .netmodel import NetworkError
from .scenarios import build_network

SWEEP_SECTIONS = {"mpr": ("fleet", "mpr"), "confusion": ("confusion", "share")}


def _parse_sweep(text: str) -> tuple[str, list[float]]:
    if "=" not in text:
        raise ConfigError("sweep syntax: key=v1,v2,... (with optional '...')")
    key, _, body = text.partition("=")
    key = key.strip()
    if key not in SWEEP_SECTIONS:
        known = ", ".join(sorted(SWEEP_SECTIONS))
        raise ConfigError(f"unknown sweep key {key!r} (known: {known})")
    tokens = [tok.strip() for tok in body.split(",") if tok.strip()]
    if "..." in tokens:
        pos = tokens.index("...")
        if pos < 2 or pos != len(tokens) - 2:
            raise ConfigError("ellipsis sweep needs v1,v2,...,vN")
        first, second = float(tokens[0]), float(tokens[1])
        last = float(tokens[-1])
        step = second - first
        if step <= 0 or last <= first:
            raise ConfigError("ellipsis sweep must be increasing")
        n = int(round((last - first) / step))
        values = [first + i * step for i in range(n + 1)]
    else:
        values = [float(tok) for tok in tokens]
    return key, values


def _load_config(args) -> ScenarioConfig:
    if args.config:
        cfg = cfgmod.load(args.config)
    elif args.scenario:
        cfg = cfgmod.preset(args.scenario)
    else:
        raise ConfigError("provide --scenario <name> or --config <file>")
    overrides: dict = {}
    if args.seed is not None:
        overrides.setdefault("run", {})["seed"] = args.seed
    if args.reps is not None:
        overrides.setdefault("run", {})["replications"] = args.reps
    if args.trajectories is not None:
        overrides.setdefault("measurement", {})["trajectories"] = (
            args.trajectories == "on")
    if overrides:
        cfg = cfgmod.merge_overrides(cfg, overrides)
    return cfg


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def _write_rows(path: str, header: list[str], rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


def cmd_run(args) -> int:
    cfg = _load_config(args)
    sweep_key, sweep_values = (None, [None])
    if args.sweep:
        sweep_key, sweep_values = _parse_sweep(args.sweep)
    os.makedirs(args.out, exist_ok=True)

    cases = []
    for value in sweep_values:
        case_cfg = cfg
        label = "-"
        if sweep_key is not None:
            section, field = SWEEP_SECTIONS[sweep_key]
            case_cfg = cfgmod.merge_overrides(cfg, {section: {field: value / 100.0}})
            label = f"{value:g}"
        records = run_experiment(case_cfg, jobs=args.jobs)
        cases.append((label, case_cfg, records))
        print(f"case {sweep_key or 'single'}={label}: "
              f"{len(records)} replications done", file=sys.stderr)

    sum_rows, trip_rows, bin_rows, traj_rows = [], [], [], []
    for label, case_cfg, records in cases:
        for rec in records:
            sum_rows.append([
                args.scenario or os.path.basename(args.config),
                sweep_key or "-", label, str(rec.replication), str(rec.seed),
                _fmt(measure_throughput(rec)),
                _fmt(measure_delay(rec) if rec.n_trips else 0.0),
                str(rec.n_trips), str(len(rec.collisions_t)),
                "1" if rec.valid else "0"])
            for k in range(rec.n_trips):
                trip_rows.append([
                    label, str(rec.replication), str(int(rec.vehicle_id[k])),
                    rec.route_ids[rec.route[k]],
                    "CAV" if rec.vclass[k] else "HV",
                    str(int(rec.confused[k])), _fmt(rec.arrival[k]),
                    _fmt(rec.entry[k]), _fmt(rec.exit[k]),
                    _fmt(rec.freeflow[k]), _fmt(rec.delay[k])])
            for det in rec.detector_names:
                flow, speed = rec.det_flow[det], rec.det_speed[det]
                for w in range(len(flow)):
                    bin_rows.append([
                        label, str(rec.replication), det, str(w),
                        _fmt(rec.warmup + w * rec.window),
                        _fmt(flow[w]), _fmt(speed[w])])
            if rec.trajectories is not None:
                vid, tt, xx, vv, cf = rec.trajectories
                for k in range(len(vid)):
                    traj_rows.append([
                        label, str(rec.replication), str(int(vid[k])),
                        _fmt(tt[k]), _fmt(xx[k]), _fmt(vv[k]),
                        str(int(cf[k]))])

    _write_rows(os.path.join(args.out, "summary.csv"),
                ["scenario", "sweep_key", "sweep_value", "replication",
                 "seed", "throughput_vph", "mean_delay_s", "trips",
                 "collisions", "valid"], sum_rows)
    _write_rows(os.path.join(args.out, "trips.csv"),
                ["sweep_value", "replication", "vehicle_id", "route", "class",
                 "confused", "arrival_s", "entry_s", "exit_s", "freeflow_s",
                 "delay_s"], trip_rows)
    _write_rows(os.path.join(args.out, "bins.csv"),
                ["sweep_value", "replication", "detector", "window",
                 "t_start_s", "flow_vph_per_lane", "speed_ms"], bin_rows)
    if traj_rows:
        _write_rows(os.path.join(args.out, "trajectories.csv"),
                    ["sweep_value", "replication", "vehicle_id", "t_s",
                     "position_m", "speed_ms", "confused"], traj_rows)

    report = [f"experiment: {args.scenario or args.config}",
              f"replications per case: {cfg.run.replications}", ""]
    ci_rows = []
    for label, _, records in cases:
        tp = np.array([measure_throughput(r) for r in records])
        dl = np.array([measure_delay(r) for r in records])
        tp_lo, tp_hi = stats.bootstrap_ci(tp, level=0.90, stream=cfg.run.seed)
        dl_lo, dl_hi = stats.bootstrap_ci(dl, level=0.90, stream=cfg.run.seed)
        ci_rows.append([sweep_key or "-", label,
                        _fmt(tp.mean()), _fmt(tp_lo), _fmt(tp_hi),
                        _fmt(dl.mean()), _fmt(dl_lo), _fmt(dl_hi)])
        report.append(
            f"case {sweep_key or 'single'}={label}: "
            f"throughput {tp.mean():.0f} vph [{tp_lo:.0f}, {tp_hi:.0f}], "
            f"delay {dl.mean():.2f} s [{dl_lo:.2f}, {dl_hi:.2f}]")
    _write_rows(os.path.join(args.out, "ci.csv"),
                ["sweep_key", "sweep_value", "throughput_mean_vph",
                 "throughput_lo", "throughput_hi", "delay_mean_s",
                 "delay_lo", "delay_hi"], ci_rows)

    if sweep_key is not None and len(cases) >= 2:
        groups = [stats.SampleGroup(label, np.concatenate(
            [delay_bin_means(r) for r in records]))
            for label, _, records in cases]
        f_stat, p = stats.anova_oneway(groups)
        tk = stats.tukey_hsd(groups, confidence=0.95)
        anova_rows = []
        report += ["", f"one-way ANOVA on per-window delay means: "
                       f"F = {f_stat:.3f}, p = {p:.3g}",
                   f"{'level':>8} {'n':>6} {'delay':>10} grouping"]
        for g in groups:
            anova_rows.append([g.label, str(g.n), _fmt(g.mean),
                               tk.letters[g.label], _fmt(f_stat), _fmt(p)])
            report.append(f"{g.label:>8} {g.n:>6} {g.mean:>10.2f} "
                          f"{tk.letters[g.label]}")
        _write_rows(os.path.join(args.out, "anova.csv"),
                    ["level", "n", "mean_delay_s", "grouping", "f_stat",
                     "p_value"], anova_rows)

    report_text = "\n".join(report) + "\n"
    with open(os.path.join(args.out, "report.txt"), "w",
              encoding="utf-8", newline="\n") as fh:
        fh.write(report_text)
    print(report_text)
    return 0


def cmd_validate(args) -> int:
    try:
        cfg = _load_config(args)
        network = build_network(cfg)
        network.validate()
    except (ConfigError, NetworkError) as exc:
        print("invalid:", file=sys.stderr)
        print(str(exc), file=sys.stderr)
        return 1
    print(f"valid: network {cfg.network.kind} with "
          f"{len(network.links)} links, {len(network.routes)} routes, "
          f"{len(network.controllers)} controllers")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="aidsim", description="intersection-design experiment runner")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute an experiment")
    run_p.add_argument("--scenario", help="bundled scenario name")
    run_p.add_argument("--config", help="YAML scenario file")
    run_p.add_argument("--seed", type=int, default=None)
    run_p.add_argument("--reps", type=int, default=None)
    run_p.add_argument("--sweep", help="key=v1,v2,... or key=v1,v2,...,vN")
    run_p.add_argument("--out", default="results")
    run_p.add_argument("--jobs", type=int, default=1)
    run_p.add_argument("--trajectories", choices=["on", "off"], default=None)
    run_p.set_defaults(fn=cmd_run)

    val_p = sub.add_parser("validate", help="check a scenario without running")
    val_p.add_argument("--scenario", help="bundled scenario name")
    val_p.add_argument("--config", help="YAML scenario file")
    val_p.add_argument("--seed", type=int, default=None)
    val_p.add_argument("--reps", type=int, default=None)
    val_p.add_argument("--trajectories", choices=["on", "off"], default=None)
    val_p.set_defaults(fn=cmd_validate)

    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, NetworkError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
