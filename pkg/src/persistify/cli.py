"""``persistify`` command line: run, plot, compare-clf.

Exit codes: 0 success, 2 configuration or input error, 3 runtime failure.
``PERSISTIFY_OUT`` overrides the output directory named in the scenario.
"""
from __future__ import annotations

import argparse
import copy
import json
import os
import sys
from pathlib import Path

from .config import ConfigError, build_sim_config, emit_config, load_config, parse_config
from .plot import PLOT_KINDS, cost_figure, deviation_figure, energy_figure, trajectory_figure
from .sim import SimulationError, run
from .traceio import TraceFormatError, read_trace, write_summary, write_trace

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3
SCENARIO_NAME = "scenario.json"


def output_dir(doc: dict, override: str | None = None) -> Path:
    return Path(override or os.environ.get("PERSISTIFY_OUT") or doc["output"]["dir"])


def run_scenario(doc: dict, out: Path) -> dict:
    """Simulate, then write trace, summary and the canonical scenario into ``out``."""
    cfg = build_sim_config(doc)
    tr = run(cfg)
    out.mkdir(parents=True, exist_ok=True)
    trace_path = write_trace(tr, out / doc["output"]["trace"])
    summary = tr.summary(cfg.energy)
    summary["trace"] = trace_path.name
    summary["seed"] = cfg.seed
    write_summary(summary, out / doc["output"]["summary"])
    (out / SCENARIO_NAME).write_text(emit_config(doc), encoding="utf-8")
    return summary


def compare_clf(doc: dict) -> dict:
    """Run the scenario with and without the recharge row, same seed."""
    if doc["task"]["kind"] != "explore":
        raise ConfigError("compare-clf needs task.kind = explore")
    result = {}
    for label, flag in (("with", True), ("without", False)):
        d = copy.deepcopy(doc)
        d["persistence"]["clf"] = flag
        tr = run(build_sim_config(d))
        result[f"C_{label}"] = float(tr.C[-1])
        result[f"min_E_{label}"] = float(tr.E.min())
    cw, cwo = result["C_with"], result["C_without"]
    result["ratio"] = cw / cwo if cwo > 0 else (1.0 if cw == 0 else None)
    result["T"] = float(doc["sim"]["T"])
    result["seed"] = int(doc["sim"]["seed"])
    return result


def _err(msg: str) -> None:
    print(f"persistify: error: {msg}", file=sys.stderr)


def cmd_run(path, overrides=(), out: str | None = None) -> int:
    try:
        doc = load_config(path, overrides)
    except ConfigError as exc:
        _err(str(exc))
        return EXIT_CONFIG
    target = output_dir(doc, out)
    try:
        summary = run_scenario(doc, target)
    except SimulationError as exc:
        _err(str(exc))
        return EXIT_RUNTIME
    except OSError as exc:
        _err(f"cannot write output in {str(target)!r}: {exc.strerror}")
        return EXIT_RUNTIME
    print(json.dumps({"out": str(target), "min_E": summary["min_E"], "max_E": summary["max_E"],
                      "final_C": summary["final_C"], "events": summary["events"]}))
    return EXIT_OK


def _scenario_near(trace: Path, explicit: str | None) -> dict | None:
    cand = Path(explicit) if explicit else trace.parent / SCENARIO_NAME
    if not cand.exists():
        if explicit:
            raise ConfigError(f"cannot read config {explicit!r}")
        return None
    return parse_config(cand.read_text(encoding="utf-8"), str(cand))


def cmd_plot(trace, kind: str, output, overlay=(), labels=None, config: str | None = None) -> int:
    trace = Path(trace)
    try:
        tr = read_trace(trace)
        others = [read_trace(p) for p in overlay]
        doc = _scenario_near(trace, config)
    except TraceFormatError as exc:
        _err(f"{exc}")
        return EXIT_CONFIG
    except ConfigError as exc:
        _err(str(exc))
        return EXIT_CONFIG
    if kind == "energy":
        e = doc["energy"] if doc else {}
        fig = energy_figure(tr, e.get("e_min"), e.get("e_chg"))
    elif kind == "cost":
        fig = cost_figure(tr)
    elif kind == "deviation":
        names = labels or [trace.stem] + [Path(p).stem for p in overlay]
        fig = deviation_figure([tr] + others, names)
    else:
        if doc is not None:
            cfg = build_sim_config(doc)
            fig = trajectory_figure(tr, cfg.field, cfg.workspace, cfg.energy.i_c)
        else:
            fig = trajectory_figure(tr)
    try:
        fig.save(output)
    except OSError as exc:
        _err(f"cannot write {str(output)!r}: {exc.strerror}")
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_compare_clf(path, overrides=(), out: str | None = None) -> int:
    try:
        doc = load_config(path, overrides)
        result = compare_clf(doc)
    except ConfigError as exc:
        _err(str(exc))
        return EXIT_CONFIG
    except SimulationError as exc:
        _err(str(exc))
        return EXIT_RUNTIME
    text = json.dumps(result, sort_keys=True, indent=2)
    print(text)
    target = output_dir(doc, out)
    try:
        target.mkdir(parents=True, exist_ok=True)
        (target / "compare_clf.json").write_text(text + "\n", encoding="utf-8")
    except OSError as exc:
        _err(f"cannot write output in {str(target)!r}: {exc.strerror}")
        return EXIT_RUNTIME
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="persistify",
                                 description="Energy-persistent multi-robot task simulation.")
    sub = ap.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="simulate a scenario and write trace + summary")
    r.add_argument("config")
    r.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE")
    r.add_argument("--out", default=None, help="output directory")

    p = sub.add_parser("plot", help="render a trace as SVG")
    p.add_argument("trace")
    p.add_argument("--kind", required=True, choices=PLOT_KINDS)
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--overlay", action="append", default=[], metavar="TRACE",
                   help="extra traces for the deviation plot")
    p.add_argument("--label", dest="labels", action="append", default=None)
    p.add_argument("--config", default=None,
                   help=f"scenario file (default: {SCENARIO_NAME} beside the trace)")

    c = sub.add_parser("compare-clf", help="cumulative deviation with and without the CLF row")
    c.add_argument("config")
    c.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE")
    c.add_argument("--out", default=None)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return cmd_run(args.config, args.overrides, args.out)
    if args.command == "plot":
        return cmd_plot(args.trace, args.kind, args.output, args.overlay, args.labels, args.config)
    return cmd_compare_clf(args.config, args.overrides, args.out)


if __name__ == "__main__":
    sys.exit(main())
