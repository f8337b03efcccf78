"""Lloyd descent with and without energy constraints on the coverage preset.

Writes both traces and an SVG of the locational cost over time.
"""
import argparse
from pathlib import Path

from persistify.config import build_sim_config, load_config
import numpy as np

from persistify.plot import Figure, PALETTE
from persistify.sim import run
from persistify.traceio import write_trace

PRESET = Path(__file__).resolve().parents[1] / "presets" / "coverage.cfg"


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--T", type=float, default=300.0)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="out/coverage_descent")
    args = ap.parse_args()
    out = Path(args.out)
    traces = {}
    for label, enabled in (("persistified", "true"), ("nominal", "false")):
        doc = load_config(PRESET, [f"sim.T={args.T}", f"sim.seed={args.seed}",
                                   f"persistence.enabled={enabled}"])
        tr = run(build_sim_config(doc))
        write_trace(tr, out / f"{label}.csv")
        traces[label] = tr
        print(f"{label:13s} H(0) {tr.metric[0]:.5f}  H(T) {tr.metric[-1]:.5f}  "
              f"min E {tr.E.min():.3f}")
    t = traces["nominal"].t
    H = np.concatenate([tr.metric for tr in traces.values()])
    fig = Figure((t[0], t[-1]), (0.0, 1.05 * H.max()),
                 "locational cost", "t", "H")
    for (label, tr), color in zip(traces.items(), PALETTE):
        fig.line(tr.t, tr.metric, color=color, label=label)
    fig.save(out / "cost.svg")


if __name__ == "__main__":
    main()
