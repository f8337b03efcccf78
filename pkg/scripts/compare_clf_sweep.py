"""Cumulative deviation with and without the recharge row across seeds.

    python3 scripts/compare_clf_sweep.py --seeds 20 --T 1200 --out out/sweep.json
"""
import argparse
import json
from pathlib import Path

import numpy as np

from persistify.cli import compare_clf
from persistify.config import load_config

PRESET = Path(__file__).resolve().parents[1] / "presets" / "explore.cfg"


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--config", default=str(PRESET))
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--T", type=float, default=1200.0)
    ap.add_argument("--out", default=None)
    args = ap.parse_args()
    rows = []
    for seed in range(args.seeds):
        doc = load_config(args.config, [f"sim.seed={seed}", f"sim.T={args.T}"])
        res = compare_clf(doc)
        rows.append(res)
        print(f"seed {seed:2d}  C_with {res['C_with']:10.4f}  C_without {res['C_without']:10.4f}"
              f"  ratio {res['ratio']:.3f}")
    wins = sum(r["C_with"] <= r["C_without"] for r in rows)
    print(f"C_with <= C_without on {wins}/{len(rows)} seeds, "
          f"median ratio {np.median([r['ratio'] for r in rows]):.3f}")
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(json.dumps(rows, indent=2) + "\n")


if __name__ == "__main__":
    main()
