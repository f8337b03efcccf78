"""Energy extremes for many seeds of a preset, optionally with a gain sweep."""
import argparse
from pathlib import Path

from persistify.config import build_sim_config, load_config
from persistify.sim import run

PRESETS = Path(__file__).resolve().parents[1] / "presets"


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("preset", choices=["explore", "coverage"])
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--T", type=float, default=None)
    ap.add_argument("--gamma1", type=float, nargs="*", default=[None])
    args = ap.parse_args()
    for g1 in args.gamma1:
        for seed in range(args.seeds):
            sets = [f"sim.seed={seed}"]
            if args.T is not None:
                sets.append(f"sim.T={args.T}")
            if g1 is not None:
                sets.append(f"persistence.gamma1={g1}")
            cfg = build_sim_config(load_config(PRESETS / f"{args.preset}.cfg", sets))
            tr = run(cfg)
            e = cfg.energy
            ok = tr.E.min() >= e.e_min - 0.02 and tr.E.max() <= e.e_chg + 0.02
            print(f"gamma1={cfg.persistence.cbf_gains.g1:<6g} seed={seed:<3d} "
                  f"E in [{tr.E.min():.4f}, {tr.E.max():.4f}]  {'ok' if ok else 'OUT OF BAND'}")


if __name__ == "__main__":
    main()
