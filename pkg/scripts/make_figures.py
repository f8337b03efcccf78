"""Run both presets at a reduced horizon and render every plot kind."""
import argparse
import subprocess
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]


def cli(*args):
    cmd = [sys.executable, "-m", "persistify.cli", *args]
    print("+", " ".join(cmd[2:]))
    subprocess.run(cmd, check=True)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--T", type=float, default=200.0)
    ap.add_argument("--out", default="out/figures")
    args = ap.parse_args()
    out = Path(args.out)
    for preset in ("explore", "coverage"):
        d = out / preset
        cli("run", str(ROOT / "presets" / f"{preset}.cfg"), "--set", f"sim.T={args.T}",
            "--out", str(d))
        for kind in ("energy", "cost", "trajectory"):
            cli("plot", str(d / "trace.csv"), "--kind", kind, "-o", str(d / f"{kind}.svg"))
    nominal = out / "explore_no_clf"
    cli("run", str(ROOT / "presets" / "explore.cfg"), "--set", f"sim.T={args.T}",
        "--set", "persistence.clf=false", "--out", str(nominal))
    cli("plot", str(out / "explore" / "trace.csv"), "--kind", "deviation",
        "--overlay", str(nominal / "trace.csv"), "--label", "with CLF", "--label", "without CLF",
        "-o", str(out / "deviation.svg"))


if __name__ == "__main__":
    main()
