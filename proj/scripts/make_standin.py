"""Build the synthetic stand-in for the monthly 3-month T-bill series.

IG-OU path (lambda=0.224, a=0.637, b=9.806, monthly, n=410). Starting at
seed 19650101, takes the first seed whose sample matches the published
summary statistics: mean 0.065, sd 0.026, mean difference 1.5e-5, sd of
differences 0.005.
"""
import csv
import subprocess
import sys
import statistics
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
CLI = ROOT / "build" / "tools" / "ccfel"
OUT = ROOT / "data" / "tbill_standin.csv"
TARGET = {"mean": (0.065, 0.003), "sd": (0.026, 0.003), "dmean": (1.5e-5, 2e-5), "dsd": (0.005, 0.0005)}


def stats(path):
    with open(path) as f:
        x = [float(r["x"]) for r in csv.DictReader(f)]
    d = [b - a for a, b in zip(x, x[1:])]
    return {"mean": statistics.mean(x), "sd": statistics.stdev(x), "dmean": statistics.mean(d), "dsd": statistics.stdev(d)}


def main():
    tmp = OUT.with_suffix(".tmp.csv")
    for seed in range(19650101, 19650101 + 5000):
        subprocess.run([str(CLI), "simulate", "--model", "igou", "--theta", "lambda=0.224,a=0.637,b=9.806",
                        "--n", "410", "--seed", str(seed), "--force", "--out", str(tmp)], check=True)
        s = stats(tmp)
        if all(abs(s[k] - v) <= tol for k, (v, tol) in TARGET.items()):
            tmp.replace(OUT)
            Path(str(tmp) + ".manifest.json").unlink(missing_ok=True)
            print(f"seed {seed}: " + ", ".join(f"{k}={v:.6g}" for k, v in s.items()))
            return 0
    print("no seed matched", file=sys.stderr)
    return 1


if __name__ == "__main__":
    sys.exit(main())
