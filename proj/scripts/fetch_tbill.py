"""Fetch the monthly 3-month Treasury bill secondary market rate (FRED TB3MS)
for January 1965 to February 1999 and write data/tbill.csv as t,x with x in
decimal units. Not bundled; run by hand where network access is allowed.
"""
import csv
import io
import sys
import urllib.request
from pathlib import Path

URL = "https://fred.stlouisfed.org/graph/fredgraph.csv?id=TB3MS"
OUT = Path(__file__).resolve().parent.parent / "data" / "tbill.csv"


def main():
    with urllib.request.urlopen(URL, timeout=60) as r:
        rows = list(csv.reader(io.StringIO(r.read().decode())))
    values = [float(v) / 100.0 for d, v in rows[1:] if "1965-01-01" <= d <= "1999-02-01"]
    with open(OUT, "w", newline="") as f:
        f.write("t,x\n")
        for t, x in enumerate(values, start=1):
            f.write(f"{t},{x:.6g}\n")
    print(f"wrote {len(values)} observations to {OUT}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
