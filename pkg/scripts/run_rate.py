"""||T_n - Id||_inf / delta_n for uniform samples in the unit square; writes results/rate/rate.json."""
import argparse
import json
import os

from glcons import __version__
from glcons.transport import rate_diagnostic

if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--dim", type=int, default=2)
    ap.add_argument("--n", type=int, nargs="+", default=[64, 128, 256, 512])
    ap.add_argument("--trials", type=int, default=10)
    ap.add_argument("--seed", type=int, default=10)
    ap.add_argument("--m-per", type=int, default=4)
    ap.add_argument("--out", default=os.path.join("results", "rate"))
    a = ap.parse_args()
    tab = rate_diagnostic(a.dim, a.n, a.trials, a.seed, a.m_per)
    os.makedirs(a.out, exist_ok=True)
    doc = {"provenance": {"version": __version__, "seed": a.seed, "dim": a.dim, "m_per": a.m_per}, "rows": tab}
    with open(os.path.join(a.out, "rate.json"), "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
    for row in tab:
        print(f"n={row['n']:5d}  median={row['median']:.3f}  max={row['max']:.3f}")
