#!/usr/bin/env python3
"""PH loss against band thickness for several target thicknesses.

For each d_e the loss should bottom out at t = d_e.  Writes one CSV row per
(d_e, t) and prints the argmin per d_e.
"""
import argparse
from pathlib import Path

from epsedge.errors import DegenerateInput
from epsedge.polar import phd_exact
from epsedge.synthgen import thickness_sweep_band


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results/thickness_sweep.csv")
    ap.add_argument("--de", default="2,3,5,7")
    ap.add_argument("--tmax", type=int, default=12)
    ap.add_argument("--n", type=int, default=100)
    ap.add_argument("--r-inner", type=float, default=12.0)
    args = ap.parse_args()

    phd = {}
    for t in range(1, args.tmax + 1):
        try:
            phd[t] = phd_exact(thickness_sweep_band(t, args.r_inner), args.n).value
        except DegenerateInput:
            phd[t] = None
    lines = ["d_e,t,phd,ph_loss"]
    for d in (int(x) for x in args.de.split(",")):
        losses = {t: abs(v - d) for t, v in phd.items() if v is not None}
        for t, v in phd.items():
            lines.append(f"{d},{t},{'' if v is None else f'{v:.4f}'},"
                         f"{'' if v is None else f'{losses[t]:.4f}'}")
        print(f"d_e={d}: argmin t={min(losses, key=losses.get)}")
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text("\n".join(lines) + "\n")


if __name__ == "__main__":
    main()
