#!/usr/bin/env python3
"""Train baseline / EPS / EPS+PH over several seeds and write a median mIoU table.

    python3 scripts/compare_conditions.py --out results/conditions.csv
"""
import argparse
import statistics
import time
from pathlib import Path

from epsedge.synthgen import SceneSpec, gen_dataset
from epsedge.trainer import CONDITIONS, TrainConfig, run_experiment


def main():
    d = TrainConfig()
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results/conditions.csv")
    ap.add_argument("--scenes", type=int, default=200)
    ap.add_argument("--size", type=int, default=64)
    ap.add_argument("--noise", type=float, default=0.15)
    ap.add_argument("--data-seed", type=int, default=0)
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--steps", type=int, default=d.steps)
    ap.add_argument("--lr", type=float, default=d.lr)
    ap.add_argument("--ph-weight", type=float, default=d.ph_weight)
    ap.add_argument("--aux-weight", type=float, default=d.aux_weight)
    args = ap.parse_args()

    scenes = gen_dataset(SceneSpec(size=args.size, noise=args.noise, seed=args.data_seed),
                         args.scenes)
    rows, scores = [], {c: [] for c in CONDITIONS}
    t0 = time.time()
    for seed in range(args.seeds):
        cfg = TrainConfig(seed=seed, steps=args.steps, lr=args.lr, ph_weight=args.ph_weight,
                          aux_weight=args.aux_weight)
        rep = run_experiment(cfg, scenes)
        for cond, mi, ma in rep.summary_rows():
            rows.append(f"{cond},{seed},{mi:.4f},{ma:.4f}")
            scores[cond].append(mi)
        print(f"seed {seed}: " + " ".join(f"{c}={v[-1]:.4f}" for c, v in scores.items())
              + f"  ({time.time() - t0:.0f}s)", flush=True)
    for cond, v in scores.items():
        rows.append(f"{cond},median,{statistics.median(v):.4f},")
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text("condition,seed,mIoU,mAcc\n" + "\n".join(rows) + "\n")
    print(out.read_text(), end="")


if __name__ == "__main__":
    main()
