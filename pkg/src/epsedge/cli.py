"""Command-line entry point: ``epsedge <subcommand> ...``.

Exit codes: 0 success, 2 usage error, 3 data error, 4 degenerate input.
All output is CSV or plain integer rows so runs can be diffed.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import gradcheck
from .edges import edge_pixel_counts, extract_edge_label_map, kernel_for_thickness
from .errors import DegenerateInput, EpsError, InvalidInput
from .imagecore import LabelMap, load_label_pgm, load_soft_pgm, save_pgm
from .losses import bd_loss, ce_loss, hd_loss
from .metrics import ConfusionMatrix, accumulate, metrics_csv
from .polar import phd_exact, phd_smooth
from .synthgen import SceneSpec, gen_dataset, load_dataset, save_dataset, thickness_sweep_band
from .trainer import CONDITIONS, TrainConfig, infer, run_experiment

GRADCHECK_TOL = 1e-3


class UsageError(Exception):
    """Bad flag combination caught after argparse (exit 2)."""


def _fmt(v: float) -> str:
    return f"{v:.10g}"


# ---------------------------------------------------------------- commands

def cmd_kernel(args, out):
    k = kernel_for_thickness(args.de)
    for row in k.weights:
        print(" ".join(str(int(v)) for v in row), file=out)


def cmd_extract_edges(args, out):
    gt = load_label_pgm(args.inp)
    edge = extract_edge_label_map(gt, args.de)
    save_pgm(edge, args.out)
    print("class,edge_pixels", file=out)
    for c, count in enumerate(edge_pixel_counts(edge)):
        print(f"{c},{count}", file=out)


def cmd_phd(args, out):
    pred = load_soft_pgm(args.inp)
    if args.smooth:
        value, _ = phd_smooth(pred, args.n, args.sigma, args.delta, args.tau, args.beta)
        print(f"phd,{_fmt(value)}", file=out)
    else:
        res = phd_exact(pred, args.n, args.sigma, args.delta)
        value = res.value
        print(f"phd,{_fmt(value)}", file=out)
        print("ray,theta,inner_max,outer_min,gap,status", file=out)
        used = {int(round(g.theta * args.n / (2 * np.pi))) % args.n: g for g in res.per_ray}
        why = dict(res.skipped)
        for j in range(args.n):
            g = used.get(j)
            if g is None:
                print(f"{j},{_fmt(2 * np.pi * j / args.n)},,,,{why.get(j, 'skipped')}", file=out)
            else:
                print(f"{j},{_fmt(g.theta)},{_fmt(g.inner_max)},{_fmt(g.outer_min)},"
                      f"{_fmt(g.gap)},ok", file=out)
    if args.loss:
        if args.de is None:
            raise UsageError("--loss needs --de")
        print(f"ph_loss,{_fmt(abs(value - args.de))}", file=out)


def _region_of(gt: LabelMap) -> np.ndarray:
    return (gt.data != 0) & gt.valid()


def cmd_loss(args, out):
    pred = load_soft_pgm(args.pred)
    gt = load_label_pgm(args.gt)
    if pred.shape != gt.shape:
        raise InvalidInput(f"prediction {pred.shape} vs ground truth {gt.shape}")
    if args.kind == "bd":
        value = bd_loss(pred, _region_of(gt))
    elif args.kind == "hd":
        value = hd_loss(pred, _region_of(gt))
    else:
        # two-class problem: pred is the foreground probability
        target = np.where(gt.valid(), (gt.data != 0).astype(np.int64), gt.ignore_index)
        value, _ = ce_loss(np.stack([1.0 - pred, pred]), target, gt.ignore_index)
    print(f"loss,{_fmt(value)}", file=out)


def cmd_sweep(args, out):
    if args.tmin > args.tmax:
        raise UsageError("--tmin must not exceed --tmax")
    if args.tmin < 1:
        raise UsageError("--tmin must be at least 1")
    kernel_for_thickness(args.de)
    rows = []
    for t in range(args.tmin, args.tmax + 1):
        band = thickness_sweep_band(t, args.r_inner, args.size)
        try:
            phd = phd_exact(band, args.n, args.sigma, args.delta).value
            rows.append((t, phd, abs(phd - args.de)))
        except DegenerateInput:
            rows.append((t, None, None))
    scored = [r for r in rows if r[2] is not None]
    best = min(scored, key=lambda r: (r[2], r[0]))[0] if scored else None
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "phd", "ph_loss", "argmin"])
    for t, phd, loss in rows:
        if phd is None:
            w.writerow([t, "", "", "degenerate"])
        else:
            w.writerow([t, _fmt(phd), _fmt(loss), int(t == best)])
    text = buf.getvalue()
    if args.out:
        Path(args.out).write_text(text)
    out.write(text)


def cmd_gen_data(args, out):
    spec = SceneSpec(size=args.size, classes=args.classes, noise=args.noise, seed=args.seed)
    scenes = gen_dataset(spec, args.count)
    save_dataset(args.out, scenes)
    print(f"scenes,{len(scenes)}", file=out)


def _train_config(args) -> TrainConfig:
    return TrainConfig(d_e=args.de, aux_weight=args.aux_weight, ph_weight=args.ph_weight,
                       n=args.n, tau=args.tau, beta=args.beta, lr=args.lr, steps=args.steps,
                       batch_size=args.batch_size, seed=args.seed)


def cmd_train(args, out):
    scenes = load_dataset(args.data)
    conditions = args.conditions.split(",")
    for c in conditions:
        if c not in CONDITIONS:
            raise UsageError(f"unknown condition {c!r}")
    root = Path(args.out)
    root.mkdir(parents=True, exist_ok=True)
    summary = ["condition,seed,mIoU,mAcc"]
    seeds = [int(s) for s in args.seeds.split(",")] if args.seeds else [args.seed]
    base = _train_config(args)
    for seed in seeds:
        cfg = TrainConfig(**{**base.__dict__, "seed": seed})
        report = run_experiment(cfg, scenes, conditions, keep_models=args.save_pred)
        for cond, rep in report.reports.items():
            d = root / f"seed{seed}" / cond
            d.mkdir(parents=True, exist_ok=True)
            (d / "steps.csv").write_text(rep.steps_csv())
            (d / "metrics.csv").write_text(metrics_csv(rep.confusion))
            (d / "config.json").write_text(json.dumps(rep.config.__dict__, sort_keys=True) + "\n")
            if args.save_pred:
                pred_dir = d / "pred"
                pred_dir.mkdir(exist_ok=True)
                for s in scenes:
                    if s.index % 2 == 1:
                        save_pgm(infer(report.models[cond], s.image),
                                 pred_dir / f"{s.index:04d}_pred.pgm")
        summary.extend(report.summary_csv().splitlines()[1:])
    text = "\n".join(summary) + "\n"
    (root / "summary.csv").write_text(text)
    out.write(text)


def _gt_name(pred_name: str) -> str:
    stem = pred_name[:-len(".pgm")]
    if stem.endswith("_pred"):
        stem = stem[:-len("_pred")] + "_gt"
    return stem + ".pgm"


def cmd_eval(args, out):
    pred_dir, gt_dir = Path(args.pred), Path(args.gt)
    preds = sorted(p for p in pred_dir.glob("*.pgm") if not p.name.endswith("_img.pgm"))
    if not preds:
        raise InvalidInput(f"no prediction PGMs in {pred_dir}")
    pairs = []
    for p in preds:
        g = gt_dir / _gt_name(p.name)
        if not g.exists():
            raise InvalidInput(f"no ground truth {g.name} for {p.name}")
        pairs.append((load_label_pgm(p), load_label_pgm(g)))
    classes = max(max(a.classes, b.classes) for a, b in pairs)
    cm = ConfusionMatrix.zeros(classes)
    for pred, gt in pairs:
        cm = accumulate(cm, pred.data, LabelMap(gt.data, classes, gt.ignore_index))
    out.write(metrics_csv(cm))


def cmd_gradcheck(args, out):
    print("suite,seed,max_rel_err,ok", file=out)
    failed = 0
    for name, suite in gradcheck.SUITES.items():
        for seed in range(args.configs):
            err = suite(seed)
            ok = err <= args.tol
            failed += not ok
            print(f"{name},{seed},{err:.3e},{int(ok)}", file=out)
    return 1 if failed else 0


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="epsedge", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("kernel", help="print the edge-extraction kernel")
    s.add_argument("--de", type=int, required=True)
    s.set_defaults(func=cmd_kernel)

    s = sub.add_parser("extract-edges", help="label map -> edge label map")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--de", type=int, required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_extract_edges)

    s = sub.add_parser("phd", help="polar Hausdorff distance of a predicted band")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--n", type=int, default=8)
    s.add_argument("--sigma", type=float, default=0.1)
    s.add_argument("--delta", type=float, default=2.0)
    s.add_argument("--smooth", action="store_true")
    s.add_argument("--tau", type=float, default=0.05)
    s.add_argument("--beta", type=float, default=20.0)
    s.add_argument("--loss", action="store_true", help="also print |phd - de|")
    s.add_argument("--de", type=int)
    s.set_defaults(func=cmd_phd)

    s = sub.add_parser("loss", help="BD, HD or CE loss of a soft prediction")
    s.add_argument("--kind", choices=("bd", "hd", "ce"), required=True)
    s.add_argument("--pred", required=True)
    s.add_argument("--gt", required=True)
    s.set_defaults(func=cmd_loss)

    s = sub.add_parser("sweep-thickness", help="PH loss over annuli of growing thickness")
    s.add_argument("--de", type=int, required=True)
    s.add_argument("--tmin", type=int, default=1)
    s.add_argument("--tmax", type=int, default=10)
    s.add_argument("--out")
    s.add_argument("--n", type=int, default=100)
    s.add_argument("--sigma", type=float, default=0.1)
    s.add_argument("--delta", type=float, default=2.0)
    s.add_argument("--r-inner", type=float, default=12.0)
    s.add_argument("--size", type=int, default=64)
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("gen-data", help="write a synthetic scene dataset")
    s.add_argument("--out", required=True)
    s.add_argument("--count", type=int, default=200)
    s.add_argument("--size", type=int, default=64)
    s.add_argument("--classes", type=int, default=3)
    s.add_argument("--noise", type=float, default=0.15)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_gen_data)

    d = TrainConfig()
    s = sub.add_parser("train", help="train baseline / EPS / EPS+PH and report val metrics")
    s.add_argument("--data", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--conditions", default=",".join(CONDITIONS))
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--seeds", help="comma-separated seeds; overrides --seed")
    s.add_argument("--de", type=int, default=d.d_e)
    s.add_argument("--aux-weight", type=float, default=d.aux_weight)
    s.add_argument("--ph-weight", type=float, default=d.ph_weight)
    s.add_argument("--n", type=int, default=d.n)
    s.add_argument("--tau", type=float, default=d.tau)
    s.add_argument("--beta", type=float, default=d.beta)
    s.add_argument("--lr", type=float, default=d.lr)
    s.add_argument("--steps", type=int, default=d.steps)
    s.add_argument("--batch-size", type=int, default=d.batch_size)
    s.add_argument("--save-pred", action="store_true", help="write val predictions as PGM")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("eval", help="mIoU / mAcc of prediction label maps against ground truth")
    s.add_argument("--pred", required=True)
    s.add_argument("--gt", required=True)
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("gradcheck", help="finite-difference checks of every hand-written gradient")
    s.add_argument("--configs", type=int, default=10)
    s.add_argument("--tol", type=float, default=GRADCHECK_TOL)
    s.set_defaults(func=cmd_gradcheck)
    return p


def main(argv=None, out=None) -> int:
    out = sys.stdout if out is None else out
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        code = args.func(args, out)
    except UsageError as exc:
        print(f"epsedge: error: {exc}", file=sys.stderr)
        return 2
    except (EpsError, ValueError) as exc:
        code = getattr(exc, "exit_code", 2)
        print(f"epsedge: {type(exc).__name__}: {exc}", file=sys.stderr)
        return code
    except OSError as exc:
        print(f"epsedge: {exc}", file=sys.stderr)
        return 3
    return code or 0


if __name__ == "__main__":
    sys.exit(main())
