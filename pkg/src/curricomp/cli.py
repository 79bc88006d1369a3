"""Command-line entry point: gen-data, train, eval, predict, sweep, grad-check."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import dataset as ds
from .checkpoint import load_checkpoint
from .config import RunConfig
from .errors import CurricompError
from .imageio import ImageFormatError, read_image, resize_bilinear

log = logging.getLogger("curricomp")


def _int_list(text: str) -> list[int]:
    return [int(v) for v in text.replace("[", "").replace("]", "").split(",") if v.strip()]


def _float_list(text: str) -> list[float]:
    return [float(v) for v in text.replace("[", "").replace("]", "").split(",") if v.strip()]


def _load_config(args, overrides=None) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    flags = {}
    if args.seed is not None:
        flags["seed"] = args.seed
    if args.threads is not None:
        flags["threads"] = args.threads
    flags.update(overrides or {})
    return cfg.with_overrides(flags) if flags else cfg


# --- commands ---------------------------------------------------------------

def cmd_gen_data(args) -> int:
    seed = args.seed if args.seed is not None else 0
    gcfg = ds.GlyphConfig(n_per_class=args.n_per_class, resolution=args.resolution,
                          noise_sigma=args.noise_sigma, seed=seed)
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CurricompError(f"cannot create output directory {out}: {exc}") from exc
    basic = ds.generate_synthetic(gcfg, out_dir=out)
    print(f"basic: {len(basic)} images ({args.n_per_class} per class) -> {out / 'manifest.csv'}")
    if args.val_per_class:
        val = ds.generate_compound_glyphs(args.val_per_class, gcfg, tag="val", out_dir=out,
                                          manifest_name="val_manifest.csv")
        print(f"val: {len(val)} compound images -> {out / 'val_manifest.csv'}")
    if args.natural_per_class:
        nat = ds.generate_compound_glyphs(args.natural_per_class, gcfg, tag="natural", out_dir=out,
                                          manifest_name="natural_manifest.csv")
        print(f"natural: {len(nat)} compound images -> {out / 'natural_manifest.csv'}")
    return 0


def cmd_train(args) -> int:
    from .train import train

    overrides = {}
    if args.out:
        overrides["output_dir"] = args.out
    if args.epoch_dis is not None:
        overrides["epoch_dis"] = _int_list(args.epoch_dis)
    if args.compound_prop is not None:
        overrides["compound_prop"] = _float_list(args.compound_prop)
    if args.no_figures:
        overrides["figures"] = False
    cfg = _load_config(args, overrides)
    out = Path(cfg["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(json.dumps(cfg.to_dict(), indent=2) + "\n", encoding="utf-8")
    result = train(cfg, resume=args.resume)
    if result.final_metrics is not None:
        (out / "metrics.json").write_text(json.dumps(result.final_metrics.to_dict(), indent=2) + "\n",
                                          encoding="utf-8")
    if cfg["figures"] and result.log:
        from .report import plot_confusion, plot_training
        plot_training(result.log, out / "training_curves.png")
        if result.final_metrics is not None:
            plot_confusion(result.final_metrics, out / "confusion.png")
    last = result.log[-1] if result.log else None
    if last:
        print(f"epochs: {last.epoch}  final val macro-F1: {last.val_macro_f1:.4f}  "
              f"best: {result.best_macro_f1:.4f} (epoch {result.best_epoch})")
    for name, path in sorted(result.checkpoints.items()):
        print(f"{name} checkpoint: {path}")
    return 0


def cmd_eval(args) -> int:
    from .metrics import evaluate

    ckpt = load_checkpoint(args.checkpoint)
    h, w, _ = ckpt.spec.input_dims
    samples = ds.filter_neutral(ds.load_manifest(args.manifest, args.image_root, (h, w),
                                                 args.threads or 1))
    metrics = evaluate(ckpt.spec, ckpt.state, samples, threads=args.threads or 1)
    text = json.dumps(metrics.to_dict(), indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
        if not args.no_figures:
            from .report import plot_confusion
            plot_confusion(metrics, Path(args.out).with_suffix(".png"))
    print(text)
    return 0


def cmd_predict(args) -> int:
    from .metrics import constrain_to_compound
    from .taxonomy import BASIC_NAMES, COMPOUND_NAMES
    from .train import predict_basic

    ckpt = load_checkpoint(args.checkpoint)
    h, w, _ = ckpt.spec.input_dims
    try:
        img = resize_bilinear(read_image(args.image), h, w)
    except (OSError, ImageFormatError) as exc:
        raise CurricompError(f"cannot read image {args.image}: {exc}") from exc
    probs = predict_basic(ckpt.spec, ckpt.state, img)
    idx, scores = constrain_to_compound(probs)
    if args.json:
        print(json.dumps({
            "basic": dict(zip(BASIC_NAMES, map(float, probs))),
            "compound_scores": dict(zip(COMPOUND_NAMES, map(float, scores))),
            "compound": COMPOUND_NAMES[idx],
            "compound_index": idx,
        }, indent=2))
        return 0
    for name, p in zip(BASIC_NAMES, probs):
        print(f"{name:<10} {p:.4f}")
    print(f"compound: {COMPOUND_NAMES[idx]} (index {idx}, score {scores[idx]:.4f})")
    return 0


def cmd_sweep(args) -> int:
    from .sweep import SweepSpec, run_sweep

    spec = SweepSpec.load(args.sweep_config)
    if args.seeds:
        spec.seeds = _int_list(args.seeds)
    elif args.seed is not None:
        spec.seeds = [args.seed]
    base = _load_config(args)
    out = Path(args.out)
    run_sweep(spec, base, out, figures=not args.no_figures)
    sys.stdout.write((out / "sweep.csv").read_text(encoding="utf-8"))
    return 0


def cmd_grad_check(args) -> int:
    from .nn import flip_layer_sign, grad_check, init_state, random_problem

    reports = []
    if args.config:
        cfg = _load_config(args)
        spec = cfg.model_spec()
        rng = np.random.default_rng(cfg.seed)
        state = init_state(spec, rng)
        batch = rng.uniform(0, 1, size=(4,) + spec.input_dims)
        labels = rng.integers(0, 2, size=(4, spec.num_classes)).astype(float)
        problems = [(spec, state, batch, labels)]
    else:
        base = args.seed if args.seed is not None else 0
        problems = [random_problem(base + i) for i in range(args.random)]
    for i, (spec, state, batch, labels) in enumerate(problems):
        fn = flip_layer_sign(args.inject_fault) if args.inject_fault is not None else None
        kwargs = {"backward_fn": fn} if fn else {}
        rep = grad_check(spec, state, batch, labels, eps=args.eps, tol=args.tol, seed=i, **kwargs)
        reports.append(rep)
        print(f"model {i}: params={spec.num_params()} checked={rep.checked} "
              f"max_rel_err={rep.max_rel_err:.3e} {'PASS' if rep.passed else 'FAIL'}")
    ok = all(r.passed for r in reports)
    print(f"grad-check: {'PASS' if ok else 'FAIL'} ({sum(r.passed for r in reports)}/{len(reports)})")
    return 0 if ok else 1


# --- parser -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="random seed")
    common.add_argument("--threads", type=int, default=argparse.SUPPRESS,
                        help="worker threads for parallel sections (1 = bit-reproducible)")
    common.add_argument("--config", default=argparse.SUPPRESS, help="JSON run config")
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)

    parser = argparse.ArgumentParser(prog="curricomp", parents=[common],
                                     description="Curriculum training for compound expression recognition.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", parents=[common], help="write a synthetic glyph dataset")
    p.add_argument("--n-per-class", type=int, default=200)
    p.add_argument("--val-per-class", type=int, default=0,
                   help="also write this many compound blends per catalog class to val_manifest.csv")
    p.add_argument("--natural-per-class", type=int, default=0,
                   help="also write a natural compound pool to natural_manifest.csv")
    p.add_argument("--resolution", type=int, default=32)
    p.add_argument("--noise-sigma", type=float, default=0.1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", parents=[common], help="train through the curriculum")
    p.add_argument("--resume", help="continue from a last.ckpt")
    p.add_argument("--out", help="output directory (overrides output_dir)")
    p.add_argument("--epoch-dis", help="comma-separated epochs per stage, e.g. 5,5,3,3")
    p.add_argument("--compound-prop", help="comma-separated compound proportions, e.g. 0,0.2,0.4,1")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", parents=[common], help="score a checkpoint on a compound manifest")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--manifest", required=True)
    p.add_argument("--image-root")
    p.add_argument("--out", help="write the metrics JSON (and a confusion-matrix PNG) here")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", parents=[common], help="classify one image")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("sweep", parents=[common], help="run an ablation grid")
    p.add_argument("sweep_config", help="preset name (table1, table2) or path to a sweep JSON")
    p.add_argument("--out", default="runs/sweep")
    p.add_argument("--seeds", help="comma-separated seeds (overrides the preset)")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("grad-check", parents=[common], help="finite-difference gradient check")
    p.add_argument("--random", type=int, default=20, help="number of random small models")
    p.add_argument("--eps", type=float, default=1e-5)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--inject-fault", type=int, metavar="LAYER",
                   help="negate one dense layer's gradient; the check must then fail")
    p.set_defaults(func=cmd_grad_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    for name, default in (("seed", None), ("threads", None), ("config", None), ("verbose", False)):
        if not hasattr(args, name):
            setattr(args, name, default)
    if getattr(args, "n_per_class", 1) < 1:
        parser.error("--n-per-class must be >= 1")
    if args.threads is not None and args.threads < 1:
        parser.error("--threads must be >= 1")
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (CurricompError, ValueError, OSError) as exc:
        print(f"curricomp {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
