"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 data/parse error, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import warnings

import numpy as np

from . import geometry
from .atr import refine
from .data import (SynthSpec, generate_synthetic, load_checkpoint, load_embeddings,
                   save_checkpoint, save_embeddings, split_indices)
from .errors import DivergenceError, DomainError, ParseError, UsageError
from .trainer import TrainConfig, evaluate, train
from .verify import LOSSES, run_battery

EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 1, 2, 3
GRADCHECK_TOL = 1e-4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _flags(p):
    p.formatter_class = argparse.ArgumentDefaultsHelpFormatter
    return p


def build_parser():
    parser = _Parser(prog="lathadapter",
                     description="Hyperbolic hierarchical adapter over frozen embeddings.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = _flags(sub.add_parser("gen-synth", help="write a planted-hierarchy dataset"))
    g.add_argument("--classes", type=int, default=4, help="number of classes C")
    g.add_argument("--attrs-per-class", type=int, default=2, help="attribute centres per class")
    g.add_argument("--samples-per-class", type=int, default=50, help="images per class")
    g.add_argument("--dim", type=int, default=64, help="embedding dimension")
    g.add_argument("--noise", type=float, default=0.05, help="per-coordinate image noise")
    g.add_argument("--text-radius", type=float, default=0.3, help="norm of category embeddings")
    g.add_argument("--seed", type=int, default=7, help="generator seed")
    g.add_argument("--out-dir", default=".", help="output directory")

    t = _flags(sub.add_parser("train", help="learn an attribute bank"))
    t.add_argument("--text", required=True, help="category embeddings (.lha1)")
    t.add_argument("--images", required=True, help="labelled image embeddings (.lha1)")
    t.add_argument("--attrs", type=int, default=8, help="number of attribute prompts N")
    t.add_argument("--curvature", type=float, default=0.1, help="ball curvature c")
    t.add_argument("--beta", type=float, default=0.1, help="refiner residual weight")
    t.add_argument("--sigma", type=float, default=0.1, help="hierarchy hinge margin")
    t.add_argument("--knn", type=int, default=3, help="nearest neighbours for triplets")
    t.add_argument("--tau", type=float, default=0.01, help="softmax temperature")
    t.add_argument("--lambda-h", type=float, default=1.0, help="weight of the distance term at inference")
    t.add_argument("--lr", type=float, default=0.002, help="Adam learning rate")
    t.add_argument("--epochs", type=int, default=100, help="training epochs")
    t.add_argument("--batch-size", type=int, default=64, help="images per batch")
    t.add_argument("--seed", type=int, default=0, help="seed for init, shuffling, noise")
    t.add_argument("--no-gumbel", action="store_true", help="disable Gumbel noise in LCA choice")
    t.add_argument("--out", default="attrs.lhck", help="checkpoint path")
    t.add_argument("--metrics", default=None,
                   help="metrics log path (default: <out>.metrics.tsv)")

    e = _flags(sub.add_parser("eval", help="score images with a trained bank"))
    e.add_argument("--ckpt", required=True, help="checkpoint (.lhck)")
    e.add_argument("--text", required=True, help="category embeddings (.lha1)")
    e.add_argument("--images", default=None, help="labelled images (single split)")
    e.add_argument("--base-images", default=None, help="labelled base-class images")
    e.add_argument("--new-images", default=None, help="labelled new-class images")
    e.add_argument("--tau", type=float, default=None, help="override checkpoint tau")
    e.add_argument("--lambda-h", type=float, default=None, help="override checkpoint lambda_h")
    e.add_argument("--json", action="store_true", help="print one JSON object")

    c = _flags(sub.add_parser("gradcheck", help="finite-difference check of every loss"))
    c.add_argument("--seed", type=int, default=0, help="problem seed")
    c.add_argument("--eps", type=float, default=1e-6, help="central difference step")
    c.add_argument("--trials", type=int, default=50, help="random smooth problems")
    c.add_argument("--inject-fault", type=float, default=0.0,
                   help="testing hook: add this to every analytic gradient entry")

    i = _flags(sub.add_parser("inspect", help="export hyperbolic radii or 2-D coordinates"))
    i.add_argument("--ckpt", required=True, help="checkpoint (.lhck)")
    i.add_argument("--text", required=True, help="category embeddings (.lha1)")
    i.add_argument("--images", required=True, help="image embeddings (.lha1)")
    i.add_argument("--emit", choices=["radii.csv", "coords.csv"], default="radii.csv",
                   help="which export to write")
    i.add_argument("--out-dir", default=".", help="directory for the CSV")
    return parser


def cmd_gen_synth(args):
    spec = SynthSpec(args.classes, args.attrs_per_class, args.samples_per_class, args.dim,
                     args.noise, args.seed, text_radius=args.text_radius)
    data = generate_synthetic(spec)
    train_idx, test_idx = split_indices(data.labels, 0.8, args.seed)
    os.makedirs(args.out_dir, exist_ok=True)
    out = args.out_dir
    save_embeddings(os.path.join(out, "text.lha1"), data.text)
    save_embeddings(os.path.join(out, "train.lha1"), data.images[train_idx], data.labels[train_idx])
    save_embeddings(os.path.join(out, "test.lha1"), data.images[test_idx], data.labels[test_idx])
    save_embeddings(os.path.join(out, "truth-attrs.lha1"), data.attr_centers,
                    np.arange(len(data.attr_centers)) // args.attrs_per_class)
    print(f"wrote {out}: C={args.classes} d={args.dim} train={len(train_idx)} "
          f"test={len(test_idx)} attrs={len(data.attr_centers)} seed={args.seed}")
    return 0


def _labelled(path):
    emb = load_embeddings(path)
    if emb.labels is None:
        raise UsageError(f"{path} has no labels")
    return emb


def cmd_train(args):
    cfg = TrainConfig(c=args.curvature, sigma=args.sigma, beta=args.beta, k=args.knn,
                      n_attributes=args.attrs, tau=args.tau, lambda_h=args.lambda_h, lr=args.lr,
                      epochs=args.epochs, batch_size=args.batch_size, seed=args.seed,
                      gumbel=not args.no_gumbel)
    text = load_embeddings(args.text).data
    images = _labelled(args.images)
    metrics = args.metrics or args.out + ".metrics.tsv"
    with open(metrics, "w", encoding="utf-8") as log:
        result = train(cfg, text, images.data, images.labels, metrics_log=log)
    save_checkpoint(args.out, result.checkpoint)
    last = result.reports[-1] if result.reports else None
    summary = f"total={last.total:.6f} train_acc={result.accuracies[-1]:.4f}" if last else "no epochs"
    print(f"wrote {args.out} ({summary}); metrics in {metrics}")
    return 0


def cmd_eval(args):
    ckpt = load_checkpoint(args.ckpt)
    for name in ("tau", "lambda_h"):
        override = getattr(args, name)
        if override is not None and override != getattr(ckpt, name):
            print(f"warning: --{name.replace('_', '-')} {override} differs from checkpoint "
                  f"value {getattr(ckpt, name)}; using the override", file=sys.stderr)
            setattr(ckpt, name, override)
    text = load_embeddings(args.text).data
    if args.images and (args.base_images or args.new_images):
        raise UsageError("use either --images or --base-images/--new-images")
    if args.images:
        first, second = _labelled(args.images), None
    elif args.base_images and args.new_images:
        first, second = _labelled(args.base_images), _labelled(args.new_images)
    else:
        raise UsageError("need --images, or both --base-images and --new-images")
    report = evaluate(ckpt, text, first.data, first.labels,
                      None if second is None else (second.data, second.labels))
    if args.json:
        print(json.dumps(report.as_json(), sort_keys=True))
        return 0
    if second is None:
        print(f"accuracy {report.accuracy:.4f}")
    else:
        s = report.split_accuracy
        print(f"base {s['base']:.4f}  new {s['new']:.4f}  H {report.harmonic_mean:.4f}")
    for cls, acc in report.per_class.items():
        print(f"  class {cls}: {acc:.4f}")
    r = report.radii
    print(f"mean radius  category {r['category']:.4f}  attribute {r['attribute']:.4f}  "
          f"image {r['image']:.4f}")
    return 0


def cmd_gradcheck(args):
    print(f"gradcheck: trials={args.trials} seed={args.seed} eps={args.eps:g} "
          f"tol={GRADCHECK_TOL:g}")
    worst = run_battery(args.trials, args.seed, args.eps, LOSSES, fault=args.inject_fault)
    failed = False
    for name, err in worst.items():
        ok = err < GRADCHECK_TOL
        failed |= not ok
        print(f"{name:8s} worst_rel_err={err:.3e} {'ok' if ok else 'FAIL'}")
    return EXIT_NUMERIC if failed else 0


def _project_2d(points):
    # uncentred SVD keeps the origin at the origin
    _, _, vt = np.linalg.svd(points, full_matrices=False)
    basis = vt[:2].T
    if basis.shape[1] < 2:
        basis = np.pad(basis, ((0, 0), (0, 2 - basis.shape[1])))
    return points @ basis


def cmd_inspect(args):
    ckpt = load_checkpoint(args.ckpt)
    text = load_embeddings(args.text).data
    images = load_embeddings(args.images).data
    if text.shape[1] != ckpt.dim or images.shape[1] != ckpt.dim:
        raise UsageError("embedding dimension does not match the checkpoint")
    c = ckpt.c
    groups = [("category", geometry.exp_map0(refine(text, ckpt.attributes, ckpt.beta), c)),
              ("attribute", geometry.exp_map0(ckpt.attributes, c)),
              ("image", geometry.exp_map0(images, c))]
    coords = args.emit == "coords.csv"
    xy = _project_2d(np.concatenate([g for _, g in groups])) if coords else None
    os.makedirs(args.out_dir, exist_ok=True)
    path = os.path.join(args.out_dir, args.emit)
    header = ["role", "index", "hyp_norm"] + (["x", "y"] if coords else [])
    row = 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for role, pts in groups:
            for idx, r in enumerate(geometry.hyp_norm(pts, c)):
                rec = [role, idx, repr(float(r))]
                if coords:
                    rec += [repr(float(xy[row, 0])), repr(float(xy[row, 1]))]
                w.writerow(rec)
                row += 1
    print(f"wrote {path} ({row} rows)")
    return 0


COMMANDS = {"gen-synth": cmd_gen_synth, "train": cmd_train, "eval": cmd_eval,
            "gradcheck": cmd_gradcheck, "inspect": cmd_inspect}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ParseError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (DivergenceError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
