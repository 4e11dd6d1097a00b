"""Command-line surface: process, train, eval, inspect.

Exit codes: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import annotations as ann_io
from . import graw
from .config import ConfigError, load_config
from .imageio import export_image, load_weights, save_weights
from .losses import LossWeights, ToyDetectorGuidance
from .metrics import results_json, evaluate
from .model import IspModel
from .pipeline import PipelineError, preprocess
from .tensor import Tensor
from .trainer import TrainConfig, TrainingError, train


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _build_parser():
    p = _Parser(prog="rawisp",
                description="Neural ISP for low-light raw Bayer data")
    sub = p.add_subparsers(dest="command", required=True)

    def add_toggles(sp):
        sp.add_argument("--no-convwb", action="store_true",
                        help="disable the white-balance module")
        sp.add_argument("--no-convcc", action="store_true",
                        help="disable the color-correction module")
        sp.add_argument("--no-cst", action="store_true",
                        help="skip the color space transformation")

    sp = sub.add_parser("process", help="convert GRAW frames to PPM images")
    sp.add_argument("inputs", nargs="+", help="input .graw files")
    sp.add_argument("--out", required=True,
                    help="output file (single input) or directory")
    sp.add_argument("--weights", help="weight file stem (omit for identity init)")
    sp.add_argument("--bit-depth", type=int, default=8, choices=(8, 16))
    sp.add_argument("--detect", action="store_true",
                    help="also run the toy detector and write detections")
    sp.add_argument("--seed", type=int, default=0)
    add_toggles(sp)

    sp = sub.add_parser("train", help="train the ISP under toy guidance")
    sp.add_argument("--data", required=True, help="directory of .graw files")
    sp.add_argument("--annotations", required=True, help="annotation JSON")
    sp.add_argument("--out", required=True, help="output directory")
    sp.add_argument("--config", help="TrainConfig as .json or .toml")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--lambda-wb", type=float)
    sp.add_argument("--no-guidance", action="store_true",
                    help="train with the gray-world objective only")
    add_toggles(sp)

    sp = sub.add_parser("eval", help="COCO-style AP evaluation")
    sp.add_argument("--dets", required=True, help="detections JSON")
    sp.add_argument("--gts", required=True, help="ground-truth annotation JSON")
    sp.add_argument("--out", help="write the JSON report here as well")

    sp = sub.add_parser("inspect", help="dump GRAW metadata or model info")
    sp.add_argument("file", nargs="?", help="a .graw file")
    sp.add_argument("--model", action="store_true",
                    help="print trainable parameter counts")
    sp.add_argument("--weights", help="weight file stem to inspect")
    return p


def _load_model(seed, weights):
    model = IspModel(seed=seed)
    if weights:
        model.load_state(load_weights(weights))
    return model


def cmd_process(args):
    model = _load_model(args.seed, args.weights)
    multi = len(args.inputs) > 1
    if multi and not os.path.isdir(args.out):
        raise UsageError("--out must be a directory for multiple inputs")
    for path in args.inputs:
        frame = graw.read_graw(path)
        if args.no_cst and frame.cst is None:
            print(f"warning: {path} carries no CST matrix; --no-cst is a no-op",
                  file=sys.stderr)
        img = preprocess(frame, use_cst=not args.no_cst)
        out = model.forward(Tensor(img), use_convwb=not args.no_convwb,
                            use_convcc=not args.no_convcc)
        enhanced = out["enhanced"].data
        stem = os.path.splitext(os.path.basename(path))[0]
        dest = (os.path.join(args.out, stem + ".ppm")
                if multi or os.path.isdir(args.out) else args.out)
        export_image(enhanced, dest, bit_depth=args.bit_depth)
        print(f"{path} -> {dest}")
        if args.detect:
            from .metrics import DetectionSet
            dets = DetectionSet()
            for d in ToyDetectorGuidance().detect(enhanced):
                dets.add(0, d)
            det_path = os.path.splitext(dest)[0] + ".detections.json"
            ann_io.save_detections(dets, det_path)
            print(f"  detections -> {det_path}")
    return 0


def cmd_train(args):
    cfg = load_config(args.config) if args.config else TrainConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    if args.lambda_wb is not None:
        cfg.loss_weights = LossWeights(args.lambda_wb)
    if args.no_convwb:
        cfg.use_convwb = False
    if args.no_convcc:
        cfg.use_convcc = False
    if args.no_cst:
        cfg.use_cst = False

    ann = ann_io.load_annotations(args.annotations)
    gts = ann.to_annotation_set()
    dataset = []
    for im in sorted(ann.images, key=lambda im: im["id"]):
        frame = graw.read_graw(os.path.join(args.data, im["file"]))
        dataset.append((frame, gts.by_image.get(im["id"], [])))

    guidance = None if args.no_guidance else ToyDetectorGuidance()
    model, epoch_log, step_log = train(dataset, guidance, cfg)

    os.makedirs(args.out, exist_ok=True)
    save_weights(model.state(), os.path.join(args.out, "weights"))
    with open(os.path.join(args.out, "train_log.jsonl"), "w") as f:
        for rec in step_log:
            f.write(json.dumps(rec, sort_keys=True) + "\n")
    for rec in epoch_log:
        print(json.dumps(rec, sort_keys=True))
    return 0


def cmd_eval(args):
    dets = ann_io.load_detections(args.dets)
    gts = ann_io.load_annotations(args.gts).to_annotation_set()
    report = results_json(evaluate(dets, gts))
    print(report)
    if args.out:
        with open(args.out, "w") as f:
            f.write(report + "\n")
    return 0


def cmd_inspect(args):
    if args.model:
        model = _load_model(0, args.weights)
        counts = model.param_counts()
        for name in ("convwb", "convcc", "enhance"):
            print(f"{name:10s} {counts[name]:8d} parameters")
        print(f"{'total':10s} {counts['total']:8d} parameters")
        return 0
    if not args.file:
        raise UsageError("inspect needs a GRAW file or --model")
    frame = graw.read_graw(args.file)
    norm = frame.samples.astype(np.float64)
    print(f"file:        {args.file}")
    print(f"size:        {frame.width} x {frame.height}")
    print(f"cfa:         {frame.cfa}")
    print(f"black_level: {int(np.asarray(frame.black_level).reshape(-1)[0])}")
    print(f"white_level: {frame.white_level}")
    print(f"cst_present: {frame.cst is not None}")
    if frame.cst is not None:
        for row in frame.cst:
            print("    " + "  ".join(f"{v: .6f}" for v in row))
    print(f"samples:     min={norm.min():.0f} max={norm.max():.0f} "
          f"mean={norm.mean():.2f}")
    return 0


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        handler = {"process": cmd_process, "train": cmd_train,
                   "eval": cmd_eval, "inspect": cmd_inspect}[args.command]
        return handler(args)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 1
    except (graw.GrawError, PipelineError, ConfigError, TrainingError,
            ann_io.AnnotationError, FileNotFoundError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
