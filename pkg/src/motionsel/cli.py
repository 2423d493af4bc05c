"""Command-line entry point: ``motionsel train|predict|evaluate|analyze``.

Exit codes: 0 ok, 2 usage/config error, 3 training divergence,
4 checkpoint incompatibility. ``MOTIONSEL_LOG`` sets the log level.
"""

from __future__ import annotations

import argparse
import glob
import logging
import os
import sys
from dataclasses import asdict, replace

import numpy as np
import torch

from . import analysis, metrics
from .checkpoint import CheckpointError, load_checkpoint
from .config import ConfigError, load_config
from .model import DualNet
from .optim import NonFiniteGradientError
from .predictor import predict_with_alpha_trace
from .trainer import Trainer, TrainingDivergedError, model_from_checkpoint, write_log_csv
from .video_io import FrameFormatError, load_clip, read_frame, write_frame

EXIT_OK, EXIT_USAGE, EXIT_DIVERGED, EXIT_CHECKPOINT = 0, 2, 3, 4
CHECKPOINT_EVERY = 500

log = logging.getLogger("motionsel")


class CommandError(Exception):
    def __init__(self, message, code=EXIT_USAGE):
        super().__init__(message)
        self.code = code


def _seed(args, default):
    seed = default if args.seed is None else args.seed
    torch.manual_seed(seed)
    print(f"effective seed: {seed}")
    return seed


def _load_run(args, check_paths=True):
    if not args.config:
        raise CommandError("--config is required")
    return load_config(args.config, check_paths=check_paths)


def cmd_train(args):
    cfg = _load_run(args)
    seed = _seed(args, cfg.train.seed)
    tc = replace(cfg.train, seed=seed)
    clip = load_clip(cfg.data.clip, cfg.data.train_range)
    if (clip.shape[1], clip.shape[2], clip.shape[3]) != (
            cfg.model.channels, cfg.model.height, cfg.model.width):
        raise CommandError(f"clip frames are {clip.shape[1:]} but [model] expects "
                           f"({cfg.model.channels}, {cfg.model.height}, {cfg.model.width})")
    if tc.t_train is None:
        tc = replace(tc, t_train=len(clip))
    if len(clip) < 2 * cfg.model.delta or tc.t_train > len(clip):
        raise CommandError(f"training clip of {len(clip)} frames is too short "
                           f"(delta={cfg.model.delta}, t_train={tc.t_train})")
    out = args.out or cfg.data.out_dir
    os.makedirs(out, exist_ok=True)
    model = DualNet.build(cfg.model, cfg.selector_config(), cfg.use_selector, seed=seed)
    trainer = Trainer(model, tc)

    def on_iteration(tr, rec):
        if tr.iteration % CHECKPOINT_EVERY == 0:
            tr.save(os.path.join(out, f"ckpt_{tr.iteration:06d}.bin"))
        if rec.active:
            log.info("iter %d stage %d K=%d lr=%.2e loss=%.5f active=%s", rec.iteration,
                     rec.stage, rec.K, rec.lr, rec.total, list(rec.active))

    trainer.on_iteration = on_iteration
    try:
        trainer.fit(clip)
    except (TrainingDivergedError, NonFiniteGradientError) as exc:
        write_log_csv(trainer.log, os.path.join(out, "train_log.csv"))
        raise CommandError(f"training diverged: {exc}", EXIT_DIVERGED) from None
    trainer.save(os.path.join(out, "final.bin"))
    write_log_csv(trainer.log, os.path.join(out, "train_log.csv"))
    print(f"trained {trainer.iteration} iterations; final loss {trainer.log[-1].total:.6f}")
    print(f"checkpoint: {os.path.join(out, 'final.bin')}")
    return EXIT_OK


def _load_model(args, cfg):
    if not args.checkpoint:
        raise CommandError("--checkpoint is required")
    try:
        model = model_from_checkpoint(load_checkpoint(args.checkpoint))
    except OSError as exc:
        raise CommandError(f"cannot read checkpoint: {exc.strerror}", EXIT_CHECKPOINT) from None
    except CheckpointError as exc:
        raise CommandError(str(exc), EXIT_CHECKPOINT) from None
    if asdict(model.config) != asdict(cfg.model) or (model.selector is not None) != cfg.use_selector:
        raise CommandError("checkpoint model does not match the config's [model]/[run] settings",
                           EXIT_CHECKPOINT)
    return model


def _conditioning(args, cfg, model):
    clip = load_clip(cfg.data.clip)
    delta = model.delta
    if args.entry is None or args.entry < 0 or args.entry > len(clip) - delta:
        raise CommandError(f"--entry must be in [0, {len(clip) - delta}] for a clip of "
                           f"{len(clip)} frames with delta={delta}")
    if args.horizon is None or args.horizon < 0:
        raise CommandError("--horizon must be >= 0")
    return clip, clip[args.entry:args.entry + delta]


def cmd_predict(args):
    cfg = _load_run(args, check_paths=False)
    _seed(args, cfg.train.seed)
    model = _load_model(args, cfg)
    clip, cond = _conditioning(args, cfg, model)
    if args.horizon == 0:
        return EXIT_OK
    out = args.out or os.path.join(cfg.data.out_dir, "predict")
    frames, alphas = predict_with_alpha_trace(model, cond, args.horizon)
    os.makedirs(out, exist_ok=True)
    for j, f in enumerate(frames):
        write_frame(f, os.path.join(out, f"pred_{j:03d}.png"))
    first = args.entry + model.delta
    analysis.export_alpha_curves(alphas, os.path.join(out, "alpha_trace.csv"), first)
    print(f"wrote {len(frames)} frames to {out}")
    return EXIT_OK


def cmd_evaluate(args):
    if not args.pred or not args.gt or not args.out:
        raise CommandError("evaluate needs --pred, --gt and --out")
    _seed(args, 0)
    paths = sorted(glob.glob(os.path.join(args.pred, "*.png")))
    if not paths:
        raise CommandError(f"no predicted frames in {args.pred}")
    pred = np.stack([read_frame(p) for p in paths])
    gt_all = load_clip(args.gt)
    first = args.first
    if first < 0 or first + len(pred) > len(gt_all):
        raise CommandError(f"{len(pred)} predicted frames starting at ground-truth index {first} "
                           f"exceed the {len(gt_all)} ground-truth frames")
    gt = gt_all[first:first + len(pred)]
    if pred.shape[1:] != gt.shape[1:]:
        raise CommandError(f"predicted frames {pred.shape[1:]} differ from ground truth {gt.shape[1:]}")
    report = metrics.evaluate(pred, gt, args.label)
    os.makedirs(os.path.dirname(os.path.abspath(args.out)), exist_ok=True)
    report.write_csv(args.out)
    rows = {args.label: metrics.report_entry(report)}
    print(f"{args.label}: PSNR {report.mean_psnr:.3f} dB, SSIM {report.mean_ssim:.4f}, "
          f"MSE {report.mean_mse:.3f} over {report.horizon} frames")
    if first >= 1:
        b0 = metrics.baseline_b0(gt_all[first - 1], gt)
        stem, ext = os.path.splitext(args.out)
        b0.write_csv(f"{stem}_b0{ext or '.csv'}")
        rows["B0"] = metrics.report_entry(b0)
        print(f"B0: PSNR {b0.mean_psnr:.3f} dB, SSIM {b0.mean_ssim:.4f}, MSE {b0.mean_mse:.3f}")
    else:
        log.warning("no frame precedes the evaluated span; B0 report skipped")
    print(metrics.format_table({"clip": {k: v for k, v in rows.items()}}))
    return EXIT_OK


def cmd_analyze(args):
    cfg = _load_run(args, check_paths=False)
    _seed(args, cfg.train.seed)
    model = _load_model(args, cfg)
    clip, cond = _conditioning(args, cfg, model)
    out = args.out or os.path.join(cfg.data.out_dir, "analysis")
    os.makedirs(out, exist_ok=True)
    if args.horizon == 0:
        return EXIT_OK
    full, fg, bg, residual = analysis.render_decomposition(
        model, cond, args.horizon, os.path.join(out, "decomposition"))
    log.info("max pre-activation additivity residual: %.3g", residual)
    _, alphas = predict_with_alpha_trace(model, cond, args.horizon)
    first = args.entry + model.delta
    analysis.export_alpha_curves(alphas, os.path.join(out, "alpha_trace.csv"), first)
    write_frame(analysis.temporal_average(full), os.path.join(out, "average_pred.png"))
    gt_span = clip[first:first + args.horizon]
    if len(gt_span):
        write_frame(analysis.temporal_average(gt_span), os.path.join(out, "average_gt.png"))
    print(f"wrote {3 * len(full)} decomposition images and alpha curves to {out}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="motionsel", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="override the configured seed")
    common.add_argument("--out", default=None, help="output directory (or report path)")

    p = sub.add_parser("train", parents=[common], help="two-stage training from a config")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_train)

    for name, func, helptext in (("predict", cmd_predict, "recursive prediction"),
                                 ("analyze", cmd_analyze, "decomposition renders and alpha curves")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("--config", required=True)
        p.add_argument("--checkpoint", required=True)
        p.add_argument("--entry", type=int, required=True, help="index of the first conditioning frame")
        p.add_argument("--horizon", type=int, required=True)
        p.set_defaults(func=func)

    p = sub.add_parser("evaluate", parents=[common], help="metrics of predicted frames vs ground truth")
    p.add_argument("--pred", required=True, help="directory of predicted PNG frames")
    p.add_argument("--gt", required=True, help="ground-truth frame pattern, e.g. clip/frame_%%03d.png")
    p.add_argument("--first", type=int, default=0,
                   help="ground-truth index matching the first predicted frame")
    p.add_argument("--label", default="M2")
    p.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None):
    level = os.environ.get("MOTIONSEL_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except CommandError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (ConfigError, FileNotFoundError, FrameFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
