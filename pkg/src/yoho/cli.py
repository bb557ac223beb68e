"""Command-line entry points for the three-step pipeline.

    yoho render  ANNOTATION --out DIR [--config FILE] [--profile NAME] [--seed N]
    yoho train   MANIFEST   --out DIR ...
    yoho infer   ANNOTATION CHECKPOINT --out DIR ...
    yoho eval    PRED_DIR GT_DIR --out DIR
    yoho run     ANNOTATION --out DIR ...
    yoho serve   [--port N] [--out DIR]

Exit codes: 0 ok, 2 validation error, 3 I/O error, 4 training abort.
"""
from __future__ import annotations

import argparse
import json
import os
import shutil
import sys
import tempfile
import time
from pathlib import Path

import numpy as np
from PIL import Image

from yoho import annotation as anno
from yoho import render as render_mod
from yoho import train_infer
from yoho.config import PROFILES, RunConfig, load_config
from yoho.errors import (
    CheckpointMismatch,
    InvariantViolation,
    IoFailure,
    MalformedAnnotation,
    MissingImage,
    NonFiniteLoss,
    NoPlacementPossible,
    YohoError,
)
from yoho.eunet import load_checkpoint
from yoho.metrics import evaluate_run

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_IO = 3
EXIT_TRAINING = 4

_VALIDATION_ERRORS = (MalformedAnnotation, MissingImage, InvariantViolation, NoPlacementPossible, ValueError)
_IO_ERRORS = (IoFailure, CheckpointMismatch, FileNotFoundError, OSError)
_TRAINING_ERRORS = (NonFiniteLoss,)


def _fail(code: int, kind: str, message: str) -> int:
    print(json.dumps({"error": kind, "message": message}), file=sys.stderr)
    return code


def _device(args) -> str:
    return args.device or os.environ.get("YOHO_DEVICE", "cpu")


def _load_annotation(path: str) -> anno.AnnotatedImage:
    raw = Path(path).read_bytes()
    return anno.parse_annotation(raw, base_dir=Path(path).parent)


def _prepare_out(out: Path, force: bool, marker: str) -> bool:
    """True when the artifact already exists and may be kept (no --force)."""
    if (out / marker).exists():
        if not force:
            print(f"output {out} already complete; keeping (use --force to regenerate)")
            return True
        shutil.rmtree(out)
    return False


def _atomic_dir(final: Path):
    final.parent.mkdir(parents=True, exist_ok=True)
    return Path(tempfile.mkdtemp(prefix=final.name + ".tmp-", dir=final.parent))


def _commit_dir(tmp: Path, final: Path) -> None:
    if final.exists():
        shutil.rmtree(final)
    tmp.replace(final)


def cmd_render(args) -> int:
    cfg = _config_for(args)
    a = _load_annotation(args.annotation)
    out = _out_dir(args, cfg, "dataset")
    if _prepare_out(out, args.force, "manifest.json"):
        return EXIT_OK
    tmp = _atomic_dir(out)
    try:
        manifest = render_mod.generate_dataset(a, cfg.render, tmp)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    _commit_dir(tmp, out)
    print(f"dataset: {out}  K={manifest.k}  hash={manifest.dataset_hash[:16]}")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _config_for(args)
    manifest = render_mod.load_manifest(args.manifest)
    out = _out_dir(args, cfg, "model")
    if _prepare_out(out, args.force, "checkpoint.pt"):
        return EXIT_OK
    tmp = _atomic_dir(out)
    try:
        model, history = train_infer.train(
            manifest, cfg.net, cfg.loss, cfg.train,
            device=_device(args), checkpoint_path=tmp / "checkpoint.pt",
            encoder_checkpoint=args.encoder_checkpoint,
        )
        history.save(tmp / "history.csv")
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    _commit_dir(tmp, out)
    print(f"checkpoint: {out / 'checkpoint.pt'}  final train dice={history.final_train_dice:.4f}")
    return EXIT_OK


def _write_mask(result: train_infer.SegmentationResult, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    mask8 = (result.binary_mask.astype(np.uint8)) * 255
    prob8 = np.clip(result.prob_map * 255.0, 0, 255).astype(np.uint8)
    for name, arr in (("mask.png", mask8), ("prob.png", prob8)):
        with tempfile.NamedTemporaryFile(dir=out, suffix=".tmp", delete=False) as fh:
            Image.fromarray(arr).save(fh, format="PNG")
            tmp_name = fh.name
        os.replace(tmp_name, out / name)


def cmd_infer(args) -> int:
    cfg = _config_for(args)
    a = _load_annotation(args.annotation)
    model = load_checkpoint(args.checkpoint, device=_device(args))
    opts = train_infer.InferOptions(
        threshold=cfg.infer.threshold,
        roi_gating=cfg.infer.roi_gating,
        out_size=cfg.render.out_size,
        device=_device(args),
    )
    result = train_infer.infer(a, model, opts)
    out = _out_dir(args, cfg)
    _write_mask(result, out)
    print(f"mask: {out / 'mask.png'}")
    return EXIT_OK


def cmd_eval(args) -> int:
    report = evaluate_run(args.pred_dir, args.gt_dir, out_dir=args.out)
    print(report.summary())
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = _config_for(args)
    t0 = time.time()
    out = _out_dir(args, cfg)
    a = _load_annotation(args.annotation)

    dataset_dir = out / "dataset"
    if not _prepare_out(dataset_dir, args.force, "manifest.json"):
        tmp = _atomic_dir(dataset_dir)
        try:
            render_mod.generate_dataset(a, cfg.render, tmp)
        except BaseException:
            shutil.rmtree(tmp, ignore_errors=True)
            raise
        _commit_dir(tmp, dataset_dir)
    manifest = render_mod.load_manifest(dataset_dir)

    model, history = train_infer.train(
        manifest, cfg.net, cfg.loss, cfg.train,
        device=_device(args), checkpoint_path=out / "checkpoint.pt",
        encoder_checkpoint=args.encoder_checkpoint,
    )
    history.save(out / "history.csv")

    opts = train_infer.InferOptions(
        threshold=cfg.infer.threshold,
        roi_gating=cfg.infer.roi_gating,
        out_size=cfg.render.out_size,
        device=_device(args),
    )
    result = train_infer.infer(a, model, opts)
    _write_mask(result, out)
    elapsed = time.time() - t0
    (out / "run.json").write_text(json.dumps({
        "annotation": str(args.annotation),
        "profile": args.profile,
        "wall_time_s": round(elapsed, 2),
        "final_train_dice": history.final_train_dice,
    }, indent=1))
    print(f"run complete in {elapsed:.1f}s  mask: {out / 'mask.png'}")
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from yoho.service import create_app

    app = create_app(output_root=Path(args.out))
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return EXIT_OK


def _config_for(args) -> RunConfig:
    cfg = load_config(getattr(args, "config", None), profile=getattr(args, "profile", "full"))
    if getattr(args, "seed", None) is not None:
        cfg = cfg.with_seed(args.seed)
    return cfg


def _out_dir(args, cfg: RunConfig, sub: str = "") -> Path:
    if args.out:
        return Path(args.out)
    base = Path(cfg.output_root) / cfg.run_id
    return base / sub if sub else base


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON run config file")
    p.add_argument("--profile", default="full", choices=sorted(PROFILES))
    p.add_argument("--seed", type=int, help="override render and train rng seeds")
    p.add_argument("--out", help="output directory (default: <output_root>/<run_id>/)")
    p.add_argument("--force", action="store_true", help="overwrite existing outputs")
    p.add_argument("--device", help="compute device (default: env YOHO_DEVICE or cpu)")
    p.add_argument("--encoder-checkpoint", help="pretrained encoder weights (.pt)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="yoho", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("render", help="synthesize the training set from one annotation")
    p.add_argument("annotation")
    _add_common(p)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("train", help="train the network on a rendered dataset")
    p.add_argument("manifest")
    _add_common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("infer", help="apply a trained checkpoint back to the image")
    p.add_argument("annotation")
    p.add_argument("checkpoint")
    _add_common(p)
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("eval", help="score predictions against ground truths")
    p.add_argument("pred_dir")
    p.add_argument("gt_dir")
    p.add_argument("--out", required=False, help="report directory")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("run", help="render + train + infer in one go")
    p.add_argument("annotation")
    _add_common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("serve", help="start the annotation/run HTTP service")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--out", default="runs", help="run artifact root")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _TRAINING_ERRORS as exc:
        return _fail(EXIT_TRAINING, type(exc).__name__, str(exc))
    except _VALIDATION_ERRORS as exc:
        return _fail(EXIT_VALIDATION, type(exc).__name__, str(exc))
    except _IO_ERRORS as exc:
        return _fail(EXIT_IO, type(exc).__name__, str(exc))
    except YohoError as exc:
        return _fail(EXIT_VALIDATION, type(exc).__name__, str(exc))


if __name__ == "__main__":
    sys.exit(main())
