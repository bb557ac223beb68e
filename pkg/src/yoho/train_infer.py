"""Two-phase training schedule and the apply-back inference step."""
from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import cv2
import numpy as np
import torch
from PIL import Image

from yoho.annotation import AnnotatedImage, rasterize_roi
from yoho.errors import IoFailure, NonFiniteLoss
from yoho.eunet import EUNet, NetworkConfig, init_params, save_checkpoint
from yoho.losses import LossWeights, total_loss
from yoho.render import DatasetManifest, splitmix64

_BATCH_STREAM_TAG = 0x5B4C9


@dataclass(frozen=True)
class TrainConfig:
    """Hyper-parameters of the two-phase schedule."""

    phase1_steps: int = 1000
    phase2_steps: int = 1000
    batch_size: int = 32
    phase1_lr: float = 1.0e-3
    phase2_lr: float = 3.0e-4
    decay_factor: float = 0.9
    decay_every: int = 50
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    rng_seed: int = 0
    checkpoint_every: int = 50

    def __post_init__(self):
        if self.phase1_steps <= 0 or self.phase2_steps <= 0:
            raise ValueError("phase steps must be positive")
        if self.phase1_lr <= 0 or self.phase2_lr <= 0:
            raise ValueError("learning rates must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


def lr_at(step: int, phase: int, cfg: TrainConfig) -> float:
    """Stepwise decayed rate: base_lr * decay^(step // decay_every), per phase."""
    if phase == 1:
        base, total = cfg.phase1_lr, cfg.phase1_steps
    elif phase == 2:
        base, total = cfg.phase2_lr, cfg.phase2_steps
    else:
        raise ValueError(f"phase must be 1 or 2, got {phase}")
    if not 0 <= step < total:
        raise ValueError(f"step {step} outside [0, {total}) for phase {phase}")
    return base * cfg.decay_factor ** (step // cfg.decay_every)


@dataclass
class TrainHistory:
    rows: list[dict] = field(default_factory=list)
    final_train_dice: float | None = None

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["step", "phase", "lr", "seg", "edge", "consist", "total", "train_dice"])
        for r in self.rows:
            dice = "" if r.get("train_dice") is None else f"{r['train_dice']:.6f}"
            writer.writerow(
                [r["step"], r["phase"], f"{r['lr']:.8g}", f"{r['seg']:.6f}", f"{r['edge']:.6f}",
                 f"{r['consist']:.6f}", f"{r['total']:.6f}", dice]
            )
        return buf.getvalue()

    def save(self, path: str | os.PathLike) -> None:
        Path(path).write_text(self.to_csv())


class TrainingArrays:
    """Dataset triples held in memory as arrays (a phantom run is ~20 MB)."""

    def __init__(self, images: np.ndarray, masks: np.ndarray, edges: np.ndarray, ignore: np.ndarray):
        self.images = images  # KxHxWx3 uint8
        self.masks = masks  # KxHxW bool
        self.edges = edges  # KxHxW bool
        self.ignore = ignore  # HxW bool

    def __len__(self) -> int:
        return len(self.images)

    @classmethod
    def from_manifest(cls, manifest: DatasetManifest) -> "TrainingArrays":
        def read(path: Path, mode: str) -> np.ndarray:
            try:
                with Image.open(path) as im:
                    return np.asarray(im.convert(mode))
            except OSError as exc:
                raise IoFailure(f"cannot read {path}: {exc}") from exc

        images, masks, edges = [], [], []
        for i in range(manifest.k):
            images.append(read(manifest.image_path(i), "RGB"))
            masks.append(read(manifest.mask_path(i), "L") >= 128)
            edges.append(read(manifest.edge_path(i), "L") >= 128)
        ignore_path = manifest.ignore_path
        if manifest.config.ignore_real_lesion and ignore_path.is_file():
            ignore = read(ignore_path, "L") >= 128
        else:
            ignore = np.zeros(masks[0].shape, dtype=bool)
        return cls(np.stack(images), np.stack(masks), np.stack(edges), ignore)

    def batch(self, indices: np.ndarray, device: str) -> tuple[torch.Tensor, ...]:
        x = torch.from_numpy(self.images[indices]).to(device).permute(0, 3, 1, 2).float() / 255.0
        s = torch.from_numpy(self.masks[indices]).to(device)[:, None].float()
        e = torch.from_numpy(self.edges[indices]).to(device)[:, None].float()
        # pixels of the unlabeled region stay excluded unless a seed covers them
        ig = torch.from_numpy(self.ignore[None, None].repeat(len(indices), 0)).to(device) & (s < 0.5)
        return x, s, e, ig


class _BatchSampler:
    """Seeded shuffled cycling over sample indices."""

    def __init__(self, n: int, batch_size: int, seed: int):
        self.n = n
        self.batch_size = batch_size
        self.rng = np.random.Generator(np.random.PCG64(splitmix64(seed, _BATCH_STREAM_TAG)))
        self._queue: list[int] = []

    def next_batch(self) -> np.ndarray:
        while len(self._queue) < self.batch_size:
            self._queue.extend(self.rng.permutation(self.n).tolist())
        out, self._queue = self._queue[: self.batch_size], self._queue[self.batch_size :]
        return np.asarray(out)


def batch_dice(s_hat: torch.Tensor, s: torch.Tensor, ignore: torch.Tensor | None, threshold: float = 0.5) -> float:
    """Mean per-sample Dice of the thresholded prediction over trusted pixels."""
    pred = s_hat >= threshold
    target = s >= 0.5
    valid = torch.ones_like(target) if ignore is None else ~ignore
    dims = tuple(range(1, pred.dim()))
    inter = (pred & target & valid).sum(dim=dims).double()
    denom = (pred & valid).sum(dim=dims).double() + (target & valid).sum(dim=dims).double()
    dice = torch.where(denom > 0, 2.0 * inter / denom, torch.ones_like(inter))
    return float(dice.mean())


def train(
    manifest: DatasetManifest,
    net_cfg: NetworkConfig,
    weights: LossWeights,
    cfg: TrainConfig,
    device: str = "cpu",
    checkpoint_path: str | os.PathLike | None = None,
    encoder_checkpoint: str | os.PathLike | None = None,
    on_step: Callable[[int, int, float], None] | None = None,
    on_phase_end: Callable[[int, EUNet], None] | None = None,
) -> tuple[EUNet, TrainHistory]:
    """Run the frozen-encoder phase then the full refinement phase.

    Phase 1 trains every non-encoder parameter with the encoder frozen;
    phase 2 unfreezes and refines the full model. Batches are drawn by
    seeded shuffled cycling, so a fixed (manifest, configs) pair yields a
    bit-identical final model on one device.
    """
    data = TrainingArrays.from_manifest(manifest)
    if len(data) < cfg.batch_size:
        raise ValueError(f"dataset K={len(data)} smaller than batch_size={cfg.batch_size}")

    model = init_params(net_cfg, seed=cfg.rng_seed, encoder_checkpoint=encoder_checkpoint, device=device)
    sampler = _BatchSampler(len(data), cfg.batch_size, cfg.rng_seed)
    history = TrainHistory()
    total_steps = cfg.phase1_steps + cfg.phase2_steps
    global_step = 0

    for phase, steps in ((1, cfg.phase1_steps), (2, cfg.phase2_steps)):
        model.set_encoder_frozen(phase == 1)
        model.train()
        params = model.non_encoder_parameters() if phase == 1 else model.parameters()
        optimizer = torch.optim.Adam(params, lr=lr_at(0, phase, cfg), betas=cfg.betas, eps=cfg.eps)

        for step in range(steps):
            lr = lr_at(step, phase, cfg)
            for group in optimizer.param_groups:
                group["lr"] = lr
            x, s, e, ig = data.batch(sampler.next_batch(), device)
            outputs = model(x)
            breakdown = total_loss(outputs, s, e, ig, weights)
            optimizer.zero_grad()
            breakdown.total.backward()
            optimizer.step()

            row = {"step": global_step, "phase": phase, "lr": lr, **breakdown.detached(), "train_dice": None}
            if not math.isfinite(row["total"]):
                raise NonFiniteLoss(step, phase, row)
            if cfg.checkpoint_every > 0 and (step + 1) % cfg.checkpoint_every == 0:
                row["train_dice"] = batch_dice(outputs.s_hat.detach(), s, ig)
            history.rows.append(row)
            global_step += 1
            if on_step is not None:
                on_step(global_step, total_steps, row["total"])
        if on_phase_end is not None:
            on_phase_end(phase, model)

    history.final_train_dice = evaluate_train_dice(model, data, device=device)
    if checkpoint_path is not None:
        save_checkpoint(model, checkpoint_path)
    return model, history


def evaluate_train_dice(model: EUNet, data: TrainingArrays, device: str = "cpu", batch_size: int = 16) -> float:
    """Mean Dice of the trained model over the whole training set."""
    model.eval()
    scores = []
    with torch.no_grad():
        for start in range(0, len(data), batch_size):
            idx = np.arange(start, min(start + batch_size, len(data)))
            x, s, _, ig = data.batch(idx, device)
            out = model(x)
            scores.append(batch_dice(out.s_hat, s, ig) * len(idx))
    return float(sum(scores) / len(data))


@dataclass(frozen=True)
class InferOptions:
    threshold: float = 0.5
    roi_gating: bool = True
    out_size: tuple[int, int] = (256, 256)
    device: str = "cpu"


@dataclass
class SegmentationResult:
    prob_map: np.ndarray  # native HxW float32, post-inversion, post-gating
    binary_mask: np.ndarray  # native HxW bool
    threshold: float
    roi_gating: bool
    reverse: bool


def infer(a: AnnotatedImage, model, opts: InferOptions = InferOptions()) -> SegmentationResult:
    """Apply the trained network back to the annotated image.

    The image is resized to the training resolution, passed through the
    network, inverted in reverse-ROI mode, upsampled to native resolution
    and optionally gated to the clinician's region before thresholding.
    """
    out_h, out_w = opts.out_size
    scaled = a.resized((out_h, out_w))
    x = torch.from_numpy(scaled.image).permute(2, 0, 1).float()[None] / 255.0
    if isinstance(model, torch.nn.Module):
        model.eval()
    with torch.no_grad():
        outputs = model(x.to(opts.device))
    s_hat = outputs.s_hat[0, 0].cpu().numpy().astype(np.float32)
    if a.reverse:
        s_hat = 1.0 - s_hat
    prob = cv2.resize(s_hat, (a.width, a.height), interpolation=cv2.INTER_LINEAR)
    prob = np.clip(prob, 0.0, 1.0)
    if opts.roi_gating:
        roi = rasterize_roi(a)
        gate = ~roi if a.reverse else roi
        prob = prob * gate.astype(np.float32)
    return SegmentationResult(
        prob_map=prob,
        binary_mask=prob >= opts.threshold,
        threshold=opts.threshold,
        roi_gating=opts.roi_gating,
        reverse=a.reverse,
    )
