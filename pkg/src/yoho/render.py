"""Training-set synthesis from one annotated image.

Sample circles are cut into geometric lesion seeds (textured circles and
equilateral triangles) which are pasted back onto the image at random
non-overlapping positions; masks and edge maps are emitted alongside as
exact ground truth.
"""
from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage

from yoho import geometry
from yoho.annotation import AnnotatedImage, rasterize_roi
from yoho.errors import (
    InvariantViolation,
    IoFailure,
    NoPlacementPossible,
    SeedTooSmall,
    SourceTooSmall,
)

MANIFEST_VERSION = 1

# Seeds with fewer mask pixels than this are degenerate.
MIN_SEED_PIXELS = 9


def splitmix64(*words: int) -> int:
    """Mix integer words into one 64-bit stream seed (splitmix64 finalizer)."""
    mask = (1 << 64) - 1
    state = 0
    for w in words:
        state = (state + (w & mask) + 0x9E3779B97F4A7C15) & mask
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & mask
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & mask
        state = z ^ (z >> 31)
    return state


def stream_rng(master_seed: int, index: int) -> np.random.Generator:
    """Independent per-index generator; parallel and serial runs agree."""
    return np.random.Generator(np.random.PCG64(splitmix64(master_seed, index)))


@dataclass(frozen=True)
class RenderConfig:
    """Hyper-parameters of the rendering step."""

    k: int = 1600
    seeds_per_sample: int = 16
    seed_scale_range: tuple[float, float] = (0.4, 1.0)
    pastes_per_image_range: tuple[int, int] = (2, 6)
    edge_thickness: int = 3
    out_size: tuple[int, int] = (256, 256)
    max_paste_attempts: int = 50
    rng_seed: int = 0
    # Exclude the sketched (unlabeled) lesion region from the losses unless a
    # pasted seed covers it. Off reverts to training on every pixel.
    ignore_real_lesion: bool = True

    def to_dict(self) -> dict:
        d = asdict(self)
        d["seed_scale_range"] = list(self.seed_scale_range)
        d["pastes_per_image_range"] = list(self.pastes_per_image_range)
        d["out_size"] = list(self.out_size)
        return d


@dataclass(frozen=True)
class LesionSeed:
    """One paste unit: a textured geometric cutout from a sample circle."""

    shape: str  # "circle" | "triangle"
    size: float  # radius for circles, side length for triangles
    orientation: float  # radians; 0 for circles
    texture: np.ndarray  # hxwx3 uint8
    mask: np.ndarray  # hxw bool, exact analytic footprint
    source_index: int

    @property
    def height(self) -> int:
        return self.mask.shape[0]

    @property
    def width(self) -> int:
        return self.mask.shape[1]


@dataclass
class TrainingSample:
    image: np.ndarray  # H'xW'x3 uint8
    mask: np.ndarray  # H'xW' bool
    edge: np.ndarray  # H'xW' bool
    placements: list[tuple[int, int, int]]  # (seed_index, x0, y0) top-left corners
    skipped: int = 0


@dataclass
class DatasetManifest:
    root: Path
    config: RenderConfig
    entries: list[dict]
    image_id: str
    dataset_hash: str

    @property
    def k(self) -> int:
        return len(self.entries)

    def image_path(self, i: int) -> Path:
        return self.root / self.entries[i]["image"]

    def mask_path(self, i: int) -> Path:
        return self.root / self.entries[i]["mask"]

    def edge_path(self, i: int) -> Path:
        return self.root / self.entries[i]["edge"]

    @property
    def ignore_path(self) -> Path:
        return self.root / "ignore.png"


def _uniform_in_disk(rng: np.random.Generator, radius: float) -> tuple[float, float]:
    r = radius * math.sqrt(rng.random())
    theta = 2.0 * math.pi * rng.random()
    return r * math.cos(theta), r * math.sin(theta)


def _cut_patch(image: np.ndarray, cx: float, cy: float, mask: np.ndarray) -> np.ndarray:
    """Crop the texture under a shape mask centered at (cx, cy) in image coords."""
    h, w = mask.shape
    x0 = int(round(cx - w / 2.0))
    y0 = int(round(cy - h / 2.0))
    x0 = min(max(x0, 0), image.shape[1] - w)
    y0 = min(max(y0, 0), image.shape[0] - h)
    return image[y0 : y0 + h, x0 : x0 + w].copy()


def extract_seeds(a: AnnotatedImage, cfg: RenderConfig, rng: np.random.Generator) -> list[LesionSeed]:
    """Cut M = N * seeds_per_sample seeds, alternating circle/triangle.

    Works in the coordinate frame of ``a`` itself; callers rendering at a
    reduced resolution pass the resized annotation.
    """
    n = len(a.samples)
    if n == 0:
        raise SourceTooSmall("no sample circles to cut from")
    lo, hi = cfg.seed_scale_range
    m = n * cfg.seeds_per_sample
    seeds: list[LesionSeed] = []
    for i in range(m):
        src_idx = i % n
        src = a.samples[src_idx]
        if src.r < 2.0:
            raise SourceTooSmall(f"sample {src_idx} radius {src.r:.2f} too small to cut seeds")
        # redraw degenerate (< 9 px) footprints: uniform over the valid sizes
        for attempt in range(20):
            scale = rng.uniform(lo, hi)
            if i % 2 == 0:
                radius = scale * src.r
                mask = geometry.circle_mask(radius)
                size, orientation, shape = radius, 0.0, "circle"
                fit_radius = radius
            else:
                side = scale * src.r
                # circumradius must fit the source circle for every orientation
                side = min(side, math.sqrt(3.0) * src.r)
                orientation = rng.uniform(0.0, 2.0 * math.pi)
                mask = geometry.triangle_mask(side, orientation)
                size, shape = side, "triangle"
                fit_radius = side / math.sqrt(3.0)
            if int(mask.sum()) >= MIN_SEED_PIXELS:
                break
        else:
            raise SeedTooSmall(
                f"seed {i} ({shape}, size {size:.2f}) from sample {src_idx} keeps rasterizing "
                f"below {MIN_SEED_PIXELS} px"
            )
        ox, oy = _uniform_in_disk(rng, max(src.r - fit_radius, 0.0))
        texture = _cut_patch(a.image, src.cx + ox, src.cy + oy, mask)
        seeds.append(
            LesionSeed(
                shape=shape,
                size=size,
                orientation=orientation,
                texture=texture,
                mask=mask,
                source_index=src_idx,
            )
        )
    return seeds


def paste_seeds(
    base: np.ndarray,
    seeds: list[LesionSeed],
    cfg: RenderConfig,
    rng: np.random.Generator,
) -> TrainingSample:
    """Paste p ~ U{lo..hi} random seeds at non-overlapping in-frame positions.

    Positions are rejection-sampled uniformly over the in-frame placements;
    a seed that cannot be placed within max_paste_attempts is skipped.
    """
    if not seeds:
        raise NoPlacementPossible("empty seed set")
    h, w = base.shape[:2]
    image = base.copy()
    mask = np.zeros((h, w), dtype=bool)
    placements: list[tuple[int, int, int]] = []
    skipped = 0

    lo, hi = cfg.pastes_per_image_range
    p = int(rng.integers(lo, hi + 1))
    picks = rng.integers(0, len(seeds), size=p)
    for seed_index in picks:
        seed = seeds[int(seed_index)]
        if seed.width > w or seed.height > h:
            skipped += 1
            continue
        placed = False
        for _ in range(cfg.max_paste_attempts):
            x0 = int(rng.integers(0, w - seed.width + 1))
            y0 = int(rng.integers(0, h - seed.height + 1))
            region = mask[y0 : y0 + seed.height, x0 : x0 + seed.width]
            if not (region & seed.mask).any():
                region |= seed.mask
                img_region = image[y0 : y0 + seed.height, x0 : x0 + seed.width]
                img_region[seed.mask] = seed.texture[seed.mask]
                placements.append((int(seed_index), x0, y0))
                placed = True
                break
        if not placed:
            skipped += 1
    if not placements:
        raise NoPlacementPossible(f"no seed placed after {p} draws x {cfg.max_paste_attempts} attempts")
    edge = derive_edge_map(mask, cfg.edge_thickness)
    return TrainingSample(image=image, mask=mask, edge=edge, placements=placements, skipped=skipped)


def derive_edge_map(mask: np.ndarray, thickness: int = 3) -> np.ndarray:
    """Inner boundary of a binary mask, thickened by Chebyshev dilation.

    A boundary pixel is a mask pixel whose 4-neighborhood leaves the mask
    (out-of-frame counts as background); the edge is every pixel within
    (thickness-1)//2 Chebyshev distance of a boundary pixel.
    """
    mask = mask.astype(bool)
    if not mask.any():
        return np.zeros_like(mask)
    cross = ndimage.generate_binary_structure(2, 1)
    interior = ndimage.binary_erosion(mask, structure=cross, border_value=0)
    boundary = mask & ~interior
    radius = (thickness - 1) // 2
    if radius > 0:
        square = np.ones((2 * radius + 1, 2 * radius + 1), dtype=bool)
        return ndimage.binary_dilation(boundary, structure=square)
    return boundary


def _save_png(path: Path, array: np.ndarray) -> None:
    if array.dtype == bool:
        array = array.astype(np.uint8) * 255
    try:
        Image.fromarray(array).save(path, format="PNG", compress_level=3)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def _sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    digest.update(path.read_bytes())
    return digest.hexdigest()


def generate_dataset(a: AnnotatedImage, cfg: RenderConfig, out_dir: str | os.PathLike) -> DatasetManifest:
    """Render K training triples to disk and write the manifest.

    Per-sample rng streams are split from cfg.rng_seed, so the output is a
    pure function of (image bytes, annotation, cfg) at any parallelism.
    """
    n = len(a.samples)
    m = n * cfg.seeds_per_sample
    if not (cfg.k > m > n):
        raise InvariantViolation(f"dataset sizes must satisfy K > M > N, got K={cfg.k}, M={m}, N={n}")

    root = Path(out_dir)
    try:
        for sub in ("images", "masks", "edges"):
            (root / sub).mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoFailure(f"cannot create dataset directory {root}: {exc}") from exc

    scaled = a.resized(cfg.out_size)
    seeds = extract_seeds(scaled, cfg, stream_rng(cfg.rng_seed, 0))

    # seed-free pixels of the sketched region would get contradictory labels
    # (unlabeled lesion in normal mode, seed-textured healthy tissue labeled 0
    # in reverse mode), so the sketch is the loss-exclusion zone in both modes
    roi = rasterize_roi(a, cfg.out_size)
    ignore_region = roi if cfg.ignore_real_lesion else np.zeros(cfg.out_size, dtype=bool)
    _save_png(root / "ignore.png", ignore_region)

    entries = []
    for k in range(cfg.k):
        rng = stream_rng(cfg.rng_seed, k + 1)
        try:
            sample = paste_seeds(scaled.image, seeds, cfg, rng)
        except NoPlacementPossible as exc:
            raise NoPlacementPossible(f"sample {k}: {exc}") from exc
        rel = {"image": f"images/{k:06d}.png", "mask": f"masks/{k:06d}.png", "edge": f"edges/{k:06d}.png"}
        _save_png(root / rel["image"], sample.image)
        _save_png(root / rel["mask"], sample.mask)
        _save_png(root / rel["edge"], sample.edge)
        entries.append(
            {
                "index": k,
                **rel,
                "placements": [list(p) for p in sample.placements],
                "skipped": sample.skipped,
                "sha256": {
                    "image": _sha256_file(root / rel["image"]),
                    "mask": _sha256_file(root / rel["mask"]),
                    "edge": _sha256_file(root / rel["edge"]),
                },
            }
        )

    hasher = hashlib.sha256()
    for e in entries:
        for key in ("image", "mask", "edge"):
            hasher.update(e["sha256"][key].encode())
    hasher.update(_sha256_file(root / "ignore.png").encode())
    dataset_hash = hasher.hexdigest()

    manifest = {
        "version": MANIFEST_VERSION,
        "image_id": a.image_id,
        "reverse": a.reverse,
        "config": cfg.to_dict(),
        "seed_summary": [
            {"shape": s.shape, "size": round(s.size, 4), "source": s.source_index} for s in seeds
        ],
        "counts": {"n": n, "m": m, "k": cfg.k},
        "ignore": "ignore.png",
        "entries": entries,
        "dataset_hash": dataset_hash,
    }
    try:
        (root / "manifest.json").write_text(json.dumps(manifest, indent=1))
    except OSError as exc:
        raise IoFailure(f"cannot write manifest: {exc}") from exc
    return DatasetManifest(root=root, config=cfg, entries=entries, image_id=a.image_id, dataset_hash=dataset_hash)


def load_manifest(path: str | os.PathLike) -> DatasetManifest:
    """Read back a manifest.json (path may be the file or its directory)."""
    p = Path(path)
    if p.is_dir():
        p = p / "manifest.json"
    if not p.is_file():
        raise IoFailure(f"manifest not found: {p}")
    doc = json.loads(p.read_text())
    cfg_d = dict(doc["config"])
    cfg = RenderConfig(
        k=cfg_d["k"],
        seeds_per_sample=cfg_d["seeds_per_sample"],
        seed_scale_range=tuple(cfg_d["seed_scale_range"]),
        pastes_per_image_range=tuple(cfg_d["pastes_per_image_range"]),
        edge_thickness=cfg_d["edge_thickness"],
        out_size=tuple(cfg_d["out_size"]),
        max_paste_attempts=cfg_d["max_paste_attempts"],
        rng_seed=cfg_d["rng_seed"],
        ignore_real_lesion=cfg_d.get("ignore_real_lesion", True),
    )
    return DatasetManifest(
        root=p.parent,
        config=cfg,
        entries=doc["entries"],
        image_id=doc["image_id"],
        dataset_hash=doc["dataset_hash"],
    )
