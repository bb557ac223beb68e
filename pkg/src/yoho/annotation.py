"""Clinician annotation: types, parsing, validation and ROI rasterization.

The annotation document is UTF-8 JSON::

    {"image": path, "reverse": bool,
     "rois": [[[x, y], ...], ...],
     "samples": [{"cx": f, "cy": f, "r": f}, ...]}

Coordinates are stored at native image resolution; resizing for training
carries the annotation along by uniform scaling (see ``AnnotatedImage.resized``).
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace
from pathlib import Path

import cv2
import numpy as np
from PIL import Image

from yoho import geometry
from yoho.errors import DegeneratePolygon, InvariantViolation, MalformedAnnotation, MissingImage

# Samples below this radius cut degenerate textures.
R_MIN_DEFAULT = 8.0

# Recommended sample count range; outside it we warn, not fail.
SAMPLE_COUNT_RANGE = (2, 10)

# Polygons smaller than this fraction of the image area draw a warning.
TINY_ROI_FRACTION = 0.001


@dataclass(frozen=True)
class Polygon:
    """Closed simple polygon; the last vertex connects back to the first."""

    vertices: tuple[tuple[float, float], ...]

    def __post_init__(self):
        object.__setattr__(self, "vertices", tuple((float(x), float(y)) for x, y in self.vertices))

    def area(self) -> float:
        return geometry.polygon_area(self.vertices)

    def contains(self, x: float, y: float) -> bool:
        return geometry.point_in_polygon(x, y, self.vertices)


@dataclass(frozen=True)
class SampleCircle:
    """Clinician-placed circular texture sample."""

    cx: float
    cy: float
    r: float


@dataclass(frozen=True)
class AnnotatedImage:
    """The single input image plus the clinician sketch seeding the pipeline."""

    image: np.ndarray  # HxWx3 uint8, RGB
    rois: tuple[Polygon, ...]
    reverse: bool
    samples: tuple[SampleCircle, ...]
    image_id: str
    image_path: str = ""

    @property
    def height(self) -> int:
        return self.image.shape[0]

    @property
    def width(self) -> int:
        return self.image.shape[1]

    def roi_contains(self, x: float, y: float) -> bool:
        return any(p.contains(x, y) for p in self.rois)

    def resized(self, out_size: tuple[int, int]) -> "AnnotatedImage":
        """Scale image and annotation to (H', W'). Radii use min(sx, sy) so
        the scaled sample stays inside the original sample's footprint."""
        out_h, out_w = out_size
        sx = out_w / self.width
        sy = out_h / self.height
        interp = cv2.INTER_AREA if out_w * out_h < self.width * self.height else cv2.INTER_LINEAR
        img = cv2.resize(self.image, (out_w, out_h), interpolation=interp)
        rois = tuple(Polygon(tuple((x * sx, y * sy) for x, y in p.vertices)) for p in self.rois)
        samples = tuple(SampleCircle(c.cx * sx, c.cy * sy, c.r * min(sx, sy)) for c in self.samples)
        return replace(self, image=img, rois=rois, samples=samples)


@dataclass
class ValidationReport:
    """Hard invariant failures (errors) and advisory warnings."""

    errors: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors

    def to_dict(self) -> dict:
        return {"errors": list(self.errors), "warnings": list(self.warnings)}


def load_image(path: str | os.PathLike) -> np.ndarray:
    """Read an image file as HxWx3 uint8 RGB."""
    p = Path(path)
    if not p.is_file():
        raise MissingImage(f"image file not found: {p}")
    try:
        with Image.open(p) as im:
            arr = np.asarray(im.convert("RGB"), dtype=np.uint8)
    except Exception as exc:  # decode failure
        raise MissingImage(f"image file cannot be decoded: {p}: {exc}") from exc
    return arr


def parse_annotation(raw: bytes | str, base_dir: str | os.PathLike | None = None, r_min: float = R_MIN_DEFAULT) -> AnnotatedImage:
    """Parse an annotation document, load its image and check every invariant.

    Relative image paths resolve against ``base_dir`` when given.
    """
    if isinstance(raw, bytes):
        try:
            raw = raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedAnnotation(f"annotation is not UTF-8: {exc}") from exc
    try:
        doc = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise MalformedAnnotation(f"annotation is not valid JSON: {exc}") from exc
    a = annotation_from_dict(doc, base_dir=base_dir)
    report = validate(a, r_min=r_min)
    if not report.ok:
        raise InvariantViolation("; ".join(report.errors))
    return a


def annotation_from_dict(doc: dict, base_dir: str | os.PathLike | None = None) -> AnnotatedImage:
    """Build an AnnotatedImage from a parsed document without invariant checks."""
    if not isinstance(doc, dict):
        raise MalformedAnnotation("annotation document must be a JSON object")
    missing = {"image", "rois", "samples"} - doc.keys()
    if missing:
        raise MalformedAnnotation(f"annotation missing keys: {sorted(missing)}")
    image_path = doc["image"]
    if not isinstance(image_path, str):
        raise MalformedAnnotation("'image' must be a path string")
    resolved = Path(base_dir) / image_path if base_dir is not None else Path(image_path)
    image = load_image(resolved)

    try:
        rois = tuple(Polygon(tuple((float(x), float(y)) for x, y in verts)) for verts in doc["rois"])
        samples = tuple(
            SampleCircle(float(s["cx"]), float(s["cy"]), float(s["r"])) for s in doc["samples"]
        )
        reverse = bool(doc.get("reverse", False))
    except (TypeError, ValueError, KeyError) as exc:
        raise MalformedAnnotation(f"annotation geometry malformed: {exc}") from exc

    image_id = doc.get("image_id") or Path(image_path).stem
    return AnnotatedImage(
        image=image,
        rois=rois,
        reverse=reverse,
        samples=samples,
        image_id=str(image_id),
        image_path=str(image_path),
    )


def serialize(a: AnnotatedImage) -> str:
    """Inverse of parse_annotation for the geometry fields (field-exact)."""
    doc = {
        "image": a.image_path or a.image_id,
        "image_id": a.image_id,
        "reverse": a.reverse,
        "rois": [[[x, y] for x, y in p.vertices] for p in a.rois],
        "samples": [{"cx": s.cx, "cy": s.cy, "r": s.r} for s in a.samples],
    }
    return json.dumps(doc, indent=1)


def validate(a: AnnotatedImage, r_min: float = R_MIN_DEFAULT) -> ValidationReport:
    """Collect hard invariant failures and advisory warnings."""
    rep = ValidationReport()
    h, w = a.height, a.width

    if not a.rois:
        rep.errors.append("rois: at least one polygon required")
    for i, poly in enumerate(a.rois):
        if len(poly.vertices) < 3:
            rep.errors.append(f"rois[{i}]: polygon needs >= 3 vertices, has {len(poly.vertices)}")
            continue
        for j, (x, y) in enumerate(poly.vertices):
            if not (0 <= x < w and 0 <= y < h):
                rep.errors.append(f"rois[{i}]: vertex {j} ({x}, {y}) outside [0,{w})x[0,{h})")
        if not geometry.polygon_is_simple(poly.vertices):
            rep.errors.append(f"rois[{i}]: polygon is self-intersecting")
        elif poly.area() < TINY_ROI_FRACTION * w * h:
            rep.warnings.append(f"rois[{i}]: area {poly.area():.1f} px^2 is below 0.1% of the image")

    if len(a.samples) < 1:
        rep.errors.append("samples: at least one sample circle required")
    for i, c in enumerate(a.samples):
        if c.r <= 0:
            rep.errors.append(f"samples[{i}]: radius must be positive, got {c.r}")
            continue
        if c.r < r_min:
            rep.errors.append(f"samples[{i}]: radius {c.r} below minimum {r_min}")
        if c.cx - c.r < 0 or c.cx + c.r > w or c.cy - c.r < 0 or c.cy + c.r > h:
            rep.errors.append(f"samples[{i}]: circle extends beyond image bounds ({c.cx},{c.cy},r={c.r})")
            continue
        # texture is always sampled from the certified (sketched) region:
        # the lesion in normal mode, the healthy region in reverse mode
        inside = a.roi_contains(c.cx, c.cy)
        if not inside:
            region = "sketched healthy region (reverse mode)" if a.reverse else "sketched ROI"
            rep.errors.append(f"samples[{i}]: center outside the {region}")

    lo, hi = SAMPLE_COUNT_RANGE
    if a.samples and not (lo <= len(a.samples) <= hi):
        rep.warnings.append(f"samples: count {len(a.samples)} outside recommended range {lo}-{hi}")
    return rep


def rasterize_roi(a: AnnotatedImage, out_size: tuple[int, int] | None = None) -> np.ndarray:
    """Rasterize the union of sketched polygons onto an HxW boolean mask.

    In reverse mode this is still the sketched (healthy) region; inversion
    semantics live at inference time.
    """
    if out_size is None:
        out_size = (a.height, a.width)
    h, w = out_size
    if h <= 0 or w <= 0:
        raise ValueError(f"out_size must be positive, got {out_size}")
    sx = w / a.width
    sy = h / a.height
    polys = [[(x * sx, y * sy) for x, y in p.vertices] for p in a.rois]
    mask = geometry.rasterize_polygons(polys, h, w)
    if not mask.any():
        raise DegeneratePolygon("sketched region rasterizes to zero area")
    return mask
