import json

import numpy as np
import pytest
from PIL import Image

from yoho.annotation import AnnotatedImage, Polygon, SampleCircle

# acceptance tests register their PASS/FAIL lines here; printed in the
# terminal summary so they survive output capture
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def make_test_image(size: int = 96, seed: int = 3) -> np.ndarray:
    """Greenish background with a distinctly textured square lesion at rows/cols 20..60."""
    rng = np.random.default_rng(seed)
    img = np.zeros((size, size, 3), dtype=np.float64)
    img[..., 0] = 60
    img[..., 1] = 120
    img[..., 2] = 80
    img += rng.normal(0, 3, img.shape)
    yy, xx = np.mgrid[0:size, 0:size]
    lesion = (yy >= 20) & (yy < 60) & (xx >= 20) & (xx < 60)
    tex = np.zeros_like(img)
    tex[..., 0] = 170 + 20 * np.sin(xx / 3.0)
    tex[..., 1] = 70
    tex[..., 2] = 60 + rng.normal(0, 10, (size, size))
    img[lesion] = tex[lesion]
    return np.clip(img, 0, 255).astype(np.uint8)


def make_annotation(image: np.ndarray | None = None, reverse: bool = False) -> AnnotatedImage:
    """In-memory annotation over the textured-square test image."""
    if image is None:
        image = make_test_image()
    roi = Polygon(((15.0, 15.0), (65.0, 15.0), (65.0, 65.0), (15.0, 65.0)))
    samples = (SampleCircle(30.0, 30.0, 9.0), SampleCircle(48.0, 45.0, 10.0))
    if reverse:
        # sketch the healthy strip instead and sample its texture
        roi = Polygon(((0.0, 70.0), (95.9, 70.0), (95.9, 95.9), (0.0, 95.9)))
        samples = (SampleCircle(30.0, 82.0, 9.0), SampleCircle(60.0, 83.0, 10.0))
    return AnnotatedImage(image=image, rois=(roi,), reverse=reverse, samples=samples, image_id="fixture")


def write_annotation_files(tmp_path, image: np.ndarray | None = None, name: str = "case"):
    """Write image + annotation JSON document for CLI-level tests."""
    if image is None:
        image = make_test_image()
    img_path = tmp_path / f"{name}.png"
    Image.fromarray(image).save(img_path)
    doc = {
        "image": f"{name}.png",
        "reverse": False,
        "rois": [[[15.0, 15.0], [65.0, 15.0], [65.0, 65.0], [15.0, 65.0]]],
        "samples": [
            {"cx": 30.0, "cy": 30.0, "r": 9.0},
            {"cx": 48.0, "cy": 45.0, "r": 10.0},
        ],
    }
    anno_path = tmp_path / f"{name}.json"
    anno_path.write_text(json.dumps(doc))
    return anno_path, doc


def make_majority_lesion_annotation(size: int = 96, seed: int = 5):
    """Reverse-mode fixture: lesion texture fills the frame except a healthy
    strip along the bottom, which is sketched and sampled. Returns the
    annotation and the true lesion mask."""
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:size, 0:size]
    img = np.zeros((size, size, 3), float)
    img[..., 0] = 168 + 20 * np.sin(xx / 4.0) * np.cos(yy / 6.0)
    img[..., 1] = 70 + rng.normal(0, 8, (size, size))
    img[..., 2] = 62
    healthy = yy >= 72
    tex = np.zeros_like(img)
    tex[..., 0] = 58
    tex[..., 1] = 122 + 12 * np.sin(xx / 7.0)
    tex[..., 2] = 84
    tex += rng.normal(0, 4, tex.shape)
    img[healthy] = tex[healthy]
    img = np.clip(img, 0, 255).astype(np.uint8)
    roi = Polygon(((0.0, 72.0), (float(size) - 0.1, 72.0), (float(size) - 0.1, float(size) - 0.1), (0.0, float(size) - 0.1)))
    samples = (SampleCircle(25.0, 84.0, 9.0), SampleCircle(65.0, 83.5, 9.5))
    a = AnnotatedImage(image=img, rois=(roi,), reverse=True, samples=samples, image_id="majority")
    return a, ~healthy


@pytest.fixture
def annotated() -> AnnotatedImage:
    return make_annotation()


@pytest.fixture
def annotation_files(tmp_path):
    return write_annotation_files(tmp_path)
