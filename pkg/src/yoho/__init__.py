"""One-image-one-network lesion segmentation.

From a single annotated endoscopy image the pipeline renders a synthetic
training set of pasted geometric lesion seeds, overfits an edge-enhanced
UNet on it, and applies the trained network back to the same image.
"""

__version__ = "0.1.0"

from yoho.annotation import AnnotatedImage, Polygon, SampleCircle, parse_annotation
from yoho.render import RenderConfig, generate_dataset
from yoho.config import RunConfig

__all__ = [
    "AnnotatedImage",
    "Polygon",
    "SampleCircle",
    "parse_annotation",
    "RenderConfig",
    "generate_dataset",
    "RunConfig",
]
