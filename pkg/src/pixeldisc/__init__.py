"""Pixel-discretization defenses: codebook construction, discretization,
hardness diagnostics, and sound robustness certification."""

__version__ = "0.1.0"

from .core import (
    Codebook,
    ConfigError,
    Image,
    LabeledDataset,
    Metric,
    ParseError,
    PixeldiscError,
    StructuralError,
    distance,
    load_codebook,
    nearest_code,
    save_codebook,
)
from .discretize import Discretizer, SurrogateConfig, discretize_dataset, discretize_image

__all__ = [
    "Codebook",
    "ConfigError",
    "Discretizer",
    "Image",
    "LabeledDataset",
    "Metric",
    "ParseError",
    "PixeldiscError",
    "StructuralError",
    "SurrogateConfig",
    "__version__",
    "discretize_dataset",
    "discretize_image",
    "distance",
    "load_codebook",
    "nearest_code",
    "save_codebook",
]
