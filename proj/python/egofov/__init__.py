"""Python bindings for the egofov localization library."""

from ._core import (
    Error,
    blend_focus,
    euler_from_rotation,
    gist,
    gist_distance,
    load_image,
    localize,
    mser_regions,
    rotation_from_euler,
    save_pgm,
    synthetic_pair,
)

__all__ = [
    "Error",
    "blend_focus",
    "euler_from_rotation",
    "gist",
    "gist_distance",
    "load_image",
    "localize",
    "mser_regions",
    "rotation_from_euler",
    "save_pgm",
    "synthetic_pair",
]
__version__ = "0.1.0"
