"""
geometry/__init__.py

Spec decoding, contour construction and the symmetry reduction to a labeled
half-domain polygon.
"""

from .contours import build_contours, is_mirror_symmetric, min_feature_size, same_segments
from .half_domain import half_domain, polygon_from_vertices, reflect_half_domain
from .spec import CondenserSpec, parse_spec

__all__ = [
    "CondenserSpec",
    "build_contours",
    "half_domain",
    "is_mirror_symmetric",
    "min_feature_size",
    "parse_spec",
    "polygon_from_vertices",
    "reflect_half_domain",
    "same_segments",
]
