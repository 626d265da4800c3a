"""Low-level image algorithms used by the detectors."""

from .circle import CircleFit, InsufficientPointsError, arc_coverage, fit_circle_arc, passes_third_rule
from .color import GREEN, OTHER, WHITE, ColorThresholds, classify_colors, rgb_to_gray, rgb_to_hsv
from .components import Component, connected_components, outer_contour
from .edges import canny, sobel
from .histogram import (
    EmptyHistogramError,
    Histogram,
    HistogramShapeError,
    bhattacharyya_distance,
    hsv_histogram,
    mean_distance,
)
from .hog import HogDescriptor, HogLayout, HogShapeError, hog_descriptor
from .hough import hough_segments
from .pnm import read_pnm, write_pnm
from .polygon import (
    EmptyInputError,
    clip_polygon_to_rect,
    convex_hull,
    points_in_polygon,
    polygon_mask,
    rdp_simplify,
    rdp_simplify_closed,
    subdivide_polygon,
)

__all__ = [
    "CircleFit",
    "Component",
    "ColorThresholds",
    "EmptyHistogramError",
    "EmptyInputError",
    "GREEN",
    "Histogram",
    "HistogramShapeError",
    "HogDescriptor",
    "HogLayout",
    "HogShapeError",
    "InsufficientPointsError",
    "OTHER",
    "WHITE",
    "arc_coverage",
    "bhattacharyya_distance",
    "canny",
    "classify_colors",
    "clip_polygon_to_rect",
    "connected_components",
    "convex_hull",
    "fit_circle_arc",
    "hog_descriptor",
    "hough_segments",
    "hsv_histogram",
    "mean_distance",
    "outer_contour",
    "passes_third_rule",
    "points_in_polygon",
    "polygon_mask",
    "rdp_simplify",
    "rdp_simplify_closed",
    "read_pnm",
    "rgb_to_gray",
    "rgb_to_hsv",
    "sobel",
    "subdivide_polygon",
    "write_pnm",
]
