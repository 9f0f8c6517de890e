"""Image moments and the normalized visual feature vector.

Two moment backends are provided: pixel sums over a grayscale image and
exact area integrals over a convex polygon (Green's theorem closed form).
Both produce a ``MomentSet`` from which the normalized feature vector
(x_n, y_n, a_n, theta) is derived.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegeneratePolygon, EmptyRegion, NonPositiveArea, NonPositiveDepth

_AREA_EPS = 1e-300


@dataclass(frozen=True, eq=False)
class GrayImage:
    """Grayscale image with non-negative intensities, row-major storage.

    Pixel coordinates follow x = column index, y = row index, origin at
    the top-left corner.
    """

    width: int
    height: int
    intensities: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.intensities, dtype=float).ravel()
        object.__setattr__(self, "intensities", vals)
        if self.width <= 0 or self.height <= 0:
            raise ValueError("image dimensions must be positive")
        if vals.size != self.width * self.height:
            raise ValueError(
                f"intensity array has {vals.size} entries, "
                f"expected {self.width * self.height}"
            )
        if np.any(vals < 0.0):
            raise ValueError("intensities must be non-negative")

    @classmethod
    def from_array(cls, arr) -> "GrayImage":
        arr = np.asarray(arr, dtype=float)
        if arr.ndim != 2:
            raise ValueError("expected a 2-D array")
        return cls(width=arr.shape[1], height=arr.shape[0], intensities=arr.ravel())

    def as_array(self) -> np.ndarray:
        return self.intensities.reshape(self.height, self.width)


@dataclass(frozen=True, eq=False)
class ConvexPolygon:
    """Convex polygon in normalized image coordinates.

    Vertices are stored in counter-clockwise order; input in clockwise
    order is reversed on construction.
    """

    vertices: np.ndarray

    def __post_init__(self):
        verts = np.asarray(self.vertices, dtype=float)
        if verts.ndim != 2 or verts.shape[1] != 2 or verts.shape[0] < 3:
            raise DegeneratePolygon("polygon needs at least 3 two-dimensional vertices")
        if _signed_area(verts) < 0.0:
            verts = verts[::-1].copy()
        if _signed_area(verts) <= _AREA_EPS:
            raise DegeneratePolygon("polygon area is not strictly positive")
        object.__setattr__(self, "vertices", verts)

    @property
    def area(self) -> float:
        return _signed_area(self.vertices)


@dataclass(frozen=True)
class MomentSet:
    """Raw moments up to order one, central moments of order two, centroid."""

    m00: float
    m10: float
    m01: float
    mu20: float
    mu02: float
    mu11: float
    centroid_x: float
    centroid_y: float


@dataclass(frozen=True)
class FeatureVector:
    """Normalized moment features: lateral positions, depth surrogate, orientation."""

    x_n: float
    y_n: float
    a_n: float
    theta: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x_n, self.y_n, self.a_n, self.theta])

    @classmethod
    def from_array(cls, arr) -> "FeatureVector":
        x, y, a, th = np.asarray(arr, dtype=float).ravel()
        return cls(float(x), float(y), float(a), float(th))

    def __array__(self, dtype=None, copy=None):
        return np.array([self.x_n, self.y_n, self.a_n, self.theta], dtype=dtype)


def _signed_area(verts: np.ndarray) -> float:
    x, y = verts[:, 0], verts[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    return 0.5 * float(np.sum(x * yn - xn * y))


def raw_moment(img: GrayImage, p: int, q: int) -> float:
    """Intensity-weighted coordinate sum sum_x sum_y x^p y^q I(x, y)."""
    if p not in (0, 1, 2) or q not in (0, 1, 2):
        raise ValueError("moment orders are limited to p, q in {0, 1, 2}")
    arr = img.as_array()
    xs = np.arange(img.width, dtype=float) ** p
    ys = np.arange(img.height, dtype=float) ** q
    return float(ys @ arr @ xs)


def central_moments(img: GrayImage) -> MomentSet:
    """Centroid and second-order central moments of a grayscale image."""
    m00 = raw_moment(img, 0, 0)
    if m00 <= 0.0:
        raise EmptyRegion("image has zero total intensity")
    m10 = raw_moment(img, 1, 0)
    m01 = raw_moment(img, 0, 1)
    xbar = m10 / m00
    ybar = m01 / m00
    arr = img.as_array()
    dx = np.arange(img.width, dtype=float) - xbar
    dy = np.arange(img.height, dtype=float) - ybar
    mu20 = float(np.sum(arr @ (dx * dx)))
    mu02 = float((dy * dy) @ np.sum(arr, axis=1))
    mu11 = float(dy @ arr @ dx)
    return MomentSet(m00, m10, m01, mu20, mu02, mu11, xbar, ybar)


def polygon_moments(poly: ConvexPolygon) -> MomentSet:
    """Exact uniform-density area moments of a polygon.

    Uses the shoelace-style closed forms for integrals of 1, x, y, x^2,
    y^2 and xy over the polygon interior.
    """
    v = poly.vertices
    x, y = v[:, 0], v[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y

    m00 = float(np.sum(cross)) / 2.0
    if m00 <= 0.0:
        raise DegeneratePolygon("polygon area is not strictly positive")
    m10 = float(np.sum((x + xn) * cross)) / 6.0
    m01 = float(np.sum((y + yn) * cross)) / 6.0
    m20 = float(np.sum((x * x + x * xn + xn * xn) * cross)) / 12.0
    m02 = float(np.sum((y * y + y * yn + yn * yn) * cross)) / 12.0
    m11 = float(np.sum((x * yn + 2.0 * x * y + 2.0 * xn * yn + xn * y) * cross)) / 24.0

    xbar = m10 / m00
    ybar = m01 / m00
    mu20 = m20 - xbar * m10
    mu02 = m02 - ybar * m01
    mu11 = m11 - xbar * m01
    return MomentSet(m00, m10, m01, mu20, mu02, mu11, xbar, ybar)


def feature_vector(moms: MomentSet, z_star: float, a_star: float) -> FeatureVector:
    """Normalized feature vector from a moment set.

    The depth surrogate is a_n = z_star * sqrt(a_star / a) with
    a = mu20 + mu02; lateral features are the centroid scaled by a_n and
    theta is the principal-axis orientation of the second-moment matrix.
    """
    if z_star <= 0.0:
        raise NonPositiveDepth(f"reference depth must be positive, got {z_star}")
    if a_star <= 0.0:
        raise NonPositiveArea("reference area a_star must be strictly positive")
    if moms.m00 <= 0.0:
        raise EmptyRegion("moment set describes an empty region")
    a = moms.mu20 + moms.mu02
    if a <= 0.0:
        raise NonPositiveArea("second-moment area mu20 + mu02 is not positive")
    a_n = z_star * math.sqrt(a_star / a)
    theta = 0.5 * math.atan2(2.0 * moms.mu11, moms.mu20 - moms.mu02)
    return FeatureVector(
        x_n=a_n * moms.centroid_x,
        y_n=a_n * moms.centroid_y,
        a_n=a_n,
        theta=theta,
    )


def rasterize(
    poly: ConvexPolygon,
    resolution: int,
    bounds: tuple[float, float, float, float] | None = None,
) -> tuple[GrayImage, tuple[float, float], float]:
    """Render a polygon as a binary mask on a square pixel grid.

    Returns the image together with the world coordinates of the center of
    pixel (0, 0) and the pixel pitch, so raster centroids can be mapped
    back to polygon coordinates. Pixel centers are sampled; used to
    validate the analytic moment backend.
    """
    if resolution <= 0:
        raise ValueError("resolution must be positive")
    v = poly.vertices
    if bounds is None:
        margin = 0.05 * max(np.ptp(v[:, 0]), np.ptp(v[:, 1]))
        bounds = (
            float(v[:, 0].min() - margin),
            float(v[:, 0].max() + margin),
            float(v[:, 1].min() - margin),
            float(v[:, 1].max() + margin),
        )
    x_lo, x_hi, y_lo, y_hi = bounds
    pitch = max(x_hi - x_lo, y_hi - y_lo) / resolution
    xs = x_lo + (np.arange(resolution) + 0.5) * pitch
    ys = y_lo + (np.arange(resolution) + 0.5) * pitch
    gx, gy = np.meshgrid(xs, ys)

    inside = np.ones(gx.shape, dtype=bool)
    xn = np.roll(v[:, 0], -1)
    yn = np.roll(v[:, 1], -1)
    for (x0, y0, x1, y1) in zip(v[:, 0], v[:, 1], xn, yn):
        # CCW orientation: interior points lie on the left of every edge.
        inside &= (x1 - x0) * (gy - y0) - (y1 - y0) * (gx - x0) >= 0.0
    img = GrayImage.from_array(inside.astype(float))
    return img, (float(xs[0]), float(ys[0])), float(pitch)
