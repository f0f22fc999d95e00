"""Geometric objects on the unit square and grid-based fidelity."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .. import kernels
from ..errors import ValidationError

DEFAULT_RESOLUTION = 2000


def pixel_centres(resolution: int):
    c = (np.arange(resolution) + 0.5) / resolution
    return np.meshgrid(c, c)  # x varies along columns, y along rows


def shoelace(v) -> float:
    v = np.asarray(v, dtype=float)
    if len(v) < 3:
        return 0.0
    x, y = v[:, 0], v[:, 1]
    return 0.5 * math.fsum(x * np.roll(y, -1) - np.roll(x, -1) * y)


def _points_in_polygon(points, v):
    """Even-odd membership; points on the boundary may land on either side."""
    x, y = points[:, 0], points[:, 1]
    inside = np.zeros(len(points), dtype=bool)
    x0, y0 = v[:, 0], v[:, 1]
    x1, y1 = np.roll(x0, -1), np.roll(y0, -1)
    for a, b, c, d in zip(x0, y0, x1, y1):
        crosses = (b <= y) != (d <= y)
        with np.errstate(divide="ignore", invalid="ignore"):
            xc = a + (y - b) * (c - a) / (d - b)
        inside ^= crosses & (x > xc)
    return inside


class GeometricObject:
    """A subset of the unit square.

    Subclasses provide ``indicator`` (membership of an ``(n, 2)`` point
    array), ``reference_area``, ``rasterize`` (boolean mask of pixel centres,
    row index along y) and ``descriptor`` (JSON-ready dict).
    """

    reference_area: float

    def indicator(self, points) -> np.ndarray:
        raise NotImplementedError

    def rasterize(self, resolution: int = DEFAULT_RESOLUTION) -> np.ndarray:
        x, y = pixel_centres(resolution)
        pts = np.column_stack([x.ravel(), y.ravel()])
        return self.indicator(pts).reshape(resolution, resolution)

    def descriptor(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Disk(GeometricObject):
    cx: float
    cy: float
    r: float

    def __post_init__(self):
        if not self.r > 0:
            raise ValidationError(f"disk radius must be positive, got {self.r}")
        if (self.cx - self.r < 0 or self.cx + self.r > 1
                or self.cy - self.r < 0 or self.cy + self.r > 1):
            raise ValidationError("disk must lie inside the unit square")

    @property
    def reference_area(self) -> float:
        return math.pi * self.r**2

    def indicator(self, points):
        p = np.atleast_2d(np.asarray(points, dtype=float))
        return (p[:, 0] - self.cx) ** 2 + (p[:, 1] - self.cy) ** 2 <= self.r**2

    def rasterize(self, resolution=DEFAULT_RESOLUTION):
        c = (np.arange(resolution) + 0.5) / resolution
        dx2 = (c - self.cx) ** 2
        dy2 = (c - self.cy) ** 2
        return dy2[:, None] + dx2[None, :] <= self.r**2

    def descriptor(self):
        return {"disk": {"cx": self.cx, "cy": self.cy, "r": self.r}}


@dataclass(frozen=True, eq=False)
class PolygonUnion(GeometricObject):
    """Union of interior-disjoint simple polygons, stored as flat vertex arrays.

    ``verts[ptr[i]:ptr[i+1]]`` are the vertices of polygon ``i``.
    """

    verts: np.ndarray
    ptr: np.ndarray
    reference_area: float = field(default=float("nan"))

    def __post_init__(self):
        v = np.array(self.verts, dtype=float).reshape(-1, 2)
        p = np.array(self.ptr, dtype=np.int64)
        if p.ndim != 1 or p.size < 1 or p[0] != 0 or p[-1] != len(v) or np.any(np.diff(p) < 0):
            raise ValidationError("polygon offsets are inconsistent with the vertex array")
        if v.size and (v.min() < -1e-12 or v.max() > 1 + 1e-12):
            raise ValidationError("polygon vertices must lie in the unit square")
        v.setflags(write=False)
        p.setflags(write=False)
        object.__setattr__(self, "verts", v)
        object.__setattr__(self, "ptr", p)
        if math.isnan(self.reference_area):
            area = math.fsum(abs(shoelace(x)) for x in self.polygons)
            object.__setattr__(self, "reference_area", area)

    @classmethod
    def from_polygons(cls, polygons) -> "PolygonUnion":
        polygons = [np.asarray(p, dtype=float).reshape(-1, 2) for p in polygons]
        ptr = np.cumsum([0] + [len(p) for p in polygons])
        verts = np.vstack(polygons) if polygons else np.zeros((0, 2))
        return cls(verts, ptr)

    @classmethod
    def empty(cls) -> "PolygonUnion":
        return cls(np.zeros((0, 2)), np.zeros(1, dtype=np.int64))

    @classmethod
    def square(cls) -> "PolygonUnion":
        return cls.from_polygons([[(0, 0), (1, 0), (1, 1), (0, 1)]])

    @property
    def polygons(self):
        return [self.verts[a:b] for a, b in zip(self.ptr[:-1], self.ptr[1:])]

    def indicator(self, points):
        p = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.zeros(len(p), dtype=bool)
        for poly in self.polygons:
            if len(poly) >= 3:
                out |= _points_in_polygon(p, poly)
        return out

    def rasterize(self, resolution=DEFAULT_RESOLUTION):
        return kernels.rasterize(self.verts, self.ptr, int(resolution))

    def descriptor(self):
        polys = [p.tolist() for p in self.polygons]
        if len(polys) == 1:
            return {"polygon": polys[0]}
        return {"polygons": polys}


@dataclass(frozen=True, eq=False)
class Union(GeometricObject):
    """Union of primitives that may overlap; area is estimated on a grid if not given."""

    parts: tuple
    reference_area: float = field(default=float("nan"))

    def __post_init__(self):
        object.__setattr__(self, "parts", tuple(self.parts))
        if math.isnan(self.reference_area):
            mask = self.rasterize(DEFAULT_RESOLUTION)
            object.__setattr__(self, "reference_area", float(mask.mean()))

    def indicator(self, points):
        p = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.zeros(len(p), dtype=bool)
        for part in self.parts:
            out |= part.indicator(p)
        return out

    def rasterize(self, resolution=DEFAULT_RESOLUTION):
        mask = np.zeros((resolution, resolution), dtype=bool)
        for part in self.parts:
            mask |= part.rasterize(resolution)
        return mask

    def descriptor(self):
        return {"union": [p.descriptor() for p in self.parts]}


def object_from_json(obj) -> GeometricObject:
    """Build an object from ``{"disk": {...}}``, ``{"polygon": [[x, y], ...]}``,
    ``{"polygons": [...]}`` or ``{"union": [descriptor, ...]}``."""
    if not isinstance(obj, dict) or len(obj) != 1:
        raise ValidationError("object descriptor must be a single-key JSON object")
    (kind, body), = obj.items()
    try:
        if kind == "disk":
            return Disk(float(body["cx"]), float(body["cy"]), float(body["r"]))
        if kind == "polygon":
            return PolygonUnion.from_polygons([body])
        if kind == "polygons":
            return PolygonUnion.from_polygons(body)
        if kind == "union":
            return Union(tuple(object_from_json(b) for b in body))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError(f"object descriptor '{kind}': {exc}") from exc
    raise ValidationError(f"unknown object descriptor '{kind}'")


def fidelity(a: GeometricObject, b: GeometricObject, resolution: int = DEFAULT_RESOLUTION) -> float:
    """Intersection over union on a ``resolution`` x ``resolution`` pixel grid."""
    if resolution < 100:
        raise ValidationError("fidelity needs resolution >= 100")
    ma = a.rasterize(resolution)
    mb = b.rasterize(resolution)
    union = np.count_nonzero(ma | mb)
    if union == 0:
        return 1.0
    return np.count_nonzero(ma & mb) / union
