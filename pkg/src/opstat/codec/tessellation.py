"""Encoding by Poisson hitting and decoding by Voronoi tessellation."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import Delaunay, QhullError, cKDTree

from .. import kernels
from ..errors import NumericalError, ValidationError
from ..rng import check_seed, make_rng
from .objects import GeometricObject, PolygonUnion, shoelace

DEDUP_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class HitSet:
    """Labelled hit points in arrival order."""

    points: np.ndarray
    labels: np.ndarray
    times: np.ndarray
    intensity: float
    seed: int

    def __post_init__(self):
        pts = np.array(self.points, dtype=float).reshape(-1, 2)
        lab = np.array(self.labels, dtype=bool)
        tim = np.array(self.times, dtype=float)
        if not (len(pts) == len(lab) == len(tim)):
            raise ValidationError("points, labels and times differ in length")
        for a in (pts, lab, tim):
            a.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "labels", lab)
        object.__setattr__(self, "times", tim)

    @property
    def count(self) -> int:
        return len(self.points)

    def check_labels(self, obj: GeometricObject) -> bool:
        return bool(np.array_equal(obj.indicator(self.points), self.labels)) if self.count else True

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "y", "label", "t"])
        for (x, y), lab, t in zip(self.points, self.labels, self.times):
            w.writerow([repr(float(x)), repr(float(y)), int(lab), repr(float(t))])
        return buf.getvalue()

    def merged(self, other: "HitSet") -> "HitSet":
        return HitSet(
            np.vstack([self.points, other.points]),
            np.concatenate([self.labels, other.labels]),
            np.concatenate([self.times, other.times]),
            self.intensity + other.intensity,
            self.seed,
        )


def _ramp_times(u, ramp):
    """Inverse CDF of the arrival-time density ``1 + ramp (2t - 1)`` on [0, 1]."""
    if ramp == 0.0:
        return u
    b = 1.0 - ramp
    return (-b + np.sqrt(b * b + 4.0 * ramp * u)) / (2.0 * ramp)


def encode(
    obj: GeometricObject, intensity: float, seed, ramp: float = 0.0, t0: float = 0.0,
    stream=(),
) -> HitSet:
    """Hit the unit square with a Poisson point process and label the hits.

    The point count is Poisson(``intensity``) and positions are uniform.
    Arrival times on ``[t0, t0 + 1)`` are uniform when ``ramp == 0``; a
    non-zero ``ramp`` in [-1, 1] tilts the arrival density linearly, which
    gives a deliberately non-stationary hit stream.
    """
    if not intensity > 0:
        raise ValidationError(f"intensity must be positive, got {intensity}")
    if not -1.0 <= ramp <= 1.0:
        raise ValidationError("ramp must lie in [-1, 1]")
    seed = check_seed(seed)
    rng = make_rng(seed, *stream)
    n = int(rng.poisson(intensity))
    pts = rng.random((n, 2))
    times = t0 + np.sort(_ramp_times(rng.random(n), ramp))
    labels = obj.indicator(pts) if n else np.zeros(0, dtype=bool)
    return HitSet(pts, labels, times, float(intensity), seed)


@dataclass(frozen=True, eq=False)
class Tessellation:
    """Voronoi cells of the (deduplicated) hit points, clipped to the unit square.

    ``verts[vert_ptr[i]:vert_ptr[i+1]]`` is the counter-clockwise cell of
    ``sites[i]``; ``site_hits[i]`` is the index of that site in the hit set.
    ``adjacency`` lists site pairs ``(i, j), i < j`` sharing an edge.
    """

    sites: np.ndarray
    site_hits: np.ndarray
    vert_ptr: np.ndarray
    verts: np.ndarray
    edge_src: np.ndarray
    adjacency: np.ndarray

    @property
    def n_sites(self) -> int:
        return len(self.sites)

    @property
    def cells(self):
        return [self.verts[a:b] for a, b in zip(self.vert_ptr[:-1], self.vert_ptr[1:])]

    def areas(self) -> np.ndarray:
        return np.array([shoelace(c) for c in self.cells])

    def neighbours(self) -> list[list[int]]:
        out = [[] for _ in range(self.n_sites)]
        for i, j in self.adjacency:
            out[i].append(int(j))
            out[j].append(int(i))
        return [sorted(x) for x in out]

    def contains_sites(self, tol=1e-12) -> np.ndarray:
        """Whether each site lies inside (or on) its own convex cell."""
        ok = np.ones(self.n_sites, dtype=bool)
        for i, cell in enumerate(self.cells):
            e = np.roll(cell, -1, axis=0) - cell
            w = self.sites[i] - cell
            cross = e[:, 0] * w[:, 1] - e[:, 1] * w[:, 0]
            ok[i] = bool(np.all(cross >= -tol))
        return ok

    def check(self, tol=1e-9) -> None:
        """Raise NumericalError unless cells tile the square and hold their sites."""
        areas = self.areas()
        total = math.fsum(areas)
        if abs(total - 1.0) > tol or np.any(areas < -tol):
            raise NumericalError(f"cell areas sum to {total!r}", abs(total - 1.0))
        if not np.all(self.contains_sites()):
            raise NumericalError("a cell does not contain its site")

    def cell_polygons(self, mask) -> PolygonUnion:
        idx = np.flatnonzero(mask)
        polys = [self.verts[self.vert_ptr[i]:self.vert_ptr[i + 1]] for i in idx]
        return PolygonUnion.from_polygons(polys)


def _dedupe(points):
    if len(points) < 2:
        return np.arange(len(points))
    pairs = cKDTree(points).query_pairs(DEDUP_TOL, output_type="ndarray")
    drop = np.zeros(len(points), dtype=bool)
    # keep the earliest hit of each cluster
    for i, j in sorted(map(tuple, pairs)):
        if not drop[i]:
            drop[j] = True
    return np.flatnonzero(~drop)


def _candidate_neighbours(sites):
    n = len(sites)
    if n >= 4:
        try:
            tri = Delaunay(sites)
            if tri.coplanar.size == 0:
                indptr, indices = tri.vertex_neighbor_vertices
                return indptr.astype(np.int64), indices.astype(np.int64)
        except QhullError:
            pass
    # tiny or degenerate (collinear) inputs: every other site is a candidate
    indices = np.array([j for i in range(n) for j in range(n) if j != i], dtype=np.int64)
    indptr = np.arange(n + 1, dtype=np.int64) * max(n - 1, 0)
    return indptr, indices


def _adjacency(vert_ptr, verts, edge_src, tol=1e-12):
    nxt = np.arange(len(verts)) + 1
    last = vert_ptr[1:] - 1
    nonempty = np.diff(vert_ptr) > 0
    nxt[last[nonempty]] = vert_ptr[:-1][nonempty]
    owner = np.repeat(np.arange(len(vert_ptr) - 1), np.diff(vert_ptr))
    length = np.linalg.norm(verts[nxt] - verts, axis=1)
    sel = (edge_src >= 0) & (length > tol)
    pairs = np.column_stack([owner[sel], edge_src[sel]])
    pairs.sort(axis=1)
    if not len(pairs):
        return np.zeros((0, 2), dtype=np.int64)
    return np.unique(pairs, axis=0)


def tessellate(hits: HitSet) -> Tessellation:
    """Voronoi diagram of the hit points clipped to the unit square."""
    if hits.count == 0:
        raise ValidationError("empty hit set: nothing to tessellate")
    keep = _dedupe(hits.points)
    sites = np.ascontiguousarray(hits.points[keep])
    indptr, indices = _candidate_neighbours(sites)
    vert_ptr, verts, edge_src = kernels.clip_cells(sites, indptr, indices)
    adjacency = _adjacency(vert_ptr, verts, edge_src)
    for a in (sites, keep, vert_ptr, verts, edge_src, adjacency):
        a.setflags(write=False)
    return Tessellation(sites, keep, vert_ptr, verts, edge_src, adjacency)


def decode(tess: Tessellation, hits: HitSet) -> PolygonUnion:
    """Union of the cells whose site was labelled inside."""
    labels = hits.labels[tess.site_hits]
    return tess.cell_polygons(labels)
