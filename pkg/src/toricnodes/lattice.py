"""Exact integer geometry of convex lattice polygons.

Everything here works on Python integers (or int64 numpy arrays in the
bounding-box scan); no floating point is involved.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from functools import cached_property
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np

Point = tuple[int, int]


class PolygonError(ValueError):
    """Raised for degenerate, non-convex or self-intersecting input."""


def cross(u: Point, v: Point) -> int:
    return u[0] * v[1] - u[1] * v[0]


def sub(u: Point, v: Point) -> Point:
    return (u[0] - v[0], u[1] - v[1])


def add(u: Point, v: Point) -> Point:
    return (u[0] + v[0], u[1] + v[1])


def primitive(v: Point) -> tuple[Point, int]:
    """Split a nonzero lattice vector into (primitive vector, integer length)."""
    g = math.gcd(v[0], v[1])
    if g == 0:
        raise ValueError("zero vector has no primitive direction")
    return (v[0] // g, v[1] // g), g


def _egcd(a: int, b: int) -> tuple[int, int, int]:
    # returns (g, s, t) with s*a + t*b = g >= 0
    old_r, r = a, b
    old_s, s = 1, 0
    old_t, t = 0, 1
    while r:
        quo = old_r // r
        old_r, r = r, old_r - quo * r
        old_s, s = s, old_s - quo * s
        old_t, t = t, old_t - quo * t
    if old_r < 0:
        old_r, old_s, old_t = -old_r, -old_s, -old_t
    return old_r, old_s, old_t


def hermite_basis(vectors: Iterable[Point]) -> tuple[Point, int]:
    """Echelon basis of the subgroup of Z^2 generated by ``vectors``.

    Returns ``((g, h), c)`` such that the lattice is spanned by the rows
    ``(g, h)`` and ``(0, c)`` with ``g, c >= 0`` and ``0 <= h < c`` whenever
    ``c > 0``.  The lattice has rank 2 iff ``g * c > 0`` and then its index
    in Z^2 is ``g * c``.
    """
    g, h = 0, 0
    c = 0
    for x, y in vectors:
        if x == 0:
            c = math.gcd(c, y)
            continue
        if g == 0:
            g, h = (x, y) if x > 0 else (-x, -y)
            continue
        d, s, t = _egcd(g, x)
        # unimodular change of the pair {(g, h), (x, y)}
        killed = (x // d) * h - (g // d) * y
        g, h = d, s * h + t * y
        c = math.gcd(c, killed)
    if c:
        h %= c
    return (g, h), c


def sublattice_index(vectors: Iterable[Point]) -> int | float:
    """Index in Z^2 of the lattice generated by ``vectors``; ``math.inf`` if rank < 2."""
    (g, _), c = hermite_basis(vectors)
    if g == 0 or c == 0:
        return math.inf
    return g * c


def affine_sublattice_index(points: Sequence[Point]) -> int | float:
    """Index of the affine lattice generated by ``points``.

    The set is translated by its first element; the index of the resulting
    linear lattice is returned, or ``math.inf`` when it has rank < 2.
    """
    if not points:
        raise ValueError("need at least one point")
    base = points[0]
    return sublattice_index(sub(p, base) for p in points[1:])


def _hull(points: Sequence[Point]) -> list[Point]:
    """Strict convex hull vertices in CCW order (monotone chain)."""
    pts = sorted(set(points))
    if len(pts) <= 2:
        return pts
    lower: list[Point] = []
    for p in pts:
        while len(lower) >= 2 and cross(sub(lower[-1], lower[-2]), sub(p, lower[-2])) <= 0:
            lower.pop()
        lower.append(p)
    upper: list[Point] = []
    for p in reversed(pts):
        while len(upper) >= 2 and cross(sub(upper[-1], upper[-2]), sub(p, upper[-2])) <= 0:
            upper.pop()
        upper.append(p)
    return lower[:-1] + upper[:-1]


@dataclass(frozen=True)
class Edge:
    """Edge ``index`` of a polygon, running CCW from ``start`` to ``end``."""

    index: int
    start: Point
    end: Point
    direction: Point
    length: int

    @property
    def vector(self) -> Point:
        return sub(self.end, self.start)

    @property
    def inner_normal(self) -> Point:
        """Primitive inner normal ``(alpha, beta)`` with ``direction = (beta, -alpha)``."""
        return (-self.direction[1], self.direction[0])

    def lattice_points(self) -> list[Point]:
        """All lattice points of the closed edge, from start to end."""
        dx, dy = self.direction
        return [(self.start[0] + i * dx, self.start[1] + i * dy) for i in range(self.length + 1)]


class LatticePolygon:
    """A convex lattice polygon with CCW vertices, translated so vertex 0 is the origin.

    The lexicographically smallest input vertex becomes vertex 0 and is moved
    to the origin; ``offset`` records the translation so that
    ``original = vertex + offset``.
    """

    def __init__(self, vertices: Iterable[Sequence[int]]):
        pts: list[Point] = []
        for v in vertices:
            if len(v) != 2:
                raise PolygonError(f"vertex {v!r} is not a pair")
            x, y = v
            if int(x) != x or int(y) != y:
                raise PolygonError(f"vertex {v!r} is not integral")
            p = (int(x), int(y))
            if not pts or pts[-1] != p:
                pts.append(p)
        if len(pts) > 1 and pts[0] == pts[-1]:
            pts.pop()
        if len(pts) < 3:
            raise PolygonError("a polygon needs at least three distinct vertices")

        area2 = sum(cross(pts[i], pts[(i + 1) % len(pts)]) for i in range(len(pts)))
        if area2 == 0:
            raise PolygonError("degenerate polygon (zero area)")
        if area2 < 0:
            pts.reverse()

        hull = _hull(pts)
        if len(hull) < 3:
            raise PolygonError("degenerate polygon (collinear vertices)")
        # the input, read CCW, must visit the hull vertices in cyclic order
        # and every other vertex must lie on the hull edge between them
        strict = [p for i, p in enumerate(pts)
                  if cross(sub(p, pts[i - 1]), sub(pts[(i + 1) % len(pts)], p)) != 0]
        if len(strict) != len(hull) or len(set(pts)) != len(pts):
            raise PolygonError("polygon is not convex or is self-intersecting")
        k = hull.index(strict[0])
        if hull[k:] + hull[:k] != strict:
            raise PolygonError("polygon is not convex or is self-intersecting")
        for i, p in enumerate(pts):
            a, b = pts[i - 1], pts[(i + 1) % len(pts)]
            if cross(sub(p, a), sub(b, p)) < 0:
                raise PolygonError("polygon is not convex or is self-intersecting")
        if len(strict) != len(pts):
            warnings.warn(f"merged {len(pts) - len(strict)} collinear vertices", stacklevel=2)

        start = min(range(len(strict)), key=lambda i: strict[i])
        ordered = strict[start:] + strict[:start]
        self.offset: Point = ordered[0]
        self.vertices: tuple[Point, ...] = tuple(sub(p, self.offset) for p in ordered)

    # construction helpers

    @classmethod
    def from_json(cls, text: str) -> "LatticePolygon":
        data = json.loads(text)
        if not isinstance(data, dict) or "vertices" not in data:
            raise PolygonError('expected an object with a "vertices" key')
        return cls(data["vertices"])

    @classmethod
    def from_file(cls, path) -> "LatticePolygon":
        with open(path) as fh:
            return cls.from_json(fh.read())

    @classmethod
    def convex_hull(cls, points: Iterable[Sequence[int]]) -> "LatticePolygon":
        """conv(points) for an unordered point set."""
        return cls(_hull([(int(x), int(y)) for x, y in points]))

    @classmethod
    def square(cls, d: int) -> "LatticePolygon":
        return cls([(0, 0), (d, 0), (d, d), (0, d)])

    @classmethod
    def triangle(cls, ell: int, p: int, q: int) -> "LatticePolygon":
        """The triangle conv{(0,0), (ell,0), (p,q)}."""
        return cls([(0, 0), (ell, 0), (p, q)])

    def to_json(self) -> str:
        return json.dumps({"vertices": [list(v) for v in self.original_vertices]})

    # basic data

    @property
    def original_vertices(self) -> tuple[Point, ...]:
        return tuple(add(v, self.offset) for v in self.vertices)

    @property
    def n(self) -> int:
        return len(self.vertices)

    def __repr__(self) -> str:
        return f"LatticePolygon({list(self.original_vertices)})"

    def __eq__(self, other) -> bool:
        return isinstance(other, LatticePolygon) and self.original_vertices == other.original_vertices

    def __hash__(self) -> int:
        return hash(self.original_vertices)

    @cached_property
    def edges(self) -> tuple[Edge, ...]:
        out = []
        for j in range(self.n):
            a, b = self.vertices[j], self.vertices[(j + 1) % self.n]
            d, length = primitive(sub(b, a))
            out.append(Edge(j, a, b, d, length))
        return tuple(out)

    def edge(self, j: int) -> Edge:
        return self.edges[j % self.n]

    @cached_property
    def area2(self) -> int:
        """Twice the Euclidean area."""
        return sum(cross(self.vertices[i], self.vertices[(i + 1) % self.n]) for i in range(self.n))

    @cached_property
    def boundary_points(self) -> tuple[Point, ...]:
        """Boundary lattice points in CCW order starting at vertex 0."""
        out: list[Point] = []
        for e in self.edges:
            out.extend(e.lattice_points()[:-1])
        return tuple(out)

    def _scan(self, strict: bool) -> list[Point]:
        xs = [v[0] for v in self.vertices]
        ys = [v[1] for v in self.vertices]
        gx, gy = np.meshgrid(np.arange(min(xs), max(xs) + 1, dtype=np.int64),
                             np.arange(min(ys), max(ys) + 1, dtype=np.int64), indexing="ij")
        mask = np.ones(gx.shape, dtype=bool)
        for e in self.edges:
            (dx, dy), (sx, sy) = e.direction, e.start
            side = dx * (gy - sy) - dy * (gx - sx)
            mask &= (side > 0) if strict else (side >= 0)
        pts = zip(gx[mask].tolist(), gy[mask].tolist())
        return sorted(pts)

    @cached_property
    def interior_points(self) -> tuple[Point, ...]:
        """Lattice points strictly inside, sorted lexicographically."""
        return tuple(self._scan(strict=True))

    @cached_property
    def lattice_points(self) -> tuple[Point, ...]:
        return tuple(self._scan(strict=False))

    def node_count(self) -> int:
        return len(self.interior_points)

    def contains(self, p: Point, strict: bool = False) -> bool:
        for e in self.edges:
            s = cross(e.direction, sub(p, e.start))
            if s < 0 or (strict and s == 0):
                return False
        return True

    def on_boundary(self, p: Point) -> bool:
        return self.contains(p) and not self.contains(p, strict=True)

    def edge_of(self, p: Point) -> list[int]:
        """Indices of the edges containing the lattice point ``p``."""
        return [e.index for e in self.edges
                if cross(e.direction, sub(p, e.start)) == 0
                and 0 <= (p[0] - e.start[0]) * e.direction[0] + (p[1] - e.start[1]) * e.direction[1]
                <= e.length * (e.direction[0] ** 2 + e.direction[1] ** 2)]

    def transformed(self, matrix, translation: Point = (0, 0)) -> "LatticePolygon":
        """Image under ``x -> matrix @ x + translation`` (matrix in GL2(Z))."""
        (a, b), (c, d) = matrix
        if abs(a * d - b * c) != 1:
            raise ValueError("matrix is not unimodular")
        return LatticePolygon([(a * x + b * y + translation[0], c * x + d * y + translation[1])
                               for x, y in self.original_vertices])


def interior_points(poly: LatticePolygon) -> list[Point]:
    return list(poly.interior_points)


def edges(poly: LatticePolygon) -> list[Edge]:
    return list(poly.edges)


def node_count(poly: LatticePolygon) -> int:
    return poly.node_count()


# kites


@dataclass(frozen=True)
class KiteNormalization:
    """Affine unimodular map sending a kite to its normal form.

    ``x -> matrix @ (x - center)`` sends the two off-line points ``p`` and
    ``q`` to ``(-1, 0)`` and ``(1, 0)`` and the line through the other
    lattice points onto the second coordinate axis.  Points are in the
    polygon's (translated) coordinates.
    """

    matrix: tuple[tuple[int, int], tuple[int, int]]
    center: Point
    p: Point
    q: Point
    vertices: tuple[Point, ...]

    def apply(self, x: Point) -> Point:
        (a, b), (c, d) = self.matrix
        u, v = sub(x, self.center)
        return (a * u + b * v, c * u + d * v)

    @property
    def axis_range(self) -> tuple[int, int]:
        """Lowest and highest lattice height on the axis."""
        ys = []
        for (x0, y0), (x1, y1) in zip(self.vertices, self.vertices[1:] + self.vertices[:1]):
            for (xa, ya) in ((x0, y0), (x1, y1)):
                if xa == 0:
                    ys.append(ya)
            if (x0 < 0 < x1) or (x1 < 0 < x0):
                # crossing of the axis strictly inside an edge
                num = y0 * x1 - y1 * x0
                den = x1 - x0
                ys.append(num / den)
        return (math.ceil(min(ys)), math.floor(max(ys)))

    def interior_count(self) -> int:
        lo, hi = self.axis_range
        return hi - lo - 1

    def polygon(self) -> LatticePolygon:
        return LatticePolygon(self.vertices)


def detect_kite(poly: LatticePolygon) -> KiteNormalization | None:
    """Recognize a kite and return its normalizing map, else ``None``.

    A kite has all its lattice points on one line except two points on
    opposite sides, whose connecting segment meets a lattice point of the line.
    """
    pts = poly.lattice_points
    if len(pts) < 4:
        return None
    pts_set = set(pts)
    for p, q in combinations(pts, 2):
        rest = [x for x in pts if x != p and x != q]
        if len(rest) < 2:
            continue
        d, _ = primitive(sub(rest[1], rest[0]))
        o = rest[0]
        if any(cross(d, sub(x, o)) != 0 for x in rest):
            continue
        sp, sq = cross(d, sub(p, o)), cross(d, sub(q, o))
        if sp * sq >= 0:
            continue
        # lattice point of the line on segment pq
        mid2 = add(p, q)
        if mid2[0] % 2 or mid2[1] % 2:
            continue
        center = (mid2[0] // 2, mid2[1] // 2)
        if center not in pts_set or cross(d, sub(center, o)) != 0:
            continue
        if abs(sp) != 1:
            continue
        # basis {p - center, d} has determinant +-1; send it to {(-1,0), (0,1)}
        e = sub(p, center)
        det = e[0] * d[1] - e[1] * d[0]
        inv = ((d[1] * det, -d[0] * det), (-e[1] * det, e[0] * det))
        m = ((-inv[0][0], -inv[0][1]), inv[1])
        norm = KiteNormalization(m, center, p, q, ())
        verts = tuple(norm.apply(v) for v in poly.vertices)
        return KiteNormalization(m, center, p, q, verts)
    return None
