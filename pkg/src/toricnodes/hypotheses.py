"""Wedges, the combinatorial assumptions (A), (B), (C) and the group-generation check.

All lattice-side checks are exact.  Only ``quadri_ratio`` and its direct
oracle use floating point.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .lattice import LatticePolygon, Point, affine_sublattice_index, cross, sub
from .obstruction import FiberPartition, aut_order, label_key, psi, psi_boundary
from .permgroup import Permutation, PermGroup


class DomainTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class Wedge:
    """Consecutive lattice points ``base`` of edge ``edge`` plus an ``apex`` off that edge."""

    edge: int
    base: tuple[Point, ...]
    apex: Point

    def __post_init__(self):
        if len(self.base) < 2:
            raise ValueError("a wedge needs at least two base points")
        if cross(sub(self.base[-1], self.base[0]), sub(self.apex, self.base[0])) == 0:
            raise ValueError("degenerate wedge: apex lies on the base line")

    @property
    def points(self) -> tuple[Point, ...]:
        return self.base + (self.apex,)

    @property
    def ell(self) -> int:
        return len(self.base) - 1

    @property
    def corners(self) -> tuple[Point, Point, Point]:
        return self.base[0], self.base[-1], self.apex

    def triangle(self) -> LatticePolygon:
        return LatticePolygon(list(self.corners))

    def interior(self, poly: LatticePolygon) -> list[Point]:
        """Interior lattice points of conv(w), in the coordinates of ``poly``."""
        return [p for p in poly.interior_points if inside_triangle(self.corners, p)]

    def to_json(self) -> dict:
        return {"edge": self.edge, "base": [list(b) for b in self.base], "apex": list(self.apex)}


def inside_triangle(corners: Sequence[Point], p: Point, strict: bool = True) -> bool:
    a, b, c = corners
    s = [cross(sub(b, a), sub(p, a)), cross(sub(c, b), sub(p, b)), cross(sub(a, c), sub(p, c))]
    if strict:
        return all(x > 0 for x in s) or all(x < 0 for x in s)
    return all(x >= 0 for x in s) or all(x <= 0 for x in s)


def wedge(poly: LatticePolygon, j: int, apex: Point) -> Wedge:
    """The full-edge wedge w(j, v)."""
    j %= poly.n
    pts = tuple(poly.edge(j).lattice_points())
    if j in poly.edge_of(apex) or not poly.on_boundary(apex):
        raise ValueError(f"apex {apex} must be a boundary point off edge {j}")
    return Wedge(j, pts, tuple(apex))


def distinguished_wedge(poly: LatticePolygon, j: int) -> Wedge:
    """w_j: edge j with the vertex preceding its start as apex."""
    return wedge(poly, j, poly.vertices[(j - 1) % poly.n])


def apexes(poly: LatticePolygon, j: int) -> list[Point]:
    """Boundary points off edge j, in CCW order starting after the edge's end."""
    bd = list(poly.boundary_points)
    end = poly.vertices[(j + 1) % poly.n]
    k = bd.index(end)
    ring = bd[k:] + bd[:k]
    return [p for p in ring if j not in poly.edge_of(p)]


def enumerate_wedges(poly: LatticePolygon, runs: str = "full") -> list[Wedge]:
    """All wedges; ``runs="full"`` uses whole edges, ``"all"`` every run of >= 2 consecutive points."""
    out = []
    for j in range(poly.n):
        pts = poly.edge(j).lattice_points()
        if runs == "full":
            bases = [tuple(pts)]
        elif runs == "all":
            bases = [tuple(pts[i:k + 1]) for i in range(len(pts)) for k in range(i + 1, len(pts))]
        else:
            raise ValueError("runs must be 'full' or 'all'")
        for v in apexes(poly, j):
            out.extend(Wedge(j, b, v) for b in bases)
    return out


def psi_wedge(poly: LatticePolygon, w: Wedge) -> FiberPartition:
    return psi(w.points, poly)


# assumptions


def _fiber_failure(part: FiberPartition, least: int) -> dict | None:
    """Target classes with fewer than ``least`` preimages, or None when all pass."""
    sizes = part.fiber_sizes
    short = sorted((label_key(c) for c in part.targets() if sizes.get(c, 0) < least))
    if not short:
        return None
    return {"short_classes": short, "fiber_sizes": {label_key(k): v for k, v in sorted(sizes.items())}}


def intersection_interior(poly: LatticePolygon, tri1, tri2) -> list[Point]:
    return [p for p in poly.interior_points if inside_triangle(tri1, p) and inside_triangle(tri2, p)]


def check_A(poly: LatticePolygon) -> tuple[bool, list[dict]]:
    """For each j, Psi_{w_j} and Psi_{w_{j+1}} on itr(T_j cap T_{j+1}) hit each target class twice."""
    failures = []
    for j in range(poly.n):
        wa, wb = distinguished_wedge(poly, j), distinguished_wedge(poly, j + 1)
        dom = intersection_interior(poly, wa.corners, wb.corners)
        for w in (wa, wb):
            bad = _fiber_failure(psi_wedge(poly, w).restrict(dom), 2)
            if bad:
                failures.append({"j": j, "wedge": w.to_json(), "domain": [list(p) for p in dom], **bad})
    return not failures, failures


def q_values(poly: LatticePolygon) -> list[int]:
    """q_j: index of the affine lattice spanned by the points of edges j and j+1."""
    out = []
    for j in range(poly.n):
        pts = poly.edge(j).lattice_points() + poly.edge(j + 1).lattice_points()
        out.append(int(affine_sublattice_index(pts)))
    return out


def check_B(poly: LatticePolygon) -> tuple[bool, dict]:
    qs = q_values(poly)
    q = min(qs)
    need = 4 if q == 1 else 3 * q - 2
    shortest = min(e.length for e in poly.edges)
    return shortest >= need, {"q_j": qs, "q": q, "required_length": need, "min_length": shortest}


def _in_open_edge(poly: LatticePolygon, p: Point, j: int) -> bool:
    return j % poly.n in poly.edge_of(p) and p not in poly.vertices


def check_C(poly: LatticePolygon, scope: str = "proof") -> tuple[bool, list[dict]]:
    """Consecutive apexes v, v' on one edge: both wedge maps onto their targets on itr(T cap T').

    ``scope="all"`` takes every consecutive apex pair.  ``scope="proof"``
    keeps pairs with both apexes outside the relative interiors of the two
    neighbouring edges, which are the only pairs the walk from a wedge to
    T_{j+1} ever crosses; pairs inside a neighbouring edge give slivers
    without interior points.
    """
    if scope not in ("proof", "all"):
        raise ValueError("scope must be 'proof' or 'all'")
    failures = []
    for j in range(poly.n):
        vs = apexes(poly, j)
        for v, v2 in zip(vs, vs[1:]):
            if scope == "proof" and any(_in_open_edge(poly, x, k) for x in (v, v2) for k in (j - 1, j + 1)):
                continue
            w1, w2 = wedge(poly, j, v), wedge(poly, j, v2)
            dom = intersection_interior(poly, w1.corners, w2.corners)
            for w in (w1, w2):
                bad = _fiber_failure(psi_wedge(poly, w).restrict(dom), 1)
                if bad:
                    failures.append({"j": j, "apexes": [list(v), list(v2)], "wedge": w.to_json(), **bad})
    return not failures, failures


@dataclass
class HypothesisReport:
    A: bool
    B: bool
    C: bool
    a_failures: list[dict] = field(default_factory=list)
    c_failures: list[dict] = field(default_factory=list)
    b_data: dict = field(default_factory=dict)
    ell_constant: int = 0

    @property
    def all(self) -> bool:
        return self.A and self.B and self.C

    def to_json(self) -> dict:
        return {"A": self.A, "B": self.B, "C": self.C, "all": self.all,
                "A_failures": self.a_failures, "C_failures": self.c_failures,
                **self.b_data, "ell_constant": self.ell_constant}


def check_hypotheses(poly: LatticePolygon, c_scope: str = "proof") -> HypothesisReport:
    a, af = check_A(poly)
    b, bd = check_B(poly)
    c, cf = check_C(poly, c_scope)
    return HypothesisReport(a, b, c, af, cf, bd, ell_constant(poly))


# constants


def ell_constant(poly: LatticePolygon) -> int:
    return 5 * max(e.direction[0] ** 2 + e.direction[1] ** 2 for e in poly.edges)


def _unimodular(box: int) -> np.ndarray:
    r = np.arange(-box, box + 1)
    a, b, c, d = (x.ravel() for x in np.meshgrid(r, r, r, r, indexing="ij"))
    keep = np.abs(a * d - b * c) == 1
    return np.stack([a[keep], b[keep], c[keep], d[keep]], axis=1)


def ell_min(poly: LatticePolygon, box: int = 10) -> tuple[int, tuple]:
    """Smallest 5 * max |M v_j|^2 over unimodular M with entries in [-box, box].

    Only an upper bound for the coordinate-free minimum.
    """
    v = np.array([e.direction for e in poly.edges], dtype=np.int64)
    mats = _unimodular(box)
    x = mats[:, 0:1] * v[:, 0] + mats[:, 1:2] * v[:, 1]
    y = mats[:, 2:3] * v[:, 0] + mats[:, 3:4] * v[:, 1]
    worst = (x * x + y * y).max(axis=1)
    i = int(np.argmin(worst))
    m = mats[i]
    return 5 * int(worst[i]), ((int(m[0]), int(m[1])), (int(m[2]), int(m[3])))


def minoration_holds(poly: LatticePolygon) -> bool:
    """|D_{j-1}| |D_j| sin(angle) = q_j l_{j-1} l_j, as an exact cross-product identity."""
    for j in range(poly.n):
        e0, e1 = poly.edge(j - 1), poly.edge(j)
        if abs(cross(e0.vector, e1.vector)) != abs(cross(e0.direction, e1.direction)) * e0.length * e1.length:
            return False
    return True


# quadrilaterals


def _arr(p) -> np.ndarray:
    return np.asarray(p, dtype=float)


def _angle(at, u, v) -> float:
    a, b = _arr(u) - _arr(at), _arr(v) - _arr(at)
    return math.atan2(abs(a[0] * b[1] - a[1] * b[0]), float(a @ b))


def is_convex_quadrilateral(A, B, C, D) -> bool:
    pts = [_arr(p) for p in (A, B, C, D)]
    s = []
    for i in range(4):
        a, b, c = pts[i], pts[(i + 1) % 4], pts[(i + 2) % 4]
        u, v = b - a, c - b
        s.append(u[0] * v[1] - u[1] * v[0])
    return all(x > 0 for x in s) or all(x < 0 for x in s)


def diagonal_ratio(A, B, C, D) -> float:
    """AO/AC with O the intersection of the diagonals, by solving A + s(C-A) = B + u(D-B)."""
    a, b, c, d = (_arr(p) for p in (A, B, C, D))
    m = np.column_stack([c - a, b - d])
    s, _ = np.linalg.solve(m, b - a)
    return float(s)


def _side_point(A, B, C, D) -> tuple[bool, float]:
    """(applicable, theta) for the second formula."""
    a, b, c, d = (_arr(p) for p in (A, B, C, D))
    u, v = b - a, d - c
    den = u[0] * v[1] - u[1] * v[0]
    scale = np.linalg.norm(u) * np.linalg.norm(v)
    if abs(den) <= 1e-14 * scale:
        return True, 0.0
    # P = A + s (B - A) = C + r (D - C); need A on segment PB, i.e. s <= 0
    s, _ = np.linalg.solve(np.column_stack([u, -v]), c - a)
    if s > 0:
        return False, math.nan
    p = a + s * u
    if np.linalg.norm(p - a) <= 1e-14 * np.linalg.norm(u):
        return False, math.nan
    return True, _angle(p, a, d)


def quadri_applicable(A, B, C, D) -> bool:
    return _side_point(A, B, C, D)[0]


def quadri_ratio(A, B, C, D, variant: int = 1) -> float:
    """Closed-form AO/AC for a convex quadrilateral ABCD."""
    if not is_convex_quadrilateral(A, B, C, D):
        raise ValueError("ABCD is not a convex quadrilateral")
    a, b, c, d = (_arr(p) for p in (A, B, C, D))
    ab, ad, bc, cd = (float(np.linalg.norm(x)) for x in (b - a, d - a, c - b, d - c))
    ta, tb = _angle(a, b, d), _angle(b, a, c)
    num = ab * ad * math.sin(ta)
    if variant == 1:
        return num / (num + ab * bc * math.sin(tb) - ad * bc * math.sin(ta + tb))
    if variant == 2:
        ok, theta = _side_point(A, B, C, D)
        if not ok:
            raise ValueError("second formula needs AB parallel to CD or A between P and B")
        return num / (num + cd * (ad * math.sin(ta - theta) + ab * math.sin(theta)))
    raise ValueError("variant must be 1 or 2")


# group generation


def wedge_group_generators(poly: LatticePolygon, w: Wedge) -> list[Permutation]:
    """Transpositions of interior points of conv(w) sharing a fiber of Psi_w."""
    dom = poly.interior_points
    part = psi_wedge(poly, w).restrict(w.interior(poly))
    out = []
    for fib in part.fibers.values():
        for x, y in itertools.combinations(sorted(fib), 2):
            out.append(Permutation.transposition(dom, x, y))
    return out


def all_wedge_generators(poly: LatticePolygon, runs: str = "full") -> list[Permutation]:
    seen, out = set(), []
    for w in enumerate_wedges(poly, runs):
        for g in wedge_group_generators(poly, w):
            if g.images not in seen:
                seen.add(g.images)
                out.append(g)
    return out


@dataclass
class TheoremCheck:
    status: str
    generated_order: int
    expected_order: int
    hypotheses: HypothesisReport
    generators: int

    @property
    def equal(self) -> bool:
        return self.generated_order == self.expected_order

    def to_json(self) -> dict:
        return {"status": self.status, "equal": self.equal,
                "generated_order": str(self.generated_order), "expected_order": str(self.expected_order),
                "generators": self.generators, "hypotheses": self.hypotheses.to_json()}


def verify_theorem_combinatorics(poly: LatticePolygon, max_domain: int = 1000, runs: str = "full") -> TheoremCheck:
    """Order of the group generated by all wedge-group generators vs |Aut(Psi_boundary)|.

    Status is "verified" when (A), (B), (C) hold and the orders agree,
    "failed" when they hold and the orders differ, "hypotheses unmet"
    otherwise (the orders are still computed and reported).
    """
    dom = poly.interior_points
    if len(dom) > max_domain:
        raise DomainTooLarge(f"{len(dom)} interior points exceed the limit {max_domain}")
    hyp = check_hypotheses(poly)
    gens = all_wedge_generators(poly, runs)
    order = PermGroup(dom, gens).order()
    expected = aut_order(psi_boundary(poly)) if dom else 1
    if not hyp.all:
        status = "hypotheses unmet"
    else:
        status = "verified" if order == expected else "failed"
    return TheoremCheck(status, order, expected, hyp, len(gens))


def strict_transpositions_present(poly: LatticePolygon, group: PermGroup, j: int) -> bool:
    """Every transposition inside itr(T_j) within one boundary fiber lies in ``group``."""
    inside = set(distinguished_wedge(poly, j).interior(poly))
    part = psi_boundary(poly).restrict(inside)
    for fib in part.fibers.values():
        for x, y in itertools.combinations(sorted(fib), 2):
            if Permutation.transposition(group.domain, x, y) not in group:
                return False
    return True
