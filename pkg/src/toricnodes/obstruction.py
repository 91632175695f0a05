"""Quotients Q_S = (M / <S>) / ±id and the obstruction maps Ψ_S."""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from functools import cached_property
from typing import Hashable, Iterable, Mapping, Sequence

from .lattice import LatticePolygon, Point, cross, hermite_basis, sub

Label = int | tuple[int, int]


class DegenerateGenerators(ValueError):
    pass


class HypothesisViolated(ValueError):
    pass


def _smith_2x2(rows: list[list[int]]) -> tuple[tuple[int, int], list[list[int]]]:
    """Smith form of a full-rank 2x2 integer matrix.

    Returns ``((d1, d2), V)`` with ``d1 | d2`` and ``U @ rows @ V = diag(d1, d2)``
    for some unimodular ``U``.  Only ``V`` (column operations) is tracked.
    """
    a = [row[:] for row in rows]
    v = [[1, 0], [0, 1]]

    def col_add(dst: int, src: int, k: int) -> None:
        for r in (0, 1):
            a[r][dst] += k * a[r][src]
            v[r][dst] += k * v[r][src]

    def col_swap() -> None:
        for r in (0, 1):
            a[r][0], a[r][1] = a[r][1], a[r][0]
            v[r][0], v[r][1] = v[r][1], v[r][0]

    while True:
        if a[0][1] == 0 and a[1][0] == 0:
            d1, d2 = abs(a[0][0]), abs(a[1][1])
            if d1 and d2 % d1 == 0:
                return (d1, d2), v
            a[0][0] += a[1][0]
            a[0][1] += a[1][1]
            continue
        r, c = min(((i, j) for i in (0, 1) for j in (0, 1) if a[i][j]), key=lambda ij: abs(a[ij[0]][ij[1]]))
        if r == 1:
            a[0], a[1] = a[1], a[0]
        if c == 1:
            col_swap()
        piv = a[0][0]
        quo = a[1][0] // piv
        a[1][0] -= quo * a[0][0]
        a[1][1] -= quo * a[0][1]
        col_add(1, 0, -(a[0][1] // piv))


@dataclass(frozen=True)
class QuotientStructure:
    """The finite set (Z^2 / <S>) / ±id for an affine generating set S.

    Following the affine convention, the neutral element is the class of
    ``<S>`` itself: a point ``x`` is reduced through ``x - base`` where
    ``base`` is the first generator.
    """

    generators: tuple[Point, ...]
    base: Point
    invariants: tuple[int, int]
    transform: tuple[tuple[int, int], tuple[int, int]]

    @property
    def index(self) -> int:
        return self.invariants[0] * self.invariants[1]

    @property
    def is_cyclic(self) -> bool:
        return self.invariants[0] == 1

    def coordinates(self, x: Point) -> tuple[int, int]:
        (v00, v01), (v10, v11) = self.transform
        u, w = sub(x, self.base)
        d1, d2 = self.invariants
        return ((u * v00 + w * v10) % d1, (u * v01 + w * v11) % d2)

    def reduce(self, x: Point) -> tuple[int, int]:
        """Canonical representative: the smaller of r and -r."""
        r = self.coordinates(x)
        d1, d2 = self.invariants
        neg = ((-r[0]) % d1, (-r[1]) % d2)
        return min(r, neg)

    def label(self, x: Point) -> Label:
        r = self.reduce(x)
        return r[1] if self.is_cyclic else r

    @cached_property
    def classes(self) -> tuple[Label, ...]:
        d1, d2 = self.invariants
        seen = set()
        for r1 in range(d1):
            for r2 in range(d2):
                neg = ((-r1) % d1, (-r2) % d2)
                seen.add(min((r1, r2), neg))
        ordered = sorted(seen)
        return tuple(r[1] for r in ordered) if self.is_cyclic else tuple(ordered)

    @property
    def class_count(self) -> int:
        d1, d2 = self.invariants
        two_torsion = math.gcd(2, d1) * math.gcd(2, d2)
        return (self.index + two_torsion) // 2

    @property
    def zero(self) -> Label:
        return 0 if self.is_cyclic else (0, 0)


def obstruction_target(S: Iterable[Point]) -> QuotientStructure:
    gens = tuple(dict.fromkeys(tuple(p) for p in S))
    if not gens:
        raise DegenerateGenerators("degenerate generator set")
    base = gens[0]
    (g, h), c = hermite_basis(sub(p, base) for p in gens[1:])
    if g == 0 or c == 0:
        raise DegenerateGenerators("degenerate generator set")
    inv, v = _smith_2x2([[g, h], [0, c]])
    return QuotientStructure(gens, base, inv, ((v[0][0], v[0][1]), (v[1][0], v[1][1])))


def label_key(label: Label) -> str:
    return str(label) if isinstance(label, int) else f"{label[0]},{label[1]}"


@dataclass(frozen=True)
class FiberPartition:
    """Labels of a finite list of points under a quotient map."""

    domain: tuple[Point, ...]
    labels: tuple[Label, ...]
    quotient: QuotientStructure | None = None

    @cached_property
    def fibers(self) -> dict[Label, list[Point]]:
        out: dict[Label, list[Point]] = defaultdict(list)
        for p, lab in zip(self.domain, self.labels):
            out[lab].append(p)
        return dict(sorted(out.items()))

    def label_of(self, p: Point) -> Label:
        return self.labels[self.domain.index(p)]

    @property
    def fiber_sizes(self) -> dict[Label, int]:
        return {k: len(v) for k, v in self.fibers.items()}

    def image(self) -> set[Label]:
        return set(self.labels)

    def blocks(self) -> frozenset[frozenset[Point]]:
        return frozenset(frozenset(v) for v in self.fibers.values())

    def restrict(self, points: Iterable[Point]) -> "FiberPartition":
        keep = set(points)
        pairs = [(p, lab) for p, lab in zip(self.domain, self.labels) if p in keep]
        return FiberPartition(tuple(p for p, _ in pairs), tuple(lab for _, lab in pairs), self.quotient)

    def is_surjective(self, nonzero_only: bool = True) -> bool:
        """Whether every nonzero class (or, with ``nonzero_only=False``, every class) is hit.

        The interior of a wedge triangle (0,0),(l,0),(p,q) sits at heights
        1..q-1 and so never meets the zero class; surjectivity of restricted
        wedge maps is therefore read onto the nonzero classes (vacuous at index 1).
        """
        if self.quotient is None:
            return True
        wanted = self.targets() if nonzero_only else set(self.quotient.classes)
        return wanted <= self.image()

    def targets(self) -> set[Label]:
        return set(self.quotient.classes) - {self.quotient.zero}

    def to_finmap(self) -> "FinMap":
        return FinMap(dict(zip(self.domain, self.labels)),
                      frozenset(self.quotient.classes) if self.quotient else None)

    def to_json(self) -> dict:
        return {label_key(k): [list(p) for p in v] for k, v in self.fibers.items()}


def psi(S: Iterable[Point], poly: LatticePolygon) -> FiberPartition:
    q = obstruction_target(S)
    dom = poly.interior_points
    return FiberPartition(dom, tuple(q.label(p) for p in dom), q)


def psi_boundary(poly: LatticePolygon) -> FiberPartition:
    """Ψ_∂Δ: interior points modulo the lattice of boundary points."""
    return psi(poly.boundary_points, poly)


def triangle_generators(poly: LatticePolygon) -> list[Point]:
    """Δ_1 ∩ Z^2 together with the opposite vertex (the set defining Ψ_{Δ,1}).

    For a triangle, edge 0 from vertex 0 is taken as Δ_1 and vertex 2 as apex.
    """
    if poly.n != 3:
        raise ValueError("Ψ_{Δ,1} is defined for triangles")
    return poly.edges[0].lattice_points() + [poly.vertices[2]]


def psi_triangle(poly: LatticePolygon) -> FiberPartition:
    return psi(triangle_generators(poly), poly)


def aut_order(part) -> int:
    """|Aut| of a finite map: the product of factorials of fiber sizes.

    Accepts a FiberPartition, a FinMap, a plain dict, or a list of sizes.
    """
    if isinstance(part, (list, tuple)):
        sizes = part
    elif isinstance(part, FiberPartition):
        sizes = part.fiber_sizes.values()
    elif isinstance(part, FinMap):
        sizes = [len(b) for b in part.fibers().values()]
    else:
        counts: dict = defaultdict(int)
        for v in part.values():
            counts[v] += 1
        sizes = counts.values()
    return math.prod(math.factorial(s) for s in sizes)


def psi_X_view(poly: LatticePolygon) -> QuotientStructure:
    """Target built from the primitive edge vectors rotated by (a, b) -> (-b, a).

    Consecutive boundary points differ by primitive edge vectors, so these
    span the boundary lattice; their rotations span N_X.
    """
    gens = [(0, 0)] + [rotate(e.direction) for e in poly.edges]
    return obstruction_target(gens)


def rotate(p: Point) -> Point:
    return (-p[1], p[0])


def gcd_vertex_determinants(poly: LatticePolygon) -> int:
    """gcd over vertices of |det(v_j, v_{j+1})|."""
    g = 0
    for j in range(poly.n):
        g = math.gcd(g, abs(cross(poly.edge(j).direction, poly.edge(j + 1).direction)))
    return g


# certificates


@dataclass(frozen=True)
class NonsurjectivityCertificate:
    index: int
    witness: Point | None

    def to_json(self) -> dict:
        return {"index": self.index, "witness": list(self.witness) if self.witness else None}


def nonsurjectivity_certificate(poly: LatticePolygon) -> NonsurjectivityCertificate | None:
    """Witness that the monodromy cannot act as the full symmetric group.

    Either the boundary index is at least 4, or it is 2 or 3 and some
    interior point lies in the boundary lattice.
    """
    part = psi_boundary(poly)
    m = part.quotient.index
    if m >= 4:
        return NonsurjectivityCertificate(m, None)
    if m in (2, 3):
        for p, lab in zip(part.domain, part.labels):
            if lab == part.quotient.zero:
                return NonsurjectivityCertificate(m, p)
    return None


# finite maps and pushouts


@dataclass(frozen=True)
class FinMap:
    """A total map on a finite domain, stored as a dict."""

    mapping: Mapping[Hashable, Hashable]
    codomain: frozenset | None = None

    @property
    def domain(self) -> list:
        return sorted(self.mapping, key=repr) if not _sortable(self.mapping) else sorted(self.mapping)

    def fibers(self) -> dict[Hashable, list]:
        out: dict = defaultdict(list)
        for x in self.domain:
            out[self.mapping[x]].append(x)
        return dict(out)

    def blocks(self) -> frozenset[frozenset]:
        return frozenset(frozenset(v) for v in self.fibers().values())

    def is_surjective(self) -> bool:
        return self.codomain is None or set(self.mapping.values()) >= set(self.codomain)


def _sortable(keys) -> bool:
    try:
        sorted(keys)
        return True
    except TypeError:
        return False


def pushout(f: FinMap, g: FinMap) -> FinMap:
    """The map to the finest equivalence relation merging the fibers of f and g.

    Each element is sent to the smallest element (in domain order) of its
    class.  Codomain elements missed by f or g play no role: the pushout of
    sets glues the two codomains along the domain, and unhit elements stay
    isolated, so on the domain only the merged fibers matter.
    """
    if set(f.mapping) != set(g.mapping):
        raise ValueError("mismatched domains")
    dom = f.domain
    parent = {x: x for x in dom}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    order = {x: i for i, x in enumerate(dom)}
    for h in (f, g):
        for members in h.fibers().values():
            for y in members[1:]:
                a, b = find(members[0]), find(y)
                if a != b:
                    if order[a] > order[b]:
                        a, b = b, a
                    parent[b] = a
    return FinMap({x: find(x) for x in dom})


def partition_pushout(p1: FiberPartition, p2: FiberPartition) -> frozenset[frozenset[Point]]:
    return pushout(p1.to_finmap(), p2.to_finmap()).blocks()


def verify_push_lemma(poly: LatticePolygon, S: Sequence[Point], S_prime: Sequence[Point],
                      nonzero_only: bool = True) -> bool:
    """Compare Ψ_S ⋆ Ψ_S' with Ψ_{S ∪ S'} as partitions of the interior points.

    Both maps must be surjective in the sense of ``FiberPartition.is_surjective``;
    ``nonzero_only=False`` also demands that the zero class be hit.
    """
    if not set(map(tuple, S)) & set(map(tuple, S_prime)):
        raise ValueError("generator sets must intersect")
    a, b = psi(S, poly), psi(S_prime, poly)
    if not (a.is_surjective(nonzero_only) and b.is_surjective(nonzero_only)):
        raise HypothesisViolated("hypothesis violated: restricted map not surjective")
    union = list(dict.fromkeys(list(map(tuple, S)) + list(map(tuple, S_prime))))
    return partition_pushout(a, b) == psi(union, poly).blocks()


def obstruction_report(poly: LatticePolygon) -> dict:
    part = psi_boundary(poly)
    cert = nonsurjectivity_certificate(poly)
    return {
        "index": part.quotient.index,
        "classes": part.quotient.class_count,
        "fibers": part.to_json(),
        "aut_order": str(aut_order(part)),
        "nonsurjective": cert.to_json() if cert else None,
    }
