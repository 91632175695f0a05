"""Degenerations induced by a wedge.

A wedge w with triangle T = conv(w) cuts a polygon into Delta', T and
Delta''.  In coordinates where the base of w is [0, l] x {0} and the apex
is (p, q) the Viro function is

    nu = max(0, p*b - q*a, q*(a - l) + (l - p)*b).

The one-parameter family below degenerates a Harnack curve of the polygon
into three curves over the pieces; nodes are followed numerically from z = 1
down to a small z_min and sorted by the limit they approach.
"""

from __future__ import annotations

import cmath
import functools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .curves import CurveParam, Node, TriangleParam, self_intersections, triangle_nodes
from .hypotheses import Wedge
from .lattice import LatticePolygon, Point, _egcd, cross, sub
from .monodromy import ParamLoop, match_nodes, track_nodes, track_roots
from .permgroup import Permutation

Z_MIN = 1e-4


def _quiet(fn):
    # trial Newton points far out on the Delta'' scale overflow harmlessly
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            return fn(*args, **kwargs)
    return wrapper


def _apply(m, x: Point) -> Point:
    return (m[0][0] * x[0] + m[0][1] * x[1], m[1][0] * x[0] + m[1][1] * x[1])


@dataclass
class WedgeSubdivision:
    """The pieces Delta', T, Delta'' of a polygon cut along a wedge triangle.

    ``matrix`` and ``origin`` give wedge coordinates ``matrix @ (x - origin)``
    of a point ``x`` of the polygon.  Piece membership and nu are exact.
    """

    poly: LatticePolygon
    wedge: Wedge
    matrix: tuple
    origin: Point
    ell: int
    p: int
    q: int

    def to_wedge(self, x: Point) -> Point:
        return _apply(self.matrix, sub(x, self.origin))

    def lam1(self, x: Point) -> int:
        a, b = self.to_wedge(x)
        return self.p * b - self.q * a

    def lam2(self, x: Point) -> int:
        a, b = self.to_wedge(x)
        return self.q * (a - self.ell) + (self.ell - self.p) * b

    def nu(self, x: Point) -> int:
        return max(0, self.lam1(x), self.lam2(x))

    def piece(self, x: Point) -> str:
        """'T', 'prime' or 'second'; points on eps' or eps'' count as T."""
        l1, l2 = self.lam1(x), self.lam2(x)
        if l1 <= 0 and l2 <= 0:
            return "T"
        return "prime" if l1 >= l2 else "second"

    @property
    def m(self) -> int:
        return 1 + max(self.nu(x) for x in self.poly.lattice_points)

    def piece_points(self, name: str) -> list[Point]:
        """Lattice points of the closed piece."""
        if name == "T":
            return [x for x in self.poly.lattice_points if self.piece(x) == "T"]
        lam = self.lam1 if name == "prime" else self.lam2
        other = self.lam2 if name == "prime" else self.lam1
        return [x for x in self.poly.lattice_points if lam(x) >= 0 and lam(x) >= other(x)]

    def part(self, name: str) -> LatticePolygon | None:
        """The piece as a polygon, or None when it has no area."""
        pts = self.piece_points(name)
        try:
            return LatticePolygon.convex_hull(pts)
        except Exception:
            return None

    def nu_is_convex(self) -> bool:
        """nu agrees with its linear piece on every closed part and dominates the others."""
        for x in self.poly.lattice_points:
            vals = {"T": 0, "prime": self.lam1(x), "second": self.lam2(x)}
            if vals[self.piece(x)] != max(vals.values()):
                return False
        for name in ("prime", "second"):
            lam = self.lam1 if name == "prime" else self.lam2
            if any(lam(x) != self.nu(x) for x in self.piece_points(name)):
                return False
        return True

    def on_eps(self, x: Point) -> str | None:
        """'eps_prime' / 'eps_second' for points of those edges of T, else None."""
        if self.piece(x) != "T":
            return None
        if self.lam1(x) == 0:
            return "eps_prime"
        if self.lam2(x) == 0:
            return "eps_second"
        return None

    def counts(self) -> dict[str, int]:
        """Interior lattice points of the polygon sorted by piece, with eps' and eps'' separate."""
        out = {"T": 0, "prime": 0, "second": 0, "eps_prime": 0, "eps_second": 0}
        for x in self.poly.interior_points:
            e = self.on_eps(x)
            if e:
                out[e] += 1
            elif self.lam1(x) > 0 and self.lam1(x) >= self.lam2(x):
                out["prime"] += 1
            elif self.lam2(x) > 0:
                out["second"] += 1
            else:
                out["T"] += 1
        return out

    def to_json(self) -> dict:
        return {"wedge": self.wedge.to_json(), "ell": self.ell, "p": self.p, "q": self.q, "m": self.m,
                "counts": self.counts()}


def subdivide(poly: LatticePolygon, w: Wedge) -> WedgeSubdivision:
    b0, b1, apex = w.corners
    d = sub(b1, b0)
    g = math.gcd(*d)
    d = (d[0] // g, d[1] // g)
    for x in (b0, b1, apex):
        if not poly.contains(x):
            raise ValueError(f"wedge point {x} outside the polygon")
    q = cross(d, sub(apex, b0))
    if q == 0:
        raise ValueError("degenerate wedge triangle")
    if q < 0:
        raise ValueError("the polygon must lie to the left of the wedge base")
    _, s, t = _egcd(d[0], d[1])
    f = (-t, s)  # det(d, f) = 1
    inv = ((f[1], -f[0]), (-d[1], d[0]))
    p = _apply(inv, sub(apex, b0))[0]
    return WedgeSubdivision(poly, w, inv, b0, w.ell, p, q)


# the family


@dataclass
class DegenerationFamily:
    """Parameters of the degeneration grouped by piece.

    ``jp``/``jpp`` hold (a, exponent) pairs for boundary segments in
    Delta'/Delta''; ``jt`` the parameters of the base segments, whose
    exponent is (0, 1).
    """

    sub: WedgeSubdivision
    jp: list[tuple[complex, tuple[int, int]]]
    jt: list[complex]
    jpp: list[tuple[complex, tuple[int, int]]]
    polygon: LatticePolygon = field(repr=False, default=None)

    def __post_init__(self):
        groups = [{a for a, _ in self.jp}, set(self.jt), {a for a, _ in self.jpp}]
        if any(a == 0 for g in groups for a in g):
            raise ValueError("parameters must be nonzero")
        if sum(len(g) for g in groups) != len(self.jp) + len(self.jt) + len(self.jpp) or \
                len(set().union(*groups)) != sum(len(g) for g in groups):
            raise ValueError("the three parameter groups must be disjoint multisets of distinct values")

    def with_jt(self, jt: Sequence[complex]) -> "DegenerationFamily":
        return DegenerationFamily(self.sub, self.jp, list(jt), self.jpp, self.polygon)

    def evaluate(self, z: complex, t: complex) -> tuple[complex, complex, complex]:
        x = y = 1 + 0j
        for a, (al, be) in self.jp:
            f = t - z * a
            x *= f ** al
            y *= f ** be
        for a in self.jt:
            y *= t - a
        for a, (al, be) in self.jpp:
            f = 1 - z * t / a
            x *= f ** al
            y *= f ** be
        return x, y, z

    def curve(self, z: complex) -> CurveParam:
        """pi o phi_z as a curve in the torus of the polygon (wedge coordinates)."""
        factors = [(z * a, n) for a, n in self.jp] + [(a, (0, 1)) for a in self.jt]
        factors += [(a / z, n) for a, n in self.jpp]
        sx = sy = 1 + 0j
        for a, (al, be) in self.jpp:
            c = -z / a
            sx *= c ** al
            sy *= c ** be
        return CurveParam(tuple(factors), (sx, sy), (), self.polygon)

    def triangle(self) -> TriangleParam:
        return TriangleParam(self.sub.ell, self.sub.p, self.sub.q, tuple(self.jt))


def degenerate_eval(fam: DegenerationFamily, z: complex, t: complex) -> tuple[complex, complex, complex]:
    return fam.evaluate(z, t)


def pi(point) -> tuple[complex, complex]:
    return point[0], point[1]


def pi_prime(point, q: int, p: int) -> tuple[complex, complex]:
    x, y, z = point
    return x * z ** (-q), y * z ** p


def pi_second(point, q: int, p: int, ell: int) -> tuple[complex, complex]:
    x, y, z = point
    return x * z ** q, y * z ** (ell - p)


def degeneration_family(poly: LatticePolygon, w: Wedge, spacing: float = 1.0) -> DegenerationFamily:
    """Harnack-ordered real parameters: 1..l on the base, increasing after it, negative before it."""
    sub_ = subdivide(poly, w)
    pw = LatticePolygon([sub_.to_wedge(v) for v in poly.vertices])
    off = pw.offset
    segs = []
    for e in pw.edges:
        for i in range(e.length):
            s = (e.start[0] + off[0] + i * e.direction[0], e.start[1] + off[1] + i * e.direction[1])
            segs.append((s, e.inner_normal))
    # rotate so the segment starting at the wedge origin comes first
    k = next(i for i, (s, _) in enumerate(segs) if s == (0, 0))
    segs = segs[k:] + segs[:k]
    kinds = []
    for s, n in segs:
        mid2 = (2 * s[0] + (n[1]), 2 * s[1] - n[0])  # twice the midpoint: s + (s + dir), dir = (n1, -n0)
        if s[1] == 0 and 0 <= s[0] < sub_.ell and n == (0, 1):
            kinds.append("T")
            continue
        l1 = sub_.p * mid2[1] - sub_.q * mid2[0]
        l2 = sub_.q * (mid2[0] - 2 * sub_.ell) + (sub_.ell - sub_.p) * mid2[1]
        kinds.append("prime" if l1 >= l2 else "second")
    jt, jpp, jp = [], [], []
    x = spacing
    for (s, n), kind in zip(segs, kinds):
        if kind == "T":
            jt.append(x)
            x += spacing
    for (s, n), kind in zip(segs, kinds):
        if kind == "second":
            jpp.append((x, n))
            x += spacing
    nprime = kinds.count("prime")
    y = -spacing * nprime
    for (s, n), kind in zip(segs, kinds):
        if kind == "prime":
            jp.append((y, n))
            y += spacing
    if len(jt) != sub_.ell:
        raise ValueError("wedge base is not a run of boundary segments")
    return DegenerationFamily(sub_, jp, jt, jpp, pw)


# limits


@dataclass
class LimitComponents:
    prime: CurveParam | None
    T: TriangleParam
    second: CurveParam | None
    counts: dict[str, int]

    def nodes(self, tol: float = 1e-9) -> dict[str, list[Node]]:
        out = {"T": [n for ns in triangle_nodes(self.T, tol).nodes.values() for n in ns]}
        for name, c in (("prime", self.prime), ("second", self.second)):
            k = self.counts[name]
            out[name] = self_intersections(c, tol, expected=k) if k and c is not None else []
        return out


def limit_components(fam: DegenerationFamily) -> LimitComponents:
    s = fam.sub
    prod_t = complex(np.prod([-a for a in fam.jt]))
    prime = CurveParam(tuple((a, n) for a, n in fam.jp), (1.0, prod_t)) if fam.jp else None
    second = None
    if fam.jpp:
        sx = sy = 1 + 0j
        for a, (al, be) in fam.jpp:
            sx *= (-1 / a) ** al
            sy *= (-1 / a) ** be
        factors = [(0j, (s.q, s.ell - s.p))] + [(a, n) for a, n in fam.jpp]
        second = CurveParam(tuple(factors), (sx, sy))
    return LimitComponents(prime, fam.triangle(), second, s.counts())


def limit_distance(fam: DegenerationFamily, z: float, samples: Sequence[complex]) -> float:
    """sup over samples of |pi(phi_z(t)) - phi^T(t)| (max norm)."""
    tri = fam.triangle()
    worst = 0.0
    for t in samples:
        u = pi(fam.evaluate(z, t))
        v = tri.evaluate(t)
        worst = max(worst, abs(u[0] - v[0]), abs(u[1] - v[1]))
    return worst


def sample_points(n: int = 20, radius: float = 0.7) -> list[complex]:
    return [radius * cmath.exp(2j * math.pi * (k + 0.5) / n) for k in range(n)]


# node tracking


def _pair_cost(a: tuple[complex, complex], b: tuple[complex, complex]) -> float:
    def rel(x, y):
        return abs(x - y) / max(abs(y), 1e-300)
    return min(max(rel(a[0], b[0]), rel(a[1], b[1])), max(rel(a[0], b[1]), rel(a[1], b[0])))


@dataclass
class DegenerationNodes:
    start: list[Node]
    snapshots: dict[float, list[tuple[complex, complex]]]
    kinds: list[str]
    distances: dict[float, list[float]]
    counts: dict[str, int]
    expected: dict[str, int]
    flagged: list[int]
    steps_used: int

    @property
    def z_min(self) -> float:
        return min(self.snapshots)

    def ok(self) -> bool:
        return not self.flagged and self.counts == self.expected

    def convergence_ratios(self) -> list[float]:
        """distance(z_prev) / distance(z_min) per interior-type node."""
        zs = sorted(self.snapshots)
        if len(zs) < 2:
            return []
        lo, hi = zs[0], zs[1]
        out = []
        for i, k in enumerate(self.kinds):
            if k in ("T", "prime", "second") and self.distances[lo][i] > 0:
                out.append(self.distances[hi][i] / self.distances[lo][i])
        return out

    def to_json(self) -> dict:
        return {"kinds": self.kinds, "counts": self.counts, "expected": self.expected,
                "flagged": self.flagged, "z_min": self.z_min, "steps_used": self.steps_used,
                "convergence_ratios": self.convergence_ratios()}


def geometric_schedule(z_min: float = Z_MIN, per_decade: int = 1) -> list[float]:
    n = max(1, round(-math.log10(z_min) * per_decade))
    return [10 ** (-(i + 1) / per_decade) for i in range(n - 1)] + [z_min]


def _z_family(fam: DegenerationFamily, z0: float, z1: float) -> Callable[[float], CurveParam]:
    l0, l1 = math.log(z0), math.log(z1)
    return lambda th: fam.curve(math.exp(l0 + (l1 - l0) * th))


def _classify(pairs, z: float, limits: dict[str, list[Node]], match_tol: float):
    """Kind per node plus its distance to the matched limit node (nan for boundary type)."""
    n = len(pairs)
    scaled = {"T": 1.0, "prime": 1.0 / z, "second": z}
    cands = []
    for name, nodes in limits.items():
        for j, nd in enumerate(nodes):
            cands.append((name, j, (nd.t, nd.s)))
    kinds, dist = ["?"] * n, [math.nan] * n
    if cands:
        cost = np.array([[_pair_cost((t * scaled[c[0]], s * scaled[c[0]]), c[2]) for c in cands]
                         for t, s in pairs])
        rows, cols = linear_sum_assignment(cost)
        for r, c in zip(rows, cols):
            if cost[r, c] < match_tol:
                kinds[r] = cands[c][0]
                dist[r] = float(cost[r, c])
    for i, (t, s) in enumerate(pairs):
        if kinds[i] == "?":
            gamma = math.log(math.sqrt(abs(t) * abs(s))) / math.log(z)
            kinds[i] = "eps_prime" if gamma > 0 else "eps_second"
            dist[i] = gamma
    return kinds, dist


@_quiet
def track_degeneration_nodes(fam: DegenerationFamily, z_schedule: Sequence[float] | None = None,
                             tol: float = 1e-10, match_tol: float = 0.05,
                             steps: int = 64) -> DegenerationNodes:
    """Follow the nodes of pi(C_z) from z = 1 along a decreasing schedule and classify them.

    A node is interior-type when its parameter pair, rescaled to the chart
    of a limit piece (t, t/z or z*t), lies within ``match_tol`` (relative)
    of a node of that limit curve.  Remaining nodes are boundary-type; the
    sign of log|t| / log z tells eps' (parameters shrinking with z) from
    eps'' (growing).  Boundary-type nodes whose scaling exponent is not
    strictly between -1 and 1 are flagged as unresolved.
    """
    zs = list(z_schedule) if z_schedule is not None else geometric_schedule()
    if any(b >= a for a, b in zip([1.0] + zs, zs)) or zs[-1] <= 0:
        raise ValueError("z_schedule must decrease from below 1 to a positive z_min")
    start = self_intersections(fam.curve(1.0), expected=fam.polygon.node_count())
    limits = limit_components(fam).nodes()
    cur = list(start)
    snaps, dists, used = {}, {}, 0
    z0 = 1.0
    kinds = []
    for z in zs:
        tr = track_nodes(_z_family(fam, z0, z), cur, steps=steps, tol=tol, metric="log")
        used += tr.steps_used
        cur = tr.nodes
        pairs = [(n.t, n.s) for n in cur]
        snaps[z] = pairs
        kinds, d = _classify(pairs, z, limits, match_tol)
        dists[z] = d
        z0 = z
    counts = {k: kinds.count(k) for k in ("T", "prime", "second", "eps_prime", "eps_second")}
    flagged = [i for i, k in enumerate(kinds)
               if k.startswith("eps") and not (0.02 < abs(dists[zs[-1]][i]) < 0.98)]
    return DegenerationNodes(start, snaps, kinds, dists, counts, fam.sub.counts(), flagged, used)


# patch loops


@dataclass
class PatchLoopResult:
    permutation: list[int]
    kinds: list[str]
    triangle_permutation: dict[int, int]
    fixes_outside: bool
    matches_triangle: bool
    closing_distance: float

    def as_permutation(self) -> Permutation:
        dom = tuple(range(len(self.permutation)))
        return Permutation(dom, tuple(self.permutation))

    @property
    def support(self) -> list[int]:
        return [i for i, j in enumerate(self.permutation) if i != j]


def _triangle_labels(fam: DegenerationFamily, pairs, z: float, tri_nodes: list[Node]) -> dict[int, int]:
    """Tracked node index -> index into ``tri_nodes`` for nodes near the triangle limit."""
    out = {}
    if not tri_nodes:
        return out
    cost = np.array([[_pair_cost(p, (n.t, n.s)) for n in tri_nodes] for p in pairs])
    rows, cols = linear_sum_assignment(cost)
    for r, c in zip(rows, cols):
        if cost[r, c] < 0.05:
            out[int(r)] = int(c)
    return out


@_quiet
def patch_loop(fam: DegenerationFamily, inner: ParamLoop, z_min: float = Z_MIN, steps: int = 64,
               tol: float = 1e-10) -> PatchLoopResult:
    """z: 1 -> z_min, the base parameters around ``inner`` at z_min, then z back to 1.

    ``inner`` acts on the base (J_T) parameters only; everything else is
    frozen.  The node permutation is compared with the triangle monodromy
    of the same loop computed from the node polynomials.
    """
    if not np.allclose(inner(0.0), fam.jt):
        raise ValueError("inner loop must start at the base parameters")
    start = self_intersections(fam.curve(1.0), expected=fam.polygon.node_count())
    down = track_nodes(_z_family(fam, 1.0, z_min), start, steps=steps, tol=tol, metric="log")
    at_min = down.nodes

    def inner_family(th):
        return fam.with_jt(list(inner(th))).curve(z_min)

    around = track_nodes(inner_family, at_min, steps=4 * steps, tol=tol, metric="log")
    perm_min, _ = match_nodes(around.nodes, at_min)
    up = track_nodes(_z_family(fam, z_min, 1.0), around.nodes, steps=steps, tol=tol, metric="log")
    perm, closing = match_nodes(up.nodes, start)
    pairs = [(n.t, n.s) for n in at_min]
    kinds, _ = _classify(pairs, z_min, limit_components(fam).nodes(), 0.05)
    # triangle monodromy of the inner loop, per fiber, on node-polynomial roots
    tri = fam.triangle()
    tn = triangle_nodes(tri)
    tri_list = [n for k in sorted(tn.nodes) for n in tn.nodes[k]]
    offsets, acc = {}, 0
    for k in sorted(tn.nodes):
        offsets[k] = acc
        acc += len(tn.nodes[k])
    tri_perm = list(range(acc))
    for k in sorted(tn.nodes):
        if len(tn.nodes[k]) < 2:
            continue
        res = track_roots(tri, inner, k)
        for i, j in enumerate(res.permutation):
            tri_perm[offsets[k] + i] = offsets[k] + j
    labels = _triangle_labels(fam, pairs, z_min, tri_list)
    # perm maps the end position i to the start label perm[i]; same for the inner step
    fixes = all(perm[i] == i for i, k in enumerate(kinds) if k != "T")
    inv_labels = {v: k for k, v in labels.items()}
    matches = len(labels) == acc
    for node_idx, tri_idx in labels.items():
        target = inv_labels.get(tri_perm[tri_idx])
        if target is None or perm_min[node_idx] != target or perm[node_idx] != target:
            matches = False
    induced = {i: inv_labels[tri_perm[t]] for i, t in labels.items() if tri_perm[t] in inv_labels}
    return PatchLoopResult(perm, kinds, induced, fixes, matches, closing)
