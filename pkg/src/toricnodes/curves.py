"""Rational curve parametrizations, node polynomials and self-intersections."""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np
import sympy as sp

from .lattice import LatticePolygon, _egcd, cross, primitive

INF = None  # marker for a parameter at infinity


class NonGeneric(ValueError):
    """Parameters too close to a discriminant or otherwise degenerate."""


# parametrizations


@dataclass(frozen=True)
class CurveParam:
    """t -> (z0 * prod (t-a)^alpha, w0 * prod (t-a)^beta).

    ``factors`` holds pairs ``(a, (alpha, beta))``; ``a is None`` stands for a
    parameter at infinity, whose factor is the constant 1.  ``slots`` records
    the edge index of each factor when the curve comes from a polygon.
    """

    factors: tuple[tuple[complex | None, tuple[int, int]], ...]
    scale: tuple[complex, complex] = (1.0, 1.0)
    slots: tuple[int, ...] = ()
    polygon: LatticePolygon | None = field(default=None, compare=False)

    @classmethod
    def from_polygon(cls, poly: LatticePolygon, params: Sequence[Sequence[complex | None]],
                     scale: tuple[complex, complex] = (1.0, 1.0)) -> "CurveParam":
        """``params[j]`` lists the l_j parameters of edge j."""
        if len(params) != poly.n:
            raise ValueError("need one parameter list per edge")
        factors, slots = [], []
        for e, ps in zip(poly.edges, params):
            if len(ps) != e.length:
                raise ValueError(f"edge {e.index} needs {e.length} parameters")
            for a in ps:
                factors.append((None if a is None else complex(a), e.inner_normal))
                slots.append(e.index)
        return cls(tuple(factors), (complex(scale[0]), complex(scale[1])), tuple(slots), poly)

    @property
    def finite(self) -> list[tuple[complex, tuple[int, int]]]:
        return [(a, ab) for a, ab in self.factors if a is not None]

    @property
    def parameters(self) -> list[complex | None]:
        return [a for a, _ in self.factors]

    def evaluate(self, t: complex) -> tuple[complex, complex]:
        """The point phi(t); a coordinate at a pole is complex('inf') and at a zero 0."""
        z, w = complex(self.scale[0]), complex(self.scale[1])
        zpole = wpole = zzero = wzero = False
        for a, (al, be) in self.finite:
            d = t - a
            if d == 0:
                zpole |= al < 0
                zzero |= al > 0
                wpole |= be < 0
                wzero |= be > 0
                continue
            if al:
                z *= d ** al
            if be:
                w *= d ** be
        if zpole and not zzero:
            z = complex(math.inf, 0)
        elif zzero and not zpole:
            z = 0j
        if wpole and not wzero:
            w = complex(math.inf, 0)
        elif wzero and not wpole:
            w = 0j
        return z, w

    def is_pole(self, t: complex) -> bool:
        z, w = self.evaluate(t)
        return not (cmath.isfinite(z) and cmath.isfinite(w)) or z == 0 or w == 0

    def log_derivative(self, t: complex) -> tuple[complex, complex]:
        lz = lw = 0j
        for a, (al, be) in self.finite:
            inv = 1.0 / (t - a)
            lz += al * inv
            lw += be * inv
        return lz, lw

    def with_parameters(self, params: Sequence[complex | None]) -> "CurveParam":
        return CurveParam(tuple((a, ab) for a, (_, ab) in zip(params, self.factors)),
                          self.scale, self.slots, self.polygon)

    def transform(self, matrix, polygon: LatticePolygon | None = None) -> "CurveParam":
        """The same curve in torus coordinates where characters m become ``matrix @ m``.

        Exponent vectors and the scale transform by the inverse transpose.
        """
        (a, b), (c, d) = matrix
        det = a * d - b * c
        if abs(det) != 1:
            raise ValueError("matrix is not unimodular")
        inv_t = ((d * det, -c * det), (-b * det, a * det))

        def act(v):
            return (inv_t[0][0] * v[0] + inv_t[0][1] * v[1], inv_t[1][0] * v[0] + inv_t[1][1] * v[1])

        z0, w0 = complex(self.scale[0]), complex(self.scale[1])
        scale = (z0 ** inv_t[0][0] * w0 ** inv_t[0][1], z0 ** inv_t[1][0] * w0 ** inv_t[1][1])
        return CurveParam(tuple((x, act(ab)) for x, ab in self.factors), scale, self.slots, polygon)

    def conjugate(self) -> "CurveParam":
        return CurveParam(tuple((None if a is None else complex(a).conjugate(), ab) for a, ab in self.factors),
                          (complex(self.scale[0]).conjugate(), complex(self.scale[1]).conjugate()),
                          self.slots, self.polygon)


def evaluate(param, t: complex) -> tuple[complex, complex]:
    return param.evaluate(t)


def harnack_params(poly: LatticePolygon, spacing: float = 1.0, start: float = 1.0) -> CurveParam:
    """Real parameters in strictly increasing cyclic order, edge by edge."""
    if spacing <= 0:
        raise ValueError("spacing must be positive")
    params, x = [], start
    for e in poly.edges:
        row = []
        for _ in range(e.length):
            row.append(x)
            x += spacing
        params.append(row)
    return CurveParam.from_polygon(poly, params)


# triangles


@dataclass(frozen=True)
class TriangleParam:
    """t -> (t^q, t^-p prod (t - a_j)) for the triangle conv{(0,0),(l,0),(p,q)}."""

    ell: int
    p: int
    q: int
    a: tuple[complex, ...]

    def __post_init__(self):
        if self.q < 1 or self.ell < 1:
            raise ValueError("need l >= 1 and q >= 1")
        if len(self.a) != self.ell:
            raise ValueError(f"need exactly l={self.ell} parameters")
        if any(x is None or not cmath.isfinite(complex(x)) or x == 0 for x in self.a):
            raise ValueError("triangle parameters must lie in C*")
        object.__setattr__(self, "a", tuple(complex(x) for x in self.a))

    @property
    def polygon(self) -> LatticePolygon:
        return LatticePolygon.triangle(self.ell, self.p, self.q)

    def evaluate(self, t: complex) -> tuple[complex, complex]:
        if t == 0:
            return 0j, complex(math.inf, 0) if self.p > 0 else 0j
        w = t ** (-self.p)
        for x in self.a:
            w *= t - x
        return t ** self.q, w

    def char_coefficients(self) -> np.ndarray:
        """Ascending coefficients of prod (t - a_j): c_j = (-1)^(l-j) sigma_{l-j}(a)."""
        return np.polynomial.polynomial.polyfromroots(self.a).astype(complex)

    def with_a(self, a: Sequence[complex]) -> "TriangleParam":
        return TriangleParam(self.ell, self.p, self.q, tuple(a))

    def to_curve(self) -> CurveParam:
        g = math.gcd(self.p, self.q)
        factors = [(0j, (self.q // g, -self.p // g))] * g
        factors += [(x, (0, 1)) for x in self.a]
        n1, l1 = primitive((self.p - self.ell, self.q))
        factors += [(None, (-n1[1], n1[0]))] * l1
        return CurveParam(tuple(factors))


def normalize_triangle(poly: LatticePolygon, edge: int = 0) -> tuple[int, int, int, tuple]:
    """Unimodular coordinates putting ``edge`` on [0, l] x {0} and the apex at (p, q).

    Returns ``(l, p, q, matrix)`` with ``1 <= p <= q``; the matrix acts on
    points relative to the start of the edge.
    """
    if poly.n != 3:
        raise ValueError("not a triangle")
    e = poly.edge(edge)
    d = e.direction
    # complete d to a positively oriented basis (d, f)
    _, s, t = _egcd(d[0], d[1])
    f = (-t, s)  # det(d, f) = d0*s + d1*t = 1
    apex = poly.vertices[(edge + 2) % 3]
    rel = (apex[0] - e.start[0], apex[1] - e.start[1])
    q = cross(d, rel)
    x = cross(rel, f)  # coordinate along d
    p = x % q or q
    shear = (p - x) // q
    # M = [[1, shear], [0, 1]] @ inverse([d | f])
    inv = ((f[1], -f[0]), (-d[1], d[0]))
    m = ((inv[0][0] + shear * inv[1][0], inv[0][1] + shear * inv[1][1]), inv[1])
    return e.length, p, q, m


# node polynomials


@dataclass(frozen=True)
class NodePolynomial:
    """P_k for a triangle, with coefficients in ascending powers of t."""

    k: int
    coefficients: np.ndarray
    support: frozenset[int]
    multiplier: np.ndarray
    exponents: tuple[int, ...]
    regime: str
    ell: int
    p: int
    q: int

    def __call__(self, t):
        return np.polynomial.polynomial.polyval(t, self.coefficients)

    def derivative(self) -> np.ndarray:
        return np.polynomial.polynomial.polyder(self.coefficients)

    @property
    def line(self) -> complex:
        """Direction of the punctured line carrying the roots for Harnack parameters."""
        return cmath.exp(-1j * math.pi * self.k * self.p / self.q)


def _node_linear_map(ell: int, p: int, q: int, k: int) -> tuple[np.ndarray, tuple[int, ...], str]:
    """Multipliers lambda_j and the monomial exponent of each j."""
    if not 1 <= k <= q // 2:
        raise ValueError(f"k must lie in 1..{q // 2}")
    j = np.arange(ell + 1)
    sines = np.sin(k * np.pi * (p - j) / q)
    # exact zeros where p = j mod q/gcd(q, k)
    mod = q // math.gcd(q, k)
    sines[(p - j) % mod == 0] = 0.0
    rot = cmath.exp(1j * math.pi * k / q)
    if q != 2 * k:
        exps = tuple(range(ell + 1))
        lam = sines * rot ** j
        return lam, exps, "generic"
    exps = tuple((jj - 1) // 2 if p % 2 == 0 else jj // 2 for jj in range(ell + 1))
    lam = np.array([sines[jj] * rot ** exps[jj] for jj in range(ell + 1)])
    return lam, exps, "halved"


def node_coefficients(ell: int, p: int, q: int, k: int, char: np.ndarray) -> np.ndarray:
    """Ascending coefficients of P_k given those of prod (t - a_j)."""
    lam, exps, _ = _node_linear_map(ell, p, q, k)
    out = np.zeros(ell + 1, dtype=complex)
    for jj in range(ell + 1):
        if lam[jj] != 0:
            out[exps[jj]] += lam[jj] * char[jj]
    return out


def node_polynomial(tri: TriangleParam, k: int) -> NodePolynomial:
    lam, exps, regime = _node_linear_map(tri.ell, tri.p, tri.q, k)
    coeffs = node_coefficients(tri.ell, tri.p, tri.q, k, tri.char_coefficients())
    support = frozenset(exps[jj] for jj in range(tri.ell + 1) if lam[jj] != 0)
    return NodePolynomial(k, coeffs, support, lam, exps, regime, tri.ell, tri.p, tri.q)


def support_by_congruence(ell: int, p: int, q: int, k: int) -> frozenset[int]:
    """j in J_k iff p is not congruent to j mod q/gcd(q,k) (generic regime)."""
    mod = q // math.gcd(q, k)
    return frozenset(j for j in range(ell + 1) if (p - j) % mod != 0)


# roots


@dataclass
class RootResult:
    roots: list[complex]
    residuals: list[float]
    min_separation: float
    flagged: bool

    @property
    def residual_max(self) -> float:
        return max(self.residuals, default=0.0)


def _sort_roots(roots: Iterable[complex]) -> list[complex]:
    return sorted(roots, key=lambda z: (round(cmath.phase(z), 9), round(abs(z), 9)))


def backward_error(coeffs: np.ndarray, t: complex) -> float:
    """|P(t)| relative to sum |c_j| |t|^j."""
    val = abs(np.polynomial.polynomial.polyval(t, coeffs))
    scale = np.polynomial.polynomial.polyval(abs(t), np.abs(coeffs))
    return float(val / scale) if scale else 0.0


def polish(coeffs: np.ndarray, t: complex, steps: int = 2) -> complex:
    der = np.polynomial.polynomial.polyder(coeffs)
    for _ in range(steps):
        d = np.polynomial.polynomial.polyval(t, der)
        if d == 0:
            break
        step = np.polynomial.polynomial.polyval(t, coeffs) / d
        t = t - step
    return complex(t)


def roots_in_cstar(poly: NodePolynomial | np.ndarray, tol: float = 1e-9) -> RootResult:
    """Roots in C* by companion eigenvalues plus Newton polishing.

    Zero roots (valuation) and roots at infinity (degree drop) are removed
    first.  The result is flagged when two roots are closer than 1e3 * tol,
    the numeric surrogate for a multiple root.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    c = np.asarray(poly.coefficients if isinstance(poly, NodePolynomial) else poly, dtype=complex)
    norm = np.abs(c).max() if c.size else 0.0
    if norm == 0:
        return RootResult([], [], math.inf, False)
    nz = np.nonzero(np.abs(c) > 1e-14 * norm)[0]
    c = c[nz[0]: nz[-1] + 1]
    if c.size <= 1:
        return RootResult([], [], math.inf, False)
    raw = np.roots(c[::-1])
    roots = [polish(c, complex(r)) for r in raw]
    roots = _sort_roots(roots)
    res = [backward_error(c, r) for r in roots]
    sep = min((abs(a - b) for i, a in enumerate(roots) for b in roots[i + 1:]), default=math.inf)
    flagged = sep < 1e3 * tol or max(res) > tol
    return RootResult(roots, res, sep, flagged)


def near_discriminant(tri: TriangleParam, k: int, tol: float = 1e-6) -> bool:
    """Whether P_k has two roots closer than ``tol``."""
    rr = roots_in_cstar(node_polynomial(tri, k), tol=1e-12)
    return rr.min_separation < tol


def distance_to_line(t: complex, direction: complex) -> float:
    return abs((t / direction).imag)


def ray_counts(roots: Sequence[complex], direction: complex) -> tuple[int, int]:
    """How many roots sit on the positive and negative ray of ``direction * R``."""
    pos = sum(1 for r in roots if (r / direction).real > 0)
    return pos, len(roots) - pos


# triangle nodes


@dataclass
class Node:
    t: complex
    s: complex
    point: tuple[complex, complex]
    residual: float = 0.0
    k: int | None = None


def node_pair(tri: TriangleParam, k: int, root: complex) -> tuple[complex, complex]:
    """The two parameters of the node attached to a root of P_k."""
    if tri.q == 2 * k:
        tau = cmath.sqrt(-1j * root)
        return tau, -tau
    return root, root * cmath.exp(2j * math.pi * k / tri.q)


def point_distance(u: tuple[complex, complex], v: tuple[complex, complex]) -> float:
    return max(abs(u[0] - v[0]), abs(u[1] - v[1]))


def relative_point_distance(u, v) -> float:
    return max(abs(u[0] - v[0]) / max(1.0, abs(u[0])), abs(u[1] - v[1]) / max(1.0, abs(u[1])))


@dataclass
class TriangleNodes:
    roots: dict[int, list[complex]]
    expected: dict[int, int]
    nodes: dict[int, list[Node]]
    residual_max: dict[int, float]
    node_residual_max: dict[int, float]
    line_distance_max: dict[int, float]
    rays: dict[int, tuple[int, int]]
    flagged: dict[int, bool]

    @property
    def total(self) -> int:
        return sum(len(v) for v in self.roots.values())

    def counts(self) -> dict[int, int]:
        return {k: len(v) for k, v in self.roots.items()}


def triangle_nodes(tri: TriangleParam, tol: float = 1e-9, check_generic: bool = True) -> TriangleNodes:
    """Nodes of the triangle curve, fiber by fiber."""
    from .obstruction import psi_triangle

    fibers = psi_triangle(tri.polygon).fiber_sizes
    out = TriangleNodes({}, {}, {}, {}, {}, {}, {}, {})
    for k in range(1, tri.q // 2 + 1):
        npoly = node_polynomial(tri, k)
        rr = roots_in_cstar(npoly, tol)
        if check_generic and rr.min_separation < 1e3 * tol:
            raise NonGeneric(f"non-generic parameters: P_{k} has nearly multiple roots")
        nodes = []
        for r in rr.roots:
            t, s = node_pair(tri, k, r)
            u, v = tri.evaluate(t), tri.evaluate(s)
            nodes.append(Node(t, s, u, relative_point_distance(u, v), k))
        out.roots[k] = rr.roots
        out.expected[k] = fibers.get(k, 0)
        out.nodes[k] = nodes
        out.residual_max[k] = rr.residual_max
        out.node_residual_max[k] = max((n.residual for n in nodes), default=0.0)
        out.line_distance_max[k] = max((distance_to_line(r, npoly.line) / abs(r) for r in rr.roots), default=0.0)
        out.rays[k] = ray_counts(rr.roots, npoly.line)
        out.flagged[k] = rr.flagged
    return out


# self-intersections


def _exact(x: complex):
    re, im = Fraction(x.real).limit_denominator(10 ** 12), Fraction(x.imag).limit_denominator(10 ** 12)
    if abs(float(re) - x.real) > 1e-13 * max(1, abs(x.real)) or abs(float(im) - x.imag) > 1e-13 * max(1, abs(x.imag)):
        re, im = Fraction(x.real), Fraction(x.imag)
    return sp.Rational(re.numerator, re.denominator) + sp.I * sp.Rational(im.numerator, im.denominator)


def _coordinate_numden(finite, which: int, var):
    num, den = sp.Integer(1), sp.Integer(1)
    for a, ab in finite:
        e = ab[which]
        if e > 0:
            num *= (var - a) ** e
        elif e < 0:
            den *= (var - a) ** (-e)
    return num, den


def _newton_pair(param: CurveParam, t: complex, s: complex, steps: int = 30) -> tuple[complex, complex, float]:
    """Polish phi(t) = phi(s) with t != s; returns the residual max |phi_i(t)/phi_i(s) - 1|."""
    for _ in range(steps):
        zt, wt = param.evaluate(t)
        zs, ws = param.evaluate(s)
        if not all(map(cmath.isfinite, (zt, wt, zs, ws))) or 0 in (zs, ws):
            break
        g = np.array([zt / zs - 1, wt / ws - 1])
        lt, ls = param.log_derivative(t), param.log_derivative(s)
        jac = np.array([[zt / zs * lt[0], -zt / zs * ls[0]],
                        [wt / ws * lt[1], -wt / ws * ls[1]]])
        try:
            dx = np.linalg.solve(jac, -g)
        except np.linalg.LinAlgError:
            break
        t, s = t + dx[0], s + dx[1]
        if max(abs(dx[0]), abs(dx[1])) < 1e-15 * max(1, abs(t), abs(s)):
            break
    zt, wt = param.evaluate(t)
    zs, ws = param.evaluate(s)
    res = max(abs(zt / zs - 1), abs(wt / ws - 1)) if zs and ws else math.inf
    return complex(t), complex(s), float(res)


def self_intersection_polynomial(param: CurveParam) -> sp.Poly:
    """Resultant in s of the two divided-difference equations, as a polynomial in t."""
    t, s = sp.symbols("t s")
    finite = [(_exact(complex(a)), ab) for a, ab in param.finite]
    eqs = []
    for which in (0, 1):
        num, den = _coordinate_numden(finite, which, t)
        num_s, den_s = num.subs(t, s), den.subs(t, s)
        diff = sp.expand(num * den_s - num_s * den)
        q, r = sp.div(sp.Poly(diff, t, s), sp.Poly(t - s, t, s))
        if not r.is_zero:
            raise ArithmeticError("divided difference is not exact")
        eqs.append(q)
    res = sp.resultant(eqs[0].as_expr(), eqs[1].as_expr(), s)
    poly = sp.Poly(sp.expand(res), t)
    # strip exact factors t and (t - a)
    for a in [sp.Integer(0)] + [a for a, _ in finite]:
        while True:
            q, r = sp.div(poly, sp.Poly(t - a, t))
            if r.is_zero and q.degree() >= 0 and not poly.is_zero:
                poly = q
            else:
                break
    return poly


def self_intersections(param: CurveParam, tol: float = 1e-9, expected: int | None = None) -> list[Node]:
    """Unordered pairs t != s with phi(t) = phi(s).

    The two coordinate equations are cleared of denominators, divided by
    (t - s) and the resulting system is eliminated by a resultant in s.  The
    roots in t are then paired through their images and polished by Newton
    on the 2x2 system.
    """
    if expected is None and param.polygon is not None:
        expected = param.polygon.node_count()
    poly = self_intersection_polynomial(param)
    nodes: list[Node] = []
    if poly.degree() > 0:
        poles = [a for a, _ in param.finite]
        scale = max([1.0] + [abs(a) for a in poles])
        coeffs = np.array([complex(c) for c in reversed(poly.all_coeffs())])
        coeffs = coeffs / np.abs(coeffs).max()
        # double precision first; clustered roots fall back to multiprecision
        for attempt in ("double", "multi"):
            if attempt == "double":
                cands = [polish(coeffs, complex(r), 3) for r in np.roots(coeffs[::-1])]
            else:
                cands = [complex(r) for r in poly.nroots(n=30, maxsteps=500)]
            cands = [c for c in cands
                     if abs(c) > 1e-8 * scale and all(abs(c - a) > 1e-7 * scale for a in poles)]
            nodes = _pair_candidates(param, cands, tol, scale)
            if expected is None or len(nodes) == expected:
                break
    if expected is not None and len(nodes) != expected:
        raise NonGeneric(f"degenerate parameters: found {len(nodes)} nodes, expected {expected}")
    return nodes


def _pair_candidates(param: CurveParam, cands: list[complex], tol: float, scale: float) -> list[Node]:
    used = [False] * len(cands)
    imgs = [param.evaluate(c) for c in cands]
    nodes = []
    order = sorted(range(len(cands)), key=lambda i: (round(cands[i].real, 8), round(cands[i].imag, 8)))
    for i in order:
        if used[i]:
            continue
        best, bd = None, math.inf
        for j in order:
            if j == i or used[j] or abs(cands[i] - cands[j]) < 1e-6 * scale:
                continue
            d = relative_point_distance(imgs[i], imgs[j])
            if d < bd:
                best, bd = j, d
        if best is None or bd > 1e-3:
            continue
        t, s, res = _newton_pair(param, cands[i], cands[best])
        if res > max(tol, 1e-7) or abs(t - s) < 1e-6 * scale:
            continue
        used[i] = used[best] = True
        if (round(s.real, 9), round(s.imag, 9)) < (round(t.real, 9), round(t.imag, 9)):
            t, s = s, t
        nodes.append(Node(t, s, param.evaluate(t), res))
    nodes.sort(key=lambda n: (round(n.t.real, 8), round(n.t.imag, 8)))
    return nodes
