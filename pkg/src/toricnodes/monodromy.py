"""Numerical monodromy: root and node continuation along parameter loops."""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .curves import (
    CurveParam,
    Node,
    NonGeneric,
    TriangleParam,
    _newton_pair,
    node_coefficients,
    node_polynomial,
    roots_in_cstar,
    self_intersections,
)
from .lattice import LatticePolygon, detect_kite
from .permgroup import Permutation, PermGroup, block_system

DEFAULT_STEPS = 256
MIN_STEP = 2.0 ** -20


class TrackingFailure(RuntimeError):
    def __init__(self, message: str, theta: float):
        super().__init__(f"tracking failure at theta={theta:.6g}: {message}")
        self.theta = theta


class EmptyDiscriminant(ValueError):
    pass


# loops


@dataclass
class ParamLoop:
    """A closed path theta in [0, 1] -> parameter vector."""

    base: np.ndarray
    path: Callable[[float], np.ndarray]
    description: dict = field(default_factory=dict)

    def __call__(self, theta: float) -> np.ndarray:
        return np.asarray(self.path(theta), dtype=complex)

    def is_closed(self, tol: float = 1e-12) -> bool:
        a, b = np.sort_complex(self(0.0)), np.sort_complex(self(1.0))
        return bool(np.max(np.abs(a - b), initial=0.0) <= tol * max(1.0, np.max(np.abs(a), initial=0.0)))

    def then(self, other: "ParamLoop") -> "ParamLoop":
        """Concatenation: self first, then other (both based at the same point)."""
        def path(theta):
            return self(2 * theta) if theta <= 0.5 else other(2 * theta - 1)
        return ParamLoop(self.base, path, {"kind": "concat", "parts": [self.description, other.description]})

    def reverse(self) -> "ParamLoop":
        return ParamLoop(self.base, lambda th: self(1 - th), {"kind": "reverse", "loop": self.description})


def constant_loop(a: Sequence[complex]) -> ParamLoop:
    base = np.asarray(a, dtype=complex)
    return ParamLoop(base, lambda th: base, {"kind": "constant"})


def rotation_loop(a: Sequence[complex]) -> ParamLoop:
    """Every parameter multiplied by exp(2 pi i theta)."""
    base = np.asarray(a, dtype=complex)
    return ParamLoop(base, lambda th: base * cmath.exp(2j * math.pi * th), {"kind": "rotation"})


def circle_loop(a: Sequence[complex], index: int, center: complex, radius: float) -> ParamLoop:
    """Move coordinate ``index`` straight to the circle, around it once, and back.

    The circle is entered at the point nearest to the base value.  When the
    base itself lies on the circle the segments are empty.
    """
    base = np.asarray(a, dtype=complex)
    start = base[index]
    off = start - center
    u = off / abs(off) if abs(off) > 0 else 1.0
    entry = center + radius * u

    def path(th: float) -> np.ndarray:
        out = base.copy()
        if th <= 1 / 3:
            out[index] = start + (entry - start) * (3 * th)
        elif th <= 2 / 3:
            out[index] = center + radius * u * cmath.exp(2j * math.pi * (3 * th - 1))
        else:
            out[index] = entry + (start - entry) * (3 * th - 2)
        return out

    desc = {"kind": "circle", "index": index, "center": [center.real, center.imag], "radius": radius}
    return ParamLoop(base, path, desc)


def lasso_loop(a: Sequence[complex], index: int, target: complex, radius: float, height: float) -> ParamLoop:
    """Detour off the line through the base and ``target``, circle ``target`` once, return.

    The tail runs base -> base + i*height -> target + i*height -> target + i*radius*sign,
    so it never crosses the segment joining the base to ``target``.
    """
    base = np.asarray(a, dtype=complex)
    start = base[index]
    up = complex(0.0, math.copysign(1.0, height))
    way = [start, start + 1j * height, target + 1j * height, target + up * radius]

    def along(u: float) -> complex:
        # u in [0, 1] over the three tail segments
        u = 3 * u
        i = min(int(u), 2)
        return way[i] + (way[i + 1] - way[i]) * (u - i)

    def path(th: float) -> np.ndarray:
        out = base.copy()
        if th <= 0.3:
            out[index] = along(th / 0.3)
        elif th <= 0.7:
            out[index] = target + up * radius * cmath.exp(2j * math.pi * (th - 0.3) / 0.4)
        else:
            out[index] = along((1 - th) / 0.3)
        return out

    desc = {"kind": "lasso", "index": index, "target": [complex(target).real, complex(target).imag],
            "radius": radius, "height": height}
    return ParamLoop(base, path, desc)


# root tracking


@dataclass
class TrackResult:
    permutation: list[int]
    base_roots: list[complex]
    end_roots: list[complex]
    steps_used: int
    closing_distance: float
    residual: float
    k: int

    def as_permutation(self) -> Permutation:
        dom = [(self.k, i) for i in range(len(self.permutation))]
        return Permutation.from_mapping(dom, {(self.k, i): (self.k, j) for i, j in enumerate(self.permutation)})

    def is_identity(self) -> bool:
        return all(i == j for i, j in enumerate(self.permutation))

    def is_transposition(self) -> bool:
        moved = [i for i, j in enumerate(self.permutation) if i != j]
        return len(moved) == 2 and self.permutation[moved[0]] == moved[1]


def _roots_at(tri: TriangleParam, a: np.ndarray, k: int, tol: float):
    char = np.polynomial.polynomial.polyfromroots(a).astype(complex)
    rr = roots_in_cstar(node_coefficients(tri.ell, tri.p, tri.q, k, char), tol)
    return np.array(rr.roots, dtype=complex), rr.residual_max


def _separation(z: np.ndarray) -> float:
    if len(z) < 2:
        return math.inf
    d = np.abs(z[:, None] - z[None, :])
    d[np.diag_indices(len(z))] = np.inf
    return float(d.min())


def _log_separation(z: np.ndarray) -> float:
    if len(z) < 2:
        return math.inf
    d = np.abs(np.log(z[:, None] / z[None, :]))
    d[np.diag_indices(len(z))] = np.inf
    return float(d.min())


def _match(prev: np.ndarray, new: np.ndarray) -> tuple[np.ndarray, float]:
    cost = np.abs(prev[:, None] - new[None, :])
    rows, cols = linear_sum_assignment(cost)
    order = np.empty(len(prev), dtype=int)
    order[rows] = cols
    return order, float(cost[rows, cols].max(initial=0.0))


def track_roots(tri: TriangleParam, loop: ParamLoop, k: int, tol: float = 1e-9,
                steps: int = DEFAULT_STEPS, min_step: float = MIN_STEP) -> TrackResult:
    """Continue the roots of P_k along the loop and read off the end-to-start matching.

    Each step recomputes all roots and matches them to the previous ones by
    optimal assignment; the step is halved whenever the largest matched
    distance exceeds a third of the smallest root separation.
    """
    base, res_max = _roots_at(tri, loop(0.0), k, tol)
    cur = base.copy()
    theta, h, used = 0.0, 1.0 / steps, 0
    while theta < 1.0:
        h = min(h, 1.0 - theta)
        new, res = _roots_at(tri, loop(theta + h), k, tol)
        ok = len(new) == len(cur)
        if ok and len(cur):
            order, dist = _match(cur, new)
            ok = dist <= _separation(cur) / 3 and dist <= _separation(new) / 3
        if not ok:
            h /= 2
            if h < min_step:
                raise TrackingFailure("step underflow near the discriminant", theta)
            continue
        if len(cur):
            cur = new[order]
        theta += h
        used += 1
        res_max = max(res_max, res)
        h = min(2 * h, 1.0 / steps)
    if len(base) == 0:
        return TrackResult([], [], [], used, 0.0, res_max, k)
    perm, closing = _match(cur, base)
    return TrackResult([int(x) for x in perm], list(base), list(cur), used, closing, res_max, k)


# discriminant points


@dataclass
class DiscriminantPoint:
    value: complex  # parameter value of coordinate ``index``
    root: complex  # the double root of P_k
    index: int
    k: int


def _split_linear(tri: TriangleParam, k: int, index: int) -> tuple[np.ndarray, np.ndarray]:
    """P_k = A - a_index * B as polynomials in t."""
    others = np.delete(np.asarray(tri.a, dtype=complex), index)
    Q = np.polynomial.polynomial.polyfromroots(others).astype(complex) if len(others) else np.array([1 + 0j])
    tq = np.concatenate([[0], Q])
    qpad = np.concatenate([Q, [0]])
    A = node_coefficients(tri.ell, tri.p, tri.q, k, tq)
    B = node_coefficients(tri.ell, tri.p, tri.q, k, qpad)
    return A, B


def discriminant_points(tri: TriangleParam, k: int, index: int = 0) -> list[DiscriminantPoint]:
    """Values of a_index (others fixed) where P_k acquires a double root in C*.

    P_k is affine in a_index, so a double root t solves the Wronskian
    A'B - AB' = 0 and then a_index = A(t)/B(t); each point is polished by
    Newton on (P, P') in the unknowns (t, a).
    """
    P = np.polynomial.polynomial
    A, B = _split_linear(tri, k, index)
    dA, dB = P.polyder(A), P.polyder(B)
    W = P.polysub(P.polymul(dA, B), P.polymul(A, dB))
    rr = roots_in_cstar(W, tol=1e-6)
    pts = []
    scale = max(1.0, max(abs(x) for x in tri.a))
    for t in rr.roots:
        b = P.polyval(t, B)
        if abs(b) < 1e-14:
            continue
        a = P.polyval(t, A) / b
        d2A, d2B = P.polyder(dA), P.polyder(dB)
        for _ in range(20):
            f = np.array([P.polyval(t, A) - a * P.polyval(t, B), P.polyval(t, dA) - a * P.polyval(t, dB)])
            jac = np.array([[P.polyval(t, dA) - a * P.polyval(t, dB), -P.polyval(t, B)],
                            [P.polyval(t, d2A) - a * P.polyval(t, d2B), -P.polyval(t, dB)]])
            try:
                dx = np.linalg.solve(jac, -f)
            except np.linalg.LinAlgError:
                break
            t, a = t + dx[0], a + dx[1]
            if abs(dx[0]) + abs(dx[1]) < 1e-15 * scale:
                break
        if abs(a) > 1e-9 * scale and abs(t) > 1e-12:
            pts.append(DiscriminantPoint(complex(a), complex(t), index, k))
    return pts


def _special_values(tri: TriangleParam, index: int) -> list[complex]:
    """Values of a_index where some P_k loses a root to 0 or infinity, or meets a discriminant."""
    vals = [0j]
    for k in range(1, tri.q // 2 + 1):
        vals += [d.value for d in discriminant_points(tri, k, index)]
        A, B = _split_linear(tri, k, index)
        support = sorted(node_polynomial(tri, k).support)
        for j in (support[0], support[-1]) if support else ():
            if abs(B[j]) > 1e-14:
                vals.append(A[j] / B[j])
    return vals


def discriminant_loop(tri: TriangleParam, k: int, index: int = 0, radius: float | None = None,
                      choice: int = 0) -> tuple[ParamLoop, DiscriminantPoint]:
    """A small circle in a_index around a point of the k-th discriminant.

    Points are ordered by distance to the base value; ``choice`` selects one.
    The default radius is 1e-2 |a_index|, shrunk if needed so the disc
    contains no other special value.
    """
    n_roots = len(roots_in_cstar(node_polynomial(tri, k)).roots)
    if n_roots < 2:
        raise EmptyDiscriminant(f"empty discriminant: P_{k} has {n_roots} root(s) in C*")
    pts = discriminant_points(tri, k, index)
    if not pts:
        raise NonGeneric("no discriminant point found")
    base_val = tri.a[index]
    pts.sort(key=lambda d: (abs(d.value - base_val), d.value.real, d.value.imag))
    target = pts[choice]
    r = 1e-2 * abs(base_val) if radius is None else radius
    others = [v for v in _special_values(tri, index) if abs(v - target.value) > 1e-8 * abs(base_val)]
    if others:
        r = min(r, 0.3 * min(abs(v - target.value) for v in others))
    r = min(r, 0.5 * abs(base_val - target.value)) if abs(base_val - target.value) > 0 else r
    return circle_loop(tri.a, index, target.value, r), target


def loop_permutations(tri: TriangleParam, loop: ParamLoop, tol: float = 1e-9,
                      steps: int = DEFAULT_STEPS) -> dict[int, TrackResult]:
    return {k: track_roots(tri, loop, k, tol, steps) for k in range(1, tri.q // 2 + 1)}


# node tracking for general curves


@dataclass
class NodeTrack:
    nodes: list[Node]
    steps_used: int
    residual: float


def track_nodes(family: Callable[[float], CurveParam], nodes: Sequence[Node], steps: int = DEFAULT_STEPS,
                min_step: float = MIN_STEP, tol: float = 1e-10, metric: str = "absolute") -> NodeTrack:
    """Continue node parameter pairs (t, s) along a one-parameter family of curves.

    Predictor: linear extrapolation of the last two accepted steps.
    Corrector: Newton on phi(t) = phi(s).  A step is rejected when Newton
    fails or when some parameter moves more than a third of the distance to
    the nearest other node parameter.  With ``metric="log"`` distances are
    measured as |log(u/v)|, which suits families whose nodes live on very
    different scales.
    """
    if metric not in ("absolute", "log"):
        raise ValueError("metric must be 'absolute' or 'log'")
    log = metric == "log"
    sepf = _log_separation if log else _separation

    def dist(u, v):
        return abs(cmath.log(u / v)) if log else abs(u - v)

    cur = [(n.t, n.s) for n in nodes]
    prev = None
    theta, h, used, worst = 0.0, 1.0 / steps, 0, 0.0
    while theta < 1.0:
        h = min(h, 1.0 - theta)
        param = family(theta + h)
        new, ok, res_step = [], True, 0.0
        for i, (t, s) in enumerate(cur):
            if prev is not None and prev[2] > 0:
                r = h / prev[2]
                t0 = t + (t - prev[0][i][0]) * r
                s0 = s + (s - prev[0][i][1]) * r
            else:
                t0, s0 = t, s
            tt, ss, res = _newton_pair(param, t0, s0)
            if not res < tol:
                ok = False
                break
            new.append((tt, ss))
            res_step = max(res_step, res)
        if ok:
            pts = np.array([x for pair in cur for x in pair])
            sep = sepf(pts)
            moved = max(max(dist(a[0], b[0]), dist(a[1], b[1])) for a, b in zip(new, cur)) if cur else 0.0
            ok = moved <= sep / 3
            if ok and cur:
                # the corrected pairs must still be distinct nodes
                newpts = np.array([x for pair in new for x in pair])
                ok = sepf(newpts) > 0.1 * sep
        if not ok:
            h /= 2
            if h < min_step:
                raise TrackingFailure("node continuation step underflow", theta)
            prev = None
            continue
        prev = (cur, theta, h)
        cur = new
        theta += h
        used += 1
        worst = max(worst, res_step)
        h = min(2 * h, 1.0 / steps)
    final = family(1.0)
    return NodeTrack([Node(t, s, final.evaluate(t), 0.0) for t, s in cur], used, worst)


def match_nodes(end: Sequence[Node], start: Sequence[Node]) -> tuple[list[int], float]:
    """Match tracked nodes back to the starting ones as unordered parameter pairs."""
    n = len(start)
    cost = np.zeros((n, n))
    for i, a in enumerate(end):
        for j, b in enumerate(start):
            cost[i, j] = min(max(abs(a.t - b.t), abs(a.s - b.s)), max(abs(a.t - b.s), abs(a.s - b.t)))
    rows, cols = linear_sum_assignment(cost)
    perm = [0] * n
    for r, c in zip(rows, cols):
        perm[r] = int(c)
    return perm, float(cost[rows, cols].max(initial=0.0))


# kites


@dataclass
class KiteDecoration:
    alpha: complex
    beta: complex
    nodes: list[Node]
    signs: list[int]
    residuals: list[float]
    normalized: CurveParam

    @property
    def ratio(self) -> complex:
        return self.alpha / self.beta

    def blocks(self) -> list[list[int]]:
        plus = [i for i, s in enumerate(self.signs) if s > 0]
        minus = [i for i, s in enumerate(self.signs) if s < 0]
        return [b for b in (plus, minus) if b]


def normalized_kite_curve(param: CurveParam) -> CurveParam:
    """Rewrite a kite curve in the coordinates of its normal form."""
    if param.polygon is None:
        raise ValueError("curve carries no polygon")
    norm = detect_kite(param.polygon)
    if norm is None:
        raise ValueError("polygon is not a kite")
    return param.transform(norm.matrix, LatticePolygon(norm.vertices))


def kite_coefficients(param: CurveParam, samples: int = 16, seed: int = 0) -> tuple[complex, complex, np.ndarray]:
    """Fit alpha/z + sum c_b w^b + beta z = 0 through sampled curve points.

    ``param`` must already be in normal-form coordinates.
    """
    poly = param.polygon
    ox, oy = poly.offset
    ys = [y + oy for x, y in poly.lattice_points if x + ox == 0]
    lo, hi = min(ys), max(ys)
    rng = np.random.default_rng(seed)
    rows = []
    for _ in range(samples):
        t = cmath.rect(1.0 + rng.random(), 2 * math.pi * rng.random())
        z, w = param.evaluate(t)
        row = np.array([1 / z] + [w ** b for b in range(lo, hi + 1)] + [z], dtype=complex)
        rows.append(row / np.linalg.norm(row))
    _, sv, vh = np.linalg.svd(np.array(rows))
    v = vh[-1].conj()
    return complex(v[0]), complex(v[-1]), v[1:-1]


def kite_decoration(param: CurveParam, tol: float = 1e-8) -> KiteDecoration:
    """Sign of z / sqrt(alpha/beta) at every node, in normal-form coordinates."""
    curve = normalized_kite_curve(param)
    alpha, beta, _ = kite_coefficients(curve)
    ratio = alpha / beta
    root = cmath.sqrt(ratio)
    nodes = self_intersections(curve, expected=param.polygon.node_count())
    signs, residuals = [], []
    for nd in nodes:
        z = nd.point[0]
        residuals.append(abs(z * z - ratio))
        signs.append(1 if (z / root).real > 0 else -1)
    if residuals and max(residuals) > tol:
        raise NonGeneric(f"not a kite curve: |z^2 - alpha/beta| = {max(residuals):.3g}")
    return KiteDecoration(alpha, beta, nodes, signs, residuals, curve)


def kite_loop_family(curve: CurveParam, index: int, center: complex, radius: float) -> Callable[[float], CurveParam]:
    """Move parameter ``index`` once around a circle through its base value."""
    params = list(curve.parameters)
    start = params[index]
    off = start - center

    def family(theta: float) -> CurveParam:
        ps = list(params)
        ps[index] = center + off * cmath.exp(2j * math.pi * theta)
        return curve.with_parameters(ps)

    return family


@dataclass
class KiteMonodromy:
    decoration: KiteDecoration
    permutations: list[list[int]]
    loops: list[dict]
    failures: list[dict]
    group: PermGroup

    def block_system(self) -> list[list[int]] | None:
        plus = [i for i, s in enumerate(self.decoration.signs) if s > 0]
        if len(plus) < 2 or not self.group.is_transitive():
            return None
        return block_system(self.group, (plus[0], plus[1]))


def kite_monodromy(param: CurveParam, loops: int = 12, seed: int = 0, index: int | None = None,
                   steps: int = DEFAULT_STEPS) -> KiteMonodromy:
    """Sample lasso loops of one parameter around the others and collect node permutations.

    Fixing all but one parameter leaves one effective cross-ratio, so the
    punctures of that parameter's plane (the other parameter values) carry
    the whole monodromy.  Loops cycle through the punctures; radius and
    detour side are drawn from ``seed``.
    """
    deco = kite_decoration(param)
    curve = deco.normalized
    n = len(deco.nodes)
    params = list(curve.parameters)
    if index is None:
        index = len(params) - 1
    others = [a for j, a in enumerate(params) if j != index and a is not None]
    gaps = [abs(a - b) for a in params + [0] for b in params + [0] if a is not None and b is not None and a != b]
    small = min(gaps) if gaps else 1.0
    rng = np.random.default_rng(seed)
    perms, descs, fails = [], [], []
    for m in range(loops):
        target = others[m % len(others)]
        radius = small * (0.05 + 0.2 * rng.random())
        height = small * (0.3 + 0.5 * rng.random()) * (1 if rng.random() < 0.5 else -1)
        loop = lasso_loop(params, index, target, radius, height)

        def family(theta, loop=loop):
            return curve.with_parameters(list(loop(theta)))

        try:
            tr = track_nodes(family, deco.nodes, steps=steps)
        except TrackingFailure as exc:
            fails.append({**loop.description, "theta": exc.theta})
            continue
        perm, dist = match_nodes(tr.nodes, deco.nodes)
        if dist > 1e-6:
            fails.append({**loop.description, "theta": 1.0, "closing": dist})
            continue
        perms.append(perm)
        descs.append(loop.description)
    dom = list(range(n))
    group = PermGroup(dom, [Permutation(tuple(dom), tuple(p)) for p in perms])
    return KiteMonodromy(deco, perms, descs, fails, group)
