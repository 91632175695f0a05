import cmath
import itertools
import math

import numpy as np
import pytest
import sympy as sp

from toricnodes.curves import (
    CurveParam,
    NonGeneric,
    TriangleParam,
    harnack_params,
    near_discriminant,
    node_polynomial,
    roots_in_cstar,
    self_intersections,
    support_by_congruence,
    triangle_nodes,
)
from toricnodes.lattice import LatticePolygon
from toricnodes.monodromy import discriminant_points
from toricnodes.obstruction import psi_triangle

FIG1 = TriangleParam(5, 7, 6, (1.0,) * 5)


def elementary(a, r):
    return sum(math.prod(c) for c in itertools.combinations(a, r)) if r else 1


def test_harnack_params_ordered():
    for poly, n in [(LatticePolygon([(0, 0), (5, 0), (7, 6)]), 8), (LatticePolygon([(0, 0), (1, 0), (0, 1)]), 3),
                    (LatticePolygon.square(5), 20)]:
        c = harnack_params(poly)
        vals = [a.real for a in c.parameters]
        assert len(vals) == n and vals == sorted(vals) and len(set(vals)) == n
        assert c.scale == (1, 1)
        for (a, normal), slot in zip(c.factors, c.slots):
            assert normal == poly.edge(slot).inner_normal
    sq = harnack_params(LatticePolygon.square(5))
    assert [sq.slots.count(j) for j in range(4)] == [5, 5, 5, 5]
    with pytest.raises(ValueError):
        harnack_params(LatticePolygon.square(2), spacing=0)


def test_figure1_curve_value():
    x, y = FIG1.evaluate(2.0)
    assert x == 64 and abs(y - 1 / 128) < 1e-15


def test_conjugation_symmetry():
    c = harnack_params(LatticePolygon.square(3))
    rng = np.random.default_rng(0)
    for _ in range(20):
        t = complex(*rng.normal(size=2)) * 3
        u, v = c.evaluate(t), c.evaluate(t.conjugate())
        assert abs(u[0].conjugate() - v[0]) < 1e-12 * max(1, abs(u[0]))
        assert abs(u[1].conjugate() - v[1]) < 1e-12 * max(1, abs(u[1]))


def test_pole_is_flagged_not_raised():
    c = harnack_params(LatticePolygon.square(2))
    a = c.parameters[0]
    z, w = c.evaluate(a)
    assert c.is_pole(a)
    assert z == 0 or w == 0 or not (cmath.isfinite(z) and cmath.isfinite(w))
    x, y = FIG1.evaluate(0)
    assert x == 0 and math.isinf(abs(y))


def test_infinite_parameter_is_constant_factor():
    poly = LatticePolygon([(0, 0), (1, 0), (0, 1)])
    c = CurveParam.from_polygon(poly, [[1.0], [None], [3.0]])
    t = 0.7 + 0.2j
    assert c.evaluate(t) == pytest.approx(((t - 1) ** 0 * (t - 3) ** 1, (t - 1) ** 1 * (t - 3) ** 0))


def test_triangle_rejects_zero_parameters():
    with pytest.raises(ValueError):
        TriangleParam(2, 1, 3, (1.0, 0.0))


@pytest.mark.parametrize("ell,p,q", [(5, 7, 6), (3, 1, 5), (4, 2, 7), (2, 5, 8), (6, 3, 4)])
def test_coefficients_match_closed_form(ell, p, q):
    rng = np.random.default_rng(ell * 100 + q)
    a = tuple(complex(*rng.normal(size=2)) for _ in range(ell))
    tri = TriangleParam(ell, p, q, a)
    for k in range(1, q // 2 + 1):
        P = node_polynomial(tri, k)
        if q == 2 * k:
            continue
        for j in range(ell + 1):
            ref = (-1) ** (ell - j) * elementary(a, ell - j) * math.sin(k * math.pi * (p - j) / q) \
                * cmath.exp(1j * j * math.pi * k / q)
            assert abs(P.coefficients[j] - ref) < 1e-10 * max(1, abs(ref))


def test_figure1_supports():
    assert node_polynomial(FIG1, 2).support == frozenset({0, 2, 3, 5})
    P3 = node_polynomial(FIG1, 3)
    assert P3.regime == "halved" and P3.support == frozenset({0, 1, 2})
    assert np.count_nonzero(P3.coefficients) == 3  # quadratic
    roots = roots_in_cstar(P3).roots
    assert len(roots) == 2
    # both roots on exp(-i pi 21/6) R* = i R*
    assert all(abs(r.real) < 1e-9 * abs(r) for r in roots)
    # quadratic formula oracle
    c0, c1, c2 = P3.coefficients[:3]
    disc = cmath.sqrt(c1 * c1 - 4 * c2 * c0)
    ref = sorted([(-c1 + disc) / (2 * c2), (-c1 - disc) / (2 * c2)], key=lambda z: z.imag)
    assert np.allclose(sorted(roots, key=lambda z: z.imag), ref, atol=1e-12)


def test_halved_support_rule():
    for ell, p in [(5, 7), (4, 2), (6, 3), (3, 4)]:
        tri = TriangleParam(ell, p, 6, (1.0,) * ell)
        expected = set(range((ell - 1) // 2 + 1)) if p % 2 == 0 else set(range(ell // 2 + 1))
        assert node_polynomial(tri, 3).support == expected


def test_support_congruence_matches_sines():
    for q in range(2, 13):
        for ell in range(1, 9):
            for p in range(0, q + 1):
                for k in range(1, q // 2 + 1):
                    if q == 2 * k:
                        continue
                    sines = {j for j in range(ell + 1) if abs(math.sin(k * math.pi * (p - j) / q)) > 1e-9}
                    assert support_by_congruence(ell, p, q, k) == sines


def test_monomial_has_no_roots():
    assert roots_in_cstar(np.array([0, 0, 3.0 + 0j])).roots == []


def test_figure1_nodes():
    res = triangle_nodes(FIG1)
    assert res.counts() == {1: 5, 2: 5, 3: 2} and res.total == 12
    assert max(res.line_distance_max.values()) < 1e-8
    assert max(res.node_residual_max.values()) < 1e-8
    for k in (1, 2):
        w = cmath.exp(2j * math.pi * k / 6)
        for t in res.roots[k]:
            u, v = FIG1.evaluate(t), FIG1.evaluate(t * w)
            assert max(abs(u[0] - v[0]), abs(u[1] - v[1])) < 1e-8 * max(1, abs(u[1]))


def test_triangle_without_interior_points():
    tri = TriangleParam(1, 1, 2, (2.0,))
    assert triangle_nodes(tri).total == 0


@pytest.mark.parametrize("seed", range(6))
def test_random_triangle_counts(seed):
    rng = np.random.default_rng(seed)
    q, ell = int(rng.integers(1, 9)), int(rng.integers(1, 7))
    p = int(rng.integers(0, q + 1))
    a = tuple(complex(*rng.normal(size=2)) for _ in range(ell))
    tri = TriangleParam(ell, p, q, a)
    res = triangle_nodes(tri)
    fibers = psi_triangle(tri.polygon).fiber_sizes
    assert all(res.counts()[k] == fibers.get(k, 0) for k in res.counts())
    assert res.total == len(tri.polygon.interior_points)


def test_near_discriminant():
    assert not any(near_discriminant(FIG1, k, 1e-6) for k in (1, 2, 3))
    d = discriminant_points(FIG1, 1, 0)[0]
    tri = FIG1.with_a((d.value,) + FIG1.a[1:])
    assert near_discriminant(tri, 1, 1e-4)
    # a single root can never collide
    lone = TriangleParam(2, 1, 4, (1.0, 2.0))
    assert len(roots_in_cstar(node_polynomial(lone, 2)).roots) <= 1
    assert not near_discriminant(lone, 2, 1e-1)


def test_nongeneric_flag():
    d = discriminant_points(FIG1, 2, 0)[0]
    tri = FIG1.with_a((d.value,) + FIG1.a[1:])
    with pytest.raises(NonGeneric):
        triangle_nodes(tri)


def test_self_intersections_match_triangle_nodes():
    tri = TriangleParam(3, 1, 4, (1.0, 2.0, 3.5))
    ref = triangle_nodes(tri)
    pairs = [(n.t, n.s) for ns in ref.nodes.values() for n in ns]
    found = self_intersections(tri.to_curve(), expected=len(pairs))
    assert len(found) == len(pairs) == len(tri.polygon.interior_points)
    for n in found:
        assert min(min(max(abs(n.t - a), abs(n.s - b)), max(abs(n.t - b), abs(n.s - a))) for a, b in pairs) < 1e-8


def test_self_intersections_kite_and_empty():
    kite = LatticePolygon.convex_hull([(-1, 0), (1, 0), (0, 2), (0, -2)])
    assert len(self_intersections(harnack_params(kite))) == 3
    assert self_intersections(harnack_params(LatticePolygon([(0, 0), (1, 0), (0, 1)]))) == []


def test_self_intersection_residuals_square():
    c = harnack_params(LatticePolygon.square(3))
    nodes = self_intersections(c)
    assert len(nodes) == 4
    for n in nodes:
        u, v = c.evaluate(n.t), c.evaluate(n.s)
        assert abs(u[0] / v[0] - 1) < 1e-9 and abs(u[1] / v[1] - 1) < 1e-9
        assert abs(n.t - n.s) > 1e-6


def test_sympy_resultant_oracle_small():
    # unit-free check of the pairing: phi(t) = phi(s) with t != s, for a 1-node curve
    poly = LatticePolygon.square(2)
    c = harnack_params(poly)
    (n,) = self_intersections(c)
    t, s = sp.symbols("t s")
    exprs = []
    for which in (0, 1):
        num = sp.Integer(1)
        for a, normal in c.finite:
            num *= (t - sp.nsimplify(a.real)) ** normal[which] / (s - sp.nsimplify(a.real)) ** normal[which]
        exprs.append(sp.lambdify((t, s), num))
    assert abs(exprs[0](n.t, n.s) - 1) < 1e-9 and abs(exprs[1](n.t, n.s) - 1) < 1e-9
