import numpy as np
import pytest

from toricnodes.curves import TriangleParam
from toricnodes.hypotheses import Wedge, wedge
from toricnodes.lattice import LatticePolygon
from toricnodes.monodromy import constant_loop, discriminant_loop, track_roots
from toricnodes.patchwork import (
    DegenerationFamily,
    degenerate_eval,
    degeneration_family,
    geometric_schedule,
    limit_components,
    limit_distance,
    patch_loop,
    pi,
    pi_prime,
    pi_second,
    sample_points,
    subdivide,
    track_degeneration_nodes,
)

SQ = LatticePolygon.square(5)
W_SHORT = Wedge(0, ((0, 0), (1, 0), (2, 0), (3, 0)), (0, 4))
W_LONG = Wedge(0, ((0, 0), (1, 0), (2, 0), (3, 0), (4, 0)), (0, 4))
W_TOP = wedge(SQ, 0, (2, 5))
W_MIRROR = Wedge(0, tuple((i, 0) for i in range(1, 6)), (5, 4))


def nu_reference(sub, x):
    a, b = sub.to_wedge(x)
    p, q, ell = sub.p, sub.q, sub.ell
    return max(0, p * b - q * a, q * (a - ell) + (ell - p) * b)


def test_triangle_spanning_itself():
    tri = LatticePolygon([(0, 0), (5, 0), (7, 6)])
    sub = subdivide(tri, wedge(tri, 0, (7, 6)))
    assert (sub.ell, sub.q) == (5, 6)
    assert sub.part("prime") is None and sub.part("second") is None
    assert all(sub.nu(x) == 0 for x in tri.lattice_points)
    assert sub.counts()["T"] == 12


def test_square_wedge_subdivision():
    sub = subdivide(SQ, W_SHORT)
    assert (sub.ell, sub.p, sub.q) == (3, 0, 4)
    assert sub.nu_is_convex()
    assert sub.part("second") is not None and sub.part("T") is not None
    for x in SQ.lattice_points:
        assert sub.nu(x) == nu_reference(sub, x)
        inside = all(c >= 0 for c in (x[1], 4 * (3 - x[0]) - 3 * x[1], x[0]))
        assert (sub.nu(x) == 0) == inside
    assert sub.m == 1 + max(nu_reference(sub, x) for x in SQ.lattice_points)


@pytest.mark.parametrize("w", [W_SHORT, W_LONG, W_TOP, W_MIRROR])
def test_nu_convex_and_counts_partition(w):
    sub = subdivide(SQ, w)
    assert sub.nu_is_convex()
    assert sum(sub.counts().values()) == len(SQ.interior_points)


def test_expected_counts():
    assert subdivide(SQ, W_SHORT).counts() == {"T": 3, "prime": 0, "second": 13, "eps_prime": 0, "eps_second": 0}
    assert subdivide(SQ, W_LONG).counts() == {"T": 3, "prime": 0, "second": 10, "eps_prime": 0, "eps_second": 3}
    assert subdivide(SQ, W_TOP).counts() == {"T": 10, "prime": 2, "second": 4, "eps_prime": 0, "eps_second": 0}
    assert subdivide(SQ, W_MIRROR).counts() == {"T": 3, "prime": 10, "second": 0, "eps_prime": 3, "eps_second": 0}


def test_wedge_outside_polygon_rejected():
    with pytest.raises(ValueError):
        subdivide(LatticePolygon.square(2), W_SHORT)


def test_family_groups_are_disjoint():
    fam = degeneration_family(SQ, W_SHORT)
    with pytest.raises(ValueError):
        DegenerationFamily(fam.sub, fam.jp, [fam.jp[0][0]] + fam.jt[1:], fam.jpp, fam.polygon)
    with pytest.raises(ValueError):
        DegenerationFamily(fam.sub, fam.jp, [0.0] + fam.jt[1:], fam.jpp, fam.polygon)


@pytest.mark.parametrize("w", [W_SHORT, W_TOP, W_MIRROR])
def test_family_exponents_balance(w):
    fam = degeneration_family(SQ, w)
    s = fam.sub
    al = sum(n[0] for _, n in fam.jp)
    be = sum(n[1] for _, n in fam.jp)
    assert (al, be) == (s.q, -s.p)
    # the full exponent sum vanishes, as for any closed polygon
    tot = [al + sum(n[0] for _, n in fam.jpp), be + len(fam.jt) + sum(n[1] for _, n in fam.jpp)]
    assert tot == [0, 0]


def test_degenerate_eval_at_one_matches_curve():
    fam = degeneration_family(SQ, W_TOP)
    c = fam.curve(1.0)
    for t in sample_points(8, 0.9):
        x, y, z = degenerate_eval(fam, 1.0, t)
        u = c.evaluate(t)
        assert z == 1.0
        assert abs(x - u[0]) < 1e-12 * abs(x) and abs(y - u[1]) < 1e-12 * abs(y)


def test_third_coordinate_and_conjugation():
    fam = degeneration_family(SQ, W_TOP)
    for z in (0.3, 1e-3):
        for t in sample_points(6, 0.8):
            a = degenerate_eval(fam, z, t)
            b = degenerate_eval(fam, z, t.conjugate())
            assert a[2] == z
            assert abs(a[0].conjugate() - b[0]) < 1e-12 * abs(a[0])
            assert abs(a[1].conjugate() - b[1]) < 1e-12 * abs(a[1])


def test_triangle_limit_linear_order():
    fam = degeneration_family(SQ, W_SHORT)
    pts = sample_points()
    d = {z: limit_distance(fam, z, pts) for z in (1e-2, 1e-3, 1e-4, 1e-5)}
    assert 5 <= d[1e-3] / d[1e-4] <= 20
    scaled = [d[z] / z for z in d]
    assert max(scaled) / min(scaled) < 2


def test_side_limits():
    fam = degeneration_family(SQ, W_TOP)
    s = fam.sub
    lc = limit_components(fam)
    assert isinstance(lc.T, TriangleParam)
    errs = {}
    for z in (1e-3, 1e-4):
        e1 = e2 = 0.0
        for t in sample_points():
            u, v = pi_prime(degenerate_eval(fam, z, z * t), s.q, s.p), lc.prime.evaluate(t)
            e1 = max(e1, abs(u[0] / v[0] - 1), abs(u[1] / v[1] - 1))
            u, v = pi_second(degenerate_eval(fam, z, t / z), s.q, s.p, s.ell), lc.second.evaluate(t)
            e2 = max(e2, abs(u[0] / v[0] - 1), abs(u[1] / v[1] - 1))
        errs[z] = (e1, e2)
    for i in (0, 1):
        assert 5 <= errs[1e-3][i] / errs[1e-4][i] <= 20


def test_triangle_limit_meets_gluing_orbits_once():
    fam = degeneration_family(SQ, W_TOP)
    tri = limit_components(fam).T
    # t -> 0 and t -> infinity are the only ends outside the base edge
    curve = tri.to_curve()
    ends = {a for a, _ in curve.factors if a is None or a == 0}
    assert ends == {None, 0j}
    assert sum(1 for a, _ in curve.factors if a == 0) == np.gcd(tri.p, tri.q)


def test_limit_component_nodes():
    nodes = limit_components(degeneration_family(SQ, W_TOP)).nodes()
    assert {k: len(v) for k, v in nodes.items()} == {"T": 10, "prime": 2, "second": 4}


def test_schedule():
    assert geometric_schedule(1e-4) == [0.1, 0.01, 0.001, 0.0001]
    with pytest.raises(ValueError):
        track_degeneration_nodes(degeneration_family(SQ, W_SHORT), [1e-2, 1e-1])


@pytest.mark.parametrize("w", [W_SHORT, W_LONG, W_TOP, W_MIRROR])
def test_node_classification(w):
    fam = degeneration_family(SQ, w)
    res = track_degeneration_nodes(fam)
    assert not res.flagged
    assert res.counts == res.expected
    assert len(res.kinds) == 16
    for r in res.convergence_ratios():
        assert 5 <= r <= 20


def test_triangle_nodes_stay_interior_type():
    tri = LatticePolygon([(0, 0), (3, 0), (0, 4)])
    res = track_degeneration_nodes(degeneration_family(tri, wedge(tri, 0, (0, 4))))
    assert res.kinds == ["T"] * 3


def test_projection_helpers():
    pt = (2.0, 3.0, 0.5)
    assert pi(pt) == (2.0, 3.0)
    assert pi_prime(pt, 2, 1) == (8.0, 1.5)
    assert pi_second(pt, 2, 1, 3) == (0.5, 0.75)


@pytest.mark.slow
def test_patch_loop_trivial_is_identity():
    fam = degeneration_family(SQ, W_SHORT)
    res = patch_loop(fam, constant_loop(fam.jt))
    assert res.permutation == list(range(16))
    assert res.fixes_outside and res.matches_triangle


@pytest.mark.slow
def test_patch_loop_discriminant_transposition():
    fam = degeneration_family(SQ, W_SHORT)
    tri = fam.triangle()
    loop, _ = discriminant_loop(tri, 1)
    assert track_roots(tri, loop, 1).is_transposition()
    res = patch_loop(fam, loop)
    assert len(res.support) == 2
    assert all(res.kinds[i] == "T" for i in res.support)
    assert res.fixes_outside and res.matches_triangle
    assert res.as_permutation().is_transposition()


def test_patch_loop_rejects_mismatched_base():
    fam = degeneration_family(SQ, W_SHORT)
    with pytest.raises(ValueError):
        patch_loop(fam, constant_loop([9.0, 8.0, 7.0]))
