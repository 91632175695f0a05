import numpy as np
import pytest

from toricnodes.curves import TriangleParam, harnack_params, self_intersections
from toricnodes.lattice import LatticePolygon
from toricnodes.monodromy import (
    EmptyDiscriminant,
    circle_loop,
    constant_loop,
    discriminant_loop,
    kite_decoration,
    kite_monodromy,
    lasso_loop,
    loop_permutations,
    match_nodes,
    rotation_loop,
    track_nodes,
    track_roots,
)
from toricnodes.permgroup import PermGroup, Permutation

FIG1 = TriangleParam(5, 7, 6, (1.0,) * 5)
GENERIC = TriangleParam(4, 1, 7, (1.0, 2.0, -1.5, 0.5 + 1j))


def test_loops_are_closed():
    a = [1.0, 2.0, 3.0]
    for loop in (constant_loop(a), rotation_loop(a), circle_loop(a, 1, 2.5, 0.2),
                 lasso_loop(a, 2, 1.0, 0.1, 0.3), lasso_loop(a, 0, 3.0, 0.1, -0.2)):
        assert loop.is_closed()
        assert np.allclose(loop(0.0), a)


def test_constant_loop_identity():
    for k in (1, 2, 3):
        res = track_roots(FIG1, constant_loop(FIG1.a), k)
        assert res.is_identity()


def test_rotation_loop_returns_root_set():
    for k in (1, 2, 3):
        res = track_roots(GENERIC, rotation_loop(GENERIC.a), k)
        assert sorted(res.permutation) == list(range(len(res.base_roots)))
        assert np.allclose(sorted(res.end_roots, key=lambda z: (z.real, z.imag)),
                           sorted(res.base_roots, key=lambda z: (z.real, z.imag)), atol=1e-8)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_discriminant_loop_transposition(k):
    loop, point = discriminant_loop(FIG1, k)
    assert point.k == k
    perms = loop_permutations(FIG1, loop)
    for kk, res in perms.items():
        assert res.closing_distance < 1e-6
        if kk == k:
            assert res.is_transposition()
        else:
            assert res.is_identity()
    fine = track_roots(FIG1, loop, k, steps=512)
    assert fine.permutation == perms[k].permutation


def test_empty_discriminant():
    tri = TriangleParam(2, 1, 4, (1.0, 2.0))
    with pytest.raises(EmptyDiscriminant):
        discriminant_loop(tri, 2)


def test_disjoint_supports_for_different_k():
    l1, _ = discriminant_loop(FIG1, 1)
    l2, _ = discriminant_loop(FIG1, 2)
    p1 = [r.as_permutation() for r in loop_permutations(FIG1, l1).values()]
    p2 = [r.as_permutation() for r in loop_permutations(FIG1, l2).values()]
    s1 = {x for p in p1 for x in p.support}
    s2 = {x for p in p2 for x in p.support}
    assert s1 and s2 and not s1 & s2


def test_concatenation_composes():
    l1, _ = discriminant_loop(GENERIC, 1, choice=0)
    l2, _ = discriminant_loop(GENERIC, 1, choice=1)
    r1, r2 = track_roots(GENERIC, l1, 1), track_roots(GENERIC, l2, 1)
    both = track_roots(GENERIC, l1.then(l2), 1)
    assert both.permutation == [r2.permutation[r1.permutation[i]] for i in range(len(r1.permutation))]


def test_track_nodes_constant_family():
    c = harnack_params(LatticePolygon.square(3))
    start = self_intersections(c)
    tr = track_nodes(lambda th: c, start, steps=8)
    perm, dist = match_nodes(tr.nodes, start)
    assert perm == list(range(len(start))) and dist < 1e-10


def test_track_nodes_log_metric_agrees():
    c = harnack_params(LatticePolygon.square(3))
    start = self_intersections(c)

    def family(th):
        return c.with_parameters([a * (1 + 0.3 * th) for a in c.parameters])

    a = track_nodes(family, start, steps=32)
    b = track_nodes(family, start, steps=32, metric="log")
    for u, v in zip(a.nodes, b.nodes):
        assert abs(u.t - v.t) < 1e-8 and abs(u.s - v.s) < 1e-8
    with pytest.raises(ValueError):
        track_nodes(family, start, metric="cosine")


def _kite(top, bottom):
    return LatticePolygon.convex_hull([(-1, 0), (1, 0), (0, top), (0, -bottom)])


def test_kite_decoration_k3():
    deco = kite_decoration(harnack_params(_kite(2, 2)))
    assert len(deco.nodes) == 3 and max(deco.residuals) < 1e-8
    assert sorted(len(b) for b in deco.blocks()) == [1, 2]


def test_kite_decoration_k4():
    deco = kite_decoration(harnack_params(_kite(3, 2)))
    assert len(deco.nodes) == 4 and max(deco.residuals) < 1e-8
    assert sorted(len(b) for b in deco.blocks()) == [2, 2]


def test_kite_decoration_single_node():
    deco = kite_decoration(harnack_params(_kite(1, 1)))
    assert len(deco.nodes) == 1


@pytest.mark.slow
def test_kite_monodromy_preserves_blocks():
    km = kite_monodromy(harnack_params(_kite(3, 2)), loops=6, seed=0)
    assert not km.failures
    blocks = [set(b) for b in km.decoration.blocks()]
    for perm in km.permutations:
        images = [{perm[i] for i in b} for b in blocks]
        assert all(img in blocks for img in images)
    bs = km.block_system()
    assert bs is not None and sorted(len(b) for b in bs) == [2, 2]
    dom = list(range(4))
    assert PermGroup(dom, [Permutation(tuple(dom), tuple(p)) for p in km.permutations]).order() > 1
