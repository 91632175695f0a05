from pathlib import Path

import numpy as np
import pytest

from toricnodes.lattice import LatticePolygon

DATA = Path(__file__).parent / "data"


def random_polygon(rng: np.random.Generator, box: int = 8, npts: int = 6) -> LatticePolygon:
    """Convex hull of a few random points in [0, box]^2, retried until it has area."""
    while True:
        pts = [tuple(int(c) for c in rng.integers(0, box + 1, size=2)) for _ in range(npts)]
        try:
            return LatticePolygon.convex_hull(pts)
        except ValueError:
            continue


def desk_polygons(count: int, seed: int = 0, box: int = 8) -> list[LatticePolygon]:
    rng = np.random.default_rng(seed)
    return [random_polygon(rng, box) for _ in range(count)]


@pytest.fixture
def data_dir() -> Path:
    return DATA


@pytest.fixture
def figure1() -> LatticePolygon:
    return LatticePolygon([(0, 0), (5, 0), (7, 6)])


def random_convex_quad(rng: np.random.Generator):
    """Four points in convex position, CCW."""
    while True:
        pts = rng.uniform(-10, 10, size=(4, 2))
        c = pts.mean(axis=0)
        pts = pts[np.argsort(np.arctan2(pts[:, 1] - c[1], pts[:, 0] - c[0]))]
        quad = [tuple(p) for p in pts]
        from toricnodes.hypotheses import is_convex_quadrilateral

        if is_convex_quadrilateral(*quad):
            return quad
