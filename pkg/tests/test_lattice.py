"""
Tests for the triangular lattice geometry
=========================================

Directions, incident triangles, the canonical edge/triangle bookkeeping and
the array grid used by every bulk evaluation.
"""

import numpy as np
import pytest

from grac.errors import NoSuchEdge, OutOfWindow
from grac.lattice import (
    ANTICLOCKWISE,
    DIRECTIONS,
    EDGE_DOWN_OFFSET,
    EDGE_UP_OFFSET,
    OFFSETS,
    OMEGA0,
    TRIANGLE_AREA,
    Box,
    Edge,
    Grid,
    Orient,
    Site,
    Triangle,
    anticlockwise_direction,
    counting_identities,
    direction,
    edge_site,
    edge_triangles,
    edges_in,
    incident_triangle,
    neighbour_triangle,
    triangles_in,
    wrap,
)


def _cross(u, v):
    return u[0] * v[1] - u[1] * v[0]


class TestDirections:
    """Tests for the six nearest-neighbour directions."""

    def test_unit_length_and_cell_volume(self):
        assert np.allclose(np.linalg.norm(DIRECTIONS, axis=1), 1.0)
        assert OMEGA0 == pytest.approx(np.sqrt(3.0) / 2.0)
        assert TRIANGLE_AREA == pytest.approx(OMEGA0 / 2.0)

    def test_offsets_match_positions(self):
        for j, off in enumerate(OFFSETS):
            assert np.allclose(Site(*off).position, DIRECTIONS[j])

    @pytest.mark.parametrize("j", range(1, 7))
    def test_neighbour_sum(self, j):
        """``a_{j-1} + a_{j+1} = a_j`` and ``a_{j+3} = -a_j``."""
        assert np.allclose(direction(j - 1) + direction(j + 1), direction(j), atol=1e-15)
        assert np.allclose(direction(j + 3), -direction(j))

    def test_wrap(self):
        assert [wrap(j) for j in (0, 1, 6, 7, -1, 13)] == [6, 1, 6, 1, 5, 1]


class TestTriangles:
    """Tests for incident triangles, edge sites and neighbours."""

    @pytest.mark.parametrize("j", range(1, 7))
    def test_incident_triangle_vertices(self, j):
        x = Site(2, -1)
        T = incident_triangle(x, j)
        assert set(T.vertices) == {x, x.step(j), x.step(j + 1)}

    @pytest.mark.parametrize("orient", list(Orient))
    def test_edge_sites(self, orient):
        T = Triangle(Site(1, 2), orient)
        verts = set(T.vertices)
        for j in range(1, 7):
            x = edge_site(T, j)
            assert x in verts
            assert x.step(j) in verts

    @pytest.mark.parametrize("orient", list(Orient))
    @pytest.mark.parametrize("j", range(1, 7))
    def test_neighbour_triangle(self, orient, j):
        T = Triangle(Site(0, 0), orient)
        N = neighbour_triangle(T, j, strict=False)
        assert N.orient is not T.orient
        shared = set(T.vertices) & set(N.vertices)
        assert len(shared) == 2
        p, q = sorted(shared)
        assert tuple(np.subtract(q, p)) in (OFFSETS[wrap(j) - 1], OFFSETS[wrap(j + 3) - 1])
        assert neighbour_triangle(T, j + 3, strict=False) == N
        if j in ANTICLOCKWISE[orient]:
            assert neighbour_triangle(T, j) == N

    @pytest.mark.parametrize("orient, j", [(Orient.UP, 2), (Orient.UP, 4), (Orient.DOWN, 1)])
    def test_neighbour_rejects_direction_the_triangle_does_not_own(self, orient, j):
        with pytest.raises(NoSuchEdge):
            neighbour_triangle(Triangle(Site(0, 0), orient), j)

    @pytest.mark.parametrize("orient", list(Orient))
    def test_edges_run_anticlockwise(self, orient):
        T = Triangle(Site(-1, 3), orient)
        c = T.centroid()
        ks = []
        for e in T.edges:
            k = anticlockwise_direction(T, e)
            ks.append(k)
            assert _cross(e.midpoint - c, direction(k)) > 0
        assert sorted(ks) == list(ANTICLOCKWISE[orient])

    def test_foreign_edge(self):
        with pytest.raises(NoSuchEdge):
            anticlockwise_direction(Triangle(Site(0, 0), Orient.UP), Edge(Site(5, 5), 1))

    @pytest.mark.parametrize("j", (1, 2, 3))
    def test_edge_triangle_offsets(self, j):
        x = Site(2, -1)
        e = Edge(x, j)
        up = Triangle(x + EDGE_UP_OFFSET[j], Orient.UP)
        down = Triangle(x + EDGE_DOWN_OFFSET[j], Orient.DOWN)
        for T in (up, down):
            assert set(e.sites()) <= set(T.vertices)
        assert set(edge_triangles(e)) == {up, down}

    def test_canonical_edge(self):
        assert Edge.canonical((0, 0), 4) == Edge(Site(-1, 0), 1)
        assert Edge.canonical((0, 0), 2) == Edge(Site(0, 0), 2)
        assert Edge(Site(0, 0), 3).head == Site(-1, 1)


class TestBoxAndGrid:
    """Tests for windows, counting identities and shifted grid views."""

    def test_box_basics(self):
        box = Box.centred(3)
        assert box.shape == (7, 7)
        assert box.n_sites == 49
        assert box.hops_inside((0, 0)) == 3
        assert box.hops_inside((3, 1)) == 0
        assert box.hops_inside((4, 0)) < 0
        with pytest.raises(OutOfWindow):
            box.require((0, 0), (4, 0))

    def test_counting_identities_rhombus(self):
        counts = counting_identities(triangles_in(Box(0, 3, 0, 3)))
        assert (counts.n_vertices, counts.n_edges, counts.n_triangles) == (16, 33, 18)
        assert counts.euler == 1
        assert counts.edge_balance == 0

    def test_counting_identities_star(self):
        star = [incident_triangle((0, 0), j) for j in range(1, 7)]
        counts = counting_identities(star)
        assert counts.n_interior_vertices == 1
        assert counts.euler == 1
        assert counts.edge_balance == 0

    def test_edges_in_box(self):
        assert len(edges_in(Box(0, 3, 0, 3))) == 33

    def test_triangle_mask_matches_enumeration(self):
        box = Box(-2, 3, -1, 4)
        grid = Grid(box)
        n = sum(int(grid.triangle_mask(o).sum()) for o in Orient)
        assert n == len(triangles_in(box))

    def test_shift(self):
        grid = Grid(Box.centred(4))
        n1, n2 = grid.indices()
        arr = n1.astype(float) + 10.0 * n2
        for off in OFFSETS:
            shifted = grid.core(grid.shift(arr, off))
            assert np.array_equal(shifted, grid.core(arr) + off[0] + 10.0 * off[1])
        assert np.isnan(grid.shift(arr, (1, 0))[-1]).all()

    def test_index_roundtrip(self):
        grid = Grid(Box(-2, 3, -1, 4), pad=2)
        n1, n2 = grid.indices()
        i, k = grid.index((1, 2))
        assert (n1[i, k], n2[i, k]) == (1, 2)
