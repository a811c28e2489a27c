"""
Tests for the region partition
==============================

Site classification, admissibility, planar detection and the corner catalog.
"""

import numpy as np
import pandas as pd
import pytest

from grac.errors import TooCloseToBoundary
from grac.lattice import Box, Edge, Orient, Site, triangles_in
from grac.partition import (
    Complement,
    HalfPlane,
    Hexagon,
    Polygon,
    SiteClass,
    SiteSet,
    UnionOf,
    build_partition,
    check_admissible,
    corner_catalog,
    is_planar,
)


class TestClassification:
    """Tests for the A / I / C split of the lattice."""

    def test_hexagon_counts(self, hexagon_partition):
        counts = hexagon_partition.counts()
        assert counts["A"] == 37
        assert counts["I"] == 24
        assert counts["A"] + counts["I"] + counts["C"] == Box.centred(8).n_sites
        assert counts["interface_edges"] == 24

    def test_interface_ring(self, hexagon_partition):
        for x in hexagon_partition.I:
            d = max(abs(x.n1), abs(x.n2), abs(x.n1 + x.n2))
            assert d == 4

    def test_site_class_outside_grid(self, hexagon_partition):
        assert hexagon_partition.site_class((40, 0)) is SiteClass.C
        assert hexagon_partition.site_class((0, 0)) is SiteClass.A

    def test_flat_interface_row(self):
        P = build_partition(HalfPlane(0, 1, 0), Box.centred(6))
        assert all(x.n2 == 0 for x in P.I)
        assert all(x.n2 < 0 for x in P.A)
        assert P.planar_line() == (1, 0)
        assert is_planar(P)

    def test_site_set_and_complement(self):
        box = Box.centred(6)
        P = build_partition(SiteSet([(0, 0)]), box)
        assert P.A == [Site(0, 0)]
        assert len(P.I) == 6
        Q = build_partition(Complement(SiteSet([(0, 0)])), box)
        assert Q.C == [Site(0, 0)]

    def test_polygon_includes_boundary_sites(self):
        poly = Polygon.from_sites([(-2, -2), (2, -2), (2, 2), (-2, 2)])
        inside = poly.contains(np.array([2, -2, 0, 3]), np.array([2, 2, 0, 0]))
        assert inside.tolist() == [True, True, True, False]

    def test_atoms_near_window_edge(self):
        with pytest.raises(TooCloseToBoundary):
            build_partition(Hexagon(6), Box.centred(8))

    def test_triangle_classes_cover_the_box(self, hexagon_partition):
        total = sum(len(hexagon_partition.triangles(c)) for c in SiteClass)
        assert total == len(triangles_in(hexagon_partition.box))
        for T in hexagon_partition.triangles(SiteClass.A):
            assert all(hexagon_partition.site_class(v) is SiteClass.A for v in T.vertices)

    def test_edge_classes(self, hexagon_partition):
        P = hexagon_partition
        assert P.edge_class(Edge(Site(0, 0), 1)) is SiteClass.A
        assert P.edge_class(Edge(Site(4, 0), 1)) is SiteClass.I
        assert P.edge_class(Edge(Site(6, 0), 1)) is SiteClass.C
        for e in P.interface_edges():
            assert {P.site_class(s) for s in e.sites()} == {SiteClass.I}

    def test_frame(self, hexagon_partition, tmp_path):
        df = hexagon_partition.to_frame()
        assert list(df.columns) == ["n1", "n2", "class"]
        assert (df["class"] == "I").sum() == 24
        hexagon_partition.write_csv(tmp_path / "p.csv")
        assert len(pd.read_csv(tmp_path / "p.csv")) == len(df)


class TestAdmissibility:
    """Tests for interface admissibility and corner detection."""

    def test_hexagon_has_six_corners(self, hexagon_partition):
        report = check_admissible(hexagon_partition)
        assert report.passed
        assert len(report.corners) == 6
        assert not is_planar(hexagon_partition)

    def test_three_hundred_degree_atomistic_sector(self):
        P = build_partition(UnionOf(HalfPlane(1, 0, 0), HalfPlane(0, 1, 0)), Box.centred(6))
        report = check_admissible(P)
        assert not report.passed
        assert "no continuum neighbour" in report.violations[Site(0, 0)]

    def test_thick_atomistic_strip_is_admissible(self):
        P = build_partition(HalfPlane(0, 1, 2), Box.centred(6))
        assert check_admissible(P).passed
        assert P.planar_line() == (1, 2)

    @pytest.mark.parametrize("name", sorted(corner_catalog()))
    def test_catalog_is_admissible(self, name):
        entry = corner_catalog()[name]
        P = entry.partition()
        report = check_admissible(P)
        assert report.passed, report.violations
        assert len(P.I) > 0
        assert report.to_dict()["passed"]

    def test_sharp_wedge_warns_about_adjacent_corners(self):
        report = check_admissible(corner_catalog()["wedge_sharp"].partition())
        assert report.warnings

    def test_wedges_have_single_corner(self):
        for name in ("wedge_convex", "wedge_concave"):
            report = check_admissible(corner_catalog()[name].partition())
            assert report.corners == [Site(0, 0)]

    def test_triangle_orientation_classes(self, hexagon_partition):
        up = hexagon_partition.triangle_classes(Orient.UP)
        i, k = hexagon_partition.grid.index((0, 0))
        assert up[i, k] == SiteClass.A
