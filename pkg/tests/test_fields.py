"""
Tests for deformation fields
============================

Finite differences, P1 gradients, l^p norms, the P1 dual norm and the smooth
test family.
"""

import numpy as np
import pandas as pd
import pytest

from grac.errors import OutOfWindow
from grac.fields import (
    HomogeneousState,
    LatticeField,
    bump,
    d2_field,
    d2_magnitude,
    differences,
    dual_norm_2,
    fdiff,
    h1_seminorm,
    lp_norm,
    p1_gradient,
    p1_stiffness,
    random_field,
    smooth_bump_field,
    smooth_window_radius,
    triangle_gradients,
)
from grac.lattice import DIRECTIONS, Box, Grid, Orient, Site, Triangle, triangles_in


def _affine(box, F):
    return LatticeField.from_function(box, lambda pos: pos @ (F - np.eye(2)).T)


class TestDifferences:
    """Tests for forward differences on homogeneous and compact fields."""

    def test_homogeneous(self, strained):
        y = HomogeneousState(strained)
        for j in range(1, 7):
            assert np.allclose(fdiff(y, (3, -2), j), strained @ DIRECTIONS[j - 1])

    def test_identity_field(self):
        u = LatticeField.zeros(Box.centred(3))
        assert np.allclose(fdiff(u, (0, 0), 5), DIRECTIONS[4])

    def test_pointwise_matches_grid(self, rng):
        box = Box.centred(6)
        u = random_field(box, rng, radius=3)
        grid = Grid(box)
        dy = differences(u, grid)
        for x in [(0, 0), (2, -1), (-3, 3)]:
            i, k = grid.index(x)
            for j in range(1, 7):
                assert np.allclose(dy[i, k, j - 1], fdiff(u, x, j), atol=1e-15)

    def test_step_out_of_window(self):
        u = LatticeField.zeros(Box.centred(2))
        with pytest.raises(OutOfWindow):
            fdiff(u, (2, 0), 1)

    def test_shape_validation(self):
        with pytest.raises(ValueError):
            LatticeField(Box.centred(2), np.zeros((3, 3, 2)))


class TestGradients:
    """Tests for P1 gradients and second differences."""

    def test_affine_field_gradient(self, strained):
        box = Box.centred(4)
        y = _affine(box, strained)
        G = triangle_gradients(y, Grid(box))
        for T in triangles_in(box):
            i, k = Grid(box).index(T.base)
            assert np.allclose(G[T.orient][i, k], strained, atol=1e-13)
            assert np.allclose(p1_gradient(y, T), strained, atol=1e-13)

    def test_second_differences_vanish_for_affine(self, strained):
        box = Box.centred(5)
        y = _affine(box, strained)
        assert d2_magnitude(y, (0, 0)) == pytest.approx(0.0, abs=1e-12)
        d2 = Grid(box, pad=0).core(d2_field(y, Grid(box, pad=0)))
        assert np.nanmax(d2[2:-2, 2:-2]) == pytest.approx(0.0, abs=1e-12)

    def test_second_difference_of_single_bump(self):
        box = Box.centred(4)
        u = LatticeField.from_sites(box, {(0, 0): (1.0, 0.0)})
        assert d2_magnitude(u, (0, 0)) == pytest.approx(2.0)

    def test_homogeneous_gradient(self, strained):
        T = Triangle(Site(7, -3), Orient.DOWN)
        assert np.allclose(p1_gradient(HomogeneousState(strained), T), strained)


class TestNorms:
    """Tests for discrete norms and the dual norm."""

    def test_lp_norm_forms(self):
        vals = {(0, 0): 3.0, (1, 0): -4.0}
        assert lp_norm(vals) == pytest.approx(5.0)
        assert lp_norm(vals, region=[(1, 0), (2, 0)], p=1) == pytest.approx(4.0)
        arr = np.array([[1.0, -2.0], [2.0, 0.0]])
        assert lp_norm(arr, p=np.inf) == pytest.approx(2.0)
        assert lp_norm(arr, region=arr > 0, p=1) == pytest.approx(3.0)
        assert lp_norm(np.array([])) == 0.0
        with pytest.raises(ValueError):
            lp_norm(arr, p=0.5)

    def test_dual_norm_of_stiffness_image(self, rng):
        """``|K u|_{-1} = |grad u|`` for fields vanishing on the boundary."""
        box = Box.centred(6)
        u = random_field(box, rng, radius=2)
        K, interior = p1_stiffness(box)
        ell = np.zeros(box.shape + (2,))
        for c in range(2):
            ell[..., c][interior] = K @ u.values[..., c][interior]
        assert dual_norm_2(ell, box) == pytest.approx(h1_seminorm(u), rel=1e-6)

    def test_dual_norm_rejects_boundary_load(self):
        box = Box.centred(3)
        ell = np.zeros(box.shape + (2,))
        ell[0, 0, 0] = 1.0
        with pytest.raises(OutOfWindow):
            dual_norm_2(ell, box)

    def test_dual_norm_of_zero(self):
        box = Box.centred(3)
        assert dual_norm_2(np.zeros(box.shape + (2,)), box) == 0.0


class TestTestFields:
    """Tests for the smooth bump family and random compact fields."""

    def test_bump(self):
        assert bump(np.array(0.0)) == pytest.approx(1.0)
        assert np.all(bump(np.array([1.0, 1.5])) == 0.0)

    @pytest.mark.parametrize("R", [8, 16])
    def test_smooth_bump_support(self, R):
        box = Box.centred(smooth_window_radius(R))
        u = smooth_bump_field(box, R, eps=0.05)
        pos = np.array([Site(*x).position for x in u.support()])
        assert np.linalg.norm(pos, axis=1).max() < R
        assert np.abs(u.values).max() <= 0.05 * R + 1e-12

    def test_smooth_bump_is_rescaled_by_R(self):
        R, eps = 16, 0.05
        u = smooth_bump_field(Box.centred(smooth_window_radius(R)), R, eps)
        x = Site(3, 2)
        p = x.position
        amp = eps * R * bump(np.linalg.norm(p) / R)
        expected = amp * np.array([np.sin(2 * np.pi * p[0] / R), np.cos(2 * np.pi * p[1] / R)])
        assert u(x) == pytest.approx(expected, abs=1e-14)

    def test_smooth_bump_strains_do_not_decay_with_R(self):
        strains = []
        for R in (16, 32):
            u = smooth_bump_field(Box.centred(smooth_window_radius(R)), R, eps=0.05)
            strains.append(np.abs(np.diff(u.values, axis=0)).max())
        assert strains[1] == pytest.approx(strains[0], rel=0.2)
        assert strains[0] < 1.0

    def test_smooth_bump_rejects_small_window(self):
        with pytest.raises(OutOfWindow):
            smooth_bump_field(Box.centred(5), 16)

    def test_random_field_margin(self, rng):
        with pytest.raises(OutOfWindow):
            random_field(Box.centred(5), rng, radius=4)

    def test_csv_roundtrip(self, rng, tmp_path):
        box = Box.centred(5)
        u = random_field(box, rng, radius=2)
        path = tmp_path / "u.csv"
        u.write_csv(path)
        assert list(pd.read_csv(path).columns[:2]) == ["n1", "n2"]
        v = LatticeField.read_csv(path, box)
        assert np.array_equal(u.values, v.values)
