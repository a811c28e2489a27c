"""
Tests for the interface reconstruction
======================================

The reconstruction operator, parameter assignments and the linear
patch-consistency constraints.
"""

import numpy as np
import pandas as pd
import pytest

from grac.errors import InadmissiblePartition, NotPlanar
from grac.lattice import DIRECTIONS, Box, Edge, Site
from grac.partition import HalfPlane, SiteClass, UnionOf, build_partition, corner_catalog
from grac.reconstruction import (
    C_CONT,
    ReconstructionParams,
    assemble_patch_constraints,
    assign_flat,
    assign_general,
    energy_consistency_residual,
    flat_rotation,
    free_parameter_count,
    full_tensor,
    patch_row_residuals,
    qce,
    reconstruct,
    reconstruct_batch,
    reconstruction_adjoint,
    solve_constraints,
)


@pytest.fixture
def flat_partition():
    return corner_catalog()["flat"].partition()


class TestOperator:
    """Tests for the one-sided reconstruction of the neighbourhood."""

    def test_unit_coefficients_are_identity(self, rng):
        g = DIRECTIONS + 0.1 * rng.standard_normal((6, 2))
        assert np.allclose(reconstruct(np.ones(6), None, g), g)

    def test_homogeneous_neighbourhoods_are_reproduced(self, rng, strained):
        Fa = DIRECTIONS @ strained.T
        c = rng.uniform(0.0, 1.5, size=6)
        assert np.allclose(reconstruct_batch(c, Fa), Fa, atol=1e-15)

    def test_full_tensor_matches_batch(self, rng):
        c = rng.uniform(size=6)
        g = rng.standard_normal((6, 2))
        assert np.allclose(full_tensor(c) @ g, reconstruct_batch(c, g))

    def test_adjoint(self, rng):
        c = rng.uniform(size=(4, 6))
        g = rng.standard_normal((4, 6, 2))
        dV = rng.standard_normal((4, 6, 2))
        lhs = np.sum(dV * reconstruct_batch(c, g))
        rhs = np.sum(reconstruction_adjoint(c, dV) * g)
        assert lhs == pytest.approx(rhs, rel=1e-12)


class TestAssignments:
    """Tests for the general, flat and QCE parameter policies."""

    def test_general_values(self, hexagon_partition):
        R = assign_general(hexagon_partition)
        # side site of the hexagon ring: two interface bonds, two into A, two into C
        x = Site(3, 1)
        assert [R.value(x, j) for j in range(1, 7)] == pytest.approx(
            [C_CONT, C_CONT, C_CONT, 1.0, 1.0, C_CONT]
        )
        assert R.value((0, 0), 1) == 1.0
        assert R.value((6, 0), 1) == pytest.approx(C_CONT)

    def test_general_free_edge(self, hexagon_partition):
        e = Edge(Site(3, 1), 3)
        R = assign_general(hexagon_partition, free={e: 0.4})
        assert R.value(e.tail, 3) == pytest.approx(0.4)
        assert R.value(e.head, 6) == pytest.approx(0.4)
        with pytest.raises(ValueError):
            assign_general(hexagon_partition, free={Edge(Site(0, 0), 1): 0.4})

    def test_general_rejects_inadmissible(self):
        P = build_partition(UnionOf(HalfPlane(1, 0, 0), HalfPlane(0, 1, 0)), Box.centred(6))
        with pytest.raises(InadmissiblePartition):
            assign_general(P)

    def test_flat_rotation_and_values(self, flat_partition):
        assert flat_rotation(flat_partition) == 0
        R = assign_flat(flat_partition, c2=0.5, c3=0.9, c5=0.7, c6=0.6, d=0.8)
        assert [R.value((2, 0), j) for j in range(1, 7)] == pytest.approx(
            [0.8, 0.5, 0.9, 0.8, 0.7, 0.6]
        )

    def test_flat_needs_planar_interface(self, hexagon_partition):
        with pytest.raises(NotPlanar):
            assign_flat(hexagon_partition)

    def test_qce(self, hexagon_partition):
        R = qce(hexagon_partition)
        assert np.all(R.reduced[hexagon_partition.mask(SiteClass.I)] == 1.0)

    def test_energy_consistency(self, potential, hexagon_partition, strained):
        R = assign_general(hexagon_partition, free={Edge(Site(3, 1), 3): 0.3})
        assert energy_consistency_residual(potential, R, strained) <= 1e-13

    def test_c_bar(self, hexagon_partition):
        assert assign_general(hexagon_partition).c_bar == pytest.approx(1.0)

    def test_frame_roundtrip(self, hexagon_partition, tmp_path):
        R = assign_general(hexagon_partition, free={Edge(Site(3, 1), 3): 0.3})
        R.write_csv(tmp_path / "params.csv")
        df = pd.read_csv(tmp_path / "params.csv")
        assert list(df.columns) == ["n1", "n2", "j", "value"]
        back = ReconstructionParams.from_frame(hexagon_partition, df)
        assert np.array_equal(back.reduced, R.reduced)

    def test_frame_rejects_non_interface_site(self, hexagon_partition):
        df = pd.DataFrame({"n1": [0], "n2": [0], "j": [1], "value": [0.5]})
        with pytest.raises(ValueError):
            ReconstructionParams.from_frame(hexagon_partition, df)


class TestConstraints:
    """Tests for the patch-consistency constraint system."""

    def test_general_assignment_satisfies_rows(self, hexagon_partition):
        S = assemble_patch_constraints(hexagon_partition)
        R = assign_general(hexagon_partition, free={Edge(Site(3, 1), 3): 0.1})
        assert np.abs(patch_row_residuals(S, R)).max() <= 1e-12

    def test_flat_family_satisfies_rows(self, flat_partition):
        S = assemble_patch_constraints(flat_partition)
        R = assign_flat(
            flat_partition, c2=0.5, c3=0.9, c5=0.7, c6=0.6, d={Edge(Site(0, 0), 1): 0.3}
        )
        assert np.abs(patch_row_residuals(S, R)).max() <= 1e-12

    def test_qce_violates_rows(self, hexagon_partition):
        S = assemble_patch_constraints(hexagon_partition)
        assert np.abs(patch_row_residuals(S, qce(hexagon_partition))).max() > 0.1

    @pytest.mark.parametrize("name", ["flat", "hexagon", "hexagon_hole"])
    def test_dimension(self, name):
        P = corner_catalog()[name].partition()
        solution = solve_constraints(assemble_patch_constraints(P))
        assert solution.residual <= 1e-10
        assert solution.dimension == free_parameter_count(P)

    def test_flat_expected_count(self, flat_partition):
        assert free_parameter_count(flat_partition) == 4 + 12

    def test_to_params_reproduces_particular_solution(self, hexagon_partition):
        S = assemble_patch_constraints(hexagon_partition)
        solution = solve_constraints(S)
        R = S.to_params(solution.particular + solution.basis[:, 0])
        assert np.abs(patch_row_residuals(S, R)).max() <= 1e-10
