"""Reconstruction coefficients and the force-consistency constraint system.

Only the reduced coefficients ``C_{x,j}`` are stored; the full operator is
``C_{x,j,j} = C_{x,j}``, ``C_{x,j,j+-1} = 1 - C_{x,j}`` and zero otherwise,
which is one-sided and energy consistent by construction.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Tuple, Union

import numpy as np
import pandas as pd
import scipy.linalg

from .errors import InadmissiblePartition, Infeasible, NotPlanar
from .fields import HomogeneousState
from .lattice import OFFSETS, Edge, Site, wrap
from .partition import RegionPartition, SiteClass, check_admissible, is_planar
from .potentials import SitePotential

logger = logging.getLogger(__name__)

C_ATOM = 1.0
C_CONT = 2.0 / 3.0
DEFAULT_FREE = C_CONT
RANK_RCOND = 1e-10
ROW_TOL = 1e-12


@dataclass
class ReconstructionParams:
    """Reduced coefficients on the partition grid, shape ``grid.shape + (6,)``."""

    partition: RegionPartition
    reduced: np.ndarray = field(repr=False)
    label: str = "custom"

    def __post_init__(self):
        arr = np.asarray(self.reduced, dtype=float)
        expected = self.partition.grid.shape + (6,)
        if arr.shape != expected:
            raise ValueError(f"reduced coefficients need shape {expected}, got {arr.shape}")
        self.reduced = arr

    @classmethod
    def defaults(cls, P: RegionPartition, interface: float = C_CONT, label: str = "custom"):
        """1 on A, 2/3 on C and ``interface`` on I."""
        arr = np.full(P.grid.shape + (6,), C_CONT)
        arr[P.mask(SiteClass.A)] = C_ATOM
        arr[P.mask(SiteClass.I)] = interface
        return cls(P, arr, label)

    @property
    def grid(self):
        return self.partition.grid

    def value(self, x: Iterable[int], j: int) -> float:
        i, k = self.grid.index(x)
        return float(self.reduced[i, k, wrap(j) - 1])

    def full_tensor(self, x: Iterable[int]) -> np.ndarray:
        """``M[j-1, i-1] = C_{x,j,i}``."""
        i, k = self.grid.index(x)
        return full_tensor(self.reduced[i, k])

    @property
    def c_bar(self) -> float:
        """``max |C_{x,j,i}|`` over the interface sites of the grid."""
        c = self.reduced[self.partition.mask(SiteClass.I)]
        if c.size == 0:
            return 1.0
        return float(max(np.abs(c).max(), np.abs(1.0 - c).max()))

    def replace(self, updates: Mapping[Tuple[Iterable[int], int], float], label=None):
        arr = self.reduced.copy()
        for (x, j), v in updates.items():
            i, k = self.grid.index(x)
            arr[i, k, wrap(j) - 1] = v
        return ReconstructionParams(self.partition, arr, label or self.label)

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for x in self.partition.I:
            i, k = self.grid.index(x)
            for j in range(6):
                rows.append((x.n1, x.n2, j + 1, float(self.reduced[i, k, j])))
        return pd.DataFrame(rows, columns=["n1", "n2", "j", "value"])

    @classmethod
    def from_frame(cls, P: RegionPartition, df: pd.DataFrame, label: str = "explicit"):
        base = cls.defaults(P, label=label)
        updates = {}
        for n1, n2, j, v in df[["n1", "n2", "j", "value"]].itertuples(index=False):
            x = Site(int(n1), int(n2))
            if P.site_class(x) != SiteClass.I:
                raise ValueError(f"parameter given for non-interface site {tuple(x)}")
            updates[(x, int(j))] = float(v)
        return base.replace(updates, label)

    def write_csv(self, path) -> None:
        self.to_frame().to_csv(path, index=False, float_format="%.17g")


def full_tensor(c: np.ndarray) -> np.ndarray:
    """Full one-sided operator from reduced values; works on (..., 6) batches."""
    c = np.asarray(c, dtype=float)
    out = np.zeros(c.shape[:-1] + (6, 6))
    for j in range(6):
        out[..., j, j] = c[..., j]
        out[..., j, (j - 1) % 6] = 1.0 - c[..., j]
        out[..., j, (j + 1) % 6] = 1.0 - c[..., j]
    return out


def reconstruct(R: Union[ReconstructionParams, np.ndarray], x, Dy: np.ndarray) -> np.ndarray:
    """``(R_x D_j y)_j = (1 - C_{x,j})(D_{j-1} y + D_{j+1} y) + C_{x,j} D_j y``."""
    c = R.reduced[R.grid.index(x)] if isinstance(R, ReconstructionParams) else np.asarray(R)
    return reconstruct_batch(c, np.asarray(Dy, dtype=float))


def reconstruct_batch(c: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Vectorised reconstruction: ``c`` (..., 6), ``g`` (..., 6, 2)."""
    cc = c[..., None]
    return (1.0 - cc) * (np.roll(g, 1, axis=-2) + np.roll(g, -1, axis=-2)) + cc * g


def reconstruction_adjoint(c: np.ndarray, dV: np.ndarray) -> np.ndarray:
    """Chain rule through the reconstruction: ``S_j = sum_i C_{x,i,j} dV_i``."""
    cc = c[..., None]
    return (
        cc * dV
        + np.roll((1.0 - cc) * dV, 1, axis=-2)
        + np.roll((1.0 - cc) * dV, -1, axis=-2)
    )


# ---------------------------------------------------------------------------
# assignments


def _neighbour_classes(P: RegionPartition) -> np.ndarray:
    n1, n2 = P.grid.indices()
    return np.stack([P.classify(n1 + d1, n2 + d2) for d1, d2 in OFFSETS], axis=-1)


def _require_admissible(P: RegionPartition) -> None:
    report = check_admissible(P)
    if not report.passed:
        raise InadmissiblePartition(report.violations)


def assign_general(
    P: RegionPartition,
    free: Optional[Mapping[Edge, float]] = None,
    default_free: float = DEFAULT_FREE,
) -> ReconstructionParams:
    """Bonds into A get 1, into C get 2/3, interface bonds share one free value per edge."""
    _require_admissible(P)
    nb = _neighbour_classes(P)
    arr = ReconstructionParams.defaults(P).reduced
    is_i = P.mask(SiteClass.I)
    vals = np.where(nb == SiteClass.A, C_ATOM, np.where(nb == SiteClass.C, C_CONT, default_free))
    arr[is_i] = vals[is_i]
    R = ReconstructionParams(P, arr, label="general")
    if free:
        R = R.replace(_edge_updates(P, free), label="general")
    return R


def _edge_updates(
    P: RegionPartition, values: Mapping[Edge, float]
) -> Dict[Tuple[Site, int], float]:
    updates = {}
    for e, v in values.items():
        e = Edge.canonical(e.tail, e.j)
        if P.site_class(e.tail) != SiteClass.I or P.site_class(e.head) != SiteClass.I:
            raise ValueError(f"{e} is not an interface bond")
        updates[(e.tail, e.j)] = float(v)
        updates[(e.head, e.j + 3)] = float(v)
    return updates


def flat_rotation(P: RegionPartition) -> int:
    """Shift ``s``: ``a_{1+s}`` runs along the interface, ``a_{5+s}`` and ``a_{6+s}`` enter A."""
    line = P.planar_line()
    if line is None:
        raise NotPlanar("interface is not a single lattice line")
    x = P.I[0]
    for s in range(6):
        along = {P.site_class(x.step(1 + s)), P.site_class(x.step(4 + s))}
        into_a = {P.site_class(x.step(5 + s)), P.site_class(x.step(6 + s))}
        if along <= {SiteClass.I} and into_a == {SiteClass.A}:
            return s
    raise NotPlanar(f"no lattice orientation matches the interface at {tuple(x)}")


def assign_flat(
    P: RegionPartition,
    c2: float = C_CONT,
    c3: float = C_CONT,
    c5: float = C_CONT,
    c6: float = C_CONT,
    d: Union[float, Mapping[Edge, float]] = DEFAULT_FREE,
) -> ReconstructionParams:
    """Planar interface: constants for bonds leaving the line, one value ``d`` per in-line bond."""
    if not is_planar(P):
        raise NotPlanar("assign_flat needs a planar interface")
    s = flat_rotation(P)
    R = ReconstructionParams.defaults(P, label="flat")
    arr = R.reduced
    is_i = P.mask(SiteClass.I)
    for j, c in ((2, c2), (3, c3), (5, c5), (6, c6)):
        arr[is_i, wrap(j + s) - 1] = c
    default_d = d if isinstance(d, (int, float)) else DEFAULT_FREE
    arr[is_i, wrap(1 + s) - 1] = default_d
    arr[is_i, wrap(4 + s) - 1] = default_d
    R = ReconstructionParams(P, arr, label="flat")
    if not isinstance(d, (int, float)):
        R = R.replace(_edge_updates(P, d), label="flat")
    return R


def qce(P: RegionPartition) -> ReconstructionParams:
    """``C = 1`` on the interface: the uncorrected energy-based coupling."""
    return ReconstructionParams.defaults(P, interface=C_ATOM, label="qce")


def energy_consistency_residual(V: SitePotential, R: ReconstructionParams, F) -> float:
    """``max_x |V(R_x F a) - V(F a)| / (1 + |V(F a)|)`` over interface sites of the box."""
    Fa = HomogeneousState(F).bonds
    mask = R.grid.core_mask() & R.partition.mask(SiteClass.I)
    if not mask.any():
        return 0.0
    ref = float(V.energy(Fa))
    got = V.energy(reconstruct_batch(R.reduced[mask], np.broadcast_to(Fa, (int(mask.sum()), 6, 2))))
    return float(np.max(np.abs(got - ref)) / (1.0 + abs(ref)))


# ---------------------------------------------------------------------------
# constraint system


@dataclass
class PatchConstraintSystem:
    partition: RegionPartition
    unknowns: List[Tuple[Site, int]]
    rows: List[Tuple[Site, int]]
    matrix: np.ndarray = field(repr=False)
    rhs: np.ndarray = field(repr=False)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.matrix.shape

    def vector(self, R: ReconstructionParams) -> np.ndarray:
        return np.array([R.value(x, j) for x, j in self.unknowns])

    def to_params(self, values: np.ndarray, base: Optional[ReconstructionParams] = None):
        base = base or assign_general(self.partition)
        return base.replace(
            {(x, j): float(v) for (x, j), v in zip(self.unknowns, values)}, label="constraint"
        )


def _row_terms(x: Site, j: int) -> List[Tuple[Site, int, float]]:
    """Force balance at ``x`` in the direction ``V_j`` of a homogeneous state."""
    return [
        (x.step(j + 3), j, 1.0),
        (x.step(j + 2), j, -1.0),
        (x.step(j + 4), j, -1.0),
        (x.step(j), j + 3, -1.0),
        (x.step(j - 1), j + 3, 1.0),
        (x.step(j + 1), j + 3, 1.0),
        (x, j, 1.0),
        (x, j + 3, -1.0),
    ]


def assemble_patch_constraints(P: RegionPartition) -> PatchConstraintSystem:
    """Rows at every box site whose neighbourhood is in the box and touches the interface."""
    _require_admissible(P)
    known = ReconstructionParams.defaults(P)
    ext = P.ext_mask()
    rows, entries, rhs = [], [], []
    index: Dict[Tuple[Site, int], int] = {}
    for x in P.sites_in_box(ext):
        if P.box.hops_inside(x) < 1:
            continue
        for j in (1, 2, 3):
            coeffs: Dict[int, float] = {}
            b = 0.0
            for s, jj, coef in _row_terms(x, j):
                jj = wrap(jj)
                if P.site_class(s) == SiteClass.I:
                    col = index.setdefault((s, jj), len(index))
                    coeffs[col] = coeffs.get(col, 0.0) + coef
                else:
                    b -= coef * known.value(s, jj)
            rows.append((x, j))
            entries.append(coeffs)
            rhs.append(b)
    A = np.zeros((len(rows), len(index)))
    for r, coeffs in enumerate(entries):
        for col, v in coeffs.items():
            A[r, col] = v
    unknowns = [None] * len(index)
    for key, col in index.items():
        unknowns[col] = key
    logger.debug("patch constraints: %d rows, %d unknowns", len(rows), len(unknowns))
    return PatchConstraintSystem(P, unknowns, rows, A, np.array(rhs))


@dataclass
class ConstraintSolution:
    particular: np.ndarray
    basis: np.ndarray
    residual: float

    @property
    def dimension(self) -> int:
        return int(self.basis.shape[1])


def solve_constraints(S: PatchConstraintSystem) -> ConstraintSolution:
    """Least-squares particular solution plus an orthonormal nullspace basis."""
    if S.matrix.size == 0:
        return ConstraintSolution(np.zeros(S.shape[1]), np.eye(S.shape[1]), 0.0)
    x, *_ = scipy.linalg.lstsq(S.matrix, S.rhs)
    res = S.matrix @ x - S.rhs
    worst = float(np.max(np.abs(res))) if res.size else 0.0
    if worst > RANK_RCOND:
        bad = [S.rows[i] for i in np.flatnonzero(np.abs(res) > RANK_RCOND)]
        raise Infeasible(bad, worst)
    basis = scipy.linalg.null_space(S.matrix, rcond=RANK_RCOND)
    logger.info(
        "constraint space: %d unknowns, dimension %d, residual %.2e",
        S.shape[1],
        basis.shape[1],
        worst,
    )
    return ConstraintSolution(x, basis, worst)


def patch_row_residuals(S: PatchConstraintSystem, R: ReconstructionParams) -> np.ndarray:
    return S.matrix @ S.vector(R) - S.rhs


def free_parameter_count(P: RegionPartition) -> int:
    """Expected dimension of the constraint space in the window.

    A planar interface keeps four constants for the bonds leaving the line plus
    one value per in-line bond; otherwise only the interface bonds are free.
    """
    n_edges = len(P.interface_edges())
    return 4 + n_edges if is_planar(P) else n_edges
