"""Piecewise constant stresses, Crouzeix-Raviart correctors and consistency diagnostics.

All stresses live on the triangles of an evaluation window and are stored per
orientation as grid arrays indexed by the triangle base, NaN off the window.
The rotated gradient of a CR field ``psi = sum_f psi_f zeta_f`` is

    d(psi)J |_T = -(2/Omega0) sum_{f in T} psi_f (x) t_{f,T}

with ``t_{f,T}`` the direction of ``f`` traversed anticlockwise around ``T``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np
import pandas as pd
from scipy import linalg

from .energy import (
    EnergyKind,
    State,
    evaluate,
    edge_residuals,
    forces,
    site_derivatives,
    triangle_slots,
)
from .errors import CorrectorMismatch, NoCorrector, OutOfWindow
from .fields import (
    Deformation,
    HomogeneousState,
    LatticeField,
    d2_field,
    dual_norm_2,
    triangle_gradients,
)
from .lattice import (
    DIRECTIONS,
    EDGE_DOWN_OFFSET,
    EDGE_SITE_OFFSETS,
    EDGE_UP_OFFSET,
    INCIDENT,
    NEIGHBOUR_OFFSETS,
    OFFSETS,
    OMEGA0,
    TRIANGLE_AREA,
    TRIANGLE_EDGES,
    Box,
    Edge,
    Grid,
    Orient,
    Site,
    Triangle,
)
from .partition import RegionPartition, SiteClass
from .potentials import PotentialBounds, SitePotential, homogeneous_gradient, stress_from_slots
from .reconstruction import (
    C_ATOM,
    C_CONT,
    ReconstructionParams,
    assemble_patch_constraints,
    assign_general,
    full_tensor,
    solve_constraints,
)

logger = logging.getLogger(__name__)

CORRECTOR_TOL = 1e-12
NO_CORRECTOR_TOL = 1e-10
BOUNDARY_FORCE_TOL = 1e-10

_OTHER = {Orient.UP: Orient.DOWN, Orient.DOWN: Orient.UP}


def _outer(v: np.ndarray, a: np.ndarray) -> np.ndarray:
    return v[..., :, None] * a[None, :]


def _hat_gradient(k: int) -> np.ndarray:
    """Gradient of the P1 hat at x on ``T_{x,k}``: ``g . a_k = g . a_{k+1} = -1``."""
    A = np.stack([DIRECTIONS[(k - 1) % 6], DIRECTIONS[k % 6]])
    return np.linalg.solve(A, -np.ones(2))


_HAT = [_hat_gradient(k) for k in range(1, 7)]


# ---------------------------------------------------------------------------
# containers


@dataclass
class StressField:
    """Triangle-wise 2x2 tensors on ``grid``, keyed by orientation and triangle base."""

    grid: Grid
    values: Dict[Orient, np.ndarray] = field(repr=False)
    name: str = "sigma"

    def __post_init__(self):
        for orient in Orient:
            arr = np.array(self.values[orient], dtype=float)
            arr[~self.grid.triangle_mask(orient)] = np.nan
            self.values[orient] = arr

    @property
    def box(self) -> Box:
        return self.grid.box

    def at(self, T: Triangle) -> np.ndarray:
        i, k = self.grid.index(T.base)
        return self.values[T.orient][i, k]

    def __sub__(self, other: "StressField") -> "StressField":
        return StressField(
            self.grid,
            {o: self.values[o] - other.values[o] for o in Orient},
            f"{self.name}-{other.name}",
        )

    def norms(self) -> Dict[Orient, np.ndarray]:
        """Frobenius norm per triangle (NaN off the window)."""
        return {o: np.linalg.norm(v, axis=(-2, -1)) for o, v in self.values.items()}

    def max_norm(self, masks: Optional[Dict[Orient, np.ndarray]] = None) -> float:
        out = 0.0
        for o, n in self.norms().items():
            sel = self.grid.triangle_mask(o)
            if masks is not None:
                sel = sel & masks[o]
            if sel.any():
                out = max(out, float(np.max(n[sel])))
        return out

    def pairing(self, u: LatticeField) -> float:
        """``sum_T |T| sigma(T) : grad_T u`` over the window triangles."""
        grads = triangle_gradients(u, self.grid)
        total = 0.0
        for o in Orient:
            sel = self.grid.triangle_mask(o)
            Gu = grads[o][sel] - np.eye(2)
            total += TRIANGLE_AREA * float(np.sum(self.values[o][sel] * Gu))
        return total

    def to_frame(self) -> pd.DataFrame:
        n1, n2 = self.grid.indices()
        frames = []
        for o in Orient:
            sel = self.grid.triangle_mask(o)
            v = self.values[o][sel]
            frames.append(
                pd.DataFrame(
                    {
                        "n1": n1[sel],
                        "n2": n2[sel],
                        "orient": o.value,
                        "s11": v[:, 0, 0],
                        "s12": v[:, 0, 1],
                        "s21": v[:, 1, 0],
                        "s22": v[:, 1, 1],
                    }
                )
            )
        return pd.concat(frames, ignore_index=True)

    def error_frame(self, reference: "StressField") -> pd.DataFrame:
        """Per-element ``e(T) = |sigma(T) - reference(T)|``."""
        n1, n2 = self.grid.indices()
        diff = (self - reference).norms()
        frames = [
            pd.DataFrame(
                {
                    "n1": n1[self.grid.triangle_mask(o)],
                    "n2": n2[self.grid.triangle_mask(o)],
                    "orient": o.value,
                    "e": diff[o][self.grid.triangle_mask(o)],
                }
            )
            for o in Orient
        ]
        return pd.concat(frames, ignore_index=True)

    def write_csv(self, path) -> None:
        self.to_frame().to_csv(path, index=False, float_format="%.17g")


@dataclass
class CRField:
    """Midpoint values on canonical edges ``(x, j)``, j = 1..3, shape (M1, M2, 3, 2)."""

    grid: Grid
    values: np.ndarray = field(repr=False)

    @classmethod
    def zeros(cls, grid: Grid) -> "CRField":
        return cls(grid, np.zeros(grid.shape + (3, 2)))

    def at(self, e: Edge) -> np.ndarray:
        e = Edge.canonical(e.tail, e.j)
        i, k = self.grid.index(e.tail)
        return self.values[i, k, e.j - 1]

    def set(self, e: Edge, value: Iterable[float]) -> None:
        e = Edge.canonical(e.tail, e.j)
        i, k = self.grid.index(e.tail)
        self.values[i, k, e.j - 1] = np.asarray(value, dtype=float)

    def to_frame(self) -> pd.DataFrame:
        n1, n2 = self.grid.indices()
        core = self.grid.core_mask()
        frames = []
        for j in range(3):
            frames.append(
                pd.DataFrame(
                    {
                        "n1": n1[core],
                        "n2": n2[core],
                        "j": j + 1,
                        "psi1": self.values[..., j, 0][core],
                        "psi2": self.values[..., j, 1][core],
                    }
                )
            )
        return pd.concat(frames, ignore_index=True)


def cr_rotated_gradient(psi: CRField) -> StressField:
    """``d(psi)J`` on every triangle of the window."""
    grid = psi.grid
    out = {}
    for orient in Orient:
        acc = np.zeros(grid.shape + (2, 2))
        for d, j, k in TRIANGLE_EDGES[orient]:
            acc += _outer(grid.shift(psi.values[..., j - 1, :], d), DIRECTIONS[k - 1])
        out[orient] = -(2.0 / OMEGA0) * acc
    return StressField(grid, out, "dpsiJ")


# ---------------------------------------------------------------------------
# stresses


def _edge_site_stress(st: State, S: np.ndarray, name: str) -> StressField:
    """``(1/Omega0) sum_j S[x_{T,j}, j] (x) a_j``."""
    out = {}
    for orient in Orient:
        acc = np.zeros(st.grid.shape + (2, 2))
        for j, off in enumerate(EDGE_SITE_OFFSETS[orient]):
            acc += _outer(st.grid.shift(S[..., j, :], off), DIRECTIONS[j])
        out[orient] = acc / OMEGA0
    return StressField(st.grid, out, name)


def sigma_a(V: SitePotential, y: Deformation, box: Optional[Box] = None) -> StressField:
    st = evaluate(y, box)
    return _edge_site_stress(st, site_derivatives(V, st, EnergyKind.A), "sigma_a")


def sigma_c1(V: SitePotential, y: Deformation, box: Optional[Box] = None) -> StressField:
    """``dW(grad_T y)``."""
    st = evaluate(y, box)
    VT = triangle_slots(V, st)
    return StressField(st.grid, {o: stress_from_slots(VT[o]) for o in Orient}, "sigma_c1")


def _sigma_c2(V: SitePotential, st: State) -> StressField:
    VT = triangle_slots(V, st)
    out = {}
    for orient in Orient:
        acc = np.zeros(st.grid.shape + (2, 2))
        other = VT[_OTHER[orient]]
        for j, off in enumerate(NEIGHBOUR_OFFSETS[orient]):
            nb = st.grid.shift(other[..., j, :], off)
            acc += _outer(0.5 * (VT[orient][..., j, :] + nb), DIRECTIONS[j])
        out[orient] = acc / OMEGA0
    return StressField(st.grid, out, "sigma_c2")


def sigma_c2(V: SitePotential, y: Deformation, box: Optional[Box] = None) -> StressField:
    """``(1/Omega0) sum_j 1/2 (V_{T,j} + V_{T_j,j}) (x) a_j``."""
    return _sigma_c2(V, evaluate(y, box))


def sigma_c3(V: SitePotential, y: Deformation, box: Optional[Box] = None) -> StressField:
    """Stress assembled from the Cauchy-Born site derivatives."""
    st = evaluate(y, box)
    return _edge_site_stress(st, site_derivatives(V, st, EnergyKind.C), "sigma_c3")


def sigma_ac(V: SitePotential, R: ReconstructionParams, y: Deformation) -> StressField:
    st = evaluate(y, grid=R.grid)
    return _edge_site_stress(st, site_derivatives(V, st, EnergyKind.AC, R), "sigma_ac")


# ---------------------------------------------------------------------------
# the Cauchy-Born corrector


def _psi23_values(V: SitePotential, st: State) -> np.ndarray:
    VT = triangle_slots(V, st)
    out = np.empty(st.grid.shape + (3, 2))
    for j in (1, 2, 3):
        up = st.grid.shift(VT[Orient.UP], EDGE_UP_OFFSET[j])
        down = st.grid.shift(VT[Orient.DOWN], EDGE_DOWN_OFFSET[j])
        out[..., j - 1, :] = (down - up)[..., 0::2, :].sum(axis=-2) / 6.0
    return out


def psi23(
    V: SitePotential, y: Deformation, box: Optional[Box] = None, check: bool = True
) -> CRField:
    """CR field with ``Sigma_c3 - Sigma_c2 = d(psi23)J`` on every window triangle.

    On edge f with UP triangle U and DOWN triangle N the value is
    ``(1/6) sum_{k=1,3,5} (V_{N,k} - V_{U,k})``.
    """
    st = evaluate(y, box)
    psi = CRField(st.grid, _psi23_values(V, st))
    if check:
        c3 = _edge_site_stress(st, site_derivatives(V, st, EnergyKind.C), "sigma_c3")
        lhs = c3 - _sigma_c2(V, st)
        mismatch = (lhs - cr_rotated_gradient(psi)).max_norm()
        scale = 1.0 + lhs.max_norm()
        if mismatch > CORRECTOR_TOL * scale:
            raise CorrectorMismatch(mismatch)
    return psi


def psi23_lipschitz_ratio(V: SitePotential, y: LatticeField, bounds: PotentialBounds) -> float:
    """``max_f |psi23(m_f)| / (M2/6 |D^2 y|_{l-inf(f)})``; advisory, expected <= 1."""
    st = evaluate(y)
    psi = _psi23_values(V, st)
    d2 = d2_field(y, st.grid)
    ratio = 0.0
    core = st.grid.core_mask()
    for j, off in enumerate(OFFSETS[:3]):
        local = np.maximum(d2, st.grid.shift(d2, off))
        num = np.linalg.norm(psi[..., j, :], axis=-1)
        sel = core & np.isfinite(local) & (local > 0)
        if sel.any():
            ratio = max(ratio, float(np.max(num[sel] / (bounds.M2_est / 6.0 * local[sel]))))
    return ratio


# ---------------------------------------------------------------------------
# the coupling corrector


def _site_operators(R: ReconstructionParams) -> np.ndarray:
    """``M[x][j, i]``: coefficient of ``V_{F,i}`` in ``S_{x,j}`` at a homogeneous state."""
    P = R.partition
    c = R.reduced.copy()
    c[P.mask(SiteClass.A)] = C_ATOM
    c[P.mask(SiteClass.C)] = C_CONT
    return np.swapaxes(full_tensor(c), -1, -2)


def homogeneous_stress_difference(R: ReconstructionParams) -> Dict[Orient, np.ndarray]:
    """Vectors ``w_m(T)``, m = 1..3, with ``Sigma_ac(y_F) - Sigma_a(y_F) = sum_m V_{F,m} (x) w_m``.

    Shape (M1, M2, 3, 2) per orientation; uses ``V_{F,m+3} = -V_{F,m}``.
    """
    grid = R.grid
    M = _site_operators(R) - np.eye(6)
    out = {}
    for orient in Orient:
        w = np.zeros(grid.shape + (3, 2))
        for j, off in enumerate(EDGE_SITE_OFFSETS[orient]):
            Mj = grid.shift(M[..., j, :], off)
            coef = Mj[..., :3] - Mj[..., 3:]
            w += coef[..., :, None] * DIRECTIONS[j]
        out[orient] = w / OMEGA0
    return out


@dataclass
class CorrectorCoefficients:
    """``lambda_{f,m}`` on canonical interface edges, shape (M1, M2, 3, 3): (edge j, slot m)."""

    grid: Grid
    values: np.ndarray = field(repr=False)
    edges: List[Edge] = field(default_factory=list)
    residual: float = 0.0

    def at(self, e: Edge) -> Tuple[float, ...]:
        e = Edge.canonical(e.tail, e.j)
        i, k = self.grid.index(e.tail)
        lam = self.values[i, k, e.j - 1]
        return tuple(float(v) for v in lam) + (0.0, 0.0, 0.0)

    def as_dict(self) -> Dict[Edge, Tuple[float, ...]]:
        return {e: self.at(e) for e in self.edges}

    def to_frame(self) -> pd.DataFrame:
        rows = [(e.tail.n1, e.tail.n2, e.j) + self.at(e)[:3] for e in self.edges]
        return pd.DataFrame(rows, columns=["n1", "n2", "j", "lambda1", "lambda2", "lambda3"])

    def evaluate(self, V: SitePotential, F: np.ndarray) -> CRField:
        """``psi_ac(F; m_f) = sum_m lambda_{f,m} dV_m(F a)``."""
        dV = V.d1(homogeneous_gradient(np.asarray(F, dtype=float)))
        return CRField(self.grid, np.einsum("...jm,mc->...jc", self.values, dV[:3]))


def psi_ac_coefficients(R: ReconstructionParams) -> CorrectorCoefficients:
    """Solve ``d(psi_ac)J = Sigma_ac(y_F) - Sigma_a(y_F)`` on the interface triangles.

    Unknowns sit on the interface edges of the window; atomistic and continuum
    edges carry zero. The load is linear in ``(V_{F,m})_m`` so one solve with
    three right-hand sides serves every F and every potential.
    """
    P = R.partition
    grid = R.grid
    w = homogeneous_stress_difference(R)
    edge_cls = {j: P.edge_classes(j) for j in (1, 2, 3)}
    tris = P.triangles(SiteClass.I)
    columns: Dict[Edge, int] = {}
    entries = []
    for t, T in enumerate(tris):
        for (d1, d2), j, k in TRIANGLE_EDGES[T.orient]:
            tail = Site(T.base.n1 + d1, T.base.n2 + d2)
            if edge_cls[j][grid.index(tail)] != SiteClass.I:
                continue
            col = columns.setdefault(Edge(tail, j), len(columns))
            entries.append((t, col, k))
    lam = np.zeros(grid.shape + (3, 3))
    edges = list(columns)
    if not tris or not edges:
        residual = max(
            (float(np.abs(w[T.orient][grid.index(T.base)]).max()) for T in tris), default=0.0
        )
        if residual > NO_CORRECTOR_TOL:
            raise NoCorrector(residual)
        return CorrectorCoefficients(grid, lam, edges, residual)

    A = np.zeros((2 * len(tris), len(edges)))
    for t, col, k in entries:
        A[2 * t : 2 * t + 2, col] += -(2.0 / OMEGA0) * DIRECTIONS[k - 1]
    rhs = np.zeros((2 * len(tris), 3))
    for t, T in enumerate(tris):
        rhs[2 * t : 2 * t + 2] = w[T.orient][grid.index(T.base)].T
    sol, *_ = linalg.lstsq(A, rhs)
    residual = float(np.abs(A @ sol - rhs).max())
    logger.info(
        "coupling corrector: %d interface triangles, %d edges, residual %.2e",
        len(tris),
        len(edges),
        residual,
    )
    if residual > NO_CORRECTOR_TOL:
        raise NoCorrector(residual)
    for e, col in columns.items():
        i, k = grid.index(e.tail)
        lam[i, k, e.j - 1] = sol[col]
    return CorrectorCoefficients(grid, lam, edges, residual)


def psi_ac_hat(
    V: SitePotential,
    R: ReconstructionParams,
    y: Deformation,
    coeffs: Optional[CorrectorCoefficients] = None,
) -> CRField:
    """Interface edges use the mean of their two gradients; continuum edges carry ``psi23``."""
    if coeffs is None:
        coeffs = psi_ac_coefficients(R)
    P = R.partition
    st = evaluate(y, grid=R.grid)
    c23 = _psi23_values(V, st)
    out = np.zeros(st.grid.shape + (3, 2))
    for j in (1, 2, 3):
        cls = P.edge_classes(j)
        is_c = cls == SiteClass.C
        out[is_c, j - 1] = c23[is_c, j - 1]
        is_i = (cls == SiteClass.I) & np.any(coeffs.values[..., j - 1, :] != 0.0, axis=-1)
        if not is_i.any():
            continue
        Ff = 0.5 * (
            st.grid.shift(st.grads[Orient.UP], EDGE_UP_OFFSET[j])
            + st.grid.shift(st.grads[Orient.DOWN], EDGE_DOWN_OFFSET[j])
        )
        dV = V.d1(homogeneous_gradient(Ff[is_i]))
        out[is_i, j - 1] = np.einsum("nm,nmc->nc", coeffs.values[is_i, j - 1], dV[:, :3])
    return CRField(st.grid, out)


def sigma_ac_hat(
    V: SitePotential,
    R: ReconstructionParams,
    y: Deformation,
    coeffs: Optional[CorrectorCoefficients] = None,
) -> StressField:
    """``Sigma_ac - d(psi_ac_hat)J``."""
    out = sigma_ac(V, R, y) - cr_rotated_gradient(psi_ac_hat(V, R, y, coeffs))
    out.name = "sigma_ac_hat"
    return out


def corrector_lipschitz_ratio(
    V: SitePotential,
    coeffs: CorrectorCoefficients,
    F: np.ndarray,
    G: np.ndarray,
    bounds: PotentialBounds,
) -> float:
    """``max_f |psi_ac(F; m_f) - psi_ac(G; m_f)| / (M2 |F - G|)``."""
    gap = float(np.linalg.norm(np.asarray(F) - np.asarray(G)))
    if gap == 0.0 or bounds.M2_est == 0.0:
        return 0.0
    diff = coeffs.evaluate(V, F).values - coeffs.evaluate(V, G).values
    return float(np.linalg.norm(diff, axis=-1).max()) / (bounds.M2_est * gap)


def zero_stress_obstruction(P: RegionPartition) -> float:
    """Least-squares residual of ``Sigma_ac(y_F) = Sigma_a(y_F)`` over patch-consistent parameters.

    Positive whenever no patch-consistent choice makes the corrector unnecessary.
    """
    system = assemble_patch_constraints(P)
    solution = solve_constraints(system)
    masks = {o: P.grid.triangle_mask(o) for o in Orient}
    base_params = assign_general(P)

    def load(values: np.ndarray) -> np.ndarray:
        w = homogeneous_stress_difference(system.to_params(values, base_params))
        return np.concatenate([w[o][masks[o]].ravel() for o in Orient])

    base = load(solution.particular)
    if solution.dimension == 0:
        return float(np.linalg.norm(base))
    B = np.column_stack(
        [load(solution.particular + solution.basis[:, i]) - base for i in range(solution.dimension)]
    )
    z, *_ = linalg.lstsq(B, -base)
    residual = float(np.linalg.norm(base + B @ z))
    logger.info(
        "zero-stress obstruction over %d free parameters: %.3e", solution.dimension, residual
    )
    return residual


# ---------------------------------------------------------------------------
# divergence and consistency


def divergence_residual(sigma: StressField) -> float:
    """``max_x |sum_T |T| sigma(T) grad_T phi_x|`` over vertices with six window triangles."""
    grid = sigma.grid
    acc = np.zeros(grid.shape + (2,))
    for k, (orient, off) in enumerate(INCIDENT):
        s = grid.shift(sigma.values[orient], off)
        acc += TRIANGLE_AREA * s @ _HAT[k]
    inside = grid.core_mask() & np.isfinite(acc).all(axis=-1)
    vals = np.linalg.norm(acc, axis=-1)[inside]
    return float(vals.max()) if vals.size else 0.0


@dataclass
class ConsistencyReport:
    p: float
    max_C: float
    lp_C: float
    max_I: float
    lp_I: float
    delta_max: float
    dual_norm: Optional[float]
    errors: pd.DataFrame = field(repr=False)

    def to_dict(self) -> Dict[str, object]:
        return {
            "p": self.p,
            "max_C": self.max_C,
            "lp_C": self.lp_C,
            "max_I": self.max_I,
            "lp_I": self.lp_I,
            "delta_max": self.delta_max,
            "dual_norm": self.dual_norm,
        }


def _aggregate(errs: Dict[Orient, np.ndarray], masks: Dict[Orient, np.ndarray], p: float):
    vals = np.concatenate([errs[o][masks[o]] for o in Orient])
    if vals.size == 0:
        return 0.0, 0.0
    if np.isinf(p):
        return float(vals.max()), float(vals.max())
    return float(vals.max()), float(np.sum(TRIANGLE_AREA * vals**p) ** (1.0 / p))


def force_dual_norm(V: SitePotential, R: ReconstructionParams, y: LatticeField) -> Optional[float]:
    """``|f_ac - f_a|`` in the dual of the P1 energy space; None if the forces reach the rim."""
    diff = forces(EnergyKind.AC, V, y, R) - forces(EnergyKind.A, V, y)
    ell = diff.values.copy()
    rim = np.ones(diff.box.shape, dtype=bool)
    rim[1:-1, 1:-1] = False
    rim_size = float(np.abs(ell[rim]).max()) if rim.any() else 0.0
    if rim_size > BOUNDARY_FORCE_TOL:
        logger.warning("force difference %.2e on the window rim, dual norm skipped", rim_size)
        return None
    ell[rim] = 0.0
    try:
        return dual_norm_2(ell, diff.box)
    except OutOfWindow:
        return None


def consistency_report(
    V: SitePotential,
    R: ReconstructionParams,
    y: Deformation,
    p: float = 2.0,
    coeffs: Optional[CorrectorCoefficients] = None,
) -> ConsistencyReport:
    """``e(T) = |Sigma_ac_hat(T) - Sigma_a(T)|`` over continuum and interface triangles."""
    P = R.partition
    box = P.box
    hat = sigma_ac_hat(V, R, y, coeffs)
    ref = sigma_a(V, y, box)
    errs = (hat - ref).norms()
    masks_C = {o: P.triangle_classes(o) == SiteClass.C for o in Orient}
    masks_I = {o: P.triangle_classes(o) == SiteClass.I for o in Orient}
    for o in Orient:
        inside = hat.grid.triangle_mask(o)
        masks_C[o] &= inside
        masks_I[o] &= inside
    max_C, lp_C = _aggregate(errs, masks_C, p)
    max_I, lp_I = _aggregate(errs, masks_I, p)
    delta = edge_residuals(V, y, box)
    delta_max = float(np.linalg.norm(delta, axis=-1).max()) if delta.size else 0.0
    dual = None
    if p == 2 and isinstance(y, LatticeField):
        dual = force_dual_norm(V, R, y)
    report = ConsistencyReport(p, max_C, lp_C, max_I, lp_I, delta_max, dual, hat.error_frame(ref))
    logger.debug("consistency: %s", report.to_dict())
    return report


def homogeneous_check(V: SitePotential, R: ReconstructionParams, F) -> float:
    """``max_T |Sigma_ac_hat(y_F; T) - dW(F)|``."""
    y = HomogeneousState(F)
    hat = sigma_ac_hat(V, R, y)
    target = stress_from_slots(V.d1(homogeneous_gradient(y.F)))
    return max(
        float(np.nanmax(np.linalg.norm(hat.values[o] - target, axis=(-2, -1)))) for o in Orient
    )
