"""Atomistic, Cauchy-Born and coupled energies with their force fields.

Every energy is a sum of site energies ``V^k_x(Dy(x))`` over the window, and
every force field is assembled from the per-site derivatives ``S_x,j``:

    f(x) = -dE/dy(x) = sum_j [S_x,j - S_{x-a_j},j]
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, Optional, Tuple

import numpy as np
import pandas as pd

from .errors import FormMismatch
from .fields import (
    Deformation,
    HomogeneousState,
    LatticeField,
    differences,
    triangle_gradients,
    window_of,
)
from .lattice import (
    DIRECTIONS,
    INCIDENT,
    J_ROT,
    OFFSETS,
    OMEGA0,
    TRIANGLE_AREA,
    Box,
    Grid,
    Orient,
)
from .partition import SiteClass
from .potentials import SitePotential, homogeneous_gradient, stress_from_slots
from .reconstruction import ReconstructionParams, reconstruct_batch, reconstruction_adjoint

logger = logging.getLogger(__name__)

FORM_RTOL = 1e-12
FD_T = 1e-6

_JA = DIRECTIONS @ J_ROT.T  # J a_j


class EnergyKind(str, enum.Enum):
    A = "a"
    C = "c"
    AC = "ac"


# ---------------------------------------------------------------------------
# evaluation helpers


def _valid(arr: np.ndarray, tail: int) -> np.ndarray:
    """Grid mask where ``arr`` carries no NaN in its trailing ``tail`` axes."""
    axes = tuple(range(-tail, 0))
    return ~np.isnan(arr).any(axis=axes)


def _masked(fn: Callable[[np.ndarray], np.ndarray], g: np.ndarray, out_tail: Tuple[int, ...]):
    """Apply a potential only where its input is defined; NaN elsewhere."""
    mask = _valid(g, 2)
    out = np.full(g.shape[:-2] + out_tail, np.nan)
    if mask.any():
        out[mask] = fn(g[mask])
    return out


@dataclass
class State:
    """Differences and triangle gradients of one deformation on one grid."""

    y: Deformation
    grid: Grid
    dy: np.ndarray = field(init=False, repr=False)
    grads: Dict[Orient, np.ndarray] = field(init=False, repr=False)

    def __post_init__(self):
        if isinstance(self.y, LatticeField):
            self.y.check_margin()
        self.dy = differences(self.y, self.grid)
        self.grads = triangle_gradients(self.y, self.grid, self.dy)

    def incident_gradient(self, k: int) -> np.ndarray:
        """``grad y`` on ``T_{x,k}`` for every grid site x (k in 1..6)."""
        orient, off = INCIDENT[k - 1]
        return self.grid.shift(self.grads[orient], off)


def evaluate(y: Deformation, box: Optional[Box] = None, grid: Optional[Grid] = None) -> State:
    if grid is None:
        grid = Grid(window_of(y, box))
    else:
        window_of(y, grid.box)
    return State(y, grid)


# ---------------------------------------------------------------------------
# site energies and site derivatives


def _cb_site_energy(V: SitePotential, st: State) -> np.ndarray:
    # (Omega0/6) sum_k W(F_{x,k}) = (1/6) sum_k V(F_{x,k} a)
    total = np.zeros(st.grid.shape)
    for k in range(1, 7):
        Fa = homogeneous_gradient(st.incident_gradient(k))
        total = total + _masked(V.energy, Fa, ())
    return total / 6.0


def _cb_site_derivative(V: SitePotential, st: State) -> np.ndarray:
    dW = []
    for k in range(1, 7):
        Fa = homogeneous_gradient(st.incident_gradient(k))
        dW.append(stress_from_slots(_masked(V.d1, Fa, (6, 2))))
    S = np.empty(st.grid.shape + (6, 2))
    for j in range(6):
        prev, nxt = (j - 1) % 6, (j + 1) % 6
        S[..., j, :] = (dW[prev] @ _JA[prev] - dW[j] @ _JA[nxt]) / 6.0
    return S


def site_energies(
    V: SitePotential,
    st: State,
    kind: EnergyKind,
    R: Optional[ReconstructionParams] = None,
) -> np.ndarray:
    kind = EnergyKind(kind)
    if kind is EnergyKind.A:
        return _masked(V.energy, st.dy, ())
    if kind is EnergyKind.C:
        return _cb_site_energy(V, st)
    _check_params(R, st)
    classes = R.partition.classes
    out = _masked(V.energy, st.dy, ())
    is_i = classes == SiteClass.I
    out[is_i] = _masked(V.energy, reconstruct_batch(R.reduced[is_i], st.dy[is_i]), ())
    is_c = classes == SiteClass.C
    out[is_c] = _cb_site_energy(V, st)[is_c]
    return out


def site_derivatives(
    V: SitePotential,
    st: State,
    kind: EnergyKind,
    R: Optional[ReconstructionParams] = None,
) -> np.ndarray:
    """``S_x,j = d V^kind_x / d D_j y(x)`` on the grid, shape (M1, M2, 6, 2)."""
    kind = EnergyKind(kind)
    if kind is EnergyKind.A:
        return _masked(V.d1, st.dy, (6, 2))
    if kind is EnergyKind.C:
        return _cb_site_derivative(V, st)
    _check_params(R, st)
    classes = R.partition.classes
    S = _masked(V.d1, st.dy, (6, 2))
    is_i = classes == SiteClass.I
    c = R.reduced[is_i]
    dV = _masked(V.d1, reconstruct_batch(c, st.dy[is_i]), (6, 2))
    S[is_i] = reconstruction_adjoint(c, dV)
    is_c = classes == SiteClass.C
    S[is_c] = _cb_site_derivative(V, st)[is_c]
    return S


def _check_params(R: Optional[ReconstructionParams], st: State) -> None:
    if R is None:
        raise ValueError("the coupled energy needs reconstruction parameters")
    if R.grid != st.grid:
        raise ValueError(f"parameters live on {R.grid.box}, state on {st.grid.box}")


# ---------------------------------------------------------------------------
# energies


def _box_sum(st: State, site_e: np.ndarray) -> float:
    return float(np.sum(st.grid.core(site_e)))


def energy_a(V: SitePotential, y: Deformation, box: Optional[Box] = None) -> float:
    """``sum_x V(Dy(x))`` over the window."""
    st = evaluate(y, box)
    return _box_sum(st, site_energies(V, st, EnergyKind.A))


def energy_c_elements(V: SitePotential, st: State) -> float:
    """``sum_T |T| W(grad_T y)`` over the triangles of the window."""
    total = 0.0
    for orient in Orient:
        mask = st.grid.triangle_mask(orient)
        Fa = homogeneous_gradient(st.grads[orient][mask])
        total += float(np.sum(V.energy(Fa)))
    return TRIANGLE_AREA * total / OMEGA0


def energy_c(V: SitePotential, y: Deformation, box: Optional[Box] = None) -> float:
    """Cauchy-Born energy; element and site forms are compared for compact fields."""
    st = evaluate(y, box)
    site_form = _box_sum(st, site_energies(V, st, EnergyKind.C))
    if isinstance(y, HomogeneousState):
        return site_form
    element_form = energy_c_elements(V, st)
    if abs(element_form - site_form) > FORM_RTOL * (1.0 + abs(element_form)):
        raise FormMismatch(element_form, site_form)
    return element_form


def energy_ac(V: SitePotential, R: ReconstructionParams, y: Deformation) -> float:
    """A-sites carry ``V``, I-sites ``V o R_x`` and C-sites the Cauchy-Born site energy."""
    st = evaluate(y, grid=R.grid)
    return _box_sum(st, site_energies(V, st, EnergyKind.AC, R))


def energy(
    kind: EnergyKind,
    V: SitePotential,
    y: Deformation,
    R: Optional[ReconstructionParams] = None,
    box: Optional[Box] = None,
) -> float:
    kind = EnergyKind(kind)
    if kind is EnergyKind.A:
        return energy_a(V, y, box)
    if kind is EnergyKind.C:
        return energy_c(V, y, box)
    if R is None:
        raise ValueError("the coupled energy needs reconstruction parameters")
    return energy_ac(V, R, y)


# ---------------------------------------------------------------------------
# forces


@dataclass
class ForceField:
    box: Box
    values: np.ndarray = field(repr=False)

    def at(self, x: Iterable[int]) -> np.ndarray:
        n1, n2 = x
        return self.values[n1 - self.box.lo1, n2 - self.box.lo2]

    def total(self) -> np.ndarray:
        return self.values.sum(axis=(0, 1))

    def max_norm(self, mask: Optional[np.ndarray] = None) -> float:
        norms = np.linalg.norm(self.values, axis=-1)
        if mask is not None:
            norms = norms[mask]
        return float(norms.max()) if norms.size else 0.0

    def argmax(self) -> Tuple[int, int]:
        i, k = np.unravel_index(np.argmax(np.linalg.norm(self.values, axis=-1)), self.box.shape)
        return int(i) + self.box.lo1, int(k) + self.box.lo2

    def __sub__(self, other: "ForceField") -> "ForceField":
        return ForceField(self.box, self.values - other.values)

    def to_frame(self) -> pd.DataFrame:
        n1, n2 = Grid(self.box, pad=0).indices()
        return pd.DataFrame(
            {
                "n1": n1.ravel(),
                "n2": n2.ravel(),
                "f1": self.values[..., 0].ravel(),
                "f2": self.values[..., 1].ravel(),
            }
        )

    def write_csv(self, path) -> None:
        self.to_frame().to_csv(path, index=False, float_format="%.17g")


def assemble_forces(st: State, S: np.ndarray) -> ForceField:
    f = np.zeros(st.grid.shape + (2,))
    for j, (d1, d2) in enumerate(OFFSETS):
        f += S[..., j, :] - st.grid.shift(S[..., j, :], (-d1, -d2))
    return ForceField(st.grid.box, st.grid.core(f).copy())


def forces(
    kind: EnergyKind,
    V: SitePotential,
    y: Deformation,
    R: Optional[ReconstructionParams] = None,
    box: Optional[Box] = None,
) -> ForceField:
    """``f(x) = -dE/dy(x)`` on the window sites; homogeneous states use the extended formula."""
    kind = EnergyKind(kind)
    grid = R.grid if kind is EnergyKind.AC and R is not None else None
    st = evaluate(y, box, grid)
    return assemble_forces(st, site_derivatives(V, st, kind, R))


def ghost_forces(V: SitePotential, R: ReconstructionParams, F) -> ForceField:
    """Coupled forces at the homogeneous state ``y_F``."""
    return forces(EnergyKind.AC, V, HomogeneousState(F), R)


def variation_pairing(f: ForceField, u: LatticeField) -> float:
    """``<dE(y), u> = -sum_x f(x) . u(x)``."""
    if u.box != f.box:
        raise ValueError(f"test field box {u.box} differs from force box {f.box}")
    return -float(np.sum(f.values * u.values))


def variation_fd(
    energy_fn: Callable[[LatticeField], float], y: LatticeField, u: LatticeField, t: float = FD_T
) -> float:
    """Central difference quotient ``(E(y + t u) - E(y - t u)) / 2t``."""
    return (energy_fn(y + t * u) - energy_fn(y - t * u)) / (2.0 * t)


# ---------------------------------------------------------------------------
# edge and volume representations of the first variations


def _test_differences(u: LatticeField, grid: Grid) -> np.ndarray:
    w = u.on_grid(grid)
    return np.stack([grid.shift(w, off) - w for off in OFFSETS], axis=-2)


def edge_variation_a(V: SitePotential, y: LatticeField, u: LatticeField) -> float:
    """``sum_x sum_{j<=3} (V_{x,j} - V_{x+a_j,j+3}) . D_j u(x)``."""
    st = evaluate(y)
    S = site_derivatives(V, st, EnergyKind.A)
    Du = _test_differences(u, st.grid)
    total = 0.0
    for j in range(3):
        back = st.grid.shift(S[..., j + 3, :], OFFSETS[j])
        term = np.einsum("...c,...c->...", S[..., j, :] - back, Du[..., j, :])
        total += float(np.sum(st.grid.core(term)))
    return total


def triangle_slots(V: SitePotential, st: State) -> Dict[Orient, np.ndarray]:
    """``V_{T,j} = dV_j(grad_T y a)`` per triangle base, shape (M1, M2, 6, 2)."""
    return {
        o: _masked(V.d1, homogeneous_gradient(G), (6, 2)) for o, G in st.grads.items()
    }


def edge_variation_c(V: SitePotential, y: LatticeField, u: LatticeField) -> float:
    """Edge form of the Cauchy-Born variation; each bond takes half of both adjacent triangles."""
    st = evaluate(y)
    VT = triangle_slots(V, st)
    Du = _test_differences(u, st.grid)
    total = 0.0
    for j in range(1, 4):
        acc = np.zeros(st.grid.shape + (2,))
        for k in (j, j - 1 if j > 1 else 6):
            orient, off = INCIDENT[k - 1]
            VTk = st.grid.shift(VT[orient], off)
            acc += 0.5 * (VTk[..., j - 1, :] - VTk[..., j + 2, :])
        term = np.einsum("...c,...c->...", acc, Du[..., j - 1, :])
        total += float(np.sum(st.grid.core(term)))
    return total


def volume_variation_c(V: SitePotential, y: LatticeField, u: LatticeField) -> float:
    """``sum_T |T| dW(grad_T y) : grad_T u``."""
    st = evaluate(y)
    grads_u = triangle_gradients(u, st.grid)
    total = 0.0
    for orient in Orient:
        mask = st.grid.triangle_mask(orient)
        dW = stress_from_slots(V.d1(homogeneous_gradient(st.grads[orient][mask])))
        Gu = grads_u[orient][mask] - np.eye(2)
        total += TRIANGLE_AREA * float(np.sum(dW * Gu))
    return total


def edge_residuals(V: SitePotential, y: Deformation, box: Optional[Box] = None) -> np.ndarray:
    """``delta_j(x) = V_{x,j} - V_{x+a_j,j+3} - sum_T 1/2 (V_{T,j} - V_{T,j+3})`` for j = 1..3.

    Shape ``box.shape + (3, 2)``; ``<dE_a - dE_c, u> = sum_x sum_j delta_j(x) . D_j u(x)``.
    """
    st = evaluate(y, box)
    S = site_derivatives(V, st, EnergyKind.A)
    VT = triangle_slots(V, st)
    out = np.zeros(st.grid.shape + (3, 2))
    for j in range(1, 4):
        acc = S[..., j - 1, :] - st.grid.shift(S[..., j + 2, :], OFFSETS[j - 1])
        for k in (j, j - 1 if j > 1 else 6):
            orient, off = INCIDENT[k - 1]
            VTk = st.grid.shift(VT[orient], off)
            acc = acc - 0.5 * (VTk[..., j - 1, :] - VTk[..., j + 2, :])
        out[..., j - 1, :] = acc
    return st.grid.core(out).copy()
