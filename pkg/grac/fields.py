"""Lattice deformations, finite differences, discrete norms and the P1 dual norm.

A :class:`LatticeField` holds a displacement ``u`` on the sites of a box; the
deformation is ``y = id + u`` and ``u`` vanishes outside the box. A
:class:`HomogeneousState` is ``y_F(x) = F x`` on the whole lattice, with all
differences equal to ``F a_j`` exactly.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Optional, Tuple, Union

import numpy as np
import pandas as pd
import scipy.sparse as sp
from scipy.sparse.linalg import cg

from .errors import OutOfWindow, SolverFailure
from .lattice import (
    DIRECTIONS,
    OFFSETS,
    TRIANGLE_AREA,
    Box,
    Grid,
    Orient,
    Site,
    Triangle,
    triangles_in,
    wrap,
)

logger = logging.getLogger(__name__)

SUPPORT_MARGIN = 3
DUAL_NORM_RTOL = 1e-10

# [a_k a_{k+1}]^{-1} for the two triangle orientations: UP uses (a1, a2), DOWN (a2, a3)
_EDGE_PAIRS = {Orient.UP: (1, 2), Orient.DOWN: (2, 3)}
_EDGE_INVERSE = {
    o: np.linalg.inv(np.column_stack([DIRECTIONS[i - 1], DIRECTIONS[k - 1]]))
    for o, (i, k) in _EDGE_PAIRS.items()
}


@dataclass(frozen=True)
class HomogeneousState:
    F: np.ndarray

    def __post_init__(self):
        F = np.asarray(self.F, dtype=float)
        if F.shape != (2, 2):
            raise ValueError(f"F must be 2x2, got shape {F.shape}")
        object.__setattr__(self, "F", F)

    @property
    def bonds(self) -> np.ndarray:
        """``F a_j`` for j = 1..6, shape (6, 2)."""
        return DIRECTIONS @ self.F.T

    def __call__(self, x: Iterable[int]) -> np.ndarray:
        return self.F @ Site(*x).position


@dataclass(frozen=True)
class LatticeField:
    box: Box
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != self.box.shape + (2,):
            raise ValueError(f"values must have shape {self.box.shape + (2,)}, got {vals.shape}")
        object.__setattr__(self, "values", vals)

    @classmethod
    def zeros(cls, box: Box) -> "LatticeField":
        return cls(box, np.zeros(box.shape + (2,)))

    @classmethod
    def from_function(cls, box: Box, fn: Callable[[np.ndarray], np.ndarray]) -> "LatticeField":
        """Sample ``fn`` on the positions of the box sites (``fn`` maps (..., 2) -> (..., 2))."""
        pos = Grid(box, pad=0).positions()
        return cls(box, np.asarray(fn(pos), dtype=float))

    @classmethod
    def from_sites(
        cls, box: Box, values: Mapping[Iterable[int], Iterable[float]]
    ) -> "LatticeField":
        arr = np.zeros(box.shape + (2,))
        for x, v in values.items():
            box.require(x, what="field value")
            arr[x[0] - box.lo1, x[1] - box.lo2] = v
        return cls(box, arr)

    def __call__(self, x: Iterable[int]) -> np.ndarray:
        n1, n2 = x
        if not self.box.contains((n1, n2)):
            return np.zeros(2)
        return self.values[n1 - self.box.lo1, n2 - self.box.lo2]

    def __add__(self, other: "LatticeField") -> "LatticeField":
        _same_box(self, other)
        return LatticeField(self.box, self.values + other.values)

    def __sub__(self, other: "LatticeField") -> "LatticeField":
        _same_box(self, other)
        return LatticeField(self.box, self.values - other.values)

    def __mul__(self, t: float) -> "LatticeField":
        return LatticeField(self.box, t * self.values)

    __rmul__ = __mul__

    def support(self) -> list:
        idx = np.argwhere(np.any(self.values != 0.0, axis=-1))
        return [Site(int(i) + self.box.lo1, int(k) + self.box.lo2) for i, k in idx]

    def check_margin(self, margin: int = SUPPORT_MARGIN) -> None:
        """Raise :class:`OutOfWindow` unless the support sits ``margin`` hops inside the box."""
        for x in self.support():
            if self.box.hops_inside(x) < margin:
                raise OutOfWindow(tuple(x), self.box, what=f"support (margin {margin})")

    def on_grid(self, grid: Grid) -> np.ndarray:
        """Displacement on ``grid``, zero outside the field's box."""
        out = np.zeros(grid.shape + (2,))
        i0, k0 = grid.index((self.box.lo1, self.box.lo2))
        n1, n2 = self.box.shape
        if i0 < 0 or k0 < 0 or i0 + n1 > grid.shape[0] or k0 + n2 > grid.shape[1]:
            raise OutOfWindow((self.box.lo1, self.box.lo2), grid.outer, what="field box")
        out[i0 : i0 + n1, k0 : k0 + n2] = self.values
        return out

    def to_frame(self) -> pd.DataFrame:
        n1, n2 = Grid(self.box, pad=0).indices()
        return pd.DataFrame(
            {
                "n1": n1.ravel(),
                "n2": n2.ravel(),
                "u1": self.values[..., 0].ravel(),
                "u2": self.values[..., 1].ravel(),
            }
        )

    @classmethod
    def from_frame(cls, df: pd.DataFrame, box: Optional[Box] = None) -> "LatticeField":
        missing = {"n1", "n2", "u1", "u2"} - set(df.columns)
        if missing:
            raise ValueError(f"field table is missing columns {sorted(missing)}")
        if box is None:
            box = Box.around(zip(df["n1"], df["n2"]), margin=0)
        arr = np.zeros(box.shape + (2,))
        i = df["n1"].to_numpy(dtype=int) - box.lo1
        k = df["n2"].to_numpy(dtype=int) - box.lo2
        arr[i, k, 0] = df["u1"].to_numpy(dtype=float)
        arr[i, k, 1] = df["u2"].to_numpy(dtype=float)
        return cls(box, arr)

    def write_csv(self, path) -> None:
        self.to_frame().to_csv(path, index=False, float_format="%.17g")

    @classmethod
    def read_csv(cls, path, box: Optional[Box] = None) -> "LatticeField":
        return cls.from_frame(pd.read_csv(path, float_precision="round_trip"), box=box)


Deformation = Union[LatticeField, HomogeneousState]


def _same_box(u: LatticeField, v: LatticeField) -> None:
    if u.box != v.box:
        raise ValueError(f"fields live on different boxes {u.box} and {v.box}")


def window_of(y: Deformation, box: Optional[Box] = None) -> Box:
    """The evaluation window: the field's own box, or ``box`` for homogeneous states."""
    if isinstance(y, LatticeField):
        if box is not None and box != y.box:
            raise ValueError(f"field box {y.box} differs from the requested window {box}")
        return y.box
    if box is None:
        raise ValueError("a window is required to evaluate a homogeneous state")
    return box


# ---------------------------------------------------------------------------
# pointwise stencils


def fdiff(v: Deformation, x: Iterable[int], j: int) -> np.ndarray:
    """``D_j y(x) = y(x + a_j) - y(x)``."""
    j = wrap(j)
    if isinstance(v, HomogeneousState):
        return v.F @ DIRECTIONS[j - 1]
    x = Site(*x)
    v.box.require(x, x.step(j))
    return DIRECTIONS[j - 1] + v(x.step(j)) - v(x)


def _iterated(v: LatticeField, x: Site, dirs: Tuple[int, ...]) -> np.ndarray:
    # literal composition of forward differences on u (the affine part drops out)
    if not dirs:
        v.box.require(x)
        return v(x)
    head, rest = dirs[0], dirs[1:]
    return _iterated(v, x.step(head), rest) - _iterated(v, x, rest)


def d2_magnitude(y: Deformation, x: Iterable[int]) -> float:
    """``|D^2 y(x)| = max_{i,j} |D_i D_j y(x)|``."""
    if isinstance(y, HomogeneousState):
        return 0.0
    x = Site(*x)
    return max(
        float(np.linalg.norm(_iterated(y, x, (i, j)))) for i in range(1, 7) for j in range(1, 7)
    )


def d3_magnitude(y: Deformation, x: Iterable[int]) -> float:
    if isinstance(y, HomogeneousState):
        return 0.0
    x = Site(*x)
    return max(
        float(np.linalg.norm(_iterated(y, x, (i, j, k))))
        for i in range(1, 7)
        for j in range(1, 7)
        for k in range(1, 7)
    )


def p1_gradient(y: Deformation, T: Triangle) -> np.ndarray:
    """Gradient of the piecewise affine interpolant of ``y`` on ``T``."""
    if isinstance(y, HomogeneousState):
        return y.F.copy()
    y.box.require(*T.vertices, what="triangle")
    i, k = _EDGE_PAIRS[T.orient]
    D = np.column_stack([fdiff(y, T.base, i), fdiff(y, T.base, k)])
    return D @ _EDGE_INVERSE[T.orient]


def lp_norm(
    values: Union[np.ndarray, Mapping, Iterable[float]],
    region: Optional[Union[np.ndarray, Iterable[Iterable[int]]]] = None,
    p: float = 2.0,
) -> float:
    """Discrete l^p norm of a real field restricted to ``region``.

    ``values`` is either a mapping site -> value (``region`` a site iterable,
    missing sites count as zero) or an array (``region`` a boolean mask).
    """
    if p < 1:
        raise ValueError(f"p must lie in [1, inf], got {p}")
    if isinstance(values, Mapping):
        keys = values.keys() if region is None else [tuple(s) for s in region]
        arr = np.array([float(values.get(tuple(s), 0.0)) for s in keys])
    else:
        arr = np.asarray(values, dtype=float)
        if region is not None:
            arr = arr[np.asarray(region, dtype=bool)]
    arr = np.abs(arr.ravel())
    if arr.size == 0:
        return 0.0
    if np.isinf(p):
        return float(arr.max())
    return float(np.sum(arr**p) ** (1.0 / p))


# ---------------------------------------------------------------------------
# bulk views on a grid


def differences(y: Deformation, grid: Grid) -> np.ndarray:
    """All ``D_j y`` on the grid, shape (M1, M2, 6, 2); NaN where the stencil leaves the grid."""
    if isinstance(y, HomogeneousState):
        return np.broadcast_to(y.bonds, grid.shape + (6, 2)).copy()
    u = y.on_grid(grid)
    out = np.empty(grid.shape + (6, 2))
    for j, off in enumerate(OFFSETS):
        out[..., j, :] = DIRECTIONS[j] + (grid.shift(u, off) - u)
    return out


def triangle_gradients(y: Deformation, grid: Grid, dy: Optional[np.ndarray] = None) -> dict:
    """``{UP: G, DOWN: G}`` with ``G[b]`` the gradient on the triangle with base ``b``."""
    if isinstance(y, HomogeneousState):
        G = np.broadcast_to(y.F, grid.shape + (2, 2)).copy()
        return {Orient.UP: G, Orient.DOWN: G.copy()}
    if dy is None:
        dy = differences(y, grid)
    out = {}
    for orient, (i, k) in _EDGE_PAIRS.items():
        D = np.stack([dy[..., i - 1, :], dy[..., k - 1, :]], axis=-1)
        out[orient] = D @ _EDGE_INVERSE[orient]
    return out


def second_differences(y: Deformation, grid: Grid) -> np.ndarray:
    """``D_i D_j u`` on the grid, shape (M1, M2, 6, 6, 2)."""
    if isinstance(y, HomogeneousState):
        return np.zeros(grid.shape + (6, 6, 2))
    u = y.on_grid(grid)
    first = np.stack([grid.shift(u, off) - u for off in OFFSETS], axis=-2)
    out = np.empty(grid.shape + (6, 6, 2))
    for i, off in enumerate(OFFSETS):
        out[..., i, :, :] = grid.shift(first, off) - first
    return out


def third_differences(y: Deformation, grid: Grid) -> np.ndarray:
    if isinstance(y, HomogeneousState):
        return np.zeros(grid.shape + (6, 6, 6, 2))
    second = second_differences(y, grid)
    out = np.empty(grid.shape + (6, 6, 6, 2))
    for i, off in enumerate(OFFSETS):
        out[..., i, :, :, :] = grid.shift(second, off) - second
    return out


def d2_field(y: Deformation, grid: Grid) -> np.ndarray:
    """``|D^2 y|`` on the grid (NaN near the grid rim)."""
    return np.linalg.norm(second_differences(y, grid), axis=-1).max(axis=(-1, -2))


def d3_field(y: Deformation, grid: Grid) -> np.ndarray:
    return np.linalg.norm(third_differences(y, grid), axis=-1).max(axis=(-1, -2, -3))


# ---------------------------------------------------------------------------
# P1 dual norm


def _local_stiffness(orient: Orient) -> np.ndarray:
    verts = np.array([Site(*v).position for v in Triangle(Site(0, 0), orient).vertices])
    B = np.column_stack([verts[1] - verts[0], verts[2] - verts[0]])
    ref = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
    grads = ref @ np.linalg.inv(B)
    return TRIANGLE_AREA * grads @ grads.T


def p1_stiffness(box: Box) -> Tuple[sp.csr_matrix, np.ndarray]:
    """Scalar P1 stiffness on the triangles of ``box``, restricted to interior nodes.

    Returns the matrix and the boolean mask (box shape) of the interior nodes, in
    the row-major order of that mask.
    """
    n1s, n2s = box.shape
    rows, cols, vals = [], [], []
    for orient in Orient:
        K = _local_stiffness(orient)
        tris = [T for T in triangles_in(box) if T.orient is orient]
        if not tris:
            continue
        nodes = np.array(
            [[(v.n1 - box.lo1) * n2s + (v.n2 - box.lo2) for v in T.vertices] for T in tris]
        )
        rows.append(np.repeat(nodes, 3, axis=1).ravel())
        cols.append(np.tile(nodes, (1, 3)).ravel())
        vals.append(np.broadcast_to(K.ravel(), (len(tris), 9)).ravel())
    n = n1s * n2s
    A = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    ).tocsr()
    interior = np.zeros(box.shape, dtype=bool)
    interior[1:-1, 1:-1] = True
    keep = np.flatnonzero(interior.ravel())
    return A[keep][:, keep], interior


def dual_norm_2(ell: np.ndarray, box: Box) -> float:
    """``sup <ell, u> / |grad u|_{L2}`` over P1 fields vanishing on the box boundary.

    ``ell`` has shape ``box.shape + (2,)``; its boundary entries must vanish.
    """
    ell = np.asarray(ell, dtype=float)
    if ell.shape != box.shape + (2,):
        raise ValueError(f"functional must have shape {box.shape + (2,)}, got {ell.shape}")
    K, interior = p1_stiffness(box)
    if np.any(ell[~interior] != 0.0):
        raise OutOfWindow("boundary", box, what="functional support")
    total = 0.0
    for c in range(2):
        b = ell[..., c][interior]
        bnorm = np.linalg.norm(b)
        if bnorm == 0.0:
            continue
        x, info = cg(K, b, rtol=DUAL_NORM_RTOL, atol=0.0, maxiter=10 * K.shape[0])
        residual = float(np.linalg.norm(K @ x - b) / bnorm)
        logger.debug("dual norm solve component %d: info=%d residual=%.2e", c, info, residual)
        if info != 0:
            raise SolverFailure(
                f"CG did not reach relative residual {DUAL_NORM_RTOL:g}",
                info=info,
                residual=residual,
            )
        total += float(b @ x)
    return float(np.sqrt(max(total, 0.0)))


def h1_seminorm(u: LatticeField) -> float:
    """``|grad u|_{L2}`` of the P1 interpolant over the triangles of the field's box."""
    K, interior = p1_stiffness(u.box)
    total = 0.0
    for c in range(2):
        w = u.values[..., c][interior]
        total += float(w @ (K @ w))
    return float(np.sqrt(total))


# ---------------------------------------------------------------------------
# test-field family


def bump(r: np.ndarray) -> np.ndarray:
    """``exp(1 - 1/(1 - r^2))`` on ``r < 1``, zero elsewhere (``bump(0) = 1``)."""
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    inside = r < 1.0
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - r[inside] ** 2))
    return out


def smooth_window_radius(R: float, margin: int = SUPPORT_MARGIN + 1) -> int:
    """Box radius holding the disc ``|x| < R`` with ``margin`` spare hops."""
    return int(np.ceil(2.0 * R / np.sqrt(3.0))) + margin


def smooth_bump_field(box: Box, R: float, eps: float = 0.05) -> LatticeField:
    """``u_R(x) = eps R eta(|x|/R) (sin(2 pi x1/R), cos(2 pi x2/R))``.

    This is ``R`` times the field ``eps eta(|x|/R) (sin, cos)``: the factor
    rescales one fixed macroscopic displacement to the lattice, so strains stay
    ``O(eps)`` and ``|D^2 u| ~ eps/R``, ``|D^3 u| ~ eps/R^2``.
    """
    if R <= 0:
        raise ValueError(f"scale R must be positive, got {R}")

    def fn(pos):
        r = np.linalg.norm(pos, axis=-1) / R
        amp = eps * R * bump(r)
        return np.stack(
            [amp * np.sin(2 * np.pi * pos[..., 0] / R), amp * np.cos(2 * np.pi * pos[..., 1] / R)],
            axis=-1,
        )

    u = LatticeField.from_function(box, fn)
    u.check_margin()
    return u


def random_field(
    box: Box, rng: np.random.Generator, radius: int, scale: float = 0.05, centre=(0, 0)
) -> LatticeField:
    """Random displacement on the hexagonal patch of ``radius`` around ``centre``."""
    n1, n2 = Grid(box, pad=0).indices()
    d1, d2 = n1 - centre[0], n2 - centre[1]
    hexdist = np.maximum(np.maximum(np.abs(d1), np.abs(d2)), np.abs(d1 + d2))
    vals = scale * rng.standard_normal(box.shape + (2,))
    vals[hexdist > radius] = 0.0
    u = LatticeField(box, vals)
    u.check_margin()
    return u
