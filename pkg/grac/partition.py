"""Atomistic / interface / continuum decomposition of the lattice.

The atomistic region is described by a :class:`Geometry`, a vectorised
membership test on integer site coordinates. Classes are computed on the
padded grid of a window; unbounded geometries (half-planes, wedges) are
classified analytically beyond the window.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from matplotlib.path import Path

from .errors import TooCloseToBoundary
from .lattice import (
    OFFSETS,
    PAD,
    SQRT3_2,
    Box,
    Edge,
    Grid,
    Orient,
    Site,
    Triangle,
)

logger = logging.getLogger(__name__)

ATOM_MARGIN = 3

_VERTEX_OFFSETS = {Orient.UP: ((0, 0), (1, 0), (0, 1)), Orient.DOWN: ((0, 0), (0, 1), (-1, 1))}


class SiteClass(enum.IntEnum):
    A = 0
    I = 1  # noqa: E741
    C = 2


# ---------------------------------------------------------------------------
# geometries


class Geometry:
    """Membership test for the atomistic region."""

    bounded = True

    def contains(self, n1: np.ndarray, n2: np.ndarray) -> np.ndarray:  # pragma: no cover
        raise NotImplementedError

    def describe(self) -> Dict[str, object]:
        return {"kind": type(self).__name__}


@dataclass(frozen=True)
class SiteSet(Geometry):
    sites: frozenset

    def __init__(self, sites: Iterable[Iterable[int]]):
        object.__setattr__(self, "sites", frozenset(Site(*s) for s in sites))

    def contains(self, n1, n2):
        n1, n2 = np.broadcast_arrays(np.asarray(n1), np.asarray(n2))
        if not self.sites:
            return np.zeros(n1.shape, dtype=bool)
        pts = np.array(sorted(self.sites))
        # pairs encoded as complex numbers for a vectorised isin
        keys = pts[:, 0] + 1j * pts[:, 1]
        return np.isin(n1 + 1j * n2, keys)

    def describe(self):
        return {"kind": "sites", "count": len(self.sites)}


@dataclass(frozen=True)
class HalfPlane(Geometry):
    """``p n1 + q n2 < level``; ``HalfPlane(0, 1, 0)`` is ``{x2 < 0}``."""

    p: int = 0
    q: int = 1
    level: int = 0
    bounded = False

    def contains(self, n1, n2):
        return self.p * np.asarray(n1) + self.q * np.asarray(n2) < self.level

    def describe(self):
        return {"kind": "half_plane", "p": self.p, "q": self.q, "level": self.level}


@dataclass(frozen=True)
class Hexagon(Geometry):
    """Sites within ``radius`` lattice hops of ``centre``."""

    radius: int
    centre: Tuple[int, int] = (0, 0)

    def contains(self, n1, n2):
        d1 = np.asarray(n1) - self.centre[0]
        d2 = np.asarray(n2) - self.centre[1]
        return np.maximum(np.maximum(np.abs(d1), np.abs(d2)), np.abs(d1 + d2)) <= self.radius

    def describe(self):
        return {"kind": "hexagon", "radius": self.radius, "centre": list(self.centre)}


@dataclass(frozen=True)
class Polygon(Geometry):
    """Sites inside the closed polygon with the given real-coordinate vertices."""

    vertices: Tuple[Tuple[float, float], ...]
    tol: float = 1e-9

    def __post_init__(self):
        verts = tuple((float(a), float(b)) for a, b in self.vertices)
        if len(verts) < 3:
            raise ValueError(f"a polygon needs at least 3 vertices, got {len(verts)}")
        object.__setattr__(self, "vertices", verts)

    @classmethod
    def from_sites(cls, corners: Sequence[Iterable[int]]) -> "Polygon":
        return cls(tuple(tuple(Site(*c).position) for c in corners))

    def contains(self, n1, n2):
        n1, n2 = np.broadcast_arrays(np.asarray(n1, dtype=float), np.asarray(n2, dtype=float))
        pts = np.stack([n1 + 0.5 * n2, SQRT3_2 * n2], axis=-1).reshape(-1, 2)
        path = Path(np.array(self.vertices))
        # the sign of the radius that grows the region depends on orientation
        inside = path.contains_points(pts, radius=self.tol) | path.contains_points(
            pts, radius=-self.tol
        )
        return inside.reshape(n1.shape)

    def describe(self):
        return {"kind": "polygon", "vertices": [list(v) for v in self.vertices]}


@dataclass(frozen=True)
class Intersection(Geometry):
    parts: Tuple[Geometry, ...]

    def __init__(self, *parts: Geometry):
        object.__setattr__(self, "parts", tuple(parts))

    @property
    def bounded(self) -> bool:  # type: ignore[override]
        return any(p.bounded for p in self.parts)

    def contains(self, n1, n2):
        out = self.parts[0].contains(n1, n2)
        for p in self.parts[1:]:
            out = out & p.contains(n1, n2)
        return out

    def describe(self):
        return {"kind": "intersection", "parts": [p.describe() for p in self.parts]}


@dataclass(frozen=True)
class UnionOf(Geometry):
    parts: Tuple[Geometry, ...]

    def __init__(self, *parts: Geometry):
        object.__setattr__(self, "parts", tuple(parts))

    @property
    def bounded(self) -> bool:  # type: ignore[override]
        return all(p.bounded for p in self.parts)

    def contains(self, n1, n2):
        out = self.parts[0].contains(n1, n2)
        for p in self.parts[1:]:
            out = out | p.contains(n1, n2)
        return out

    def describe(self):
        return {"kind": "union", "parts": [p.describe() for p in self.parts]}


@dataclass(frozen=True)
class Complement(Geometry):
    part: Geometry
    bounded = False

    def contains(self, n1, n2):
        return ~self.part.contains(n1, n2)

    def describe(self):
        return {"kind": "complement", "part": self.part.describe()}


@dataclass(frozen=True)
class FullLattice(Geometry):
    bounded = False

    def contains(self, n1, n2):
        n1, n2 = np.broadcast_arrays(np.asarray(n1), np.asarray(n2))
        return np.ones(n1.shape, dtype=bool)

    def describe(self):
        return {"kind": "full"}


# ---------------------------------------------------------------------------
# partition


@dataclass
class RegionPartition:
    geometry: Geometry
    box: Box
    pad: int = PAD
    classes: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.grid = Grid(self.box, self.pad)
        n1, n2 = self.grid.indices()
        self.classes = self.classify(n1, n2)

    # classification -------------------------------------------------------

    def classify(self, n1, n2) -> np.ndarray:
        n1, n2 = np.asarray(n1), np.asarray(n2)
        atom = self.geometry.contains(n1, n2)
        near = np.zeros(atom.shape, dtype=bool)
        for d1, d2 in OFFSETS:
            near |= self.geometry.contains(n1 + d1, n2 + d2)
        out = np.full(atom.shape, SiteClass.C, dtype=np.int8)
        out[~atom & near] = SiteClass.I
        out[atom] = SiteClass.A
        return out

    def site_class(self, x: Iterable[int]) -> SiteClass:
        n1, n2 = x
        i, k = self.grid.index((n1, n2))
        if 0 <= i < self.classes.shape[0] and 0 <= k < self.classes.shape[1]:
            return SiteClass(int(self.classes[i, k]))
        return SiteClass(int(self.classify(np.array(n1), np.array(n2))))

    def mask(self, cls: SiteClass) -> np.ndarray:
        return self.classes == cls

    def sites_in_box(self, mask: np.ndarray) -> List[Site]:
        idx = np.argwhere(self.grid.core(mask))
        return [Site(int(i) + self.box.lo1, int(k) + self.box.lo2) for i, k in idx]

    @property
    def A(self) -> List[Site]:
        return self.sites_in_box(self.mask(SiteClass.A))

    @property
    def I(self) -> List[Site]:  # noqa: E743
        return self.sites_in_box(self.mask(SiteClass.I))

    @property
    def C(self) -> List[Site]:
        return self.sites_in_box(self.mask(SiteClass.C))

    def ext_mask(self) -> np.ndarray:
        """Grid mask of sites within one hop of the interface."""
        mask = self.mask(SiteClass.I)
        grown = mask.copy()
        for off in OFFSETS:
            grown |= self.grid.shift(mask, off, fill=False)
        return grown

    @property
    def I_ext(self) -> List[Site]:
        return self.sites_in_box(self.ext_mask())

    # triangles and edges --------------------------------------------------

    def triangle_classes(self, orient: Orient) -> np.ndarray:
        """Class of the triangle with base ``b`` and ``orient``, as a grid array."""
        verts = _VERTEX_OFFSETS[orient]
        n1, n2 = self.grid.indices()
        cls = [self.classify(n1 + d1, n2 + d2) for d1, d2 in verts]
        all_a = np.logical_and.reduce([c == SiteClass.A for c in cls])
        all_c = np.logical_and.reduce([c == SiteClass.C for c in cls])
        out = np.full(n1.shape, SiteClass.I, dtype=np.int8)
        out[all_a] = SiteClass.A
        out[all_c] = SiteClass.C
        return out

    def triangle_class(self, T: Triangle) -> SiteClass:
        i, k = self.grid.index(T.base)
        return SiteClass(int(self.triangle_classes(T.orient)[i, k]))

    def triangles(self, cls: Optional[SiteClass] = None) -> List[Triangle]:
        """Triangles of the box, optionally restricted to one class."""
        n1, n2 = self.grid.indices()
        out = []
        for orient in Orient:
            mask = self.grid.triangle_mask(orient)
            if cls is not None:
                mask = mask & (self.triangle_classes(orient) == cls)
            out.extend(
                Triangle(Site(int(n1[i, k]), int(n2[i, k])), orient) for i, k in np.argwhere(mask)
            )
        return out

    def edge_classes(self, j: int) -> np.ndarray:
        """Class of the canonical edge ``(x, j)``, j in 1..3, as a grid array."""
        n1, n2 = self.grid.indices()
        d1, d2 = OFFSETS[j - 1]
        tail, head = self.classes, self.classify(n1 + d1, n2 + d2)
        out = np.full(n1.shape, SiteClass.I, dtype=np.int8)
        out[(tail == SiteClass.A) & (head == SiteClass.A)] = SiteClass.A
        out[(tail == SiteClass.C) & (head == SiteClass.C)] = SiteClass.C
        return out

    def edge_class(self, e: Edge) -> SiteClass:
        cls = {self.site_class(e.tail), self.site_class(e.head)}
        if cls == {SiteClass.A}:
            return SiteClass.A
        if cls == {SiteClass.C}:
            return SiteClass.C
        return SiteClass.I

    def _edge_mask(self, j: int) -> np.ndarray:
        n1, n2 = self.grid.indices()
        d1, d2 = OFFSETS[j - 1]
        b = self.box
        return (
            (n1 >= b.lo1) & (n1 <= b.hi1) & (n2 >= b.lo2) & (n2 <= b.hi2)
            & (n1 + d1 >= b.lo1) & (n1 + d1 <= b.hi1) & (n2 + d2 >= b.lo2) & (n2 + d2 <= b.hi2)
        )

    def edges(self, cls: Optional[SiteClass] = None) -> List[Edge]:
        n1, n2 = self.grid.indices()
        out = []
        for j in (1, 2, 3):
            mask = self._edge_mask(j)
            if cls is not None:
                mask = mask & (self.edge_classes(j) == cls)
            out.extend(Edge(Site(int(n1[i, k]), int(n2[i, k])), j) for i, k in np.argwhere(mask))
        return out

    def interface_edges(self) -> List[Edge]:
        """Canonical bonds of the box with both endpoints in I."""
        n1, n2 = self.grid.indices()
        is_i = self.mask(SiteClass.I)
        out = []
        for j in (1, 2, 3):
            mask = self._edge_mask(j) & is_i & self.grid.shift(is_i, OFFSETS[j - 1], fill=False)
            out.extend(Edge(Site(int(n1[i, k]), int(n2[i, k])), j) for i, k in np.argwhere(mask))
        return out

    def planar_line(self) -> Optional[Tuple[int, int]]:
        """``(d, level)`` if the interface sites of the box share one lattice line along ``a_d``."""
        pts = np.array(self.I, dtype=int).reshape(-1, 2)
        if len(pts) == 0:
            return None
        invariants = {1: pts[:, 1], 2: pts[:, 0], 3: pts[:, 0] + pts[:, 1]}
        for d, vals in invariants.items():
            if np.all(vals == vals[0]):
                return d, int(vals[0])
        return None

    def to_frame(self) -> pd.DataFrame:
        n1, n2 = Grid(self.box, pad=0).indices()
        core = self.grid.core(self.classes)
        names = np.array([c.name for c in SiteClass])
        return pd.DataFrame({"n1": n1.ravel(), "n2": n2.ravel(), "class": names[core.ravel()]})

    def write_csv(self, path) -> None:
        self.to_frame().to_csv(path, index=False)

    def counts(self) -> Dict[str, int]:
        return {
            "A": len(self.A),
            "I": len(self.I),
            "C": len(self.C),
            "interface_edges": len(self.interface_edges()),
        }


def build_partition(
    atoms: Union[Geometry, Iterable[Iterable[int]]], box: Box, pad: int = PAD
) -> RegionPartition:
    geometry = atoms if isinstance(atoms, Geometry) else SiteSet(atoms)
    if isinstance(geometry, SiteSet):
        close = [s for s in sorted(geometry.sites) if box.hops_inside(s) < ATOM_MARGIN]
    elif geometry.bounded:
        grid = Grid(box, pad)
        n1, n2 = grid.indices()
        hit = geometry.contains(n1, n2)
        close = []
        for i, k in np.argwhere(hit):
            s = Site(int(n1[i, k]), int(n2[i, k]))
            if box.hops_inside(s) < ATOM_MARGIN:
                close.append(s)
    else:
        close = []
    if close:
        raise TooCloseToBoundary(close, ATOM_MARGIN)
    P = RegionPartition(geometry, box, pad)
    logger.debug("partition of %s on %s: %s", geometry.describe(), box, P.counts())
    return P


# ---------------------------------------------------------------------------
# admissibility


@dataclass
class AdmissibilityReport:
    violations: Dict[Site, str] = field(default_factory=dict)
    warnings: List[str] = field(default_factory=list)
    corners: List[Site] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations

    def to_dict(self) -> Dict[str, object]:
        return {
            "passed": self.passed,
            "violations": {f"{s.n1},{s.n2}": why for s, why in self.violations.items()},
            "warnings": list(self.warnings),
            "corners": [list(s) for s in self.corners],
        }


def check_admissible(P: RegionPartition) -> AdmissibilityReport:
    """Every interface site needs exactly two interface neighbours and a continuum neighbour."""
    report = AdmissibilityReport()
    for x in P.I:
        nb = [P.site_class(x.step(j)) for j in range(1, 7)]
        n_i = sum(c == SiteClass.I for c in nb)
        n_c = sum(c == SiteClass.C for c in nb)
        reasons = []
        if n_i != 2:
            reasons.append(f"{n_i} interface neighbours")
        if n_c == 0:
            reasons.append("no continuum neighbour")
        if reasons:
            report.violations[x] = ", ".join(reasons)
            continue
        dirs = [j for j, c in zip(range(1, 7), nb) if c == SiteClass.I]
        if dirs[1] - dirs[0] != 3:
            report.corners.append(x)
    corner_set = set(report.corners)
    for x in report.corners:
        for j in (1, 2, 3):
            if x.step(j) in corner_set:
                report.warnings.append(f"adjacent corner sites {tuple(x)} and {tuple(x.step(j))}")
    for w in report.warnings:
        logger.warning(w)
    return report


def is_planar(P: RegionPartition) -> bool:
    return P.planar_line() is not None


# ---------------------------------------------------------------------------
# catalog


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    geometry: Geometry
    radius: int
    note: str

    def partition(self, radius: Optional[int] = None) -> RegionPartition:
        return build_partition(self.geometry, Box.centred(radius or self.radius))


def corner_catalog() -> Dict[str, CatalogEntry]:
    """Admissible interface geometries covering every local corner type.

    The atomistic region meets the interface at opening angles of 60, 120 and
    240 degrees; 300 degrees leaves the corner site without a continuum
    neighbour and is not admissible.
    """
    entries = [
        CatalogEntry("flat", HalfPlane(0, 1, 0), 6, "A = {x2 < 0}, straight interface"),
        CatalogEntry("hexagon", Hexagon(3), 8, "convex 120 degree corners"),
        CatalogEntry(
            "hexagon_hole", Complement(Hexagon(3)), 8, "A outside a hexagon, 240 degree corners"
        ),
        CatalogEntry(
            "wedge_convex",
            Intersection(HalfPlane(0, 1, 0), HalfPlane(1, 1, 0)),
            7,
            "single 120 degree corner at the origin, interface bonds a and b",
        ),
        CatalogEntry(
            "wedge_concave",
            UnionOf(HalfPlane(0, 1, 0), HalfPlane(1, 1, 0)),
            7,
            "single 240 degree corner at the origin",
        ),
        CatalogEntry(
            "wedge_sharp",
            Intersection(HalfPlane(1, 0, 1), HalfPlane(0, 1, 1)),
            7,
            "60 degree tip: two adjacent corner sites",
        ),
        CatalogEntry(
            "rhombus",
            Polygon.from_sites([(-2, -2), (2, -2), (2, 2), (-2, 2)]),
            7,
            "two 60 and two 120 degree corners",
        ),
        CatalogEntry(
            "trapezoid",
            Polygon.from_sites([(-4, 0), (4, 0), (1, 3), (-4, 3)]),
            9,
            "60 degree base corners, 120 degree top corners",
        ),
    ]
    return {e.name: e for e in entries}
