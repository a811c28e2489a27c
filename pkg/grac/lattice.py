"""Integer geometry of the triangular lattice and its canonical triangulation.

Sites are integer pairs ``(n1, n2)`` with position ``n1*a1 + n2*a2``. Every
adjacency query is exact integer arithmetic; real coordinates are derived
views. Bulk computations work on a :class:`Grid`, the window grown by a fixed
pad, with :meth:`Grid.shift` reading neighbour values.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Dict, Iterable, Iterator, List, NamedTuple, Set, Tuple

import numpy as np

from .errors import NoSuchEdge, OutOfWindow

SQRT3_2 = math.sqrt(3.0) / 2.0
OMEGA0 = SQRT3_2
TRIANGLE_AREA = OMEGA0 / 2.0

# a_j = Q6^(j-1) a_1, written out so that a_{j-1} + a_{j+1} = a_j is exact.
DIRECTIONS = np.array(
    [
        [1.0, 0.0],
        [0.5, SQRT3_2],
        [-0.5, SQRT3_2],
        [-1.0, 0.0],
        [-0.5, -SQRT3_2],
        [0.5, -SQRT3_2],
    ]
)
OFFSETS: Tuple[Tuple[int, int], ...] = ((1, 0), (0, 1), (-1, 1), (-1, 0), (0, -1), (1, -1))

# counterclockwise rotation by pi/2
J_ROT = np.array([[0.0, -1.0], [1.0, 0.0]])

PAD = 4


def wrap(j: int) -> int:
    """Map any integer direction index into 1..6."""
    return (int(j) - 1) % 6 + 1


def direction(j: int) -> np.ndarray:
    return DIRECTIONS[wrap(j) - 1].copy()


def offset(j: int) -> Tuple[int, int]:
    return OFFSETS[wrap(j) - 1]


class Site(NamedTuple):
    n1: int
    n2: int

    def step(self, j: int, k: int = 1) -> "Site":
        d1, d2 = offset(j)
        return Site(self.n1 + k * d1, self.n2 + k * d2)

    def __add__(self, other):  # type: ignore[override]
        return Site(self.n1 + other[0], self.n2 + other[1])

    @property
    def position(self) -> np.ndarray:
        return np.array([self.n1 + 0.5 * self.n2, SQRT3_2 * self.n2])

    def neighbours(self) -> List["Site"]:
        return [self.step(j) for j in range(1, 7)]


class Orient(str, enum.Enum):
    UP = "UP"
    DOWN = "DOWN"


# vertex offsets from the base
_VERTICES = {
    Orient.UP: ((0, 0), (1, 0), (0, 1)),
    Orient.DOWN: ((0, 0), (0, 1), (-1, 1)),
}

# x_{T,j} - base, j = 1..6
EDGE_SITE_OFFSETS: Dict[Orient, Tuple[Tuple[int, int], ...]] = {
    Orient.UP: ((0, 0), (0, 0), (1, 0), (1, 0), (0, 1), (0, 1)),
    Orient.DOWN: ((-1, 1), (0, 0), (0, 0), (0, 1), (0, 1), (-1, 1)),
}

# base of T_j (opposite orientation) - base of T, j = 1..6
NEIGHBOUR_OFFSETS: Dict[Orient, Tuple[Tuple[int, int], ...]] = {
    Orient.UP: ((1, -1), (0, 0), (1, 0), (1, -1), (0, 0), (1, 0)),
    Orient.DOWN: ((-1, 1), (0, 0), (-1, 0), (-1, 1), (0, 0), (-1, 0)),
}

# T_{x,j} as (orient, base - x)
INCIDENT: Tuple[Tuple[Orient, Tuple[int, int]], ...] = (
    (Orient.UP, (0, 0)),
    (Orient.DOWN, (0, 0)),
    (Orient.UP, (-1, 0)),
    (Orient.DOWN, (0, -1)),
    (Orient.UP, (0, -1)),
    (Orient.DOWN, (1, -1)),
)

# edges of a triangle as (tail offset, canonical j, anticlockwise direction index)
TRIANGLE_EDGES: Dict[Orient, Tuple[Tuple[Tuple[int, int], int, int], ...]] = {
    Orient.UP: (((0, 0), 1, 1), ((1, 0), 3, 3), ((0, 0), 2, 5)),
    Orient.DOWN: (((0, 0), 2, 2), ((-1, 1), 1, 4), ((0, 0), 3, 6)),
}

# canonical edge (x, j): base of its UP triangle - x, and of its DOWN triangle - x
EDGE_UP_OFFSET = {1: (0, 0), 2: (0, 0), 3: (-1, 0)}
EDGE_DOWN_OFFSET = {1: (1, -1), 2: (0, 0), 3: (0, 0)}

ANTICLOCKWISE = {Orient.UP: (1, 3, 5), Orient.DOWN: (2, 4, 6)}


class Triangle(NamedTuple):
    base: Site
    orient: Orient

    @property
    def vertices(self) -> Tuple[Site, Site, Site]:
        b = self.base
        verts = _VERTICES[self.orient]
        return tuple(Site(b.n1 + d1, b.n2 + d2) for d1, d2 in verts)  # type: ignore

    @property
    def edges(self) -> Tuple["Edge", "Edge", "Edge"]:
        b = self.base
        edges = TRIANGLE_EDGES[self.orient]
        return tuple(Edge(Site(b.n1 + d[0], b.n2 + d[1]), j) for d, j, _ in edges)  # type: ignore

    def centroid(self) -> np.ndarray:
        return sum(v.position for v in self.vertices) / 3.0


class Edge(NamedTuple):
    tail: Site
    j: int

    @staticmethod
    def canonical(x: Iterable[int], j: int) -> "Edge":
        x = Site(*x)
        j = wrap(j)
        if j <= 3:
            return Edge(x, j)
        return Edge(x.step(j), j - 3)

    @property
    def head(self) -> Site:
        return self.tail.step(self.j)

    @property
    def midpoint(self) -> np.ndarray:
        return self.tail.position + 0.5 * DIRECTIONS[self.j - 1]

    def sites(self) -> Tuple[Site, Site]:
        return self.tail, self.head


def _canonical_triangle(vertices: Iterable[Site]) -> Triangle:
    target = {tuple(v) for v in vertices}
    for v in target:
        for orient in Orient:
            cand = Triangle(Site(*v), orient)
            if {tuple(w) for w in cand.vertices} == target:
                return cand
    raise ValueError(f"{sorted(target)} is not a triangle of the canonical triangulation")


def incident_triangle(x: Iterable[int], j: int) -> Triangle:
    """T_{x,j} = conv{x, x+a_j, x+a_{j+1}} in canonical form."""
    x = Site(*x)
    orient, (d1, d2) = INCIDENT[wrap(j) - 1]
    return Triangle(Site(x.n1 + d1, x.n2 + d2), orient)


def edge_site(T: Triangle, j: int) -> Site:
    """x_{T,j}: the vertex x of T with x + a_j also a vertex of T."""
    d1, d2 = EDGE_SITE_OFFSETS[T.orient][wrap(j) - 1]
    return Site(T.base.n1 + d1, T.base.n2 + d2)


def neighbour_triangle(T: Triangle, j: int, strict: bool = True) -> Triangle:
    """T_j, the triangle across the edge of T with anticlockwise direction a_j.

    Raises :class:`NoSuchEdge` for a direction T does not own. With
    ``strict=False`` any j is accepted and ``T_j == T_{j+3}``.
    """
    j = wrap(j)
    if strict and j not in ANTICLOCKWISE[T.orient]:
        raise NoSuchEdge(
            f"{T.orient.value} triangle at {tuple(T.base)} has no edge with direction a_{j}"
        )
    d1, d2 = NEIGHBOUR_OFFSETS[T.orient][j - 1]
    other = Orient.DOWN if T.orient is Orient.UP else Orient.UP
    return Triangle(Site(T.base.n1 + d1, T.base.n2 + d2), other)


def edge_triangles(e: Edge) -> Tuple[Triangle, Triangle]:
    """The two triangles sharing ``e``: (T_{x,j}, T_{x,j-1})."""
    return incident_triangle(e.tail, e.j), incident_triangle(e.tail, e.j - 1)


def anticlockwise_direction(T: Triangle, e: Edge) -> int:
    for d, j, k in TRIANGLE_EDGES[T.orient]:
        if Edge(Site(T.base.n1 + d[0], T.base.n2 + d[1]), j) == e:
            return k
    raise NoSuchEdge(f"{e} is not an edge of {T}")


@dataclass(frozen=True)
class Box:
    """Rhombic index window ``lo1 <= n1 <= hi1``, ``lo2 <= n2 <= hi2``."""

    lo1: int
    hi1: int
    lo2: int
    hi2: int

    def __post_init__(self):
        if self.hi1 < self.lo1 or self.hi2 < self.lo2:
            raise ValueError(f"empty box {self}")

    @classmethod
    def centred(cls, radius: int) -> "Box":
        return cls(-radius, radius, -radius, radius)

    @classmethod
    def around(cls, sites: Iterable[Iterable[int]], margin: int) -> "Box":
        pts = np.array([tuple(s) for s in sites], dtype=int)
        if pts.size == 0:
            raise ValueError("cannot build a box around no sites")
        lo = pts.min(axis=0) - margin
        hi = pts.max(axis=0) + margin
        return cls(int(lo[0]), int(hi[0]), int(lo[1]), int(hi[1]))

    @property
    def shape(self) -> Tuple[int, int]:
        return self.hi1 - self.lo1 + 1, self.hi2 - self.lo2 + 1

    @property
    def n_sites(self) -> int:
        a, b = self.shape
        return a * b

    def grow(self, k: int) -> "Box":
        return Box(self.lo1 - k, self.hi1 + k, self.lo2 - k, self.hi2 + k)

    def contains(self, x: Iterable[int]) -> bool:
        n1, n2 = x
        return self.lo1 <= n1 <= self.hi1 and self.lo2 <= n2 <= self.hi2

    def hops_inside(self, x: Iterable[int]) -> int:
        """Hops from ``x`` to the last layer of the box (negative outside)."""
        n1, n2 = x
        return min(n1 - self.lo1, self.hi1 - n1, n2 - self.lo2, self.hi2 - n2)

    def sites(self) -> Iterator[Site]:
        for n1 in range(self.lo1, self.hi1 + 1):
            for n2 in range(self.lo2, self.hi2 + 1):
                yield Site(n1, n2)

    def require(self, *sites: Iterable[int], what: str = "stencil") -> None:
        for s in sites:
            if not self.contains(s):
                raise OutOfWindow(tuple(s), self, what)

    def __str__(self) -> str:
        return f"[{self.lo1}..{self.hi1}]x[{self.lo2}..{self.hi2}]"


def triangles_in(box: Box) -> List[Triangle]:
    """All triangles with three vertices in ``box``."""
    tris = []
    for n1 in range(box.lo1, box.hi1 + 1):
        for n2 in range(box.lo2, box.hi2):
            if n1 < box.hi1:
                tris.append(Triangle(Site(n1, n2), Orient.UP))
            if n1 > box.lo1:
                tris.append(Triangle(Site(n1, n2), Orient.DOWN))
    return tris


def edges_in(box: Box) -> List[Edge]:
    edges = []
    for x in box.sites():
        for j in (1, 2, 3):
            if box.contains(x.step(j)):
                edges.append(Edge(x, j))
    return edges


@dataclass(frozen=True)
class MeshCounts:
    n_vertices: int
    n_edges: int
    n_triangles: int
    n_interior_vertices: int

    @property
    def euler(self) -> int:
        return self.n_vertices - self.n_edges + self.n_triangles

    @property
    def edge_balance(self) -> int:
        """``2#E - #V + #V_I - 3#T``; zero for simply connected unions."""
        return 2 * self.n_edges - self.n_vertices + self.n_interior_vertices - 3 * self.n_triangles


def counting_identities(triangles: Iterable[Triangle]) -> MeshCounts:
    tris = set(triangles)
    edge_use: Dict[Edge, int] = {}
    vertices: Set[Site] = set()
    for T in tris:
        vertices.update(T.vertices)
        for e in T.edges:
            edge_use[e] = edge_use.get(e, 0) + 1
    boundary: Set[Site] = set()
    for e, n in edge_use.items():
        if n == 1:
            boundary.update(e.sites())
    return MeshCounts(len(vertices), len(edge_use), len(tris), len(vertices - boundary))


@dataclass(frozen=True)
class Grid:
    """Array layout over ``box.grow(pad)``; index ``[i, k]`` is site ``(lo1-pad+i, lo2-pad+k)``."""

    box: Box
    pad: int = PAD

    @property
    def outer(self) -> Box:
        return self.box.grow(self.pad)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.outer.shape

    def indices(self) -> Tuple[np.ndarray, np.ndarray]:
        o = self.outer
        return np.meshgrid(
            np.arange(o.lo1, o.hi1 + 1), np.arange(o.lo2, o.hi2 + 1), indexing="ij"
        )

    def positions(self) -> np.ndarray:
        n1, n2 = self.indices()
        return np.stack([n1 + 0.5 * n2, SQRT3_2 * n2], axis=-1)

    def index(self, x: Iterable[int]) -> Tuple[int, int]:
        n1, n2 = x
        return n1 - self.outer.lo1, n2 - self.outer.lo2

    def core(self, arr: np.ndarray) -> np.ndarray:
        p = self.pad
        return arr[p : arr.shape[0] - p, p : arr.shape[1] - p]

    def core_mask(self) -> np.ndarray:
        mask = np.zeros(self.shape, dtype=bool)
        self.core(mask)[...] = True
        return mask

    def triangle_mask(self, orient: Orient) -> np.ndarray:
        """Bases whose triangle has all three vertices in the box."""
        n1, n2 = self.indices()
        b = self.box
        inside = (n2 >= b.lo2) & (n2 <= b.hi2 - 1)
        if orient is Orient.UP:
            return inside & (n1 >= b.lo1) & (n1 <= b.hi1 - 1)
        return inside & (n1 >= b.lo1 + 1) & (n1 <= b.hi1)

    def shift(self, arr: np.ndarray, off: Tuple[int, int], fill=np.nan) -> np.ndarray:
        """``out[x] = arr[x + off]``; entries whose source lies off the grid get ``fill``."""
        d1, d2 = off
        out = np.full_like(arr, fill)
        m1, m2 = arr.shape[0], arr.shape[1]
        src1 = slice(max(d1, 0), m1 + min(d1, 0))
        dst1 = slice(max(-d1, 0), m1 + min(-d1, 0))
        src2 = slice(max(d2, 0), m2 + min(d2, 0))
        dst2 = slice(max(-d2, 0), m2 + min(-d2, 0))
        out[dst1, dst2] = arr[src1, src2]
        return out
