"""Six-slot nearest-neighbour site potentials and the Cauchy-Born density.

All evaluations are batched: ``g`` has shape ``(..., 6, 2)`` (the six
difference vectors ``D_j y(x)``), ``energy`` returns ``(...)``, ``d1`` returns
``(..., 6, 2)`` and ``d2`` returns ``(..., 6, 6, 2, 2)``.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import DegenerateBond, SymmetryViolation
from .lattice import DIRECTIONS, OMEGA0

logger = logging.getLogger(__name__)

FD_STEP = 1e-5
MIN_BOND = 1e-8
LIPSCHITZ_INFLATION = 1.05


class DerivativeMode(str, enum.Enum):
    ANALYTIC = "analytic"
    FINITE_DIFFERENCE = "finite_difference"


def flip(g: np.ndarray) -> np.ndarray:
    """``(-g_{j+3})_j``, the point-reflected neighbourhood."""
    return -np.roll(g, -3, axis=-2)


def _central(fn, g: np.ndarray, h: float) -> np.ndarray:
    """Central differences of ``fn`` in every slot and component of ``g``; appends axes (6, 2)."""
    cols = []
    for j in range(6):
        for c in range(2):
            e = np.zeros((6, 2))
            e[j, c] = h
            cols.append((fn(g + e) - fn(g - e)) / (2.0 * h))
    stacked = np.stack(cols, axis=-1)
    return stacked.reshape(stacked.shape[:-1] + (6, 2))


class SitePotential:
    """A site energy ``V(g)`` with ``V(a) = 0``.

    Subclasses implement ``_energy`` and, where available, ``_d1``/``_d2``.
    Missing derivatives, or all derivatives in finite-difference mode, come
    from central differences with step :data:`FD_STEP`.
    """

    name = "site"
    point_symmetric = True
    has_analytic_d1 = False
    has_analytic_d2 = False

    def __init__(
        self,
        mode: DerivativeMode = DerivativeMode.ANALYTIC,
        fd_step: float = FD_STEP,
        richardson: bool = False,
    ):
        self.mode = DerivativeMode(mode)
        self.fd_step = fd_step
        self.richardson = richardson

    def params(self) -> Dict[str, float]:
        return {}

    def __repr__(self) -> str:
        args = ", ".join(f"{k}={v!r}" for k, v in self.params().items())
        return f"{type(self).__name__}({args}, mode={self.mode.value})"

    # evaluation -----------------------------------------------------------

    def energy(self, g: np.ndarray) -> np.ndarray:
        return self._energy(np.asarray(g, dtype=float))

    __call__ = energy

    def d1(self, g: np.ndarray) -> np.ndarray:
        g = np.asarray(g, dtype=float)
        if self.mode is DerivativeMode.ANALYTIC and self.has_analytic_d1:
            return self._d1(g)
        return self._fd(self._energy, g)

    def d2(self, g: np.ndarray) -> np.ndarray:
        g = np.asarray(g, dtype=float)
        if self.mode is DerivativeMode.ANALYTIC and self.has_analytic_d2:
            return self._d2(g)
        # d2[..., i, j, a, b] = d(d1[..., i, a]) / d g[..., j, b]
        D = self._fd(self.d1, g)
        return np.swapaxes(D, -3, -2)

    def _fd(self, fn, g: np.ndarray) -> np.ndarray:
        h = self.fd_step
        if not self.richardson:
            return _central(fn, g, h)
        return (4.0 * _central(fn, g, h / 2.0) - _central(fn, g, h)) / 3.0

    def _energy(self, g: np.ndarray) -> np.ndarray:  # pragma: no cover - abstract
        raise NotImplementedError

    def _d1(self, g: np.ndarray) -> np.ndarray:  # pragma: no cover - abstract
        raise NotImplementedError

    def _d2(self, g: np.ndarray) -> np.ndarray:  # pragma: no cover - abstract
        raise NotImplementedError


class QuadraticPotential(SitePotential):
    name = "quadratic"
    has_analytic_d1 = True
    has_analytic_d2 = True

    def __init__(self, kappa: Sequence[float], **kwargs):
        super().__init__(**kwargs)
        self.kappa = np.asarray(kappa, dtype=float)

    def params(self):
        return {"kappa": tuple(float(k) for k in self.kappa)}

    def _energy(self, g):
        r = g - DIRECTIONS
        return 0.5 * np.einsum("j,...jc,...jc->...", self.kappa, r, r)

    def _d1(self, g):
        return self.kappa[:, None] * (g - DIRECTIONS)

    def _d2(self, g):
        out = np.zeros(g.shape[:-2] + (6, 6, 2, 2))
        for j in range(6):
            out[..., j, j, :, :] = self.kappa[j] * np.eye(2)
        return out


def _bond_lengths(g: np.ndarray) -> np.ndarray:
    r = np.linalg.norm(g, axis=-1)
    if np.any(r < MIN_BOND):
        raise DegenerateBond(f"bond of length {float(r.min()):.3e} below {MIN_BOND:g}")
    return r


class MorsePairPotential(SitePotential):
    """``V(g) = 1/2 sum_j phi(|g_j|) - 3 phi(1)`` with a Morse pair ``phi``."""

    name = "morse"
    has_analytic_d1 = True
    has_analytic_d2 = True

    def __init__(self, depth: float = 1.0, alpha: float = 4.0, r0: float = 1.0, **kwargs):
        super().__init__(**kwargs)
        self.depth, self.alpha, self.r0 = float(depth), float(alpha), float(r0)

    def params(self):
        return {"depth": self.depth, "alpha": self.alpha, "r0": self.r0}

    def phi(self, r):
        e = np.exp(-self.alpha * (r - self.r0))
        return self.depth * ((1.0 - e) ** 2 - 1.0)

    def dphi(self, r):
        e = np.exp(-self.alpha * (r - self.r0))
        return 2.0 * self.depth * self.alpha * (e - e * e)

    def ddphi(self, r):
        e = np.exp(-self.alpha * (r - self.r0))
        return 2.0 * self.depth * self.alpha**2 * e * (2.0 * e - 1.0)

    def _energy(self, g):
        r = np.linalg.norm(g, axis=-1)
        return 0.5 * self.phi(r).sum(axis=-1) - 3.0 * self.phi(1.0)

    def _d1(self, g):
        r = _bond_lengths(g)
        return (0.5 * self.dphi(r) / r)[..., None] * g

    def _d2(self, g):
        r = _bond_lengths(g)
        n = g / r[..., None]
        nn = n[..., :, None] * n[..., None, :]
        tangential = (self.dphi(r) / r)[..., None, None] * (np.eye(2) - nn)
        block = 0.5 * (self.ddphi(r)[..., None, None] * nn + tangential)
        out = np.zeros(g.shape[:-2] + (6, 6, 2, 2))
        for j in range(6):
            out[..., j, j, :, :] = block[..., j, :, :]
        return out


class BondAnglePotential(SitePotential):
    """``V(g) = kappa sum_j (cos theta_j - 1/2)^2``.

    ``theta_j`` is the angle between ``g_j`` and ``g_{j+1}``.
    """

    name = "bond_angle"
    has_analytic_d1 = True

    def __init__(self, kappa: float = 1.0, **kwargs):
        super().__init__(**kwargs)
        self.kappa = float(kappa)

    def params(self):
        return {"kappa": self.kappa}

    def _cosines(self, g):
        r = _bond_lengths(g)
        nxt = np.roll(g, -1, axis=-2)
        rn = np.roll(r, -1, axis=-1)
        return np.einsum("...jc,...jc->...j", g, nxt) / (r * rn), r, nxt, rn

    def _energy(self, g):
        c, *_ = self._cosines(g)
        return self.kappa * ((c - 0.5) ** 2).sum(axis=-1)

    def _d1(self, g):
        c, r, nxt, rn = self._cosines(g)
        w = (2.0 * self.kappa * (c - 0.5))[..., None]
        # dc_j/dg_j and dc_j/dg_{j+1}
        d_first = nxt / (r * rn)[..., None] - c[..., None] * g / (r**2)[..., None]
        d_second = g / (r * rn)[..., None] - c[..., None] * nxt / (rn**2)[..., None]
        return w * d_first + np.roll(w * d_second, 1, axis=-2)


class ZeroPotential(SitePotential):
    name = "zero"
    has_analytic_d1 = True
    has_analytic_d2 = True

    def _energy(self, g):
        return np.zeros(g.shape[:-2])

    def _d1(self, g):
        return np.zeros_like(g)

    def _d2(self, g):
        return np.zeros(g.shape[:-2] + (6, 6, 2, 2))


def make_quadratic(kappa: Sequence[float], **kwargs) -> QuadraticPotential:
    kappa = np.asarray(kappa, dtype=float)
    if kappa.shape != (6,):
        raise ValueError(f"kappa needs six entries, got {kappa.shape}")
    if np.any(kappa < 0):
        raise ValueError(f"kappa must be non-negative, got {kappa.tolist()}")
    if not np.array_equal(kappa[:3], kappa[3:]):
        raise SymmetryViolation(f"kappa_(j+3) must equal kappa_j, got {kappa.tolist()}")
    return QuadraticPotential(kappa, **kwargs)


def make_morse_pair(depth: float = 1.0, alpha: float = 4.0, r0: float = 1.0, **kwargs):
    for name, v in (("depth", depth), ("alpha", alpha), ("r0", r0)):
        if not np.isfinite(v):
            raise ValueError(f"{name} must be finite, got {v}")
    return MorsePairPotential(depth, alpha, r0, **kwargs)


def make_bond_angle(kappa: float = 1.0, **kwargs) -> BondAnglePotential:
    if not np.isfinite(kappa):
        raise ValueError(f"kappa must be finite, got {kappa}")
    return BondAnglePotential(kappa, **kwargs)


def make_zero(**kwargs) -> ZeroPotential:
    return ZeroPotential(**kwargs)


_FACTORIES = {
    "quadratic": make_quadratic,
    "morse": make_morse_pair,
    "bond_angle": make_bond_angle,
    "zero": make_zero,
}


def make_potential(kind: str, **params) -> SitePotential:
    try:
        factory = _FACTORIES[kind]
    except KeyError:
        raise ValueError(f"unknown potential {kind!r}; choose from {sorted(_FACTORIES)}") from None
    return factory(**params)


# ---------------------------------------------------------------------------
# Cauchy-Born


def homogeneous_gradient(F: np.ndarray) -> np.ndarray:
    """``F a`` with shape (..., 6, 2) for F of shape (..., 2, 2)."""
    return np.einsum("...ab,jb->...ja", np.asarray(F, dtype=float), DIRECTIONS)


def stress_from_slots(dV: np.ndarray) -> np.ndarray:
    """``(1/Omega0) sum_j dV_j (x) a_j``."""
    return np.einsum("...ja,jb->...ab", dV, DIRECTIONS) / OMEGA0


def cb_density(V: SitePotential, F: np.ndarray) -> np.ndarray:
    """``W(F) = V(F a) / Omega0``."""
    return V.energy(homogeneous_gradient(F)) / OMEGA0


def cb_stress(V: SitePotential, F: np.ndarray) -> np.ndarray:
    """``dW(F) = (1/Omega0) sum_j dV_j(F a) (x) a_j``."""
    return stress_from_slots(V.d1(homogeneous_gradient(F)))


# ---------------------------------------------------------------------------
# sampled bounds and advisory checks


@dataclass
class PotentialBounds:
    M2_est: float
    M3_est: float
    sample_set: str
    n_samples: int = 0

    def to_dict(self) -> Dict[str, object]:
        return {
            "M2_est": self.M2_est,
            "M3_est": self.M3_est,
            "sample_set": self.sample_set,
            "n_samples": self.n_samples,
        }


def _spectral(m: np.ndarray) -> np.ndarray:
    return np.linalg.norm(m, ord=2, axis=(-2, -1))


_ANGLES = np.linspace(0.0, np.pi, 32, endpoint=False)
_UNIT = np.stack([np.cos(_ANGLES), np.sin(_ANGLES)], axis=-1)


def estimate_bounds(
    V: SitePotential, samples: np.ndarray, sample_set: str = "sampled states"
) -> PotentialBounds:
    """Maxima over ``samples`` (shape (n, 6, 2)) of ``sum_ij |d_ij V|`` and ``sum_ijk |d_ijk V|``.

    Third derivatives are central differences of ``d2``; trilinear norms are
    maximised over a fixed set of unit directions in the third slot.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.ndim == 2:
        samples = samples[None]
    if samples.shape[0] == 0:
        raise ValueError("estimate_bounds needs at least one sampled state")
    H = V.d2(samples)
    m2 = _spectral(H).sum(axis=(-1, -2))
    h = V.fd_step
    m3 = np.zeros(len(samples))
    for k in range(6):
        slices = []
        for c in range(2):
            e = np.zeros((6, 2))
            e[k, c] = h
            slices.append((V.d2(samples + e) - V.d2(samples - e)) / (2.0 * h))
        d3k = np.stack(slices, axis=-1)
        # d3k[n, i, j, a, b, c] -> contract the third slot with unit directions
        along = np.einsum("nijabc,tc->ntijab", d3k, _UNIT)
        m3 += _spectral(along).sum(axis=(-1, -2)).max(axis=1)
    bounds = PotentialBounds(float(m2.max()), float(m3.max()), sample_set, len(samples))
    logger.debug("bounds for %r over %d samples: %s", V, len(samples), bounds)
    return bounds


def sample_states(
    rng: np.random.Generator, n: int, radius: float = 0.2, include_identity: bool = True
) -> np.ndarray:
    """Homogeneous neighbourhoods ``F a`` for random ``|F - I| <= radius`` (Frobenius)."""
    Fs = [np.eye(2)] if include_identity else []
    while len(Fs) < n:
        P = rng.standard_normal((2, 2))
        P *= radius * rng.uniform() / np.linalg.norm(P)
        Fs.append(np.eye(2) + P)
    return homogeneous_gradient(np.array(Fs[:n]))


def check_point_symmetry(
    V: SitePotential, samples: int = 100, rng: Optional[np.random.Generator] = None, scale=0.1
) -> float:
    """Largest ``|V(flip g) - V(g)|`` on random ``g``; raises if a symmetric ``V`` breaks it."""
    rng = rng or np.random.default_rng(0)
    g = DIRECTIONS + scale * rng.standard_normal((samples, 6, 2))
    e, ef = V.energy(g), V.energy(flip(g))
    dev = float(np.max(np.abs(e - ef) / (1.0 + np.abs(e))))
    if V.point_symmetric and dev > 1e-10:
        raise SymmetryViolation(f"{V!r} is not point symmetric (deviation {dev:.3e})")
    return dev


@dataclass
class LipschitzCheck:
    bound: float
    worst_ratio: float
    violations: List[Tuple[int, float]] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations


def check_lipschitz(
    V: SitePotential,
    bounds: PotentialBounds,
    pairs: int = 100,
    rng: Optional[np.random.Generator] = None,
    radius: float = 0.2,
) -> LipschitzCheck:
    """Advisory check of ``sum_i |dV_i(g) - dV_i(h)| <= 1.05 M2 max_j |g_j - h_j|``."""
    rng = rng or np.random.default_rng(0)
    g = sample_states(rng, pairs, radius, include_identity=False)
    h = sample_states(rng, pairs, radius, include_identity=False)
    num = np.linalg.norm(V.d1(g) - V.d1(h), axis=-1).sum(axis=-1)
    den = np.linalg.norm(g - h, axis=-1).max(axis=-1)
    ratio = num / np.where(den > 0, den, np.inf)
    limit = LIPSCHITZ_INFLATION * bounds.M2_est
    bad = [(int(i), float(ratio[i])) for i in np.flatnonzero(ratio > limit)]
    if bad:
        logger.warning(
            "sampled Lipschitz bound exceeded on %d of %d pairs (worst %.3e > %.3e)",
            len(bad),
            pairs,
            float(ratio.max()),
            limit,
        )
    return LipschitzCheck(limit, float(ratio.max()), bad)
