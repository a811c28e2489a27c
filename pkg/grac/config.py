from __future__ import annotations

from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .errors import ConfigError
from .lattice import Box
from .partition import (
    Complement,
    Geometry,
    HalfPlane,
    Hexagon,
    Polygon,
    SiteSet,
    corner_catalog,
)
from .potentials import SitePotential, make_potential


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class WindowConfig(_Section):
    radius: int = Field(10, ge=4)

    def box(self) -> Box:
        return Box.centred(self.radius)


class GeometryConfig(_Section):
    """Atomistic region: a catalog case or one of the primitive shapes."""

    kind: Literal["catalog", "half_plane", "hexagon", "polygon", "sites"] = "hexagon"
    case: Optional[str] = None
    radius: int = Field(3, ge=0)
    centre: Tuple[int, int] = (0, 0)
    normal: Tuple[int, int] = (0, 1)
    level: int = 0
    vertices: List[Tuple[int, int]] = Field(default_factory=list)
    sites: List[Tuple[int, int]] = Field(default_factory=list)
    complement: bool = False

    @field_validator("case")
    @classmethod
    def _known_case(cls, v):
        if v is not None and v not in corner_catalog():
            raise ValueError(f"unknown catalog case {v!r}; choose from {sorted(corner_catalog())}")
        return v

    def build(self) -> Geometry:
        if self.kind == "catalog":
            if self.case is None:
                raise ConfigError("geometry.kind 'catalog' needs geometry.case")
            geometry = corner_catalog()[self.case].geometry
        elif self.kind == "half_plane":
            geometry = HalfPlane(self.normal[0], self.normal[1], self.level)
        elif self.kind == "hexagon":
            geometry = Hexagon(self.radius, self.centre)
        elif self.kind == "polygon":
            if len(self.vertices) < 3:
                raise ConfigError("geometry.vertices needs at least three lattice sites")
            geometry = Polygon.from_sites(self.vertices)
        else:
            geometry = SiteSet(self.sites)
        return Complement(geometry) if self.complement else geometry


class PotentialConfig(_Section):
    kind: Literal["quadratic", "morse", "bond_angle", "zero"] = "morse"
    params: Dict[str, Any] = Field(default_factory=dict)
    mode: Literal["analytic", "finite_difference"] = "analytic"

    def build(self) -> SitePotential:
        params = dict(self.params)
        if self.kind == "quadratic":
            params.setdefault("kappa", [1.0] * 6)
        try:
            return make_potential(self.kind, mode=self.mode, **params)
        except TypeError as exc:
            raise ConfigError(f"bad parameters for potential {self.kind!r}: {exc}") from exc


class FlatValues(_Section):
    c2: float = 2.0 / 3.0
    c3: float = 2.0 / 3.0
    c5: float = 2.0 / 3.0
    c6: float = 2.0 / 3.0
    d: float = 2.0 / 3.0


class ParametersConfig(_Section):
    policy: Literal["general", "flat", "qce", "explicit"] = "general"
    interface: float = 2.0 / 3.0
    flat: FlatValues = Field(default_factory=FlatValues)
    csv: Optional[Path] = None


class FieldConfig(_Section):
    """Parameters of the smooth bump family ``u_R`` used by the rate study."""

    eps: float = Field(0.05, gt=0)
    hex_fraction: float = Field(0.5, gt=0, lt=1)
    margin: int = Field(4, ge=4)


class PatchTestConfig(_Section):
    n_states: int = Field(20, ge=1)
    max_strain: float = Field(0.2, gt=0)
    ghost_tol: float = 1e-12
    energy_tol: float = 1e-13
    geometries: List[str] = Field(default_factory=list)
    potentials: List[PotentialConfig] = Field(default_factory=list)

    @field_validator("geometries")
    @classmethod
    def _known_cases(cls, v):
        unknown = [g for g in v if g not in corner_catalog()]
        if unknown:
            raise ValueError(f"unknown catalog cases {unknown}")
        return v


class ConvergenceConfig(_Section):
    scales: List[int] = Field(default_factory=lambda: [16, 32, 64, 128])
    p: Union[float, Literal["inf"]] = 2.0
    continuum_slope: float = -2.0
    interface_slope: float = -1.0
    c1_slope: float = -1.0
    slope_tol: float = 0.2
    truncation_rtol: float = Field(0.01, gt=0)
    compare_c1: bool = True

    @field_validator("scales")
    @classmethod
    def _enough_scales(cls, v):
        if len(v) < 3:
            raise ValueError(f"at least three scales are needed for a rate fit, got {v}")
        if any(r <= 0 for r in v):
            raise ValueError(f"scales must be positive, got {v}")
        return sorted(v)

    @property
    def p_value(self) -> float:
        return float("inf") if self.p == "inf" else float(self.p)


class OutputConfig(_Section):
    dir: Path = Path("outputs")


class ExperimentConfig(_Section):
    name: str = "experiment"
    seed: int = 0
    window: WindowConfig = Field(default_factory=WindowConfig)
    geometry: GeometryConfig = Field(default_factory=GeometryConfig)
    potential: PotentialConfig = Field(default_factory=PotentialConfig)
    parameters: ParametersConfig = Field(default_factory=ParametersConfig)
    field: FieldConfig = Field(default_factory=FieldConfig)
    patch_test: PatchTestConfig = Field(default_factory=PatchTestConfig)
    convergence: ConvergenceConfig = Field(default_factory=ConvergenceConfig)
    output: OutputConfig = Field(default_factory=OutputConfig)

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.model_dump(mode="json"), sort_keys=False)

    def with_overrides(
        self,
        seed: Optional[int] = None,
        qce: bool = False,
        scales: Optional[List[int]] = None,
        out: Optional[Path] = None,
    ) -> "ExperimentConfig":
        data = self.model_dump()
        if seed is not None:
            data["seed"] = seed
        if qce:
            data["parameters"]["policy"] = "qce"
        if scales is not None:
            data["convergence"]["scales"] = scales
        if out is not None:
            data["output"]["dir"] = out
        try:
            return ExperimentConfig.model_validate(data)
        except ValidationError as exc:
            raise ConfigError(str(exc)) from exc


def parse_scales(text: str) -> List[int]:
    try:
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError as exc:
        raise ConfigError(f"--scales expects comma separated integers, got {text!r}") from exc


def load_config(path: Optional[Path]) -> ExperimentConfig:
    """Read and validate a YAML experiment file; ``None`` gives the defaults."""
    if path is None:
        return ExperimentConfig()
    try:
        data = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
    except FileNotFoundError as exc:
        raise ConfigError(f"config file {path} not found") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"config file {path} is not valid YAML: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must hold a mapping at the top level")
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(f"invalid config {path}:\n{exc}") from exc
