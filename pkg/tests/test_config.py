"""
Tests for experiment configuration
==================================
"""

from pathlib import Path

import pytest

from grac.config import ExperimentConfig, GeometryConfig, load_config, parse_scales
from grac.errors import ConfigError
from grac.partition import Complement, Hexagon

EXPERIMENTS = Path(__file__).resolve().parents[1] / "configs" / "experiments"


def _write(tmp_path, text):
    path = tmp_path / "cfg.yaml"
    path.write_text(text, encoding="utf-8")
    return path


class TestLoadConfig:
    def test_defaults(self):
        cfg = load_config(None)
        assert cfg.potential.kind == "morse"
        assert cfg.parameters.policy == "general"
        assert cfg.convergence.scales == [16, 32, 64, 128]
        assert cfg.patch_test.ghost_tol == 1e-12

    def test_yaml_values(self, tmp_path):
        path = _write(
            tmp_path,
            "seed: 7\n"
            "geometry: {kind: catalog, case: wedge_convex}\n"
            "potential: {kind: quadratic, params: {kappa: [1, 1, 1, 1, 1, 1]}}\n"
            "convergence: {scales: [64, 16, 32], p: inf}\n",
        )
        cfg = load_config(path)
        assert cfg.seed == 7
        assert cfg.convergence.scales == [16, 32, 64]
        assert cfg.convergence.p_value == float("inf")
        assert cfg.potential.build().name == "quadratic"

    def test_unknown_key(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(_write(tmp_path, "windw: {radius: 10}\n"))

    def test_bad_yaml(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(_write(tmp_path, "seed: [1, 2\n"))

    def test_not_a_mapping(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(_write(tmp_path, "- 1\n- 2\n"))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "absent.yaml")

    def test_too_few_scales(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(_write(tmp_path, "convergence: {scales: [16, 32]}\n"))

    def test_unknown_catalog_case(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(_write(tmp_path, "patch_test: {geometries: [octagon]}\n"))

    @pytest.mark.parametrize("key", ["family: random", "scale: 0.1", "support: 3"])
    def test_field_accepts_only_smooth_family_keys(self, tmp_path, key):
        with pytest.raises(ConfigError):
            load_config(_write(tmp_path, f"field: {{{key}}}\n"))

    def test_field_values(self, tmp_path):
        cfg = load_config(_write(tmp_path, "field: {eps: 0.1, hex_fraction: 0.25}\n"))
        assert cfg.field.eps == 0.1
        assert cfg.field.hex_fraction == 0.25

    @pytest.mark.parametrize("path", sorted(EXPERIMENTS.glob("*.yaml")), ids=lambda p: p.stem)
    def test_shipped_experiments_load(self, path):
        assert isinstance(load_config(path), ExperimentConfig)


class TestOverrides:
    def test_overrides(self, tmp_path):
        cfg = ExperimentConfig().with_overrides(
            seed=3, qce=True, scales=[8, 16, 32], out=tmp_path
        )
        assert cfg.seed == 3
        assert cfg.parameters.policy == "qce"
        assert cfg.convergence.scales == [8, 16, 32]
        assert cfg.output.dir == tmp_path

    def test_bad_scale_override(self):
        with pytest.raises(ConfigError):
            ExperimentConfig().with_overrides(scales=[8, 16])

    def test_parse_scales(self):
        assert parse_scales("16, 32,64") == [16, 32, 64]
        with pytest.raises(ConfigError):
            parse_scales("16,x")

    def test_yaml_dump_roundtrip(self):
        cfg = ExperimentConfig(seed=5)
        assert "seed: 5" in cfg.to_yaml()


class TestGeometryConfig:
    def test_hexagon_complement(self):
        g = GeometryConfig(kind="hexagon", radius=2, complement=True).build()
        assert isinstance(g, Complement)
        assert isinstance(g.part, Hexagon)

    def test_catalog_needs_case(self):
        with pytest.raises(ConfigError):
            GeometryConfig(kind="catalog").build()

    def test_polygon_needs_three_vertices(self):
        with pytest.raises(ConfigError):
            GeometryConfig(kind="polygon", vertices=[(0, 0), (1, 0)]).build()
