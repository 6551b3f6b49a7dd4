"""Tests de la configuración por archivo y overrides"""

from dataclasses import fields
from pathlib import Path

import pytest

from qdot_spinpump.config import SECTIONS, Config, RunConfig, describe_keys
from qdot_spinpump.errors import ConfigError


def write_config(tmp_path: Path, text: str) -> Path:
    path = tmp_path / "corrida.cfg"
    path.write_text(text, encoding="utf-8")
    return path


class TestDefaults:

    def test_defaults_are_valid(self):
        assert RunConfig().validate() == []

    def test_class_constants_valid(self):
        assert Config.validate() == []

    def test_canonical_parameters(self):
        config = RunConfig()
        assert config.system.delta_e_ghz == 23.8
        assert config.system.omega_ghz == 1.0
        assert config.system.gamma_ghz == 0.25
        assert config.system.t1_ns is None
        assert (config.grid.start_ghz, config.grid.stop_ghz, config.grid.count) == (-3.0, 3.0, 601)
        assert config.gfactor.g_h_count == 41

    def test_load_without_path(self):
        assert RunConfig.load() == RunConfig()


class TestConfigFile:

    def test_dump_round_trip(self, tmp_path):
        config = RunConfig().with_overrides({"system.t1_ns": 250.0, "grid.count": 11, "output.plot": True})
        reloaded = RunConfig.from_file(write_config(tmp_path, config.dump()))
        assert reloaded == config

    def test_dump_lists_every_key(self):
        dump = RunConfig().dump()
        for name, section in SECTIONS.items():
            for f in fields(section):
                assert f"{name}.{f.name}=" in dump

    def test_partial_file_keeps_defaults(self, tmp_path):
        path = write_config(tmp_path, "# corrida corta\nsystem.omega_ghz=0.5\ngrid.count=21\n")
        config = RunConfig.from_file(path)
        assert config.system.omega_ghz == 0.5
        assert config.grid.count == 21
        assert config.system.gamma_ghz == 0.25

    def test_unknown_key_rejected(self, tmp_path):
        path = write_config(tmp_path, "system.omega=1.0\nfoo.bar=2\n")
        with pytest.raises(ConfigError) as excinfo:
            RunConfig.from_file(path)
        assert len(excinfo.value.errors) == 2
        assert all("desconocida" in e for e in excinfo.value.errors)

    def test_unparseable_value_rejected(self, tmp_path):
        path = write_config(tmp_path, "grid.count=muchos\n")
        with pytest.raises(ConfigError):
            RunConfig.from_file(path)

    def test_out_of_range_value_rejected(self, tmp_path):
        path = write_config(tmp_path, "system.gamma_ghz=0\n")
        with pytest.raises(ConfigError) as excinfo:
            RunConfig.from_file(path)
        assert any("gamma_ghz" in e for e in excinfo.value.errors)

    def test_non_finite_float_rejected(self, tmp_path):
        with pytest.raises(ConfigError):
            RunConfig.from_file(write_config(tmp_path, "system.omega_ghz=nan\n"))

    def test_invalid_choice_rejected(self, tmp_path):
        with pytest.raises(ConfigError):
            RunConfig.from_file(write_config(tmp_path, "synth.noise=gauss\n"))

    def test_boolean_values(self, tmp_path):
        config = RunConfig.from_file(write_config(tmp_path, "output.plot=yes\nt1.include_inverse_gamma=false\n"))
        assert config.output.plot is True
        assert config.t1.include_inverse_gamma is False

    def test_optional_value_cleared(self, tmp_path):
        config = RunConfig.from_file(write_config(tmp_path, "t1.delta_h_ghz=none\nsystem.t1_ns=inf\n"))
        assert config.t1.delta_h_ghz is None
        assert config.system.t1_ns is None

    def test_empty_delta_h_falls_back_to_system(self, tmp_path):
        config = RunConfig.from_file(write_config(tmp_path, "t1.delta_h_ghz=\n"))
        assert config.t1.delta_h_ghz is None
        assert RunConfig.from_file(write_config(tmp_path, config.dump())) == config

    def test_required_value_cannot_be_cleared(self, tmp_path):
        with pytest.raises(ConfigError):
            RunConfig.from_file(write_config(tmp_path, "system.omega_ghz=none\n"))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            RunConfig.from_file(tmp_path / "no_existe.cfg")


class TestOverrides:

    def test_none_values_ignored(self):
        config = RunConfig().with_overrides({"system.omega_ghz": None, "grid.count": 31})
        assert config.system.omega_ghz == 1.0
        assert config.grid.count == 31

    def test_empty_g_h_grid_rejected(self):
        with pytest.raises(ConfigError):
            RunConfig().with_overrides({"gfactor.g_h_count": 0})

    def test_inverted_grid_rejected(self):
        with pytest.raises(ConfigError):
            RunConfig().with_overrides({"grid.start_ghz": 3.0, "grid.stop_ghz": -3.0})

    def test_overrides_do_not_mutate(self):
        base = RunConfig()
        base.with_overrides({"system.omega_ghz": 2.0})
        assert base.system.omega_ghz == 1.0


class TestSections:

    def test_t1_values_parsed(self):
        config = RunConfig().with_overrides({"t1.values_ns": "inf, 1000, 4"})
        assert config.t1.parsed_values() == [None, 1000.0, 4.0]

    def test_t1_negative_value_rejected(self):
        with pytest.raises(ConfigError):
            RunConfig().with_overrides({"t1.values_ns": "inf,-5"})

    def test_t1_garbage_rejected(self):
        with pytest.raises(ConfigError):
            RunConfig().with_overrides({"t1.values_ns": "rápido"})

    def test_synth_field_list(self):
        assert RunConfig().synth.b_values() == [0.0, 1.0, 2.0, 3.0, 4.0, 5.0]

    def test_invalid_log_level(self):
        with pytest.raises(ConfigError):
            RunConfig().with_overrides({"log.level": "VERBOSE"})

    def test_optional_keys_declared(self):
        optional = {
            f"{name}.{f.name}"
            for name, section in SECTIONS.items()
            for f in fields(section)
            if f.metadata["optional"]
        }
        assert optional == {"system.t1_ns", "t1.delta_h_ghz"}

    def test_workers_must_be_positive(self):
        with pytest.raises(ConfigError):
            RunConfig().with_overrides({"output.workers": 0})


class TestDescribeKeys:

    def test_lists_all_keys_of_sections(self):
        text = describe_keys("system", "grid")
        for name in ("system", "grid"):
            for f in fields(SECTIONS[name]):
                assert f"{name}.{f.name}" in text
        assert "gfactor." not in text

    def test_log_path(self, tmp_path):
        assert Config.get_log_path("") is None
        assert Config.get_log_path(str(tmp_path / "a.log")) == tmp_path / "a.log"
        assert Config.get_log_path("logs/run.log") == Config.BASE_DIR / "logs/run.log"
