"""Tests de lectura/escritura de CSV y de la capa de persistencia"""

import numpy as np
import pandas as pd
import pytest

from qdot_spinpump.errors import ConfigError
from qdot_spinpump.models import SpectrumData, SweepResult2D
from qdot_spinpump.spectrum_io import (
    ColumnMapper,
    format_spectrum,
    format_sweep,
    format_table,
    normalize_header,
    read_metadata,
    read_profile,
    read_spectrum,
    read_table,
)
from qdot_spinpump.storage import OutputStore, atomic_write_text
from qdot_spinpump.units import nm_to_uev


class TestHeaders:

    def test_normalize_header(self):
        assert normalize_header("  Energía   (μeV) ") == "energia (μev)"
        assert normalize_header(None) == ""

    def test_column_mapper_by_keyword(self):
        mapper = ColumnMapper()
        assert mapper.map_headers(["Intensidad", "Energia (ueV)"])
        assert mapper.abscissa_col == "Energia (ueV)"
        assert mapper.counts_col == "Intensidad"

    def test_column_mapper_fallback(self):
        mapper = ColumnMapper()
        assert mapper.map_headers(["x", "y", "z"])
        assert (mapper.abscissa_col, mapper.counts_col) == ("x", "y")

    def test_metadata_lines(self):
        metadata = read_metadata("# B=5\n# Pol = H\nabscissa,counts\n1,2\n")
        assert metadata == {"b": "5", "pol": "H"}


class TestReadSpectrum:

    def test_metadata_applied(self, tmp_path):
        path = tmp_path / "s.csv"
        path.write_text("# B=2.5\n# pol=v\n# P=10\nabscissa,counts\n1.0,5\n2.0,7\n3.0,6\n", encoding="utf-8")
        spectrum = read_spectrum(path)
        assert spectrum.b_field == 2.5
        assert spectrum.polarization == "V"
        assert spectrum.power == 10.0
        assert np.array_equal(spectrum.counts, [5.0, 7.0, 6.0])

    def test_wavelength_converted_and_reordered(self, tmp_path):
        path = tmp_path / "nm.csv"
        path.write_text(
            "# abscissa_unit=nm\nwavelength,counts\n889.0,1\n890.0,2\n891.0,3\n", encoding="utf-8"
        )
        spectrum = read_spectrum(path)
        assert np.all(np.diff(spectrum.abscissa) > 0)
        assert spectrum.abscissa[0] == pytest.approx(nm_to_uev(891.0))
        assert np.array_equal(spectrum.counts, [3.0, 2.0, 1.0])

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            read_spectrum(tmp_path / "nada.csv")

    def test_unknown_unit(self, tmp_path):
        path = tmp_path / "s.csv"
        path.write_text("# abscissa_unit=cm-1\nabscissa,counts\n1,2\n2,3\n", encoding="utf-8")
        with pytest.raises(ConfigError):
            read_spectrum(path)

    def test_negative_counts_rejected(self, tmp_path):
        path = tmp_path / "s.csv"
        path.write_text("abscissa,counts\n1,2\n2,-3\n", encoding="utf-8")
        with pytest.raises(ConfigError):
            read_spectrum(path)

    def test_written_spectrum_reads_back(self, tmp_path):
        x = np.linspace(100.0, 200.0, 11)
        original = SpectrumData(x, np.sqrt(x), polarization="H", b_field=3.0, power=1.5)
        path = tmp_path / "s.csv"
        path.write_text(format_spectrum(original), encoding="utf-8")
        spectrum = read_spectrum(path)
        assert np.allclose(spectrum.abscissa, original.abscissa, rtol=1e-14, atol=0)
        assert np.allclose(spectrum.counts, original.counts, rtol=1e-14, atol=0)
        assert (spectrum.polarization, spectrum.b_field, spectrum.power) == ("H", 3.0, 1.5)


class TestTables:

    def test_sweep_long_format(self):
        sweep = SweepResult2D(
            g_h=[0.3, 0.4], detunings=[-1.0, 0.0, 1.0],
            intensities=np.arange(6.0).reshape(2, 3), g_e=0.34, b_tesla=5.0,
        )
        text = format_sweep(sweep)
        assert "# g_e=0.34\n" in text
        lines = [line for line in text.splitlines() if not line.startswith("#")]
        assert lines[0] == "g_h,detuning_ghz,intensity"
        assert len(lines) == 1 + 6
        assert lines[4].startswith("0.4,-1.0,3.0")

    def test_read_table(self, tmp_path):
        path = tmp_path / "p.csv"
        path.write_text(format_table(pd.DataFrame({"power": [1.0, 2.0], "intensity": [3.0, 4.0]})))
        x, y = read_table(path)
        assert np.array_equal(x, [1.0, 2.0])
        assert np.array_equal(y, [3.0, 4.0])

    def test_read_table_single_column(self, tmp_path):
        path = tmp_path / "p.csv"
        path.write_text("power\n1\n2\n", encoding="utf-8")
        with pytest.raises(ConfigError):
            read_table(path)

    def test_read_table_non_numeric(self, tmp_path):
        path = tmp_path / "p.csv"
        path.write_text("power,intensity\n1,alto\n2,bajo\n", encoding="utf-8")
        with pytest.raises(ConfigError):
            read_table(path)

    def test_profile_requires_increasing_detunings(self, tmp_path):
        path = tmp_path / "r.csv"
        path.write_text("detuning_ghz,intensity\n0,1\n1,2\n1,3\n", encoding="utf-8")
        with pytest.raises(ConfigError):
            read_profile(path)

    def test_profile_reads(self, tmp_path):
        path = tmp_path / "r.csv"
        path.write_text("# omega_ghz=1.0\ndetuning_ghz,intensity\n-1,0.1\n0,0.2\n1,0.1\n", encoding="utf-8")
        profile = read_profile(path)
        assert len(profile) == 3
        assert profile.peak_detuning == 0.0


class TestStorage:

    def test_atomic_write_leaves_no_temporaries(self, tmp_path):
        target = tmp_path / "sub" / "a.txt"
        atomic_write_text(target, "hola\n")
        atomic_write_text(target, "chau\n")
        assert target.read_text() == "chau\n"
        assert [p.name for p in target.parent.iterdir()] == ["a.txt"]

    def test_output_store_tracks_files(self, tmp_path):
        store = OutputStore(tmp_path / "out")
        store.write_text("x.csv", "a\n")
        tmp = store.reserve("fig.svg")
        tmp.write_text("<svg/>")
        store.commit(tmp, "fig.svg")
        assert store.written == [tmp_path / "out" / "x.csv", tmp_path / "out" / "fig.svg"]
        assert sorted(p.name for p in (tmp_path / "out").iterdir()) == ["fig.svg", "x.csv"]
