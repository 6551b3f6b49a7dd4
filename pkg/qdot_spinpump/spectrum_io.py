"""
Lectura y escritura de archivos CSV: espectros, perfiles de resonancia,
barridos 2D en formato largo y tablas de dos columnas.

Formato: separador ',', decimal '.', fila de encabezado y líneas de
metadata '# clave=valor' antes del encabezado.
"""

import io
import unicodedata
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd

from qdot_spinpump.errors import ConfigError
from qdot_spinpump.logger import get_logger
from qdot_spinpump.models import ResonanceProfile, SpectrumData, SweepResult2D
from qdot_spinpump.units import nm_to_uev

logger = get_logger("spectrum_io")

ABSCISSA_KEYWORDS = ["abscissa", "energy", "energia", "wavelength", "lambda", "detuning"]
COUNTS_KEYWORDS = ["counts", "cuentas", "intensity", "intensidad", "signal"]


def normalize_header(text: Optional[str]) -> str:
    """Minúsculas, sin tildes y con espacios colapsados"""
    if not text:
        return ""
    normalized = " ".join(str(text).strip().split()).lower()
    normalized = unicodedata.normalize("NFD", normalized)
    return "".join(ch for ch in normalized if unicodedata.category(ch) != "Mn")


def fuzzy_match_column(header: str, keywords: list[str]) -> bool:
    header_norm = normalize_header(header)
    return any(normalize_header(keyword) in header_norm for keyword in keywords)


class ColumnMapper:
    """Mapea las columnas de abscisa y cuentas por el texto del encabezado"""

    def __init__(self):
        self.abscissa_col: Optional[str] = None
        self.counts_col: Optional[str] = None

    def map_headers(self, headers: list[str]) -> bool:
        """
        Returns:
            True si se encontraron ambas columnas
        """
        for header in headers:
            if fuzzy_match_column(header, ABSCISSA_KEYWORDS) and self.abscissa_col is None:
                self.abscissa_col = header
                logger.debug(f"Columna 'abscisa' mapeada a '{header}'")
            elif fuzzy_match_column(header, COUNTS_KEYWORDS) and self.counts_col is None:
                self.counts_col = header
                logger.debug(f"Columna 'cuentas' mapeada a '{header}'")

        # Sin encabezados reconocibles: dos primeras columnas
        if self.abscissa_col is None and self.counts_col is None and len(headers) >= 2:
            logger.warning(f"Encabezados no reconocidos {headers}; se usan las dos primeras columnas")
            self.abscissa_col, self.counts_col = headers[0], headers[1]

        return self.abscissa_col is not None and self.counts_col is not None


def read_metadata(text: str) -> dict[str, str]:
    """Pares '# clave=valor' del archivo (claves normalizadas)"""
    metadata = {}
    for line in text.splitlines():
        stripped = line.strip()
        if not stripped.startswith("#"):
            continue
        key, sep, value = stripped.lstrip("#").partition("=")
        if sep:
            metadata[normalize_header(key)] = value.strip()
    return metadata


def _read_text(path: Path) -> str:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"Archivo de entrada no encontrado: {path}")
    return path.read_text(encoding="utf-8")


def _read_frame(text: str, path: Path) -> pd.DataFrame:
    try:
        frame = pd.read_csv(io.StringIO(text), comment="#", skipinitialspace=True)
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise ConfigError(f"{path}: CSV inválido ({e})")
    return frame


def _metadata_float(metadata: dict[str, str], key: str, path: Path) -> Optional[float]:
    if key not in metadata or metadata[key] == "":
        return None
    try:
        return float(metadata[key])
    except ValueError:
        raise ConfigError(f"{path}: metadata '{key}' inválida: {metadata[key]}")


def read_spectrum(path: Path) -> SpectrumData:
    """
    Lee un espectro. Con `abscissa_unit=nm` la longitud de onda se convierte
    a energía (μeV) y los puntos se reordenan en energía creciente.

    Raises:
        ConfigError: archivo inexistente, columnas faltantes o datos inválidos
    """
    path = Path(path)
    text = _read_text(path)
    metadata = read_metadata(text)
    frame = _read_frame(text, path)

    mapper = ColumnMapper()
    if not mapper.map_headers(list(frame.columns)):
        raise ConfigError(f"{path}: no se encontraron columnas de abscisa y cuentas")

    abscissa = frame[mapper.abscissa_col].to_numpy(dtype=float)
    counts = frame[mapper.counts_col].to_numpy(dtype=float)

    unit = metadata.get("abscissa_unit", "uev").lower()
    if unit == "nm":
        abscissa = nm_to_uev(abscissa)
    elif unit != "uev":
        raise ConfigError(f"{path}: abscissa_unit debe ser 'uev' o 'nm', recibido '{unit}'")

    order = np.argsort(abscissa, kind="stable")
    spectrum = SpectrumData(
        abscissa=abscissa[order],
        counts=counts[order],
        polarization=metadata.get("pol", "U").upper(),
        b_field=_metadata_float(metadata, "b", path) or 0.0,
        power=_metadata_float(metadata, "p", path),
    )
    errors = spectrum.validate()
    if errors:
        raise ConfigError([f"{path}: {e}" for e in errors])
    return spectrum


def _metadata_block(metadata: dict[str, object]) -> str:
    return "".join(f"# {key}={value}\n" for key, value in metadata.items())


def _frame_csv(frame: pd.DataFrame) -> str:
    return frame.to_csv(index=False, lineterminator="\n")


def format_spectrum(spectrum: SpectrumData, extra: Optional[dict[str, object]] = None) -> str:
    """Espectro en μeV con su metadata (B, polarización, potencia)"""
    metadata: dict[str, object] = {"B": repr(float(spectrum.b_field)), "pol": spectrum.polarization}
    if spectrum.power is not None:
        metadata["P"] = repr(float(spectrum.power))
    metadata["abscissa_unit"] = "uev"
    metadata.update(extra or {})
    frame = pd.DataFrame({"abscissa": spectrum.abscissa, "counts": spectrum.counts})
    return _metadata_block(metadata) + _frame_csv(frame)


def format_profile(profile: ResonanceProfile, extra: Optional[dict[str, object]] = None) -> str:
    metadata: dict[str, object] = {}
    if profile.params is not None:
        for key, value in profile.params.as_ghz().items():
            if key != "detuning_ghz":
                metadata[key] = "none" if value is None else repr(float(value))
    metadata.update(extra or {})
    frame = pd.DataFrame({"detuning_ghz": profile.detunings, "intensity": profile.intensities})
    return _metadata_block(metadata) + _frame_csv(frame)


def read_profile(path: Path) -> ResonanceProfile:
    """Lee un perfil (detuning_ghz, intensity)"""
    path = Path(path)
    text = _read_text(path)
    frame = _read_frame(text, path)
    mapper = ColumnMapper()
    if not mapper.map_headers(list(frame.columns)):
        raise ConfigError(f"{path}: no se encontraron columnas de desintonía e intensidad")
    profile = ResonanceProfile(
        frame[mapper.abscissa_col].to_numpy(dtype=float),
        frame[mapper.counts_col].to_numpy(dtype=float),
    )
    if len(profile) < 3 or np.any(np.diff(profile.detunings) <= 0):
        raise ConfigError(f"{path}: se necesitan >= 3 desintonías estrictamente crecientes")
    return profile


def format_sweep(sweep: SweepResult2D, extra: Optional[dict[str, object]] = None) -> str:
    """Barrido 2D en formato largo (g_h, detuning_ghz, intensity)"""
    rows, cols = sweep.intensities.shape
    frame = pd.DataFrame({
        "g_h": np.repeat(sweep.g_h, cols),
        "detuning_ghz": np.tile(sweep.detunings, rows),
        "intensity": sweep.intensities.ravel(),
    })
    metadata: dict[str, object] = {"normalized": str(sweep.normalized).lower()}
    if sweep.g_e is not None:
        metadata["g_e"] = repr(float(sweep.g_e))
    if sweep.b_tesla is not None:
        metadata["B"] = repr(float(sweep.b_tesla))
    metadata.update(extra or {})
    return _metadata_block(metadata) + _frame_csv(frame)


def format_table(frame: pd.DataFrame, metadata: Optional[dict[str, object]] = None) -> str:
    return _metadata_block(metadata or {}) + _frame_csv(frame)


def read_table(path: Path) -> tuple[np.ndarray, np.ndarray]:
    """
    Tabla de dos columnas (potencia, valor) para los ajustes de saturación
    y ensanchamiento. Usa las dos primeras columnas.
    """
    path = Path(path)
    frame = _read_frame(_read_text(path), path)
    if frame.shape[1] < 2:
        raise ConfigError(f"{path}: se esperaban al menos dos columnas")
    try:
        x = frame.iloc[:, 0].to_numpy(dtype=float)
        y = frame.iloc[:, 1].to_numpy(dtype=float)
    except ValueError as e:
        raise ConfigError(f"{path}: valores no numéricos ({e})")
    return x, y
