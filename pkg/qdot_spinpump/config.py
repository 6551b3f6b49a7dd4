"""
Configuración del toolkit qdot_spinpump.

- Config: ajustes numéricos y de ambiente (constantes de clase + validate()).
- RunConfig: archivo plano clave-valor por secciones (`seccion.clave=valor`),
  leído con python-dotenv sin tocar el entorno del proceso.
"""

import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Optional

from dotenv import dotenv_values

from qdot_spinpump.errors import ConfigError


class Config:
    """Configuración centralizada del sistema"""

    # Directorio base del proyecto
    BASE_DIR = Path(__file__).parent.parent

    # Solver de estado estacionario
    RANK_RTOL: float = 1e-9            # núcleo: σ <= RANK_RTOL·‖L‖
    ORACLE_STEP_SAFETY: float = 0.02   # dt por defecto = safety / escala más rápida
    ORACLE_MAX_STEP_PRODUCT: float = 0.1
    ORACLE_MAX_STEPS: int = 2 ** 60
    ORACLE_TOL: float = 1e-11

    # Barridos
    SCAN_MAX_WIDENINGS: int = 4
    PLATEAU_RTOL: float = 1e-12

    # Ajustes
    FIT_MAX_ITERATIONS: int = 200
    FIT_XTOL: float = 1e-10
    FIT_FTOL: float = 1e-12
    FIT_COND_LIMIT: float = 1e8
    F_TEST_ALPHA: float = 0.01
    EXACT_FIT_RTOL: float = 1e-12
    QUAD_MAX_REDUCED_CHI2: float = 10.0   # χ² reducido (varianza Poisson) máximo de un cuadruplete aceptado

    # Logging
    LOG_LEVEL: str = "INFO"
    LOG_FILE: str = ""

    @classmethod
    def validate(cls) -> list[str]:
        """Valida la configuración y retorna lista de errores"""
        errors = []

        if not 0 < cls.ORACLE_STEP_SAFETY < cls.ORACLE_MAX_STEP_PRODUCT:
            errors.append("ORACLE_STEP_SAFETY debe estar en (0, ORACLE_MAX_STEP_PRODUCT)")

        if cls.RANK_RTOL <= 0:
            errors.append("RANK_RTOL debe ser > 0")

        if cls.FIT_MAX_ITERATIONS < 1:
            errors.append("FIT_MAX_ITERATIONS debe ser >= 1")

        if not 0 < cls.F_TEST_ALPHA < 1:
            errors.append(f"F_TEST_ALPHA inválido: {cls.F_TEST_ALPHA}")

        if cls.QUAD_MAX_REDUCED_CHI2 <= 0:
            errors.append("QUAD_MAX_REDUCED_CHI2 debe ser > 0")

        if cls.LOG_LEVEL.upper() not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
            errors.append(f"LOG_LEVEL inválido: {cls.LOG_LEVEL}")

        return errors

    @classmethod
    def get_log_path(cls, log_file: Optional[str] = None) -> Optional[Path]:
        """Retorna la ruta absoluta del archivo de log, o None si está deshabilitado"""
        value = log_file if log_file is not None else cls.LOG_FILE
        if not value:
            return None
        if Path(value).is_absolute():
            return Path(value)
        return cls.BASE_DIR / value


# ─── RunConfig ───────────────────────────────────────────────────────────

def _key(default: Any, help: str, kind: Optional[type] = None,
         choices: Optional[tuple[str, ...]] = None, optional: bool = False):
    """
    Declara una clave de configuración con su texto de ayuda. Las claves
    `optional` aceptan vacío, `none` o `inf` como ausencia de valor.
    """
    return field(
        default=default,
        metadata={
            "help": help,
            "kind": kind or type(default),
            "optional": optional,
            "choices": choices,
        },
    )


@dataclass(frozen=True)
class SystemSection:
    delta_e_ghz: float = _key(23.8, "δ_e/2π, desdoblamiento del trión (GHz)")
    delta_h_ghz: float = _key(23.8, "δ_h/2π, desdoblamiento del hueco (GHz)")
    omega_ghz: float = _key(1.0, "Ω/2π, frecuencia de Rabi (GHz)")
    gamma_ghz: float = _key(0.25, "γ/2π, decaimiento por canal (GHz)")
    t1_ns: Optional[float] = _key(None, "T1 del espín (ns); vacío = infinito", kind=float, optional=True)

    def validate(self) -> list[str]:
        errors = []
        if self.gamma_ghz <= 0:
            errors.append("system.gamma_ghz debe ser > 0")
        if self.omega_ghz < 0:
            errors.append("system.omega_ghz debe ser >= 0")
        if self.delta_e_ghz < 0 or self.delta_h_ghz < 0:
            errors.append("system.delta_e_ghz y system.delta_h_ghz deben ser >= 0")
        if self.t1_ns is not None and self.t1_ns <= 0:
            errors.append("system.t1_ns debe ser > 0")
        return errors


@dataclass(frozen=True)
class GridSection:
    start_ghz: float = _key(-3.0, "Inicio de la grilla de desintonía Δ/2π (GHz)")
    stop_ghz: float = _key(3.0, "Fin de la grilla de desintonía Δ/2π (GHz)")
    count: int = _key(601, "Número de puntos de la grilla")

    def validate(self) -> list[str]:
        errors = []
        if self.count < 3:
            errors.append("grid.count debe ser >= 3")
        if self.stop_ghz <= self.start_ghz:
            errors.append("grid.stop_ghz debe ser > grid.start_ghz")
        return errors


@dataclass(frozen=True)
class GFactorSection:
    g_e: float = _key(0.34, "Factor g del electrón (fijo)")
    b_tesla: float = _key(5.0, "Campo magnético (T)")
    g_h_start: float = _key(0.24, "Primer g_h del barrido")
    g_h_stop: float = _key(0.44, "Último g_h del barrido")
    g_h_count: int = _key(41, "Número de filas g_h")

    def validate(self) -> list[str]:
        errors = []
        if self.g_e <= 0:
            errors.append("gfactor.g_e debe ser > 0")
        if self.b_tesla < 0:
            errors.append("gfactor.b_tesla debe ser >= 0")
        if self.g_h_count < 1:
            errors.append("gfactor.g_h_count debe ser >= 1 (grilla g_h vacía)")
        if self.g_h_stop < self.g_h_start:
            errors.append("gfactor.g_h_stop debe ser >= gfactor.g_h_start")
        return errors


@dataclass(frozen=True)
class PowerSection:
    omega_start_ghz: float = _key(0.1425, "Primer Ω/2π del barrido de potencia (GHz)")
    omega_stop_ghz: float = _key(2.85, "Último Ω/2π del barrido de potencia (GHz)")
    omega_count: int = _key(20, "Número de valores de Ω")

    def validate(self) -> list[str]:
        errors = []
        if self.omega_start_ghz <= 0:
            errors.append("power.omega_start_ghz debe ser > 0")
        if self.omega_stop_ghz < self.omega_start_ghz:
            errors.append("power.omega_stop_ghz debe ser >= power.omega_start_ghz")
        if self.omega_count < 1:
            errors.append("power.omega_count debe ser >= 1")
        return errors


@dataclass(frozen=True)
class T1Section:
    values_ns: str = _key("inf,1000", "Lista de T1 (ns) separada por comas; 'inf' = sin relajación")
    include_inverse_gamma: bool = _key(True, "Agrega T1 = 1/γ a la lista")
    delta_h_ghz: Optional[float] = _key(
        21.0, "δ_h/2π usado en el modo t1 (vacío = system.delta_h_ghz)", kind=float, optional=True,
    )

    def parsed_values(self) -> list[Optional[float]]:
        """Valores T1 en ns; None representa T1 infinito"""
        values: list[Optional[float]] = []
        for token in self.values_ns.split(","):
            token = token.strip().lower()
            if not token:
                continue
            values.append(None if token in ("inf", "none") else float(token))
        return values

    def validate(self) -> list[str]:
        try:
            values = self.parsed_values()
        except ValueError:
            return [f"t1.values_ns inválido: {self.values_ns}"]
        errors = []
        if not values and not self.include_inverse_gamma:
            errors.append("t1.values_ns está vacío")
        if any(v is not None and v <= 0 for v in values):
            errors.append("t1.values_ns debe contener valores > 0")
        if self.delta_h_ghz is not None and self.delta_h_ghz < 0:
            errors.append("t1.delta_h_ghz debe ser >= 0")
        return errors


@dataclass(frozen=True)
class SynthSection:
    e0_uev: float = _key(1393000.0, "Energía a campo cero E0 (μeV)")
    kappa_uev_t2: float = _key(5.07, "Coeficiente diamagnético κ (μeV/T²)")
    g_e: float = _key(0.34, "Factor g del electrón")
    g_h: float = _key(0.30, "Factor g del hueco")
    b_start: float = _key(0.0, "Primer campo B (T)")
    b_stop: float = _key(5.0, "Último campo B (T)")
    b_step: float = _key(1.0, "Paso de campo (T)")
    linewidth_uev: float = _key(22.0, "FWHM de cada línea (μeV)")
    amplitude: float = _key(900.0, "Altura de cada línea (cuentas)")
    background: float = _key(0.0, "Fondo constante (cuentas)")
    fss_uev: float = _key(1.8, "Fine structure splitting a B=0 (μeV)")
    step_uev: float = _key(1.0, "Paso de la abscisa (μeV)")
    noise: str = _key("poisson", "Ruido: poisson | none", choices=("poisson", "none"))
    seed: int = _key(7, "Semilla del generador")
    polarizations: str = _key("HV", "HV = un archivo por polarización; U = no polarizado", choices=("HV", "U"))

    def b_values(self) -> list[float]:
        n = int(round((self.b_stop - self.b_start) / self.b_step)) + 1
        return [self.b_start + i * self.b_step for i in range(n)]

    def validate(self) -> list[str]:
        errors = []
        if self.linewidth_uev <= 0:
            errors.append("synth.linewidth_uev debe ser > 0")
        if self.amplitude <= 0:
            errors.append("synth.amplitude debe ser > 0")
        if self.background < 0:
            errors.append("synth.background debe ser >= 0")
        if self.step_uev <= 0:
            errors.append("synth.step_uev debe ser > 0")
        if self.b_step <= 0 or self.b_start < 0 or self.b_stop < self.b_start:
            errors.append("synth.b_start/b_stop/b_step definen una lista de campos inválida")
        if self.noise not in ("poisson", "none"):
            errors.append(f"synth.noise inválido: {self.noise}")
        if self.polarizations not in ("HV", "U"):
            errors.append(f"synth.polarizations inválido: {self.polarizations}")
        return errors


@dataclass(frozen=True)
class FitSection:
    n_peaks: int = _key(0, "Número de picos en 'fit peaks' (0 = selección automática)")
    shared_fwhm: bool = _key(True, "Un solo ancho para todas las líneas del multiplete")
    f_test_alpha: float = _key(0.01, "Umbral del F-test para agregar picos")
    splitting_ghz: float = _key(2.8, "Separación s/2π de las transiciones internas (GHz) en 'fit resonance'")

    def validate(self) -> list[str]:
        errors = []
        if self.n_peaks < 0:
            errors.append("fit.n_peaks debe ser >= 0")
        if not 0 < self.f_test_alpha < 1:
            errors.append("fit.f_test_alpha debe estar en (0, 1)")
        if self.splitting_ghz < 0:
            errors.append("fit.splitting_ghz debe ser >= 0")
        return errors


@dataclass(frozen=True)
class OutputSection:
    dir: str = _key("out", "Directorio de salida")
    plot: bool = _key(False, "Escribir figuras SVG")
    workers: int = _key(1, "Procesos para barridos 2D (resultados en orden de grilla)")

    def validate(self) -> list[str]:
        return ["output.workers debe ser >= 1"] if self.workers < 1 else []


@dataclass(frozen=True)
class LogSection:
    level: str = _key("INFO", "Nivel de log", choices=("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"))
    file: str = _key("", "Archivo de log rotativo (vacío = solo consola)")

    def validate(self) -> list[str]:
        if self.level.upper() not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
            return [f"log.level inválido: {self.level}"]
        return []


SECTIONS: dict[str, type] = {
    "system": SystemSection,
    "grid": GridSection,
    "gfactor": GFactorSection,
    "power": PowerSection,
    "t1": T1Section,
    "synth": SynthSection,
    "fit": FitSection,
    "output": OutputSection,
    "log": LogSection,
}


def _coerce(raw: Optional[str], meta: dict) -> Any:
    """Convierte el texto del archivo al tipo declarado de la clave"""
    text = (raw or "").strip()
    if meta["optional"] and text.lower() in ("", "none", "inf"):
        return None
    kind = meta["kind"]
    if kind is bool:
        lowered = text.lower()
        if lowered in ("true", "1", "yes", "si"):
            return True
        if lowered in ("false", "0", "no"):
            return False
        raise ValueError(f"booleano inválido '{text}'")
    value = kind(text)
    if kind is float and not math.isfinite(value):
        raise ValueError(f"valor no finito '{text}'")
    choices = meta["choices"]
    if choices and value not in choices:
        raise ValueError(f"'{value}' no está en {choices}")
    return value


def _format(value: Any) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


@dataclass(frozen=True)
class RunConfig:
    """Configuración completa de una corrida (todas las secciones)"""
    system: SystemSection = field(default_factory=SystemSection)
    grid: GridSection = field(default_factory=GridSection)
    gfactor: GFactorSection = field(default_factory=GFactorSection)
    power: PowerSection = field(default_factory=PowerSection)
    t1: T1Section = field(default_factory=T1Section)
    synth: SynthSection = field(default_factory=SynthSection)
    fit: FitSection = field(default_factory=FitSection)
    output: OutputSection = field(default_factory=OutputSection)
    log: LogSection = field(default_factory=LogSection)

    @classmethod
    def from_mapping(cls, values: dict[str, Optional[str]]) -> "RunConfig":
        """
        Construye la configuración desde pares `seccion.clave` → texto.

        Raises:
            ConfigError: con todas las claves desconocidas o inválidas
        """
        errors = []
        updates: dict[str, dict[str, Any]] = {}

        for full_key, raw in values.items():
            section_name, _, key = full_key.partition(".")
            section_cls = SECTIONS.get(section_name)
            if section_cls is None or not key:
                errors.append(f"Clave desconocida: {full_key}")
                continue
            meta_by_key = {f.name: f.metadata for f in fields(section_cls)}
            if key not in meta_by_key:
                errors.append(f"Clave desconocida: {full_key}")
                continue
            try:
                updates.setdefault(section_name, {})[key] = _coerce(raw, meta_by_key[key])
            except ValueError as e:
                errors.append(f"Valor inválido para {full_key}: {e}")

        if errors:
            raise ConfigError(errors)

        config = cls()
        for section_name, section_updates in updates.items():
            config = replace(
                config,
                **{section_name: replace(getattr(config, section_name), **section_updates)},
            )
        config.raise_if_invalid()
        return config

    @classmethod
    def from_file(cls, path: Path) -> "RunConfig":
        """Lee un archivo `seccion.clave=valor` (sintaxis dotenv)"""
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"Archivo de configuración no encontrado: {path}")
        return cls.from_mapping(dict(dotenv_values(path)))

    @classmethod
    def load(cls, path: Optional[Path] = None) -> "RunConfig":
        return cls.from_file(path) if path is not None else cls()

    def with_overrides(self, overrides: dict[str, Any]) -> "RunConfig":
        """Aplica flags de la CLI (`seccion.clave` → valor ya tipado); ignora None"""
        config = self
        for full_key, value in overrides.items():
            if value is None:
                continue
            section_name, _, key = full_key.partition(".")
            section = getattr(config, section_name)
            config = replace(config, **{section_name: replace(section, **{key: value})})
        config.raise_if_invalid()
        return config

    def validate(self) -> list[str]:
        errors = []
        for name in SECTIONS:
            errors.extend(getattr(self, name).validate())
        return errors

    def raise_if_invalid(self) -> None:
        errors = self.validate()
        if errors:
            raise ConfigError(errors)

    def dump(self) -> str:
        """Serializa la configuración resuelta; se vuelve a leer con from_file"""
        lines = []
        for name in SECTIONS:
            section = getattr(self, name)
            lines.append(f"# [{name}]")
            for f in fields(section):
                lines.append(f"{name}.{f.name}={_format(getattr(section, f.name))}")
        return "\n".join(lines) + "\n"


def describe_keys(*section_names: str) -> str:
    """Texto de ayuda con todas las claves de las secciones indicadas"""
    lines = ["Claves del archivo --config (seccion.clave=valor):", ""]
    for name in section_names:
        for f in fields(SECTIONS[name]):
            default = _format(f.default)
            lines.append(f"{name}.{f.name} (default {default}): {f.metadata['help']}")
    return "\n\n".join(lines)


# Validar configuración al importar
config_errors = Config.validate()
if config_errors:
    import warnings
    for error in config_errors:
        warnings.warn(f"Error de configuración: {error}")
