"""
Modelos de datos (dataclasses) del toolkit qdot_spinpump.

Frecuencias internas en rad/ns; las interfaces citan "/2π en GHz".
Energías en μeV, campos en T, potencias en μW.
"""

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from qdot_spinpump.units import (
    CONSTANTS,
    angular_to_ghz,
    ghz_to_angular,
    ghz_to_uev,
)

POLARIZATIONS = ("H", "V", "U")


# ─── Sistema de cuatro niveles ───────────────────────────────────────────

@dataclass(frozen=True)
class SystemParams:
    """Parámetros físicos del sistema doble-Λ (rad/ns; t1_spin en ns)"""
    delta_e: float
    delta_h: float
    laser_detuning: float
    rabi: float
    gamma: float
    t1_spin: Optional[float] = None

    @classmethod
    def from_ghz(
        cls,
        delta_e_ghz: float,
        delta_h_ghz: float,
        omega_ghz: float,
        gamma_ghz: float,
        detuning_ghz: float = 0.0,
        t1_ns: Optional[float] = None,
    ) -> "SystemParams":
        """Construye los parámetros desde valores /2π en GHz"""
        return cls(
            delta_e=ghz_to_angular(delta_e_ghz),
            delta_h=ghz_to_angular(delta_h_ghz),
            laser_detuning=ghz_to_angular(detuning_ghz),
            rabi=ghz_to_angular(omega_ghz),
            gamma=ghz_to_angular(gamma_ghz),
            t1_spin=t1_ns,
        )

    def validate(self) -> list[str]:
        errors = []
        if not self.gamma > 0:
            errors.append("gamma debe ser > 0")
        if self.rabi < 0:
            errors.append("rabi debe ser >= 0")
        if self.delta_e < 0 or self.delta_h < 0:
            errors.append("delta_e y delta_h deben ser >= 0")
        if self.t1_spin is not None and not self.t1_spin > 0:
            errors.append("t1_spin debe ser > 0")
        return errors

    def with_detuning_ghz(self, detuning_ghz: float) -> "SystemParams":
        return replace(self, laser_detuning=ghz_to_angular(detuning_ghz))

    @property
    def splitting_mismatch_ghz(self) -> float:
        """s/2π = (δ_e − δ_h)/2π, separación de las dos transiciones internas"""
        return angular_to_ghz(self.delta_e - self.delta_h)

    def as_ghz(self) -> dict[str, Optional[float]]:
        return {
            "delta_e_ghz": angular_to_ghz(self.delta_e),
            "delta_h_ghz": angular_to_ghz(self.delta_h),
            "detuning_ghz": angular_to_ghz(self.laser_detuning),
            "omega_ghz": angular_to_ghz(self.rabi),
            "gamma_ghz": angular_to_ghz(self.gamma),
            "t1_ns": self.t1_spin,
        }


@dataclass(frozen=True)
class DensityMatrix:
    """Estado 4×4 en la base (|↓⟩, |↑⟩, trión inferior, trión superior)"""
    entries: np.ndarray

    def __post_init__(self):
        if np.shape(self.entries) != (4, 4):
            raise ValueError(f"Se esperaba una matriz 4×4, recibido {np.shape(self.entries)}")

    @property
    def trace(self) -> complex:
        return complex(np.trace(self.entries))

    def hermiticity_error(self) -> float:
        return float(np.max(np.abs(self.entries - self.entries.conj().T)))

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(0.5 * (self.entries + self.entries.conj().T))[0])

    def populations(self) -> np.ndarray:
        return np.real(np.diag(self.entries)).copy()


@dataclass(frozen=True)
class CollapseSet:
    """Operadores de salto con la tasa incluida (√rate·σ_ij)"""
    operators: tuple[np.ndarray, ...] = ()

    def __len__(self) -> int:
        return len(self.operators)

    def __iter__(self):
        return iter(self.operators)

    def total_rate(self) -> float:
        return float(sum(np.sum(np.abs(c) ** 2) for c in self.operators))


# ─── Barridos ────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class ScanGrid:
    """Grilla uniforme de desintonías Δ/2π (GHz)"""
    start: float
    stop: float
    count: int

    def validate(self) -> list[str]:
        errors = []
        if self.count < 3:
            errors.append("count debe ser >= 3")
        if not self.stop > self.start:
            errors.append("stop debe ser > start")
        return errors

    def values(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.count)

    @classmethod
    def symmetric(cls, half_span: float, count: int) -> "ScanGrid":
        return cls(-half_span, half_span, count)


@dataclass
class ResonanceProfile:
    """⟨Π₄⟩ muestreado en función de la desintonía del láser"""
    detunings: np.ndarray
    intensities: np.ndarray
    params: Optional[SystemParams] = None

    def __post_init__(self):
        self.detunings = np.asarray(self.detunings, dtype=float)
        self.intensities = np.asarray(self.intensities, dtype=float)
        if self.detunings.shape != self.intensities.shape:
            raise ValueError("detunings e intensities deben tener el mismo largo")

    def __len__(self) -> int:
        return len(self.detunings)

    @property
    def peak_index(self) -> int:
        return int(np.argmax(self.intensities))

    @property
    def peak_intensity(self) -> float:
        return float(self.intensities[self.peak_index])

    @property
    def peak_detuning(self) -> float:
        return float(self.detunings[self.peak_index])

    def scaled(self, factor: float) -> "ResonanceProfile":
        return ResonanceProfile(self.detunings.copy(), self.intensities * factor, self.params)


@dataclass
class SweepResult2D:
    """Matriz de intensidad (filas g_h × columnas Δ)"""
    g_h: np.ndarray
    detunings: np.ndarray
    intensities: np.ndarray
    normalized: bool = False
    g_e: Optional[float] = None
    b_tesla: Optional[float] = None

    def __post_init__(self):
        self.g_h = np.asarray(self.g_h, dtype=float)
        self.detunings = np.asarray(self.detunings, dtype=float)
        self.intensities = np.asarray(self.intensities, dtype=float)
        if self.intensities.shape != (len(self.g_h), len(self.detunings)):
            raise ValueError(
                f"Dimensiones inconsistentes: matriz {self.intensities.shape}, "
                f"ejes ({len(self.g_h)}, {len(self.detunings)})"
            )

    def row(self, index: int) -> ResonanceProfile:
        return ResonanceProfile(self.detunings, self.intensities[index])

    def row_peaks(self) -> np.ndarray:
        return self.intensities.max(axis=1)


@dataclass(frozen=True)
class Width:
    """FWHM de un perfil, en GHz (desintonía /2π) y μeV"""
    ghz: float
    left: float
    right: float

    @property
    def uev(self) -> float:
        return ghz_to_uev(self.ghz)


@dataclass
class PowerSweep:
    """Ancho y pico del perfil por cada Ω"""
    omegas_ghz: np.ndarray
    widths_ghz: np.ndarray
    peaks: np.ndarray

    @property
    def power(self) -> np.ndarray:
        """Potencia relativa ∝ Ω²"""
        return np.asarray(self.omegas_ghz) ** 2

    @property
    def widths_uev(self) -> np.ndarray:
        return ghz_to_uev(np.asarray(self.widths_ghz))


@dataclass
class SpinLifetimeComparison:
    """Curvas pico-vs-Ω para varios T1 (None = T1 infinito)"""
    omegas_ghz: np.ndarray
    t1_values: list[Optional[float]]
    peaks: np.ndarray                     # (len(t1_values), len(omegas))
    max_relative_deviation: list[float]   # respecto de la curva T1 = ∞

    @property
    def power(self) -> np.ndarray:
        return np.asarray(self.omegas_ghz) ** 2


# ─── Espectroscopía ──────────────────────────────────────────────────────

@dataclass
class SpectrumData:
    """Espectro de fotoluminiscencia (abscisa en μeV ascendente)"""
    abscissa: np.ndarray
    counts: np.ndarray
    polarization: str = "U"
    b_field: float = 0.0
    power: Optional[float] = None

    def __post_init__(self):
        self.abscissa = np.asarray(self.abscissa, dtype=float)
        self.counts = np.asarray(self.counts, dtype=float)

    def validate(self) -> list[str]:
        errors = []
        if self.abscissa.shape != self.counts.shape:
            errors.append("abscisa y cuentas con largos distintos")
        elif len(self.abscissa) < 2 or np.any(np.diff(self.abscissa) <= 0):
            errors.append("la abscisa debe ser estrictamente creciente")
        if np.any(self.counts < 0) or not np.all(np.isfinite(self.counts)):
            errors.append("las cuentas deben ser finitas y >= 0")
        if self.polarization not in POLARIZATIONS:
            errors.append(f"polarización inválida: {self.polarization}")
        if self.b_field < 0:
            errors.append("B debe ser >= 0")
        return errors

    def shifted(self, offset: float) -> "SpectrumData":
        return replace(self, abscissa=self.abscissa + offset)

    def scaled(self, factor: float) -> "SpectrumData":
        return replace(self, counts=self.counts * factor)


@dataclass(frozen=True)
class PeakFit:
    """Una línea Lorentziana ajustada"""
    center: float
    fwhm: float
    amplitude: float
    center_err: float = 0.0
    fwhm_err: float = 0.0
    amplitude_err: float = 0.0
    residual_norm: float = 0.0


@dataclass
class MultiPeakFit:
    """Resultado de fit_peaks: líneas ordenadas por centro + fondo"""
    peaks: list[PeakFit]
    background: float
    background_err: float
    residual_norm: float
    rss: float
    n_points: int
    n_params: int
    ill_conditioned: bool = False
    shared_fwhm: bool = False

    @property
    def n_peaks(self) -> int:
        return len(self.peaks)

    @property
    def centers(self) -> list[float]:
        return [p.center for p in self.peaks]

    @property
    def dof(self) -> int:
        return self.n_points - self.n_params


@dataclass
class ZeemanPoint:
    """Centros del multiplete a un campo B"""
    b_field: float
    centers: tuple[float, ...] = ()
    center_errors: tuple[float, ...] = ()
    mean_energy: float = float("nan")
    resolved: bool = False
    merged_inner: bool = False
    n_lines: int = 0
    failure: Optional[str] = None

    @property
    def outer_separation(self) -> float:
        return self.centers[3] - self.centers[0]

    @property
    def inner_separation(self) -> float:
        return self.centers[2] - self.centers[1]


@dataclass
class ZeemanSeries:
    """Serie de multipletes ordenada por B creciente"""
    points: list[ZeemanPoint] = field(default_factory=list)

    @property
    def b_values(self) -> list[float]:
        return [p.b_field for p in self.points]

    def usable(self) -> list[ZeemanPoint]:
        """Puntos con energía media válida (sin fallas de ajuste)"""
        return [p for p in self.points if p.failure is None and np.isfinite(p.mean_energy)]

    def resolved(self) -> list[ZeemanPoint]:
        return [p for p in self.points if p.resolved and p.failure is None and p.b_field > 0]


@dataclass
class DiamagneticFit:
    kappa: float
    kappa_err: float
    e0: float
    e0_err: float
    corrected: ZeemanSeries


@dataclass(frozen=True)
class GFactorResult:
    g_sum: float
    g_sum_err: float
    g_diff: float
    g_diff_err: float
    g_e: float
    g_h: float
    g_pair_err: float
    kappa: float = 0.0
    kappa_err: float = 0.0
    e0: float = 0.0
    e0_err: float = 0.0
    assignment_ambiguous: bool = True
    n_points: int = 0

    def branch_splitting_ghz(self, b_tesla: float) -> float:
        """δ/2π de una rama (g_sum/2) a un campo B, en GHz"""
        return CONSTANTS.mu_b * (self.g_sum / 2) * b_tesla / CONSTANTS.h


@dataclass(frozen=True)
class FssResult:
    fss: float
    fss_err: float
    center_h: float
    center_v: float


@dataclass(frozen=True)
class SaturationFit:
    """I(P) = I_max·P/(P + P_sat)"""
    i_max: float
    p_sat: float
    i_max_err: float
    p_sat_err: float
    residual_norm: float
    rms_residual: float
    unbounded: bool = False


@dataclass(frozen=True)
class LinearBroadening:
    """w = a + b·P"""
    intercept: float
    slope: float
    intercept_err: float
    slope_err: float
    residual_norm: float
    r_squared: float


@dataclass(frozen=True)
class SqrtBroadening:
    """w = w0·√(1 + P/P_sat)"""
    w0: float
    p_sat: float
    w0_err: float
    p_sat_err: float
    residual_norm: float


@dataclass(frozen=True)
class BroadeningFit:
    linear: LinearBroadening
    sqrt: SqrtBroadening
    best: str
    natural_hwhm: float        # w0/2, ancho natural implícito
    drive_coefficient: float   # c con Ω = c·√P


@dataclass(frozen=True)
class ResonanceModelFit:
    model: str                 # "product" | "sum"
    amplitudes: tuple[float, ...]
    hwhm_ghz: float
    residual_norm: float
    splitting_ghz: float = 0.0  # s/2π ajustada (producto) o fija (suma)


@dataclass(frozen=True)
class ResonanceFit:
    splitting_ghz: float
    product: ResonanceModelFit
    sum: ResonanceModelFit

    @property
    def product_preferred(self) -> bool:
        return self.product.residual_norm < self.sum.residual_norm


@dataclass(frozen=True)
class SpectrumTruth:
    """Valores verdaderos para el sintetizador de espectros"""
    e0: float
    kappa: float
    g_e: float
    g_h: float
    b_field: float
    linewidth: float
    amplitude: float
    polarization: str = "U"
    background: float = 0.0
    fss: float = 0.0
    step: float = 1.0


# ─── Corridas ────────────────────────────────────────────────────────────

@dataclass
class RunStats:
    """Estadísticas de una corrida de la CLI"""
    command: str
    duration_seconds: float
    outputs: list[str] = field(default_factory=list)
    success: bool = True
    summary: dict[str, str] = field(default_factory=dict)
    errors: Optional[str] = None
