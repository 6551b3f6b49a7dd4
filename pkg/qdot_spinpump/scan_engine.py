"""
Motor de barridos: desintonía del láser, factor g del hueco, potencia de
drive y tiempo de vida del espín, sobre el solver de estado estacionario.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from qdot_spinpump.config import Config
from qdot_spinpump.errors import (
    GridTooNarrow,
    HalfMaxNotBracketed,
    NotUnimodal,
    ZeroRow,
)
from qdot_spinpump.logger import get_logger
from qdot_spinpump.models import (
    PowerSweep,
    ResonanceProfile,
    ScanGrid,
    SpinLifetimeComparison,
    SweepResult2D,
    SystemParams,
    Width,
)
from qdot_spinpump.quantum_core import population, solve_system
from qdot_spinpump.units import angular_to_ghz, ghz_to_angular, uev_to_ghz, zeeman_splitting

logger = get_logger("scan_engine")

ProfileLike = Union[ResonanceProfile, Sequence[float], np.ndarray]


def _splitting_angular(g: float, b_tesla: float) -> float:
    """δ = μ_B·g·B expresado en rad/ns"""
    return ghz_to_angular(uev_to_ghz(zeeman_splitting(g, b_tesla)))


def scan_detuning(p: SystemParams, grid: ScanGrid) -> ResonanceProfile:
    """
    ⟨Π₄⟩ del estado estacionario para cada Δ de la grilla.

    Raises:
        DegenerateSteadyState: si Ω = 0 sin canal de spin-flip
    """
    errors = grid.validate()
    if errors:
        raise ValueError("; ".join(errors))

    detunings = grid.values()
    intensities = np.array([
        population(solve_system(p.with_detuning_ghz(detuning)), 4)
        for detuning in detunings
    ])
    return ResonanceProfile(detunings, intensities, p)


def _scan_row(job: tuple[SystemParams, ScanGrid]) -> np.ndarray:
    params, grid = job
    return scan_detuning(params, grid).intensities


def sweep_g_factor(
    base: SystemParams,
    g_e: float,
    g_h_grid: Iterable[float],
    b_tesla: float,
    grid: ScanGrid,
    workers: int = 1,
) -> SweepResult2D:
    """
    Barrido 2D (g_h × Δ) con δ_e fijo por (g_e, B) y δ_h recalculado por fila.

    Args:
        base: Parámetros base (Ω, γ, T1)
        g_e: Factor g del electrón
        g_h_grid: Valores de g_h (filas)
        b_tesla: Campo magnético
        grid: Grilla de desintonía
        workers: Procesos; las filas se ensamblan siempre en orden de grilla

    Returns:
        SweepResult2D sin normalizar
    """
    g_h_values = np.asarray(list(g_h_grid), dtype=float)
    if g_e <= 0:
        raise ValueError("g_e debe ser > 0")
    if g_h_values.size == 0:
        raise ValueError("La grilla de g_h está vacía")

    delta_e = _splitting_angular(g_e, b_tesla)
    jobs = [
        (replace(base, delta_e=delta_e, delta_h=_splitting_angular(g_h, b_tesla)), grid)
        for g_h in g_h_values
    ]

    logger.info(f"Barrido g_h: {len(jobs)} filas × {grid.count} desintonías (workers={workers})")
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_scan_row, jobs))
    else:
        rows = [_scan_row(job) for job in jobs]

    return SweepResult2D(
        g_h=g_h_values,
        detunings=grid.values(),
        intensities=np.vstack(rows),
        normalized=False,
        g_e=g_e,
        b_tesla=b_tesla,
    )


def normalize_rows(sweep: SweepResult2D) -> SweepResult2D:
    """Divide cada fila por su máximo"""
    maxima = sweep.intensities.max(axis=1)
    for index, value in enumerate(maxima):
        if not value > 0:
            raise ZeroRow(f"Fila {index} (g_h={sweep.g_h[index]:.4f}) con máximo {value}")
    return replace(sweep, intensities=sweep.intensities / maxima[:, None], normalized=True)


def _values(profile: ProfileLike) -> np.ndarray:
    if isinstance(profile, ResonanceProfile):
        return profile.intensities
    return np.asarray(profile, dtype=float)


def is_unimodal(profile: ProfileLike) -> bool:
    """
    True si la secuencia sube (no estrictamente) hasta una meseta y luego baja.
    Las variaciones menores a PLATEAU_RTOL·max se tratan como planas.
    """
    values = _values(profile)
    if values.size < 3:
        raise ValueError("Se necesitan al menos 3 puntos")

    tol = Config.PLATEAU_RTOL * float(np.max(np.abs(values)))
    i = 0
    last = values.size - 1
    while i < last and values[i + 1] >= values[i] - tol:
        i += 1
    if i in (0, last):
        logger.debug("Máximo en el borde de la grilla")
    while i < last and values[i + 1] <= values[i] + tol:
        i += 1
    return i == last


def _crossing(x: np.ndarray, y: np.ndarray, lower: int, upper: int, level: float) -> float:
    """Interpolación lineal del cruce por `level` entre dos muestras vecinas"""
    fraction = (level - y[lower]) / (y[upper] - y[lower])
    return float(x[lower] + fraction * (x[upper] - x[lower]))


def extract_fwhm(profile: ResonanceProfile) -> Width:
    """
    FWHM por interpolación lineal de los dos cruces de media altura.

    Raises:
        NotUnimodal: si el perfil tiene más de un máximo
        HalfMaxNotBracketed: si el perfil no cae bajo la mitad dentro de la grilla
    """
    if not is_unimodal(profile):
        raise NotUnimodal("El perfil no es unimodal")

    x = profile.detunings
    y = profile.intensities
    peak = int(np.argmax(y))
    half = y[peak] / 2
    if not y[peak] > 0:
        raise HalfMaxNotBracketed("Perfil nulo")

    left = None
    for i in range(peak - 1, -1, -1):
        if y[i] <= half:
            left = _crossing(x, y, i, i + 1, half)
            break

    right = None
    for i in range(peak + 1, len(y)):
        if y[i] <= half:
            right = _crossing(x, y, i, i - 1, half)
            break

    if left is None or right is None:
        raise HalfMaxNotBracketed(
            f"Media altura no acotada en [{x[0]:.3f}, {x[-1]:.3f}] GHz"
        )
    return Width(ghz=right - left, left=left, right=right)


def closed_form_fwhm(p: SystemParams) -> float:
    """
    FWHM exacto (GHz) de la resonancia de un solo láser sin T1:
    2·√(γ² + 2Ω² + s²/4), con s = (δ_e − δ_h)/2π.
    """
    gamma = angular_to_ghz(p.gamma)
    omega = angular_to_ghz(p.rabi)
    s = p.splitting_mismatch_ghz
    return 2.0 * float(np.sqrt(gamma ** 2 + 2 * omega ** 2 + s ** 2 / 4))


def _profile_with_widening(p: SystemParams, count: int) -> tuple[ResonanceProfile, Width]:
    half_span = max(3.0, 3.0 * closed_form_fwhm(p))
    for attempt in range(Config.SCAN_MAX_WIDENINGS + 1):
        profile = scan_detuning(p, ScanGrid.symmetric(half_span, count))
        try:
            return profile, extract_fwhm(profile)
        except HalfMaxNotBracketed:
            logger.debug(f"Ensanchando grilla (intento {attempt + 1}): ±{half_span:.2f} GHz")
            half_span *= 2
    raise GridTooNarrow(
        f"Ω/2π={angular_to_ghz(p.rabi):.4f} GHz: media altura fuera de ±{half_span / 2:.2f} GHz"
    )


def sweep_power(base: SystemParams, omega_grid: Iterable[float], count: int = 601) -> PowerSweep:
    """
    Ancho y pico de la resonancia para cada Ω/2π (GHz).
    La grilla se centra en Δ=0 con semiancho max(3, 3·FWHM estimado).
    """
    omegas = np.asarray(list(omega_grid), dtype=float)
    if omegas.size == 0 or np.any(omegas <= 0):
        raise ValueError("Los valores de Ω deben ser > 0")

    widths = []
    peaks = []
    for omega in omegas:
        profile, width = _profile_with_widening(replace(base, rabi=ghz_to_angular(omega)), count)
        widths.append(width.ghz)
        peaks.append(profile.peak_intensity)
        logger.debug(f"Ω/2π={omega:.4f} GHz → FWHM {width.ghz:.4f} GHz, pico {profile.peak_intensity:.5f}")

    return PowerSweep(omegas_ghz=omegas, widths_ghz=np.array(widths), peaks=np.array(peaks))


def compare_spin_lifetime(
    base: SystemParams,
    omega_grid: Iterable[float],
    t1_values: Iterable[Optional[float]],
    grid: ScanGrid,
) -> SpinLifetimeComparison:
    """
    Curvas de pico vs Ω para varios T1 (ns; None = infinito), con la máxima
    desviación relativa de cada curva respecto de la de T1 infinito.
    """
    omegas = np.asarray(list(omega_grid), dtype=float)
    t1_list: list[Optional[float]] = list(t1_values)
    if None in t1_list:
        t1_list.remove(None)
    t1_list.insert(0, None)

    curves = []
    for t1 in t1_list:
        curve = [
            scan_detuning(replace(base, rabi=ghz_to_angular(omega), t1_spin=t1), grid).peak_intensity
            for omega in omegas
        ]
        curves.append(curve)
    peaks = np.array(curves)

    reference = peaks[0]
    deviations = [float(np.max(np.abs(row - reference) / reference)) for row in peaks]
    for t1, deviation in zip(t1_list, deviations):
        label = "∞" if t1 is None else f"{t1:.4g} ns"
        logger.info(f"T1 = {label}: desviación relativa máxima {deviation:.2%}")

    return SpinLifetimeComparison(
        omegas_ghz=omegas,
        t1_values=t1_list,
        peaks=peaks,
        max_relative_deviation=deviations,
    )
