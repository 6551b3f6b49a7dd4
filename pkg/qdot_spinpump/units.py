"""
Constantes físicas y conversiones de unidades.

Convenciones internas:
- energías en μeV
- frecuencias angulares en rad/ns (γ/2π = 0.25 GHz se guarda como 2π·0.25)
- las interfaces citan siempre "/2π en GHz"
"""

from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class PhysicalConstants:
    """Valores CODATA usados en todo el paquete"""
    mu_b: float = 57.8838          # μeV/T
    h: float = 4.135667696         # μeV·ns  (1 GHz ↔ 4.135668 μeV)
    hc: float = 1239841.98         # μeV·nm


CONSTANTS = PhysicalConstants()


def zeeman_splitting(g: float, b_tesla: float, constants: PhysicalConstants = CONSTANTS) -> float:
    """
    Desdoblamiento Zeeman δ = μ_B·g·B en μeV.

    Args:
        g: Factor g (se usa su valor absoluto; el signo lo absorbe el orden de niveles)
        b_tesla: Campo magnético (T), >= 0

    Returns:
        Energía en μeV
    """
    if b_tesla < 0:
        raise ValueError(f"B debe ser >= 0, recibido {b_tesla}")
    return constants.mu_b * abs(g) * b_tesla


def uev_to_ghz(energy_uev: float, constants: PhysicalConstants = CONSTANTS) -> float:
    return energy_uev / constants.h


def ghz_to_uev(freq_ghz: float, constants: PhysicalConstants = CONSTANTS) -> float:
    return freq_ghz * constants.h


def nm_to_uev(wavelength_nm, constants: PhysicalConstants = CONSTANTS):
    """Acepta escalares o arreglos numpy"""
    return constants.hc / np.asarray(wavelength_nm, dtype=float)


def uev_to_nm(energy_uev, constants: PhysicalConstants = CONSTANTS):
    return constants.hc / np.asarray(energy_uev, dtype=float)


def ghz_to_angular(freq_ghz: float) -> float:
    """f/2π en GHz → rad/ns"""
    return TWO_PI * freq_ghz


def angular_to_ghz(omega: float) -> float:
    """rad/ns → f/2π en GHz"""
    return omega / TWO_PI
