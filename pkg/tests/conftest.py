"""Fixtures compartidos"""

import numpy as np
import pytest

from qdot_spinpump.models import SpectrumTruth, SystemParams


@pytest.fixture
def fig4_params() -> SystemParams:
    """δ_e = δ_h = 23.8 GHz, Ω = 1.0 GHz, γ = 0.25 GHz, Δ = 0"""
    return SystemParams.from_ghz(delta_e_ghz=23.8, delta_h_ghz=23.8, omega_ghz=1.0, gamma_ghz=0.25)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)


def random_params(rng: np.random.Generator) -> SystemParams:
    """
    Parámetros aleatorios en los rangos de los tests de oráculo:
    Ω/2π ∈ (0.05, 2.85], γ/2π ∈ [0.05, 1], δ_e/2π y δ_h/2π ∈ [0, 30],
    Δ/2π ∈ [−3, 3] (GHz).
    """
    return SystemParams.from_ghz(
        delta_e_ghz=rng.uniform(0.0, 30.0),
        delta_h_ghz=rng.uniform(0.0, 30.0),
        omega_ghz=2.85 - rng.uniform(0.0, 2.8),
        gamma_ghz=rng.uniform(0.05, 1.0),
        detuning_ghz=rng.uniform(-3.0, 3.0),
    )


def make_truth(b_field: float, polarization: str, **overrides) -> SpectrumTruth:
    values = dict(
        e0=1393000.0,
        kappa=5.07,
        g_e=0.34,
        g_h=0.30,
        b_field=b_field,
        linewidth=22.0,
        amplitude=900.0,
        polarization=polarization,
        fss=1.8,
    )
    values.update(overrides)
    return SpectrumTruth(**values)
