"""
Figuras SVG de los resultados (perfiles, barridos g_h, potencia, T1, Zeeman).
Las figuras se escriben de forma atómica a través de OutputStore.
"""

from typing import Optional

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from qdot_spinpump.logger import get_logger  # noqa: E402
from qdot_spinpump.models import (  # noqa: E402
    BroadeningFit,
    PowerSweep,
    ResonanceProfile,
    SaturationFit,
    SpinLifetimeComparison,
    SweepResult2D,
    ZeemanSeries,
)
from qdot_spinpump.storage import OutputStore  # noqa: E402
from qdot_spinpump.units import ghz_to_uev  # noqa: E402

logger = get_logger("plotting")

# SVG reproducible: ids fijos y sin fecha
matplotlib.rcParams["svg.hashsalt"] = "qdot-spinpump"


def save_figure(fig, store: OutputStore, name: str):
    """Guarda la figura como SVG y la cierra"""
    tmp_path = store.reserve(name)
    fig.tight_layout()
    fig.savefig(tmp_path, format="svg", metadata={"Date": None})
    plt.close(fig)
    path = store.commit(tmp_path, name)
    logger.info(f"Figura guardada en {path}")
    return path


def plot_profile(profile: ResonanceProfile, store: OutputStore, name: str = "scan.svg"):
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(profile.detunings, profile.intensities, color="black", linewidth=1.5)
    ax.set_xlabel("Desintonía Δ/2π (GHz)")
    ax.set_ylabel("⟨Π₄⟩")
    return save_figure(fig, store, name)


def plot_sweep(sweep: SweepResult2D, store: OutputStore, name: str):
    fig, ax = plt.subplots(figsize=(6, 4.5))
    mesh = ax.pcolormesh(sweep.detunings, sweep.g_h, sweep.intensities, shading="nearest", cmap="viridis")
    fig.colorbar(mesh, ax=ax, label="⟨Π₄⟩ normalizado" if sweep.normalized else "⟨Π₄⟩")
    if sweep.g_e is not None:
        ax.axhline(sweep.g_e, color="white", linestyle="--", linewidth=0.8)
    ax.set_xlabel("Desintonía Δ/2π (GHz)")
    ax.set_ylabel("g_h")
    return save_figure(fig, store, name)


def plot_power(
    sweep: PowerSweep,
    store: OutputStore,
    name: str = "power.svg",
    saturation: Optional[SaturationFit] = None,
    broadening: Optional[BroadeningFit] = None,
):
    power = sweep.power
    fig, (ax_w, ax_p) = plt.subplots(1, 2, figsize=(10, 4))

    ax_w.plot(power, sweep.widths_uev, "o", color="black", markersize=4)
    if broadening is not None:
        dense = np.linspace(power.min(), power.max(), 200)
        root = broadening.sqrt.w0 * np.sqrt(1 + dense / broadening.sqrt.p_sat)
        ax_w.plot(dense, ghz_to_uev(root), color="tab:red", linewidth=1, label="w0·√(1+P/P_sat)")
        ax_w.legend()
    ax_w.set_xlabel("Potencia relativa Ω² (GHz²)")
    ax_w.set_ylabel("FWHM (μeV)")

    ax_p.plot(power, sweep.peaks, "o", color="black", markersize=4)
    if saturation is not None and not saturation.unbounded:
        dense = np.linspace(0, power.max(), 200)
        ax_p.plot(dense, saturation.i_max * dense / (dense + saturation.p_sat), color="tab:blue", linewidth=1)
    ax_p.set_xlabel("Potencia relativa Ω² (GHz²)")
    ax_p.set_ylabel("Pico ⟨Π₄⟩")
    return save_figure(fig, store, name)


def plot_spin_lifetime(comparison: SpinLifetimeComparison, store: OutputStore, name: str = "t1.svg"):
    fig, ax = plt.subplots(figsize=(6, 4))
    for t1, curve in zip(comparison.t1_values, comparison.peaks):
        label = "T1 = ∞" if t1 is None else f"T1 = {t1:.4g} ns"
        ax.plot(comparison.power, curve, marker="o", markersize=3, linewidth=1, label=label)
    ax.set_xlabel("Potencia relativa Ω² (GHz²)")
    ax.set_ylabel("Pico ⟨Π₄⟩")
    ax.legend()
    return save_figure(fig, store, name)


def plot_zeeman(series: ZeemanSeries, store: OutputStore, name: str = "zeeman.svg"):
    fig, ax = plt.subplots(figsize=(6, 4))
    for point in series.points:
        if point.failure is not None or not point.centers:
            continue
        centers = sorted(set(point.centers))
        ax.plot([point.b_field] * len(centers), centers, "o", color="black", markersize=4)
    ax.set_xlabel("B (T)")
    ax.set_ylabel("Energía corregida (μeV)")
    return save_figure(fig, store, name)
