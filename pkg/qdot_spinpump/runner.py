"""
Orquestador de corridas: arma parámetros desde RunConfig, ejecuta el
cálculo o ajuste pedido, escribe los resultados y devuelve RunStats.
"""

import math
import time
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from qdot_spinpump.config import RunConfig
from qdot_spinpump.errors import HalfMaxNotBracketed, NotUnimodal
from qdot_spinpump.logger import get_logger
from qdot_spinpump.models import (
    RunStats,
    ScanGrid,
    SpectrumTruth,
    SystemParams,
    ZeemanSeries,
)
from qdot_spinpump import plotting
from qdot_spinpump.quantum_core import format_matrix, solve_system
from qdot_spinpump.scan_engine import (
    compare_spin_lifetime,
    extract_fwhm,
    is_unimodal,
    normalize_rows,
    scan_detuning,
    sweep_g_factor,
    sweep_power,
)
from qdot_spinpump.spectro_fit import (
    extract_fss,
    extract_g_factors,
    fit_peaks,
    fit_power_broadening,
    fit_quadruplet_series,
    fit_resonance_product,
    fit_saturation,
    remove_diamagnetic,
    select_peak_count,
    synthesize_spectrum,
)
from qdot_spinpump.spectrum_io import (
    format_profile,
    format_spectrum,
    format_sweep,
    format_table,
    read_profile,
    read_spectrum,
    read_table,
)
from qdot_spinpump.storage import OutputStore

logger = get_logger("runner")


def _fmt(value: float, digits: int = 6) -> str:
    return f"{value:.{digits}g}"


class PipelineRunner:
    """Ejecuta un comando de la CLI de punta a punta"""

    def __init__(self, config: RunConfig, store: Optional[OutputStore] = None):
        self.config = config
        self.store = store or OutputStore(Path(config.output.dir))

    # ─── Helpers ─────────────────────────────────────────────────────────

    def system_params(self) -> SystemParams:
        s = self.config.system
        return SystemParams.from_ghz(
            delta_e_ghz=s.delta_e_ghz,
            delta_h_ghz=s.delta_h_ghz,
            omega_ghz=s.omega_ghz,
            gamma_ghz=s.gamma_ghz,
            t1_ns=s.t1_ns,
        )

    def scan_grid(self) -> ScanGrid:
        g = self.config.grid
        return ScanGrid(g.start_ghz, g.stop_ghz, g.count)

    def omega_grid(self) -> np.ndarray:
        p = self.config.power
        return np.linspace(p.omega_start_ghz, p.omega_stop_ghz, p.omega_count)

    def _stats(self, command: str, start: float, summary: dict[str, str]) -> RunStats:
        stats = RunStats(
            command=command,
            duration_seconds=time.monotonic() - start,
            outputs=[str(p) for p in self.store.written],
            summary=summary,
        )
        logger.info(f"{command}: {len(stats.outputs)} archivos en {stats.duration_seconds:.2f}s")
        return stats

    # ─── Simulación ──────────────────────────────────────────────────────

    def run_scan(self, dump_state: bool = False) -> RunStats:
        """Perfil ⟨Π₄⟩ vs Δ con los parámetros de la sección system/grid"""
        start = time.monotonic()
        params = self.system_params()
        profile = scan_detuning(params, self.scan_grid())
        self.store.write_text("scan.csv", format_profile(profile))

        summary = {
            "puntos": str(len(profile)),
            "pico ⟨Π₄⟩": _fmt(profile.peak_intensity),
            "Δ del pico (GHz)": _fmt(profile.peak_detuning),
            "unimodal": str(is_unimodal(profile)),
        }
        try:
            summary["FWHM (GHz)"] = _fmt(extract_fwhm(profile).ghz)
        except (HalfMaxNotBracketed, NotUnimodal) as e:
            logger.warning(f"FWHM no disponible: {e}")

        if dump_state:
            rho = solve_system(params.with_detuning_ghz(profile.peak_detuning))
            self.store.write_text("steady_state.txt", format_matrix(rho))
        if self.config.output.plot:
            plotting.plot_profile(profile, self.store)
        return self._stats("scan", start, summary)

    def run_sweep(self, mode: str) -> RunStats:
        handlers = {
            "gfactor": self._sweep_gfactor,
            "power": self._sweep_power,
            "t1": self._sweep_t1,
        }
        if mode not in handlers:
            raise ValueError(f"Modo desconocido: {mode} (gfactor | power | t1)")
        start = time.monotonic()
        summary = handlers[mode]()
        return self._stats(f"sweep {mode}", start, summary)

    def _sweep_gfactor(self) -> dict[str, str]:
        g = self.config.gfactor
        g_h_grid = np.linspace(g.g_h_start, g.g_h_stop, g.g_h_count)
        raw = sweep_g_factor(
            self.system_params(), g.g_e, g_h_grid, g.b_tesla, self.scan_grid(),
            workers=self.config.output.workers,
        )
        normalized = normalize_rows(raw)
        self.store.write_text("gfactor_raw.csv", format_sweep(raw))
        self.store.write_text("gfactor_normalized.csv", format_sweep(normalized))

        rows = []
        for index, g_h in enumerate(raw.g_h):
            row = normalized.row(index)
            unimodal = is_unimodal(row)
            try:
                fwhm = extract_fwhm(row).ghz if unimodal else math.nan
            except HalfMaxNotBracketed:
                fwhm = math.nan
            rows.append({
                "g_h": g_h,
                "peak": float(raw.intensities[index].max()),
                "fwhm_ghz": fwhm,
                "unimodal": unimodal,
            })
        table = pd.DataFrame(rows)
        self.store.write_text("gfactor_rows.csv", format_table(table))

        if self.config.output.plot:
            plotting.plot_sweep(raw, self.store, "gfactor_raw.svg")
            plotting.plot_sweep(normalized, self.store, "gfactor_normalized.svg")

        best = int(np.argmax(raw.row_peaks()))
        return {
            "filas × columnas": f"{raw.intensities.shape[0]} × {raw.intensities.shape[1]}",
            "g_h del máximo": _fmt(raw.g_h[best]),
            "filas unimodales": f"{int(table['unimodal'].sum())}/{len(table)}",
        }

    def _sweep_power(self) -> dict[str, str]:
        sweep = sweep_power(self.system_params(), self.omega_grid(), count=self.config.grid.count)
        table = pd.DataFrame({
            "omega_ghz": sweep.omegas_ghz,
            "power_rel": sweep.power,
            "fwhm_ghz": sweep.widths_ghz,
            "fwhm_uev": sweep.widths_uev,
            "peak": sweep.peaks,
        })
        self.store.write_text("power.csv", format_table(table))
        summary = {
            "puntos": str(len(table)),
            "FWHM (μeV)": f"{_fmt(sweep.widths_uev[0], 4)} → {_fmt(sweep.widths_uev[-1], 4)}",
            "FWHM monótono": str(bool(np.all(np.diff(sweep.widths_ghz) > 0))),
        }

        saturation = broadening = None
        if len(table) >= 4:
            saturation = fit_saturation(sweep.power, sweep.peaks)
            broadening = fit_power_broadening(sweep.power, sweep.widths_ghz)
            fits = pd.DataFrame([
                {"quantity": "i_max", "value": saturation.i_max, "uncertainty": saturation.i_max_err},
                {"quantity": "p_sat_ghz2", "value": saturation.p_sat, "uncertainty": saturation.p_sat_err},
                {"quantity": "saturation_rms", "value": saturation.rms_residual, "uncertainty": 0.0},
                {"quantity": "linear_slope", "value": broadening.linear.slope, "uncertainty": broadening.linear.slope_err},
                {"quantity": "linear_r2", "value": broadening.linear.r_squared, "uncertainty": 0.0},
                {"quantity": "sqrt_w0_ghz", "value": broadening.sqrt.w0, "uncertainty": broadening.sqrt.w0_err},
                {"quantity": "sqrt_p_sat_ghz2", "value": broadening.sqrt.p_sat, "uncertainty": broadening.sqrt.p_sat_err},
                {"quantity": "natural_hwhm_ghz", "value": broadening.natural_hwhm, "uncertainty": 0.0},
                {"quantity": "drive_coefficient", "value": broadening.drive_coefficient, "uncertainty": 0.0},
            ])
            self.store.write_text("power_fits.csv", format_table(fits, {"best_broadening": broadening.best}))
            summary["I_max / P_sat"] = f"{_fmt(saturation.i_max, 4)} / {_fmt(saturation.p_sat, 4)}"
            summary["mejor modelo de ancho"] = broadening.best
        else:
            logger.warning("Menos de 4 valores de Ω: se omiten los ajustes de saturación y ancho")

        if self.config.output.plot:
            plotting.plot_power(sweep, self.store, saturation=saturation, broadening=broadening)
        return summary

    def _sweep_t1(self) -> dict[str, str]:
        base = self.system_params()
        t1_cfg = self.config.t1
        if t1_cfg.delta_h_ghz is not None:
            base = SystemParams.from_ghz(
                delta_e_ghz=self.config.system.delta_e_ghz,
                delta_h_ghz=t1_cfg.delta_h_ghz,
                omega_ghz=self.config.system.omega_ghz,
                gamma_ghz=self.config.system.gamma_ghz,
            )
        t1_values = t1_cfg.parsed_values()
        if t1_cfg.include_inverse_gamma:
            t1_values.append(1.0 / base.gamma)

        comparison = compare_spin_lifetime(base, self.omega_grid(), t1_values, self.scan_grid())
        rows = []
        for t1, curve in zip(comparison.t1_values, comparison.peaks):
            for omega, peak in zip(comparison.omegas_ghz, curve):
                rows.append({
                    "t1_ns": math.inf if t1 is None else t1,
                    "omega_ghz": omega,
                    "power_rel": omega ** 2,
                    "peak": peak,
                })
        self.store.write_text("t1.csv", format_table(pd.DataFrame(rows)))
        deviations = pd.DataFrame({
            "t1_ns": [math.inf if t is None else t for t in comparison.t1_values],
            "max_relative_deviation": comparison.max_relative_deviation,
        })
        self.store.write_text("t1_deviation.csv", format_table(deviations))

        if self.config.output.plot:
            plotting.plot_spin_lifetime(comparison, self.store)
        return {
            ("T1 = ∞" if t is None else f"T1 = {t:.4g} ns"): f"{d:.3%}"
            for t, d in zip(comparison.t1_values, comparison.max_relative_deviation)
        }

    # ─── Ajustes ─────────────────────────────────────────────────────────

    def run_fit_peaks(self, path: Path, n: Optional[int] = None) -> RunStats:
        start = time.monotonic()
        spectrum = read_spectrum(path)
        fit_cfg = self.config.fit
        n = fit_cfg.n_peaks if n is None else n
        if n == 0:
            result = select_peak_count(spectrum, [1, 2, 4], fit_cfg.f_test_alpha, fit_cfg.shared_fwhm)
        else:
            result = fit_peaks(spectrum, n, shared_fwhm=fit_cfg.shared_fwhm)

        table = pd.DataFrame([
            {
                "center_uev": p.center,
                "center_err": p.center_err,
                "fwhm_uev": p.fwhm,
                "fwhm_err": p.fwhm_err,
                "amplitude": p.amplitude,
                "amplitude_err": p.amplitude_err,
            }
            for p in result.peaks
        ])
        self.store.write_text("peaks.csv", format_table(table, {
            "background": repr(result.background),
            "residual_norm": repr(result.residual_norm),
            "ill_conditioned": str(result.ill_conditioned).lower(),
        }))
        summary = {
            f"línea {k + 1}": f"{p.center:.3f} ± {p.center_err:.3f} μeV (FWHM {p.fwhm:.2f})"
            for k, p in enumerate(result.peaks)
        }
        summary["mal condicionado"] = str(result.ill_conditioned)
        return self._stats("fit peaks", start, summary)

    def _write_series(self, series: ZeemanSeries, name: str) -> None:
        rows = []
        for point in series.points:
            centers = list(point.centers) + [math.nan] * (4 - len(point.centers))
            rows.append({
                "b_tesla": point.b_field,
                "c1_uev": centers[0],
                "c2_uev": centers[1],
                "c3_uev": centers[2],
                "c4_uev": centers[3],
                "mean_uev": point.mean_energy,
                "resolved": point.resolved,
                "merged_inner": point.merged_inner,
                "failure": point.failure or "",
            })
        self.store.write_text(name, format_table(pd.DataFrame(rows)))

    def run_fit_zeeman(self, paths: Sequence[Path]) -> RunStats:
        """Serie Zeeman → κ, E0, g_sum, g_diff; la serie se escribe aunque fallen los pasos siguientes"""
        start = time.monotonic()
        spectra = [read_spectrum(p) for p in paths]
        series = fit_quadruplet_series(spectra, self.config.fit.f_test_alpha)
        self._write_series(series, "zeeman_series.csv")

        diamagnetic = remove_diamagnetic(series)
        self._write_series(diamagnetic.corrected, "zeeman_corrected.csv")
        if self.config.output.plot:
            plotting.plot_zeeman(diamagnetic.corrected, self.store)

        result = extract_g_factors(diamagnetic)
        table = pd.DataFrame([
            {"quantity": "kappa_uev_t2", "value": result.kappa, "uncertainty": result.kappa_err},
            {"quantity": "e0_uev", "value": result.e0, "uncertainty": result.e0_err},
            {"quantity": "g_sum", "value": result.g_sum, "uncertainty": result.g_sum_err},
            {"quantity": "g_diff", "value": result.g_diff, "uncertainty": result.g_diff_err},
            {"quantity": "g_e", "value": result.g_e, "uncertainty": result.g_pair_err},
            {"quantity": "g_h", "value": result.g_h, "uncertainty": result.g_pair_err},
        ])
        self.store.write_text("gfactors.csv", format_table(table, {
            "assignment_ambiguous": str(result.assignment_ambiguous).lower(),
            "points": result.n_points,
        }))
        return self._stats("fit zeeman", start, {
            "κ (μeV/T²)": f"{result.kappa:.4f} ± {result.kappa_err:.4f}",
            "E0 (μeV)": f"{result.e0:.3f} ± {result.e0_err:.3f}",
            "g_sum": f"{result.g_sum:.4f} ± {result.g_sum_err:.4f}",
            "g_diff": f"{result.g_diff:.4f} ± {result.g_diff_err:.4f}",
            "(g_e, g_h)": f"({result.g_e:.4f}, {result.g_h:.4f})",
            "asignación ambigua": str(result.assignment_ambiguous),
        })

    def run_fit_fss(self, h_path: Path, v_path: Path) -> RunStats:
        start = time.monotonic()
        result = extract_fss(read_spectrum(h_path), read_spectrum(v_path))
        table = pd.DataFrame([{
            "fss_uev": result.fss,
            "fss_err": result.fss_err,
            "center_h_uev": result.center_h,
            "center_v_uev": result.center_v,
        }])
        self.store.write_text("fss.csv", format_table(table))
        return self._stats("fit fss", start, {"FSS (μeV)": f"{result.fss:.4f} ± {result.fss_err:.4f}"})

    def run_fit_saturation(self, path: Path) -> RunStats:
        start = time.monotonic()
        powers, intensities = read_table(path)
        result = fit_saturation(powers, intensities)
        table = pd.DataFrame([
            {"quantity": "i_max", "value": result.i_max, "uncertainty": result.i_max_err},
            {"quantity": "p_sat", "value": result.p_sat, "uncertainty": result.p_sat_err},
            {"quantity": "rms_residual", "value": result.rms_residual, "uncertainty": 0.0},
        ])
        self.store.write_text("saturation.csv", format_table(table, {"unbounded": str(result.unbounded).lower()}))
        return self._stats("fit saturation", start, {
            "I_max": f"{result.i_max:.5g} ± {result.i_max_err:.3g}",
            "P_sat": f"{result.p_sat:.5g} ± {result.p_sat_err:.3g}",
            "no acotada": str(result.unbounded),
        })

    def run_fit_broadening(self, path: Path) -> RunStats:
        start = time.monotonic()
        powers, widths = read_table(path)
        result = fit_power_broadening(powers, widths)
        table = pd.DataFrame([
            {"model": "linear", "param": "intercept", "value": result.linear.intercept, "uncertainty": result.linear.intercept_err},
            {"model": "linear", "param": "slope", "value": result.linear.slope, "uncertainty": result.linear.slope_err},
            {"model": "linear", "param": "residual_norm", "value": result.linear.residual_norm, "uncertainty": 0.0},
            {"model": "linear", "param": "r_squared", "value": result.linear.r_squared, "uncertainty": 0.0},
            {"model": "sqrt", "param": "w0", "value": result.sqrt.w0, "uncertainty": result.sqrt.w0_err},
            {"model": "sqrt", "param": "p_sat", "value": result.sqrt.p_sat, "uncertainty": result.sqrt.p_sat_err},
            {"model": "sqrt", "param": "residual_norm", "value": result.sqrt.residual_norm, "uncertainty": 0.0},
            {"model": "sqrt", "param": "natural_hwhm", "value": result.natural_hwhm, "uncertainty": 0.0},
            {"model": "sqrt", "param": "drive_coefficient", "value": result.drive_coefficient, "uncertainty": 0.0},
        ])
        self.store.write_text("broadening.csv", format_table(table, {"best": result.best}))
        return self._stats("fit broadening", start, {
            "lineal": f"w = {result.linear.intercept:.4g} + {result.linear.slope:.4g}·P (R²={result.linear.r_squared:.4f})",
            "raíz": f"w0 = {result.sqrt.w0:.4g}, P_sat = {result.sqrt.p_sat:.4g}",
            "mejor": result.best,
        })

    def run_fit_resonance(self, path: Path, splitting_ghz: Optional[float] = None) -> RunStats:
        start = time.monotonic()
        splitting = self.config.fit.splitting_ghz if splitting_ghz is None else splitting_ghz
        result = fit_resonance_product(read_profile(path), splitting)
        rows = []
        for fit in (result.product, result.sum):
            rows.append({
                "model": fit.model,
                "amplitudes": " ".join(repr(a) for a in fit.amplitudes),
                "splitting_ghz": fit.splitting_ghz,
                "hwhm_ghz": fit.hwhm_ghz,
                "residual_norm": fit.residual_norm,
            })
        self.store.write_text("resonance.csv", format_table(pd.DataFrame(rows), {
            "splitting_ghz": repr(float(splitting)),
            "product_preferred": str(result.product_preferred).lower(),
        }))
        return self._stats("fit resonance", start, {
            "s producto (GHz)": f"{result.product.splitting_ghz:.4f}",
            "residuo producto": f"{result.product.residual_norm:.4e}",
            "residuo suma": f"{result.sum.residual_norm:.4e}",
            "producto preferido": str(result.product_preferred),
        })

    # ─── Datos sintéticos ────────────────────────────────────────────────

    def run_synth(self) -> RunStats:
        """Un archivo por (B, polarización), determinista para una semilla"""
        start = time.monotonic()
        s = self.config.synth
        polarizations = ["H", "V"] if s.polarizations == "HV" else ["U"]

        index = 0
        for b_field in s.b_values():
            for pol in polarizations:
                truth = SpectrumTruth(
                    e0=s.e0_uev,
                    kappa=s.kappa_uev_t2,
                    g_e=s.g_e,
                    g_h=s.g_h,
                    b_field=b_field,
                    linewidth=s.linewidth_uev,
                    amplitude=s.amplitude,
                    polarization=pol,
                    background=s.background,
                    fss=s.fss_uev,
                    step=s.step_uev,
                )
                spectrum = synthesize_spectrum(truth, noise=s.noise, seed=(s.seed, index))
                extra = {
                    "truth.e0_uev": repr(s.e0_uev),
                    "truth.kappa_uev_t2": repr(s.kappa_uev_t2),
                    "truth.g_e": repr(s.g_e),
                    "truth.g_h": repr(s.g_h),
                    "truth.linewidth_uev": repr(s.linewidth_uev),
                    "truth.fss_uev": repr(s.fss_uev),
                    "noise": s.noise,
                    "seed": s.seed,
                }
                self.store.write_text(f"spectrum_B{b_field:g}T_{pol}.csv", format_spectrum(spectrum, extra))
                index += 1

        return self._stats("synth", start, {
            "archivos": str(index),
            "campos (T)": ", ".join(f"{b:g}" for b in s.b_values()),
            "ruido": s.noise,
        })

