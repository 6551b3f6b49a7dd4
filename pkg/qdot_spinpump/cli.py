"""
Interfaz de línea de comandos (CLI) de qdot_spinpump.
Usa Typer; los mensajes y tablas de rich van a stderr, los resultados a archivos.

Códigos de salida: 0 ok, 2 configuración/uso, 3 solver, 4 ajuste.
"""

import sys
from enum import Enum
from pathlib import Path
from typing import Any, Callable, List, Optional

import typer
from rich.console import Console
from rich.table import Table

from qdot_spinpump.config import Config, RunConfig, describe_keys
from qdot_spinpump.errors import ConfigError, SpinPumpError
from qdot_spinpump.logger import get_logger, setup_logger
from qdot_spinpump.models import RunStats
from qdot_spinpump.runner import PipelineRunner

# Inicializar app de Typer
app = typer.Typer(
    name="qdot-spinpump",
    help="Simulación de bombeo/rebombeo de espín en un punto cuántico y reducción de espectros",
    add_completion=False,
)
fit_app = typer.Typer(help="Ajustes sobre espectros y tablas medidas o sintéticas", add_completion=False)
app.add_typer(fit_app, name="fit")

console = Console(stderr=True)
logger = get_logger("cli")


class SweepMode(str, Enum):
    gfactor = "gfactor"
    power = "power"
    t1 = "t1"


# ─── Opciones comunes ────────────────────────────────────────────────────

CONFIG_OPTION = typer.Option(None, "--config", "-c", help="Archivo seccion.clave=valor")
DUMP_OPTION = typer.Option(False, "--dump-config", help="Imprime la configuración resuelta y sale")
OUT_OPTION = typer.Option(None, "--out", "-o", help="Directorio de salida (output.dir)")
PLOT_OPTION = typer.Option(None, "--plot/--no-plot", help="Escribir figuras SVG (output.plot)")
VERBOSE_OPTION = typer.Option(False, "--verbose", "-v", help="Modo verbose (DEBUG)")


def _load_config(config_path: Optional[Path], overrides: dict[str, Any], verbose: bool) -> RunConfig:
    config = RunConfig.load(config_path).with_overrides(overrides)
    setup_logger(
        level="DEBUG" if verbose else config.log.level,
        log_file=Config.get_log_path(config.log.file),
    )
    return config


def _print_stats(stats: RunStats) -> None:
    table = Table(title=f"Resultado: {stats.command}", show_header=True)
    table.add_column("Cantidad", style="cyan")
    table.add_column("Valor", style="white")
    for name, value in stats.summary.items():
        table.add_row(name, value)
    console.print(table)

    console.print(f"[green]Completado en {stats.duration_seconds:.2f}s[/green]")
    for path in stats.outputs:
        console.print(f"  - {path}")


def _execute(
    config_path: Optional[Path],
    overrides: dict[str, Any],
    verbose: bool,
    dump_config: bool,
    action: Callable[[PipelineRunner], RunStats],
) -> None:
    """Carga la configuración, ejecuta la acción y mapea errores a códigos de salida"""
    try:
        config = _load_config(config_path, overrides, verbose)
        if dump_config:
            typer.echo(config.dump(), nl=False)
            return
        stats = action(PipelineRunner(config))

    except ConfigError as e:
        console.print("[red]Errores de configuración:[/red]")
        for error in e.errors:
            console.print(f"  - {error}")
        sys.exit(e.exit_code)

    except SpinPumpError as e:
        console.print(f"[red]{type(e).__name__}: {e}[/red]")
        logger.debug(f"Error en CLI: {e}", exc_info=True)
        sys.exit(e.exit_code)

    except ValueError as e:
        console.print(f"[red]Error de uso: {e}[/red]")
        logger.debug(f"Error en CLI: {e}", exc_info=True)
        sys.exit(ConfigError.exit_code)

    except KeyboardInterrupt:
        console.print("\n[yellow]Interrumpido por usuario[/yellow]")
        sys.exit(130)

    _print_stats(stats)


# ─── Simulación ──────────────────────────────────────────────────────────

@app.command(epilog=describe_keys("system", "grid", "output", "log"))
def scan(
    config: Optional[Path] = CONFIG_OPTION,
    omega_ghz: Optional[float] = typer.Option(None, "--omega-ghz", help="Ω/2π en GHz (system.omega_ghz)"),
    gamma_ghz: Optional[float] = typer.Option(None, "--gamma-ghz", help="γ/2π en GHz (system.gamma_ghz)"),
    delta_e_ghz: Optional[float] = typer.Option(None, "--delta-e-ghz", help="δ_e/2π en GHz"),
    delta_h_ghz: Optional[float] = typer.Option(None, "--delta-h-ghz", help="δ_h/2π en GHz"),
    t1_ns: Optional[float] = typer.Option(None, "--t1-ns", help="T1 del espín en ns"),
    dump_state: bool = typer.Option(False, "--dump-state", help="Escribe ρ estacionario en el máximo"),
    out: Optional[str] = OUT_OPTION,
    plot: Optional[bool] = PLOT_OPTION,
    dump_config: bool = DUMP_OPTION,
    verbose: bool = VERBOSE_OPTION,
):
    """
    Perfil de resonancia ⟨Π₄⟩ vs desintonía del láser (scan.csv).
    """
    overrides = {
        "system.omega_ghz": omega_ghz,
        "system.gamma_ghz": gamma_ghz,
        "system.delta_e_ghz": delta_e_ghz,
        "system.delta_h_ghz": delta_h_ghz,
        "system.t1_ns": t1_ns,
        "output.dir": out,
        "output.plot": plot,
    }
    _execute(config, overrides, verbose, dump_config, lambda runner: runner.run_scan(dump_state=dump_state))


@app.command(epilog=describe_keys("system", "grid", "gfactor", "power", "t1", "output", "log"))
def sweep(
    mode: SweepMode = typer.Option(SweepMode.gfactor, "--mode", "-m", help="gfactor | power | t1"),
    config: Optional[Path] = CONFIG_OPTION,
    workers: Optional[int] = typer.Option(None, "--workers", help="Procesos para el barrido g_h"),
    g_h_count: Optional[int] = typer.Option(None, "--g-h-count", help="Filas g_h (gfactor.g_h_count)"),
    omega_count: Optional[int] = typer.Option(None, "--omega-count", help="Valores de Ω (power.omega_count)"),
    out: Optional[str] = OUT_OPTION,
    plot: Optional[bool] = PLOT_OPTION,
    dump_config: bool = DUMP_OPTION,
    verbose: bool = VERBOSE_OPTION,
):
    """
    Barridos 2D en g_h, en potencia de drive o en T1 del espín.
    """
    overrides = {
        "output.workers": workers,
        "gfactor.g_h_count": g_h_count,
        "power.omega_count": omega_count,
        "output.dir": out,
        "output.plot": plot,
    }
    _execute(config, overrides, verbose, dump_config, lambda runner: runner.run_sweep(mode.value))


@app.command(epilog=describe_keys("synth", "output", "log"))
def synth(
    config: Optional[Path] = CONFIG_OPTION,
    seed: Optional[int] = typer.Option(None, "--seed", help="Semilla (synth.seed)"),
    noise: Optional[str] = typer.Option(None, "--noise", help="poisson | none (synth.noise)"),
    polarizations: Optional[str] = typer.Option(None, "--polarizations", help="HV | U"),
    out: Optional[str] = OUT_OPTION,
    dump_config: bool = DUMP_OPTION,
    verbose: bool = VERBOSE_OPTION,
):
    """
    Genera espectros sintéticos, un CSV por (B, polarización).
    """
    overrides = {
        "synth.seed": seed,
        "synth.noise": noise,
        "synth.polarizations": polarizations,
        "output.dir": out,
    }
    _execute(config, overrides, verbose, dump_config, lambda runner: runner.run_synth())


# ─── Ajustes ─────────────────────────────────────────────────────────────

@fit_app.command("peaks", epilog=describe_keys("fit", "output", "log"))
def fit_peaks_command(
    spectrum: Path = typer.Argument(..., help="CSV del espectro"),
    n: Optional[int] = typer.Option(None, "--n", help="Número de líneas (0 = automático)"),
    config: Optional[Path] = CONFIG_OPTION,
    out: Optional[str] = OUT_OPTION,
    dump_config: bool = DUMP_OPTION,
    verbose: bool = VERBOSE_OPTION,
):
    """Ajuste multi-Lorentziano de un espectro (peaks.csv)."""
    overrides = {"fit.n_peaks": n, "output.dir": out}
    _execute(config, overrides, verbose, dump_config, lambda runner: runner.run_fit_peaks(spectrum))


@fit_app.command("zeeman", epilog=describe_keys("fit", "output", "log"))
def fit_zeeman_command(
    spectra: List[Path] = typer.Argument(..., help="CSVs de la serie en B (H/V o no polarizados)"),
    config: Optional[Path] = CONFIG_OPTION,
    out: Optional[str] = OUT_OPTION,
    plot: Optional[bool] = PLOT_OPTION,
    dump_config: bool = DUMP_OPTION,
    verbose: bool = VERBOSE_OPTION,
):
    """Serie Zeeman: corrección diamagnética y factores g (gfactors.csv)."""
    overrides = {"output.dir": out, "output.plot": plot}
    _execute(config, overrides, verbose, dump_config, lambda runner: runner.run_fit_zeeman(spectra))


@fit_app.command("fss", epilog=describe_keys("output", "log"))
def fit_fss_command(
    h_spectrum: Path = typer.Argument(..., help="Espectro H a B=0"),
    v_spectrum: Path = typer.Argument(..., help="Espectro V a B=0"),
    config: Optional[Path] = CONFIG_OPTION,
    out: Optional[str] = OUT_OPTION,
    dump_config: bool = DUMP_OPTION,
    verbose: bool = VERBOSE_OPTION,
):
    """Fine structure splitting entre las polarizaciones H y V (fss.csv)."""
    overrides = {"output.dir": out}
    _execute(config, overrides, verbose, dump_config, lambda runner: runner.run_fit_fss(h_spectrum, v_spectrum))


@fit_app.command("saturation", epilog=describe_keys("output", "log"))
def fit_saturation_command(
    table: Path = typer.Argument(..., help="CSV (potencia, intensidad)"),
    config: Optional[Path] = CONFIG_OPTION,
    out: Optional[str] = OUT_OPTION,
    dump_config: bool = DUMP_OPTION,
    verbose: bool = VERBOSE_OPTION,
):
    """Ajuste I_max·P/(P+P_sat) (saturation.csv)."""
    _execute(config, {"output.dir": out}, verbose, dump_config, lambda runner: runner.run_fit_saturation(table))


@fit_app.command("broadening", epilog=describe_keys("output", "log"))
def fit_broadening_command(
    table: Path = typer.Argument(..., help="CSV (potencia, ancho)"),
    config: Optional[Path] = CONFIG_OPTION,
    out: Optional[str] = OUT_OPTION,
    dump_config: bool = DUMP_OPTION,
    verbose: bool = VERBOSE_OPTION,
):
    """Modelos lineal y raíz cuadrada del ancho vs potencia (broadening.csv)."""
    _execute(config, {"output.dir": out}, verbose, dump_config, lambda runner: runner.run_fit_broadening(table))


@fit_app.command("resonance", epilog=describe_keys("fit", "output", "log"))
def fit_resonance_command(
    profile: Path = typer.Argument(..., help="CSV de perfil (detuning_ghz, intensity)"),
    splitting_ghz: Optional[float] = typer.Option(None, "--splitting-ghz", help="s/2π en GHz (fit.splitting_ghz)"),
    config: Optional[Path] = CONFIG_OPTION,
    out: Optional[str] = OUT_OPTION,
    dump_config: bool = DUMP_OPTION,
    verbose: bool = VERBOSE_OPTION,
):
    """Producto vs suma de Lorentzianas desplazadas (resonance.csv)."""
    overrides = {"fit.splitting_ghz": splitting_ghz, "output.dir": out}
    _execute(config, overrides, verbose, dump_config, lambda runner: runner.run_fit_resonance(profile))


# ─── Utilidades ──────────────────────────────────────────────────────────

@app.command(name="config-check")
def config_check(
    config: Optional[Path] = CONFIG_OPTION,
):
    """
    Verifica la configuración numérica y el archivo de corrida.
    """
    console.print("[cyan]Verificando configuración...[/cyan]\n")
    errors = Config.validate()

    table = Table(title="Configuración numérica", show_header=True)
    table.add_column("Variable", style="cyan")
    table.add_column("Valor", style="white")
    for name in (
        "RANK_RTOL", "ORACLE_STEP_SAFETY", "ORACLE_TOL", "SCAN_MAX_WIDENINGS",
        "FIT_MAX_ITERATIONS", "FIT_XTOL", "FIT_COND_LIMIT", "F_TEST_ALPHA", "LOG_LEVEL",
    ):
        table.add_row(name, str(getattr(Config, name)))
    console.print(table)

    try:
        run_config = RunConfig.load(config)
    except ConfigError as e:
        errors.extend(e.errors)
    else:
        console.print(f"\nArchivo de corrida: {config or '(valores por defecto)'} [green]OK[/green]")
        logger.debug(run_config.dump())

    if errors:
        console.print("\n[red]Errores de validación:[/red]")
        for error in errors:
            console.print(f"  - {error}")
        sys.exit(ConfigError.exit_code)
    console.print("\n[green]Configuración válida[/green]")


@app.command()
def version():
    """Muestra la versión del paquete."""
    from qdot_spinpump import __version__
    console.print(f"qdot-spinpump v{__version__}")


def main():
    """Punto de entrada principal"""
    app()


if __name__ == "__main__":
    main()
