"""
Jerarquía de excepciones del toolkit.
Cada familia corresponde a un código de salida de la CLI.
"""


class SpinPumpError(Exception):
    """Base de todos los errores del paquete"""

    exit_code: int = 1


class ConfigError(SpinPumpError):
    """Configuración inválida o archivo de entrada inexistente"""

    exit_code = 2

    def __init__(self, errors: list[str] | str):
        self.errors = [errors] if isinstance(errors, str) else list(errors)
        super().__init__("; ".join(self.errors))


# ─── Solver / barridos (exit 3) ──────────────────────────────────────────

class SolverError(SpinPumpError):
    exit_code = 3


class DegenerateSteadyState(SolverError):
    """El Liouvilliano tiene más de un estado estacionario"""

    def __init__(self, dimension: int):
        self.dimension = dimension
        super().__init__(
            f"Estado estacionario degenerado: dimensión del núcleo = {dimension}"
        )


class NoConvergence(SolverError):
    """La evolución temporal no alcanzó la tolerancia"""


class GridTooNarrow(SolverError):
    """El perfil no cae bajo la mitad del máximo dentro de la grilla"""


class NotUnimodal(SolverError):
    pass


class HalfMaxNotBracketed(SolverError):
    pass


class ZeroRow(SolverError):
    """Una fila del barrido 2D tiene máximo cero"""


# ─── Ajustes (exit 4) ────────────────────────────────────────────────────

class FitError(SpinPumpError):
    exit_code = 4


class FitNoConvergence(FitError):
    """El optimizador agotó el máximo de iteraciones"""


class InsufficientPoints(FitError):
    pass


class ZeroField(FitError):
    """Serie Zeeman sin ningún punto resuelto con B > 0"""


class NegativeSlope(FitError):
    """Pendiente Zeeman no física (g_sum <= 0 o g_diff > g_sum)"""
