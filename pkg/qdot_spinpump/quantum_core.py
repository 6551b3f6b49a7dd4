"""
Núcleo cuántico: Hamiltoniano en el marco rotante, operadores de colapso,
Liouvilliano vectorizado y estado estacionario del sistema doble-Λ.

Convención de vectorización: columna mayor (vec(AXB) = (Bᵀ⊗A)·vec(X)).
Base ordenada: |1⟩=|↓⟩, |2⟩=|↑⟩, |3⟩ trión inferior, |4⟩ trión superior.
"""

from typing import Iterable, Optional, Union

import numpy as np

from qdot_spinpump.config import Config
from qdot_spinpump.errors import DegenerateSteadyState, NoConvergence
from qdot_spinpump.logger import get_logger
from qdot_spinpump.models import CollapseSet, DensityMatrix, SystemParams

logger = get_logger("quantum_core")

N_LEVELS = 4

MatrixLike = Union[np.ndarray, DensityMatrix]


def _sigma(i: int, j: int) -> np.ndarray:
    """σ_ij = |i⟩⟨j| con índices 1..4"""
    op = np.zeros((N_LEVELS, N_LEVELS), dtype=complex)
    op[i - 1, j - 1] = 1.0
    return op


def _check_params(p: SystemParams) -> None:
    errors = p.validate()
    if errors:
        raise ValueError("; ".join(errors))


def _vec(matrix: np.ndarray) -> np.ndarray:
    return np.asarray(matrix, dtype=complex).reshape(-1, order="F")


def _unvec(vector: np.ndarray) -> np.ndarray:
    dim = int(round(np.sqrt(vector.size)))
    return vector.reshape((dim, dim), order="F")


def _entries(rho: MatrixLike) -> np.ndarray:
    return rho.entries if isinstance(rho, DensityMatrix) else np.asarray(rho)


# ─── Constructores ───────────────────────────────────────────────────────

def build_rotating_hamiltonian(p: SystemParams) -> np.ndarray:
    """
    H̃ = diag(−δ_h/2, δ_h/2, −Δ−δ_e/2, −Δ+δ_e/2) + Ω(σ₁₃+σ₃₁+σ₂₄+σ₄₂).

    El generador del marco es ω_l(Π₃+Π₄), por lo que solo aparece Δ.
    La amplitud del drive es Ω (frecuencia de Rabi de dos niveles 2Ω).

    Returns:
        Matriz real simétrica 4×4 (rad/ns)
    """
    _check_params(p)
    hamiltonian = np.diag([
        -p.delta_h / 2,
        p.delta_h / 2,
        -p.laser_detuning - p.delta_e / 2,
        -p.laser_detuning + p.delta_e / 2,
    ]).astype(float)
    hamiltonian[0, 2] = hamiltonian[2, 0] = p.rabi
    hamiltonian[1, 3] = hamiltonian[3, 1] = p.rabi
    return hamiltonian


def build_collapse_operators(p: SystemParams) -> CollapseSet:
    """
    Cuatro canales radiativos √γ·σ₁₃, √γ·σ₂₃, √γ·σ₁₄, √γ·σ₂₄ y, si hay T1,
    dos canales de spin-flip √(1/(2T1))·σ₁₂ y √(1/(2T1))·σ₂₁.
    """
    _check_params(p)
    radiative = np.sqrt(p.gamma)
    operators = [
        radiative * _sigma(1, 3),
        radiative * _sigma(2, 3),
        radiative * _sigma(1, 4),
        radiative * _sigma(2, 4),
    ]
    if p.t1_spin is not None:
        flip = np.sqrt(1.0 / (2.0 * p.t1_spin))
        operators += [flip * _sigma(1, 2), flip * _sigma(2, 1)]
    return CollapseSet(tuple(operators))


def build_liouvillian(hamiltonian: np.ndarray, collapse: Iterable[np.ndarray]) -> np.ndarray:
    """
    L = −i(I⊗H − Hᵀ⊗I) + Σ_j [c̄_j⊗c_j − ½ I⊗c_j†c_j − ½ (c_j†c_j)ᵀ⊗I]

    Returns:
        Matriz compleja (d²×d²) que actúa sobre vec(ρ) en orden columna
    """
    h = np.asarray(hamiltonian, dtype=complex)
    dim = h.shape[0]
    identity = np.eye(dim)

    liouvillian = -1j * (np.kron(identity, h) - np.kron(h.T, identity))
    for c in collapse:
        c = np.asarray(c, dtype=complex)
        cdc = c.conj().T @ c
        liouvillian += (
            np.kron(c.conj(), c)
            - 0.5 * np.kron(identity, cdc)
            - 0.5 * np.kron(cdc.T, identity)
        )
    return liouvillian


def build_system_liouvillian(p: SystemParams) -> np.ndarray:
    return build_liouvillian(build_rotating_hamiltonian(p), build_collapse_operators(p))


# ─── Estado estacionario ─────────────────────────────────────────────────

def null_space_dimension(liouvillian: np.ndarray, rtol: Optional[float] = None) -> int:
    """Cuenta valores singulares <= rtol·‖L‖₂"""
    rtol = Config.RANK_RTOL if rtol is None else rtol
    singular = np.linalg.svd(np.asarray(liouvillian, dtype=complex), compute_uv=False)
    if singular[0] == 0:
        return singular.size
    return int(np.sum(singular <= rtol * singular[0]))


def steady_state(liouvillian: np.ndarray, replaced_level: int = 1) -> DensityMatrix:
    """
    Resuelve L·vec(ρ) = 0 con Tr ρ = 1.

    Reemplaza la ecuación de la población `replaced_level` por la restricción
    de traza (la suma de las filas diagonales de L es cero, así que cualquiera
    de ellas es redundante) y resuelve el sistema denso.

    Raises:
        DegenerateSteadyState: si el núcleo de L tiene dimensión > 1
    """
    matrix = np.asarray(liouvillian, dtype=complex)
    dim = int(round(np.sqrt(matrix.shape[0])))
    if not 1 <= replaced_level <= dim:
        raise IndexError(f"Nivel fuera de rango: {replaced_level}")

    kernel = null_space_dimension(matrix)
    if kernel > 1:
        raise DegenerateSteadyState(kernel)

    row = (replaced_level - 1) * (dim + 1)
    system = matrix.copy()
    system[row, :] = _vec(np.eye(dim))
    rhs = np.zeros(dim * dim, dtype=complex)
    rhs[row] = 1.0

    rho = _unvec(np.linalg.solve(system, rhs))
    rho = 0.5 * (rho + rho.conj().T)
    return DensityMatrix(rho)


def solve_system(p: SystemParams) -> DensityMatrix:
    """Estado estacionario directo desde los parámetros físicos"""
    return steady_state(build_system_liouvillian(p))


# ─── Oráculo de evolución temporal ───────────────────────────────────────

def lindblad_rhs(hamiltonian: np.ndarray, collapse: Iterable[np.ndarray], rho: np.ndarray) -> np.ndarray:
    """dρ/dt = −i[H,ρ] + Σ_j (c_j ρ c_j† − ½{c_j†c_j, ρ}) en forma matricial"""
    h = np.asarray(hamiltonian, dtype=complex)
    drho = -1j * (h @ rho - rho @ h)
    for c in collapse:
        c = np.asarray(c, dtype=complex)
        cd = c.conj().T
        cdc = cd @ c
        drho += c @ rho @ cd - 0.5 * (cdc @ rho + rho @ cdc)
    return drho


def _rk4_increment(hamiltonian: np.ndarray, collapse: CollapseSet, rho: np.ndarray, dt: float) -> np.ndarray:
    """Incremento de un paso RK4 clásico: ρ(t+dt) = ρ + (k₁ + 2k₂ + 2k₃ + k₄)/6"""
    k1 = dt * lindblad_rhs(hamiltonian, collapse, rho)
    k2 = dt * lindblad_rhs(hamiltonian, collapse, rho + 0.5 * k1)
    k3 = dt * lindblad_rhs(hamiltonian, collapse, rho + 0.5 * k2)
    k4 = dt * lindblad_rhs(hamiltonian, collapse, rho + k3)
    return (k1 + 2 * k2 + 2 * k3 + k4) / 6


def _rk4_increment_matrix(hamiltonian: np.ndarray, collapse: CollapseSet, dt: float) -> np.ndarray:
    """
    Matriz D con vec(Δρ) = D·vec(ρ) para un paso RK4, armada columna por
    columna aplicando el paso a la base |i⟩⟨j|.
    """
    dim = np.asarray(hamiltonian).shape[0]
    increment = np.empty((dim * dim, dim * dim), dtype=complex)
    for k in range(dim * dim):
        basis = np.zeros(dim * dim, dtype=complex)
        basis[k] = 1.0
        increment[:, k] = _vec(_rk4_increment(hamiltonian, collapse, _unvec(basis), dt))
    return increment


def default_time_step(hamiltonian: np.ndarray, collapse: CollapseSet) -> float:
    # Cota del generador: ‖−i[H,·]‖ <= 2‖H‖ y cada disipador <= 2‖c†c‖
    scale = 2 * np.linalg.norm(hamiltonian, 2) + sum(
        2 * np.linalg.norm(np.asarray(c).conj().T @ np.asarray(c), 2) for c in collapse
    )
    return Config.ORACLE_STEP_SAFETY / max(float(scale), collapse.total_rate())


def evolve_to_steady_state(
    hamiltonian: np.ndarray,
    collapse: CollapseSet,
    rho0: MatrixLike,
    dt: Optional[float] = None,
    tol: Optional[float] = None,
    max_steps: Optional[int] = None,
) -> DensityMatrix:
    """
    Integra la ecuación maestra en forma matricial con RK4 clásico hasta que
    ‖dρ/dt‖_max < tol. No usa el Liouvilliano vectorizado del solver directo.

    Un paso RK4 de una ecuación lineal es un mapa fijo ρ → ρ + D(ρ); se avanza
    en bloques de 2^k pasos elevando ese mapa al cuadrado (D₂ₙ = 2Dₙ + Dₙ²),
    lo que da la misma trayectoria muestreada en t = 2^k·dt. El estado
    muestreado se normaliza a traza 1.

    Args:
        hamiltonian: H̃ (4×4)
        collapse: Operadores de colapso
        rho0: Estado inicial
        dt: Paso (ns); por defecto ORACLE_STEP_SAFETY / escala más rápida
        tol: Tolerancia del residuo y del cambio entre bloques
        max_steps: Máximo de pasos RK4

    Raises:
        NoConvergence: si se agotan los pasos sin alcanzar la tolerancia
    """
    tol = Config.ORACLE_TOL if tol is None else tol
    max_steps = Config.ORACLE_MAX_STEPS if max_steps is None else max_steps
    if not isinstance(collapse, CollapseSet):
        collapse = CollapseSet(tuple(collapse))

    scale = max(float(np.max(np.abs(hamiltonian))), max((float(np.max(np.abs(c))) ** 2 for c in collapse), default=0.0))
    if dt is None:
        dt = default_time_step(hamiltonian, collapse)
    elif dt * scale >= Config.ORACLE_MAX_STEP_PRODUCT:
        raise ValueError(
            f"dt={dt} no resuelve la escala más rápida ({scale:.4g} rad/ns)"
        )

    start = _vec(_entries(rho0))
    increment = _rk4_increment_matrix(hamiltonian, collapse, dt)
    steps = 1
    previous: Optional[np.ndarray] = None

    while True:
        rho = _unvec(start + increment @ start)
        rho = 0.5 * (rho + rho.conj().T)
        rho = rho / np.trace(rho).real

        residual = float(np.max(np.abs(lindblad_rhs(hamiltonian, collapse, rho))))
        change = np.inf if previous is None else float(np.max(np.abs(rho - previous)))
        if residual < tol and change < tol:
            logger.debug(f"Oráculo convergió: {steps} pasos, residuo {residual:.2e}")
            return DensityMatrix(rho)

        if steps >= max_steps:
            raise NoConvergence(
                f"Sin convergencia tras {steps} pasos (residuo {residual:.3e}, tol {tol:.1e})"
            )

        increment = 2 * increment + increment @ increment
        steps *= 2
        previous = rho


# ─── Observables y volcado ───────────────────────────────────────────────

def population(rho: MatrixLike, level: int) -> float:
    """⟨Π_level⟩ para level en 1..4"""
    entries = _entries(rho)
    if not 1 <= level <= entries.shape[0]:
        raise IndexError(f"Nivel fuera de rango: {level}")
    return float(np.real(entries[level - 1, level - 1]))


def format_matrix(matrix: MatrixLike) -> str:
    """Texto plano: una fila por línea, pares 're+imj' separados por espacio"""
    rows = []
    for row in np.asarray(_entries(matrix), dtype=complex):
        rows.append(" ".join(f"{z.real:.17g}{z.imag:+.17g}j" for z in row))
    return "\n".join(rows) + "\n"


def parse_matrix(text: str) -> np.ndarray:
    rows = [[complex(token) for token in line.split()] for line in text.splitlines() if line.strip()]
    if not rows or any(len(r) != len(rows) for r in rows):
        raise ValueError("El volcado no es una matriz cuadrada")
    return np.array(rows, dtype=complex)
