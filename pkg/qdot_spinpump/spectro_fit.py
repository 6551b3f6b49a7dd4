"""
Reducción de datos espectroscópicos: ajuste multi-pico Lorentziano,
series Zeeman con corrección diamagnética, factores g, FSS, saturación,
ensanchamiento por potencia y modelo producto de Lorentzianas.
"""

from collections import OrderedDict
from typing import Callable, Iterable, Optional, Sequence, Union

import numpy as np
from scipy import stats
from scipy.optimize import least_squares
from scipy.signal import find_peaks, peak_widths

from qdot_spinpump.config import Config
from qdot_spinpump.errors import (
    FitError,
    FitNoConvergence,
    InsufficientPoints,
    NegativeSlope,
    NotUnimodal,
    ZeroField,
)
from qdot_spinpump.logger import get_logger
from qdot_spinpump.models import (
    BroadeningFit,
    DiamagneticFit,
    FssResult,
    GFactorResult,
    LinearBroadening,
    MultiPeakFit,
    PeakFit,
    ResonanceFit,
    ResonanceModelFit,
    ResonanceProfile,
    SaturationFit,
    SpectrumData,
    SpectrumTruth,
    SqrtBroadening,
    ZeemanPoint,
    ZeemanSeries,
)
from qdot_spinpump.scan_engine import is_unimodal
from qdot_spinpump.units import CONSTANTS, zeeman_splitting

logger = get_logger("spectro_fit")

# Fracciones del ancho usadas para separar una semilla en dos líneas
SPLIT_FRACTIONS = (0.05, 0.15, 0.3, 0.5)

# Líneas internas más cercanas que esta fracción del FWHM se reportan fusionadas
MERGE_FWHM_FRACTION = 0.05

# Arranques del cuadruplete no polarizado: separación exterior en fracciones
# del ancho de la envolvente y cociente interior/exterior
QUAD_OUTER_FRACTIONS = (0.15, 0.3, 0.45, 0.6, 0.75, 0.9, 1.05, 1.2)
QUAD_INNER_RATIOS = (0.02, 0.15, 0.3, 0.45, 0.6)

# Descentrado máximo entre los pares de un cuadruplete, en fracciones del FWHM
QUAD_SYMMETRY_FWHM_FRACTION = 0.1

Seed = tuple[float, float, float]   # (centro, fwhm, amplitud)


# ─── Modelo Lorentziano ──────────────────────────────────────────────────

def lorentzian(x: np.ndarray, center: float, fwhm: float, amplitude: float) -> np.ndarray:
    """a·h²/((x−c)² + h²) con h = fwhm/2"""
    half = fwhm / 2
    return amplitude * half ** 2 / ((x - center) ** 2 + half ** 2)


def lorentzian_sum(x: np.ndarray, peaks: Iterable[Seed], background: float = 0.0) -> np.ndarray:
    total = np.full_like(np.asarray(x, dtype=float), background)
    for center, fwhm, amplitude in peaks:
        total = total + lorentzian(x, center, fwhm, amplitude)
    return total


class _PeakModel:
    """
    Suma de n Lorentzianas + fondo constante, con jacobiano analítico.

    Vector de parámetros:
        independiente: [c₁, w₁, a₁, ..., cₙ, wₙ, aₙ, fondo]
        ancho común:   [c₁, a₁, ..., cₙ, aₙ, w, fondo]
    """

    def __init__(self, n: int, shared_fwhm: bool):
        self.n = n
        self.shared_fwhm = shared_fwhm
        self.size = (2 * n + 2) if shared_fwhm else (3 * n + 1)

    def pack(self, seeds: Sequence[Seed], background: float) -> np.ndarray:
        if self.shared_fwhm:
            width = float(np.mean([w for _, w, _ in seeds]))
            values = [v for c, _, a in seeds for v in (c, a)] + [width, background]
        else:
            values = [v for seed in seeds for v in seed] + [background]
        return np.array(values, dtype=float)

    def unpack(self, theta: np.ndarray) -> tuple[list[tuple[int, int, int]], int]:
        """Índices (centro, ancho, amplitud) de cada línea y del fondo"""
        if self.shared_fwhm:
            width = 2 * self.n
            return [(2 * k, width, 2 * k + 1) for k in range(self.n)], 2 * self.n + 1
        return [(3 * k, 3 * k + 1, 3 * k + 2) for k in range(self.n)], 3 * self.n

    def evaluate(self, theta: np.ndarray, x: np.ndarray) -> np.ndarray:
        lines, bg = self.unpack(theta)
        return lorentzian_sum(x, [(theta[c], theta[w], theta[a]) for c, w, a in lines], theta[bg])

    def jacobian(self, theta: np.ndarray, x: np.ndarray) -> np.ndarray:
        lines, bg = self.unpack(theta)
        jac = np.zeros((x.size, self.size))
        for c, w, a in lines:
            u = x - theta[c]
            half = theta[w] / 2
            denom = u ** 2 + half ** 2
            jac[:, a] += half ** 2 / denom
            jac[:, c] += theta[a] * half ** 2 * 2 * u / denom ** 2
            jac[:, w] += theta[a] * half * u ** 2 / denom ** 2
        jac[:, bg] = 1.0
        return jac


def _covariance(
    jac: np.ndarray,
    rss: float,
    dof: int,
    residuals: Optional[np.ndarray] = None,
) -> tuple[np.ndarray, bool]:
    """
    cov = s²·(JᵀJ)⁻¹ con s² = RSS/dof. Con `residuals` se usa el estimador
    sándwich (JᵀJ)⁻¹·Jᵀ diag(r²) J·(JᵀJ)⁻¹ escalado por n/dof, válido cuando
    la varianza cambia punto a punto (ruido de conteo). Si el jacobiano
    normalizado por columnas está mal condicionado se usa la pseudo-inversa.
    """
    norms = np.linalg.norm(jac, axis=0)
    safe = np.where(norms > 0, norms, 1.0)
    condition = np.linalg.cond(jac / safe) if np.all(norms > 0) else np.inf
    ill = not condition < Config.FIT_COND_LIMIT

    normal = jac.T @ jac
    inverse = np.linalg.pinv(normal) if ill else np.linalg.inv(normal)
    if dof <= 0:
        return np.zeros_like(inverse), ill
    if residuals is None:
        return (rss / dof) * inverse, ill
    meat = jac.T @ (jac * np.asarray(residuals, dtype=float)[:, None] ** 2)
    return (jac.shape[0] / dof) * inverse @ meat @ inverse, ill


def _solve(fun, jac, x0, method: str = "lm", bounds=(-np.inf, np.inf), **kwargs):
    options = dict(xtol=Config.FIT_XTOL, ftol=Config.FIT_FTOL, max_nfev=Config.FIT_MAX_ITERATIONS * (len(x0) + 1))
    options.update(kwargs)
    if method == "lm":
        return least_squares(fun, x0, jac=jac, method="lm", **options)
    return least_squares(fun, x0, jac=jac, method=method, bounds=bounds, **options)


# ─── Semillas ────────────────────────────────────────────────────────────

def _detect_seeds(x: np.ndarray, y: np.ndarray) -> list[Seed]:
    """Máximos locales ordenados por prominencia decreciente"""
    base = float(np.min(y))
    step = float(np.mean(np.diff(x)))
    indices, props = find_peaks(y, prominence=0)
    if indices.size == 0:
        top = int(np.argmax(y))
        return [(float(x[top]), (x[-1] - x[0]) / 4, float(y[top] - base))]

    widths = peak_widths(y, indices, rel_height=0.5)[0]
    order = np.argsort(-props["prominences"], kind="stable")
    return [
        (float(x[i]), float(max(widths[k], 2.0) * step), float(y[i] - base))
        for k, i in ((k, indices[k]) for k in order)
    ]


def _split_widest(seeds: list[Seed], fraction: float) -> list[Seed]:
    widest = max(range(len(seeds)), key=lambda k: seeds[k][1])
    center, width, amplitude = seeds[widest]
    offset = fraction * width
    split = [(center - offset, width, amplitude / 2), (center + offset, width, amplitude / 2)]
    return seeds[:widest] + split + seeds[widest + 1:]


def _seed_sets(detected: list[Seed], n: int) -> list[list[Seed]]:
    """
    Conjuntos de semillas para el multi-arranque: los n más prominentes y,
    cuando faltan líneas visibles, divisiones de la semilla más ancha.
    """
    sets = []
    if len(detected) >= n:
        sets.append(detected[:n])
    if n >= 2:
        base = detected[:min(len(detected), n - 1)]
        for fraction in SPLIT_FRACTIONS:
            seeds = list(base)
            while len(seeds) < n:
                seeds = _split_widest(seeds, fraction)
            sets.append(seeds)
    return sets


# ─── Ajuste multi-pico ───────────────────────────────────────────────────

def fit_peaks(
    spectrum: SpectrumData,
    n: int,
    init: Optional[Sequence[Seed]] = None,
    shared_fwhm: bool = False,
    starts: Optional[Sequence[Sequence[Seed]]] = None,
) -> MultiPeakFit:
    """
    Ajusta n Lorentzianas + fondo constante por Levenberg-Marquardt.

    Args:
        spectrum: Espectro (abscisa en μeV)
        n: Número de líneas
        init: Semillas (centro, fwhm, amplitud); se detectan si no se dan
        shared_fwhm: Un solo ancho para todas las líneas
        starts: Varios conjuntos de semillas para el multi-arranque (se
            conserva el de menor costo); ignorado si se da `init`

    Returns:
        MultiPeakFit con las líneas ordenadas por centro

    Raises:
        FitNoConvergence: si ningún arranque converge en el máximo de iteraciones
        InsufficientPoints: si hay menos puntos que parámetros
    """
    if n < 1:
        raise ValueError("n debe ser >= 1")
    x_abs = np.asarray(spectrum.abscissa, dtype=float)
    y = np.asarray(spectrum.counts, dtype=float)
    if not np.any(y > 0):
        raise ValueError("El espectro no tiene cuentas")

    model = _PeakModel(n, shared_fwhm)
    if x_abs.size <= model.size:
        raise InsufficientPoints(f"{x_abs.size} puntos para {model.size} parámetros")

    # Abscisa relativa al punto medio para un jacobiano bien escalado
    origin = 0.5 * (x_abs[0] + x_abs[-1])
    x = x_abs - origin
    background = float(np.min(y))

    if init is not None:
        starts = [init]
    if starts is not None:
        if any(len(seeds) != n for seeds in starts):
            raise ValueError(f"Se esperaban {n} semillas por arranque")
        seed_sets = [[(c - origin, w, a) for c, w, a in seeds] for seeds in starts]
    else:
        seed_sets = _seed_sets(_detect_seeds(x, y), n)

    def residuals(theta):
        return model.evaluate(theta, x) - y

    def jacobian(theta):
        return model.jacobian(theta, x)

    best = None
    for seeds in seed_sets:
        result = _solve(residuals, jacobian, model.pack(seeds, background))
        if result.status == 0:
            logger.debug(f"Arranque sin convergencia ({result.nfev} evaluaciones)")
            continue
        if best is None or result.cost < best.cost:
            best = result
    if best is None:
        raise FitNoConvergence(
            f"Ajuste de {n} picos sin convergencia en {Config.FIT_MAX_ITERATIONS} iteraciones"
        )

    rss = 2.0 * float(best.cost)
    dof = x.size - model.size
    covariance, ill = _covariance(best.jac, rss, dof, residuals=best.fun)
    errors = np.sqrt(np.clip(np.diag(covariance), 0.0, None))
    if ill:
        logger.warning(f"Ajuste de {n} picos mal condicionado (líneas casi degeneradas)")

    lines, bg = model.unpack(best.x)
    residual_norm = float(np.sqrt(rss))
    peaks = sorted(
        (
            PeakFit(
                center=float(best.x[c] + origin),
                fwhm=float(abs(best.x[w])),
                amplitude=float(best.x[a]),
                center_err=float(errors[c]),
                fwhm_err=float(errors[w]),
                amplitude_err=float(errors[a]),
                residual_norm=residual_norm,
            )
            for c, w, a in lines
        ),
        key=lambda peak: peak.center,
    )
    return MultiPeakFit(
        peaks=peaks,
        background=float(best.x[bg]),
        background_err=float(errors[bg]),
        residual_norm=residual_norm,
        rss=rss,
        n_points=int(x.size),
        n_params=model.size,
        ill_conditioned=ill,
        shared_fwhm=shared_fwhm,
    )


def _f_test_prefers(current: MultiPeakFit, candidate: MultiPeakFit, alpha: float) -> bool:
    """True si el modelo con más parámetros mejora el residuo con p < alpha"""
    extra = candidate.n_params - current.n_params
    dof = candidate.dof
    if dof <= 0 or extra <= 0:
        return False
    if candidate.rss <= 0:
        return True
    f_stat = ((current.rss - candidate.rss) / extra) / (candidate.rss / dof)
    p_value = float(stats.f.sf(f_stat, extra, dof)) if f_stat > 0 else 1.0
    logger.debug(f"F-test {current.n_peaks}→{candidate.n_peaks} líneas: F={f_stat:.3g}, p={p_value:.3g}")
    return p_value < alpha


def _is_exact(fit: MultiPeakFit, spectrum: SpectrumData) -> bool:
    total = float(np.sum(np.asarray(spectrum.counts, dtype=float) ** 2))
    return fit.rss <= Config.EXACT_FIT_RTOL * total


def select_peak_count(
    spectrum: SpectrumData,
    candidates: Sequence[int],
    alpha: Optional[float] = None,
    shared_fwhm: bool = True,
) -> MultiPeakFit:
    """
    Elige el número de líneas con un F-test de mejora del residuo,
    prefiriendo el modelo más simple.

    Un modelo más complejo se acepta solo si p < alpha. Si el modelo actual
    ya reproduce los datos a precisión de máquina, no se agregan líneas.
    """
    alpha = Config.F_TEST_ALPHA if alpha is None else alpha
    ordered = sorted(set(candidates))
    current = fit_peaks(spectrum, ordered[0], shared_fwhm=shared_fwhm)

    for n in ordered[1:]:
        if _is_exact(current, spectrum):
            break
        try:
            candidate = fit_peaks(spectrum, n, shared_fwhm=shared_fwhm)
        except FitError as e:
            logger.debug(f"Modelo de {n} líneas descartado: {e}")
            break
        if not _f_test_prefers(current, candidate, alpha):
            break
        current = candidate
    return current


# ─── Series Zeeman ───────────────────────────────────────────────────────

def _group_by_field(spectra: Iterable[SpectrumData]) -> "OrderedDict[float, list[SpectrumData]]":
    groups: dict[float, list[SpectrumData]] = {}
    for spectrum in spectra:
        groups.setdefault(round(float(spectrum.b_field), 9), []).append(spectrum)
    return OrderedDict(sorted(groups.items()))


def _pair(fit: MultiPeakFit) -> tuple[tuple[float, float], tuple[float, float], bool]:
    """Centros y errores de un par de líneas; una sola línea cuenta dos veces"""
    peaks = fit.peaks
    if len(peaks) == 1:
        c, e = peaks[0].center, peaks[0].center_err
        return (c, c), (e, e), True
    return (peaks[0].center, peaks[-1].center), (peaks[0].center_err, peaks[-1].center_err), False


def _polarized_point(b_field: float, h: SpectrumData, v: SpectrumData, alpha: float) -> ZeemanPoint:
    h_fit = select_peak_count(h, [1, 2], alpha)
    v_fit = select_peak_count(v, [1, 2], alpha)
    (outer, outer_err, outer_merged) = _pair(h_fit)
    (inner, inner_err, inner_merged) = _pair(v_fit)
    centers = (outer[0], inner[0], inner[1], outer[1])
    return ZeemanPoint(
        b_field=b_field,
        centers=centers,
        center_errors=(outer_err[0], inner_err[0], inner_err[1], outer_err[1]),
        mean_energy=float(np.mean(centers)),
        resolved=b_field > 0 and not outer_merged,
        merged_inner=inner_merged,
        n_lines=h_fit.n_peaks + v_fit.n_peaks,
    )


def _envelope(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    """Centroide, ancho a media altura y altura sobre el fondo del espectro completo"""
    weights = y - float(np.min(y))
    height = float(np.max(weights))
    if height <= 0:
        return float(0.5 * (x[0] + x[-1])), float(x[-1] - x[0]) / 4, 0.0
    center = float(np.sum(weights * x) / np.sum(weights))
    above = x[weights >= 0.5 * height]
    width = max(float(above[-1] - above[0]), float(np.mean(np.diff(x))))
    return center, width, height


def _quadruplet_starts(
    spectrum: SpectrumData,
    prior: Optional[tuple[tuple[float, ...], float]] = None,
) -> list[list[Seed]]:
    """
    Arranques simétricos c ± S/2, c ± r·S/2 alrededor del centroide: un
    barrido de la separación exterior S (en fracciones del ancho de la
    envolvente) por el cociente r, más los desplazamientos del campo
    anterior ya escalados a este B.
    """
    x = np.asarray(spectrum.abscissa, dtype=float)
    y = np.asarray(spectrum.counts, dtype=float)
    center, width, height = _envelope(x, y)
    amplitude = max(height / 2, 1e-12)

    starts = []
    if prior is not None:
        offsets, fwhm = prior
        starts.append([(center + offset, fwhm, amplitude) for offset in offsets])
    for fraction in QUAD_OUTER_FRACTIONS:
        outer = fraction * width
        fwhm = max(width - outer, 0.3 * width)
        for ratio in QUAD_INNER_RATIOS:
            inner = ratio * outer
            starts.append([
                (center - outer / 2, fwhm, amplitude),
                (center - inner / 2, fwhm, amplitude),
                (center + inner / 2, fwhm, amplitude),
                (center + outer / 2, fwhm, amplitude),
            ])
    return starts


def _quadruplet_defects(fit: MultiPeakFit, spectrum: SpectrumData) -> list[str]:
    """
    Motivos para rechazar un ajuste de 4 líneas: amplitudes no positivas,
    pares exterior e interior con centros distintos o residuo incompatible
    con el ruido de conteo.
    """
    defects = []
    if any(p.amplitude <= 0 for p in fit.peaks):
        defects.append("amplitud no positiva")

    c = fit.centers
    fwhm = float(np.mean([p.fwhm for p in fit.peaks]))
    asymmetry = abs((c[0] + c[3]) - (c[1] + c[2])) / 2
    spread = float(np.sqrt(sum(p.center_err ** 2 for p in fit.peaks)))
    if asymmetry > max(QUAD_SYMMETRY_FWHM_FRACTION * fwhm, 4 * spread):
        defects.append(f"pares descentrados ({asymmetry:.3g} μeV)")

    x = np.asarray(spectrum.abscissa, dtype=float)
    y = np.asarray(spectrum.counts, dtype=float)
    model = lorentzian_sum(x, [(p.center, p.fwhm, p.amplitude) for p in fit.peaks], fit.background)
    chi2 = float(np.sum((y - model) ** 2 / np.maximum(model, 1.0))) / max(fit.dof, 1)
    if chi2 > Config.QUAD_MAX_REDUCED_CHI2:
        defects.append(f"χ² reducido {chi2:.3g}")
    return defects


def _unresolved_point(b_field: float, fit: MultiPeakFit) -> ZeemanPoint:
    centers = fit.centers
    errors = [p.center_err for p in fit.peaks]
    weights = 4 // fit.n_peaks
    return ZeemanPoint(
        b_field=b_field,
        centers=tuple(c for c in centers for _ in range(weights)),
        center_errors=tuple(e for e in errors for _ in range(weights)),
        mean_energy=float(np.mean(centers)),
        resolved=False,
        n_lines=fit.n_peaks,
    )


def _unpolarized_point(
    b_field: float,
    spectrum: SpectrumData,
    alpha: float,
    prior: Optional[tuple[tuple[float, ...], float]] = None,
) -> tuple[ZeemanPoint, Optional[MultiPeakFit]]:
    """
    Elige entre 1, 2 o 4 líneas. Las 4 líneas se ajustan con arranques
    simétricos y solo se aceptan si forman un cuadruplete; si no, el punto
    queda no resuelto con la energía media del modelo simple.
    """
    simple = select_peak_count(spectrum, [1, 2], alpha)
    if b_field == 0 or _is_exact(simple, spectrum):
        return _unresolved_point(b_field, simple), None

    try:
        quad = fit_peaks(spectrum, 4, shared_fwhm=True, starts=_quadruplet_starts(spectrum, prior))
    except FitError as e:
        logger.debug(f"B={b_field:g} T: cuadruplete descartado ({e})")
        return _unresolved_point(b_field, simple), None
    if not _f_test_prefers(simple, quad, alpha):
        return _unresolved_point(b_field, simple), None

    defects = _quadruplet_defects(quad, spectrum)
    if defects:
        logger.warning(f"B={b_field:g} T: 4 líneas sin forma de cuadruplete ({', '.join(defects)}); punto no resuelto")
        return _unresolved_point(b_field, simple), None

    centers = quad.centers
    fwhm = float(np.mean([p.fwhm for p in quad.peaks]))
    merged = abs(centers[2] - centers[1]) < MERGE_FWHM_FRACTION * fwhm
    if merged:
        middle = 0.5 * (centers[1] + centers[2])
        centers[1] = centers[2] = middle
    point = ZeemanPoint(
        b_field=b_field,
        centers=tuple(centers),
        center_errors=tuple(p.center_err for p in quad.peaks),
        mean_energy=float(np.mean(centers)),
        resolved=True,
        merged_inner=merged,
        n_lines=4,
    )
    return point, quad


def fit_quadruplet_series(spectra: Sequence[SpectrumData], alpha: Optional[float] = None) -> ZeemanSeries:
    """
    Ajusta el multiplete a cada campo B.

    Con espectros H y V al mismo B: H aporta el par exterior y V el interior
    (V con una sola línea = par interior fusionado). Con un único espectro no
    polarizado se elige entre 1, 2 o 4 líneas; los campos se recorren en orden
    creciente y cada cuadruplete aceptado siembra el siguiente escalado en B.
    A B=0 el cuadruplete se rechaza y solo se registra la energía media.

    Los errores de ajuste de un punto quedan marcados en `failure` y la serie
    parcial se retorna igual.

    Raises:
        InsufficientPoints: con menos de 3 valores de B distintos
    """
    alpha = Config.F_TEST_ALPHA if alpha is None else alpha
    groups = _group_by_field(spectra)
    if len(groups) < 3:
        raise InsufficientPoints(f"Se necesitan >= 3 campos distintos, recibidos {len(groups)}")

    points = []
    previous: Optional[tuple[float, MultiPeakFit]] = None
    for b_field, group in groups.items():
        by_pol = {s.polarization: s for s in group}
        try:
            if "H" in by_pol and "V" in by_pol:
                point = _polarized_point(b_field, by_pol["H"], by_pol["V"], alpha)
            elif len(group) == 1:
                prior = None
                if previous is not None:
                    b_prev, fit = previous
                    mean = float(np.mean(fit.centers))
                    offsets = tuple((c - mean) * b_field / b_prev for c in fit.centers)
                    prior = (offsets, float(np.mean([p.fwhm for p in fit.peaks])))
                point, quad = _unpolarized_point(b_field, group[0], alpha, prior)
                if quad is not None:
                    previous = (b_field, quad)
            else:
                raise ValueError(
                    f"Combinación de polarizaciones no soportada: {sorted(by_pol)}"
                )
        except (FitError, ValueError) as e:
            logger.warning(f"B={b_field:g} T: ajuste fallido ({e})")
            point = ZeemanPoint(b_field=b_field, failure=str(e))
        else:
            logger.debug(
                f"B={b_field:g} T: {point.n_lines} líneas, "
                f"resuelto={point.resolved}, interior fusionado={point.merged_inner}"
            )
        points.append(point)

    return ZeemanSeries(points=points)


def remove_diamagnetic(series: ZeemanSeries) -> DiamagneticFit:
    """
    Regresión lineal de la energía media sobre B² → (E0, κ). Los centros
    corregidos quedan centrados en cero: c − E0 − κB².

    Raises:
        InsufficientPoints: con menos de 3 puntos utilizables
    """
    usable = series.usable()
    if len(usable) < 3:
        raise InsufficientPoints(f"Se necesitan >= 3 puntos, disponibles {len(usable)}")

    b_squared = np.array([p.b_field ** 2 for p in usable])
    means = np.array([p.mean_energy for p in usable])
    regression = stats.linregress(b_squared, means)
    kappa = float(regression.slope)
    e0 = float(regression.intercept)

    corrected = []
    for point in series.points:
        if point.failure is not None or not point.centers:
            corrected.append(point)
            continue
        shift = e0 + kappa * point.b_field ** 2
        corrected.append(ZeemanPoint(
            b_field=point.b_field,
            centers=tuple(c - shift for c in point.centers),
            center_errors=point.center_errors,
            mean_energy=point.mean_energy - shift,
            resolved=point.resolved,
            merged_inner=point.merged_inner,
            n_lines=point.n_lines,
        ))

    kappa_err = float(regression.stderr)
    e0_err = float(regression.intercept_stderr)
    logger.info(f"Diamagnético: κ = {kappa:.4f} ± {kappa_err:.4f} μeV/T², E0 = {e0:.3f} μeV")
    return DiamagneticFit(
        kappa=kappa,
        kappa_err=kappa_err,
        e0=e0,
        e0_err=e0_err,
        corrected=ZeemanSeries(points=corrected),
    )


def _slope_through_origin(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    sxx = float(np.sum(x * x))
    slope = float(np.sum(x * y)) / sxx
    if x.size < 2:
        return slope, float("inf")
    ssr = float(np.sum((y - slope * x) ** 2))
    return slope, float(np.sqrt(ssr / (x.size - 1) / sxx))


def extract_g_factors(
    corrected: Union[ZeemanSeries, DiamagneticFit],
) -> GFactorResult:
    """
    Separación exterior = δ_e+δ_h e interior = |δ_e−δ_h|, regresadas por el
    origen contra B; g = pendiente / μ_B. La asignación (g_e, g_h) es
    ambigua: los espectros no distinguen electrón de hueco.

    Raises:
        ZeroField: si no hay ningún punto resuelto con B > 0
        NegativeSlope: si g_sum <= 0 o g_diff > g_sum
    """
    diamagnetic = corrected if isinstance(corrected, DiamagneticFit) else None
    series = diamagnetic.corrected if diamagnetic else corrected

    points = series.resolved()
    if not points:
        raise ZeroField("No hay puntos resueltos con B > 0")

    fields = np.array([p.b_field for p in points])
    outer = np.array([p.outer_separation for p in points])
    inner = np.array([abs(p.inner_separation) for p in points])

    slope_outer, slope_outer_err = _slope_through_origin(fields, outer)
    slope_inner, slope_inner_err = _slope_through_origin(fields, inner)

    g_sum = slope_outer / CONSTANTS.mu_b
    g_diff = abs(slope_inner) / CONSTANTS.mu_b
    if slope_outer <= 0 or g_diff > g_sum:
        raise NegativeSlope(f"Pendientes no físicas: g_sum={g_sum:.4f}, g_diff={g_diff:.4f}")

    g_sum_err = slope_outer_err / CONSTANTS.mu_b
    g_diff_err = slope_inner_err / CONSTANTS.mu_b
    return GFactorResult(
        g_sum=g_sum,
        g_sum_err=g_sum_err,
        g_diff=g_diff,
        g_diff_err=g_diff_err,
        g_e=(g_sum + g_diff) / 2,
        g_h=(g_sum - g_diff) / 2,
        g_pair_err=0.5 * float(np.hypot(g_sum_err, g_diff_err)),
        kappa=diamagnetic.kappa if diamagnetic else 0.0,
        kappa_err=diamagnetic.kappa_err if diamagnetic else 0.0,
        e0=diamagnetic.e0 if diamagnetic else 0.0,
        e0_err=diamagnetic.e0_err if diamagnetic else 0.0,
        assignment_ambiguous=g_diff > 0,
        n_points=len(points),
    )


def extract_fss(h: SpectrumData, v: SpectrumData) -> FssResult:
    """FSS = |c_H − c_V| con una línea por polarización, a B = 0"""
    if h.b_field != 0 or v.b_field != 0:
        raise ValueError("La FSS se mide solo a B = 0")
    peak_h = fit_peaks(h, 1).peaks[0]
    peak_v = fit_peaks(v, 1).peaks[0]
    return FssResult(
        fss=abs(peak_h.center - peak_v.center),
        fss_err=float(np.hypot(peak_h.center_err, peak_v.center_err)),
        center_h=peak_h.center,
        center_v=peak_v.center,
    )


# ─── Saturación y ensanchamiento ─────────────────────────────────────────

def _check_series(x: Sequence[float], y: Sequence[float], name: str) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValueError(f"{name}: largos distintos")
    if x.size < 4:
        raise InsufficientPoints(f"{name}: se necesitan >= 4 puntos, recibidos {x.size}")
    if np.any(x <= 0):
        raise ValueError(f"{name}: las potencias deben ser > 0")
    return x, y


def fit_saturation(powers: Sequence[float], intensities: Sequence[float]) -> SaturationFit:
    """
    I(P) = I_max·P/(P + P_sat), ajustado como I = a·P/(1 + b·P) con
    a = I_max/P_sat y b = 1/P_sat. Con b <= 0 o incertidumbre mayor que b
    la saturación no está acotada por los datos y P_sat = I_max = ∞.
    """
    p, intensity = _check_series(powers, intensities, "saturación")

    seed = stats.linregress(p, p / intensity)
    if seed.intercept > 0:
        a0 = 1.0 / seed.intercept
        b0 = max(seed.slope * a0, 0.0)
    else:
        a0 = float(intensity[0] / p[0])
        b0 = 0.0

    def residuals(theta):
        a, b = theta
        return a * p / (1 + b * p) - intensity

    def jacobian(theta):
        a, b = theta
        denom = 1 + b * p
        return np.column_stack([p / denom, -a * p ** 2 / denom ** 2])

    result = _solve(residuals, jacobian, np.array([a0, b0]), x_scale="jac")
    if result.status == 0:
        raise FitNoConvergence("Ajuste de saturación sin convergencia")

    a, b = result.x
    rss = 2.0 * float(result.cost)
    covariance, _ = _covariance(result.jac, rss, p.size - 2)
    a_err, b_err = np.sqrt(np.clip(np.diag(covariance), 0.0, None))
    residual_norm = float(np.sqrt(rss))
    rms = float(np.sqrt(rss / p.size))

    unbounded = b <= 0 or b_err >= b or b * p.max() < Config.EXACT_FIT_RTOL ** 0.5
    if unbounded:
        logger.warning("P_sat no acotada por los datos (régimen lineal)")
        return SaturationFit(
            i_max=float("inf"),
            p_sat=float("inf"),
            i_max_err=float("inf"),
            p_sat_err=float("inf"),
            residual_norm=residual_norm,
            rms_residual=rms,
            unbounded=True,
        )

    i_max = a / b
    i_max_var = (a_err / b) ** 2 + (a * b_err / b ** 2) ** 2 - 2 * a / b ** 3 * covariance[0, 1]
    return SaturationFit(
        i_max=float(i_max),
        p_sat=float(1 / b),
        i_max_err=float(np.sqrt(max(i_max_var, 0.0))),
        p_sat_err=float(b_err / b ** 2),
        residual_norm=residual_norm,
        rms_residual=rms,
        unbounded=False,
    )


def fit_power_broadening(powers: Sequence[float], widths: Sequence[float]) -> BroadeningFit:
    """
    Dos modelos de ancho vs potencia:
      lineal:      w = a + b·P
      raíz:        w = w0·√(1 + P/P_sat)

    Del modelo raíz se deriva la calibración del drive: ancho natural
    γ = w0/2 y coeficiente c con Ω = c·√P (c = γ/√(2·P_sat)).
    """
    p, w = _check_series(powers, widths, "ensanchamiento")

    regression = stats.linregress(p, w)
    linear_residual = float(np.linalg.norm(w - (regression.intercept + regression.slope * p)))
    linear = LinearBroadening(
        intercept=float(regression.intercept),
        slope=float(regression.slope),
        intercept_err=float(regression.intercept_stderr),
        slope_err=float(regression.stderr),
        residual_norm=linear_residual,
        r_squared=float(regression.rvalue ** 2),
    )

    squared = stats.linregress(p, w ** 2)
    w0_seed = float(np.sqrt(squared.intercept)) if squared.intercept > 0 else float(np.min(w))
    q_seed = max(float(squared.slope) / w0_seed ** 2, 0.0)

    def residuals(theta):
        w0, q = theta
        return w0 * np.sqrt(1 + q * p) - w

    def jacobian(theta):
        w0, q = theta
        root = np.sqrt(1 + q * p)
        return np.column_stack([root, w0 * p / (2 * root)])

    result = _solve(
        residuals, jacobian, np.array([w0_seed, q_seed]),
        method="trf", bounds=([0.0, 0.0], [np.inf, np.inf]),
        xtol=1e-15, ftol=1e-15, gtol=1e-15,
    )
    if result.status == 0:
        raise FitNoConvergence("Ajuste raíz cuadrada sin convergencia")

    w0, q = (float(v) for v in result.x)
    covariance, _ = _covariance(result.jac, 2.0 * float(result.cost), p.size - 2)
    w0_err, q_err = (float(v) for v in np.sqrt(np.clip(np.diag(covariance), 0.0, None)))
    p_sat = 1.0 / q if q > 0 else float("inf")
    sqrt_model = SqrtBroadening(
        w0=w0,
        p_sat=p_sat,
        w0_err=w0_err,
        p_sat_err=q_err / q ** 2 if q > 0 else float("inf"),
        residual_norm=float(np.sqrt(2.0 * result.cost)),
    )

    natural = w0 / 2
    drive = natural / np.sqrt(2 * p_sat) if np.isfinite(p_sat) else 0.0
    best = "linear" if linear.residual_norm <= sqrt_model.residual_norm else "sqrt"
    logger.info(
        f"Ensanchamiento: lineal res={linear.residual_norm:.3g} (R²={linear.r_squared:.4f}), "
        f"raíz res={sqrt_model.residual_norm:.3g}; mejor={best}"
    )
    return BroadeningFit(
        linear=linear,
        sqrt=sqrt_model,
        best=best,
        natural_hwhm=natural,
        drive_coefficient=float(drive),
    )


# ─── Producto vs suma de Lorentzianas ────────────────────────────────────

def _unit_lorentzian(u: np.ndarray, hwhm: float) -> np.ndarray:
    return 1.0 / (1.0 + (u / hwhm) ** 2)


def _least_squares_best(
    name: str,
    model: Callable[[np.ndarray], np.ndarray],
    seeds: Iterable[np.ndarray],
    bounds: tuple[list[float], list[float]],
    y: np.ndarray,
):
    best = None
    for x0 in seeds:
        result = least_squares(
            lambda theta: model(theta) - y,
            np.clip(x0, bounds[0], bounds[1]),
            jac="3-point",
            method="trf",
            bounds=bounds,
            xtol=Config.FIT_XTOL,
            ftol=Config.FIT_FTOL,
            max_nfev=Config.FIT_MAX_ITERATIONS * (len(x0) + 1),
        )
        if result.status == 0:
            continue
        if best is None or result.cost < best.cost:
            best = result
    if best is None:
        raise FitNoConvergence(f"Modelo {name} sin convergencia")
    return best


def fit_resonance_product(profile: ResonanceProfile, splitting_ghz: float) -> ResonanceFit:
    """
    Compara A·L(Δ−s/2; w)·L(Δ+s/2; w) con A₁·L(Δ−s₀/2; w) + A₂·L(Δ+s₀/2; w),
    ambos con un ancho común w (HWHM, GHz) y tres parámetros.

    En el producto la separación s se ajusta en [0, rango de la grilla],
    sembrada desde s₀ = `splitting_ghz` y desde 0. La suma mantiene las dos
    transiciones en la separación conocida s₀.
    """
    if not is_unimodal(profile):
        raise NotUnimodal("El perfil de resonancia no es unimodal")
    if splitting_ghz < 0:
        raise ValueError("La separación debe ser >= 0")

    x = profile.detunings
    scale = float(np.max(profile.intensities))
    y = profile.intensities / scale
    shift = splitting_ghz / 2
    span = float(x[-1] - x[0])

    # Semilla de ancho: semiancho a media altura de los datos (o el rango si no cae)
    above = x[y >= 0.5]
    hwhm = max(0.5 * float(above[-1] - above[0]), float(np.mean(np.diff(x))))
    widths = [hwhm * k for k in (0.5, 1.0, 2.0, 4.0)]
    floor = 1e-6

    def product(theta):
        amplitude, s, w = theta
        return amplitude * _unit_lorentzian(x - s / 2, w) * _unit_lorentzian(x + s / 2, w)

    def summed(theta):
        a1, a2, w = theta
        return a1 * _unit_lorentzian(x - shift, w) + a2 * _unit_lorentzian(x + shift, w)

    # Primero con s = s₀ fija; ese óptimo siembra el ajuste con s libre
    fixed = _least_squares_best(
        "producto",
        lambda theta: product(np.array([theta[0], splitting_ghz, theta[1]])),
        [np.array([1.0, w]) for w in widths],
        ([0.0, floor], [np.inf, np.inf]),
        y,
    )
    starts = [np.array([fixed.x[0], splitting_ghz, fixed.x[1]])]
    starts += [np.array([1.0, s, w]) for s in sorted({0.0, splitting_ghz}) for w in widths]
    product_best = _least_squares_best(
        "producto", product, starts, ([0.0, 0.0, floor], [np.inf, max(span, splitting_ghz), np.inf]), y
    )
    sum_best = _least_squares_best(
        "suma", summed, [np.array([0.5, 0.5, w]) for w in widths], ([0.0, 0.0, floor], [np.inf] * 3), y
    )

    product_fit = ResonanceModelFit(
        model="product",
        amplitudes=(float(product_best.x[0] * scale),),
        hwhm_ghz=float(product_best.x[2]),
        residual_norm=float(np.sqrt(2.0 * product_best.cost) * scale),
        splitting_ghz=float(product_best.x[1]),
    )
    sum_fit = ResonanceModelFit(
        model="sum",
        amplitudes=tuple(float(a * scale) for a in sum_best.x[:2]),
        hwhm_ghz=float(sum_best.x[2]),
        residual_norm=float(np.sqrt(2.0 * sum_best.cost) * scale),
        splitting_ghz=float(splitting_ghz),
    )
    logger.debug(
        f"s₀={splitting_ghz:.3f} GHz (producto s={product_fit.splitting_ghz:.3f}): "
        f"residuo producto {product_fit.residual_norm:.3e}, suma {sum_fit.residual_norm:.3e}"
    )
    return ResonanceFit(splitting_ghz=splitting_ghz, product=product_fit, sum=sum_fit)


# ─── Sintetizador ────────────────────────────────────────────────────────

def spectrum_lines(truth: SpectrumTruth) -> list[float]:
    """Centros (μeV) de las líneas visibles en la polarización de `truth`"""
    if truth.b_field == 0:
        h_lines = [truth.e0 + truth.fss / 2]
        v_lines = [truth.e0 - truth.fss / 2]
    else:
        delta_e = zeeman_splitting(truth.g_e, truth.b_field)
        delta_h = zeeman_splitting(truth.g_h, truth.b_field)
        center = truth.e0 + truth.kappa * truth.b_field ** 2
        h_lines = [center - (delta_e + delta_h) / 2, center + (delta_e + delta_h) / 2]
        v_lines = [center - (delta_e - delta_h) / 2, center + (delta_e - delta_h) / 2]

    if truth.polarization == "H":
        return h_lines
    if truth.polarization == "V":
        return v_lines
    return sorted(h_lines + v_lines)


def synthesize_spectrum(
    truth: SpectrumTruth,
    noise: str = "poisson",
    seed: Union[int, Sequence[int]] = 0,
) -> SpectrumData:
    """
    Genera un espectro con líneas Lorentzianas de igual amplitud (las líneas
    internas degeneradas suman el doble) y ruido Poisson opcional.

    La ventana se centra en la energía del multiplete con semiancho igual a la
    mayor semi-separación más 8 anchos de línea.
    """
    if truth.linewidth <= 0:
        raise ValueError("linewidth debe ser > 0")
    if noise not in ("poisson", "none"):
        raise ValueError(f"Ruido desconocido: {noise}")

    if truth.b_field == 0:
        center = truth.e0
        half_split = abs(truth.fss) / 2
    else:
        center = truth.e0 + truth.kappa * truth.b_field ** 2
        half_split = (zeeman_splitting(truth.g_e, truth.b_field) + zeeman_splitting(truth.g_h, truth.b_field)) / 2

    half_span = half_split + 8 * truth.linewidth
    count = int(round(2 * half_span / truth.step)) + 1
    abscissa = np.linspace(center - half_span, center + half_span, count)

    lines = [(c, truth.linewidth, truth.amplitude) for c in spectrum_lines(truth)]
    counts = lorentzian_sum(abscissa, lines, truth.background)
    if noise == "poisson":
        rng = np.random.default_rng(seed)
        counts = rng.poisson(counts).astype(float)

    return SpectrumData(
        abscissa=abscissa,
        counts=counts,
        polarization=truth.polarization,
        b_field=truth.b_field,
    )
