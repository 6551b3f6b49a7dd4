"""Tests de la reducción espectroscópica"""

import numpy as np
import pytest

from qdot_spinpump.errors import InsufficientPoints, NegativeSlope, NotUnimodal, ZeroField
from qdot_spinpump.models import ResonanceProfile, SpectrumData, ZeemanPoint, ZeemanSeries
from qdot_spinpump.spectro_fit import (
    extract_fss,
    extract_g_factors,
    fit_peaks,
    fit_power_broadening,
    fit_quadruplet_series,
    fit_resonance_product,
    fit_saturation,
    lorentzian,
    lorentzian_sum,
    remove_diamagnetic,
    select_peak_count,
    spectrum_lines,
    synthesize_spectrum,
)
from qdot_spinpump.units import CONSTANTS
from tests.conftest import make_truth

FIELDS = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0]


def single_line(center=0.0, fwhm=22.0, amplitude=1000.0, background=0.0) -> SpectrumData:
    x = np.linspace(-200.0, 200.0, 401)
    return SpectrumData(x, lorentzian(x, center, fwhm, amplitude) + background)


def polarized_series(noise="none", **overrides) -> list[SpectrumData]:
    spectra = []
    index = 0
    for b_field in FIELDS:
        for pol in ("H", "V"):
            spectra.append(synthesize_spectrum(make_truth(b_field, pol, **overrides), noise=noise, seed=(7, index)))
            index += 1
    return spectra


def quadruplet_point(b_field, e0, kappa, g_e, g_h) -> ZeemanPoint:
    center = e0 + kappa * b_field ** 2
    outer = CONSTANTS.mu_b * (g_e + g_h) * b_field / 2
    inner = CONSTANTS.mu_b * (g_e - g_h) * b_field / 2
    centers = (center - outer, center - inner, center + inner, center + outer)
    return ZeemanPoint(
        b_field=b_field,
        centers=centers,
        center_errors=(0.0,) * 4,
        mean_energy=float(np.mean(centers)),
        resolved=b_field > 0,
        n_lines=4,
    )


def unpolarized_series(noise="none", **overrides) -> list[SpectrumData]:
    return [
        synthesize_spectrum(make_truth(b_field, "U", **overrides), noise=noise, seed=(9, index))
        for index, b_field in enumerate(FIELDS)
    ]


def assert_round_trip(make_series, g_sum, ratio, kappa):
    """Sintetiza, ajusta y compara g_sum, g_diff, (g_e, g_h), κ y E0 con la verdad"""
    g_diff = ratio * g_sum
    g_e, g_h = (g_sum + g_diff) / 2, (g_sum - g_diff) / 2
    series = fit_quadruplet_series(make_series(g_e=g_e, g_h=g_h, kappa=kappa))
    assert series.points[-1].resolved
    diamagnetic = remove_diamagnetic(series)
    result = extract_g_factors(diamagnetic)

    assert result.g_sum == pytest.approx(g_sum, rel=0.01)
    assert result.g_diff == pytest.approx(g_diff, abs=0.01 * g_sum)
    assert result.g_e == pytest.approx(g_e, abs=0.01 * g_sum)
    assert result.g_h == pytest.approx(g_h, abs=0.01 * g_sum)
    assert diamagnetic.kappa == pytest.approx(kappa, rel=0.01, abs=0.01)
    assert diamagnetic.e0 == pytest.approx(1393000.0, abs=0.1)


# (g_sum, g_diff/g_sum, κ): extremos de los rangos y dos casos de cuadruplete muy superpuesto
ROUND_TRIP_CASES = [
    (0.64, 0.0625, 5.07),
    (0.31, 0.467, 0.86),
    (0.468, 0.371, 6.74),
    (0.3, 0.0, 0.0),
    (0.3, 0.5, 10.0),
    (1.0, 0.0, 10.0),
    (1.0, 0.5, 0.0),
]


class TestFitPeaks:

    def test_exact_single_lorentzian(self):
        fit = fit_peaks(single_line(), 1)
        peak = fit.peaks[0]
        assert peak.center == pytest.approx(0.0, abs=1e-6)
        assert peak.fwhm == pytest.approx(22.0, rel=1e-6)
        assert peak.amplitude == pytest.approx(1000.0, rel=1e-6)
        assert fit.background == pytest.approx(0.0, abs=1e-6)
        assert not fit.ill_conditioned

    def test_shift_equivariance(self):
        base = fit_peaks(single_line(center=12.5, background=30.0), 1).peaks[0]
        shifted = fit_peaks(single_line(center=12.5, background=30.0).shifted(1000.0), 1).peaks[0]
        assert shifted.center == pytest.approx(base.center + 1000.0, abs=1e-6)
        assert shifted.fwhm == pytest.approx(base.fwhm, rel=1e-6)
        assert shifted.amplitude == pytest.approx(base.amplitude, rel=1e-6)

    def test_amplitude_scale_equivariance(self):
        base = fit_peaks(single_line(), 1).peaks[0]
        scaled = fit_peaks(single_line().scaled(3.0), 1).peaks[0]
        assert scaled.amplitude == pytest.approx(3.0 * base.amplitude, rel=1e-6)
        assert scaled.center == pytest.approx(base.center, abs=1e-6)
        assert scaled.fwhm == pytest.approx(base.fwhm, rel=1e-6)

    def test_two_separated_lines_sorted(self):
        x = np.linspace(-150.0, 150.0, 301)
        counts = lorentzian_sum(x, [(40.0, 20.0, 500.0), (-40.0, 20.0, 800.0)], 10.0)
        fit = fit_peaks(SpectrumData(x, counts), 2)
        assert fit.centers == pytest.approx([-40.0, 40.0], abs=1e-6)
        assert [p.amplitude for p in fit.peaks] == pytest.approx([800.0, 500.0], rel=1e-6)

    def test_explicit_seeds(self):
        fit = fit_peaks(single_line(center=5.0), 1, init=[(0.0, 30.0, 800.0)])
        assert fit.peaks[0].center == pytest.approx(5.0, abs=1e-6)

    def test_seed_count_must_match(self):
        with pytest.raises(ValueError):
            fit_peaks(single_line(), 2, init=[(0.0, 22.0, 1000.0)])

    def test_zero_counts_rejected(self):
        x = np.linspace(0, 10, 11)
        with pytest.raises(ValueError):
            fit_peaks(SpectrumData(x, np.zeros_like(x)), 1)

    def test_too_few_points(self):
        x = np.linspace(-1, 1, 4)
        with pytest.raises(InsufficientPoints):
            fit_peaks(SpectrumData(x, lorentzian(x, 0.0, 1.0, 1.0)), 1)

    def test_fine_structure_doublet(self):
        h = synthesize_spectrum(make_truth(0.0, "H"), noise="none")
        v = synthesize_spectrum(make_truth(0.0, "V"), noise="none")
        split = fit_peaks(h, 1).peaks[0].center - fit_peaks(v, 1).peaks[0].center
        assert split == pytest.approx(1.8, rel=0.1)

    @pytest.mark.slow
    def test_poisson_center_uncertainties_calibrated(self):
        # 5 T, g_e = g_h: par interior fusionado; amplitud 900 → SNR de pico 30
        truth = make_truth(5.0, "U", g_h=0.34)
        lines = sorted(set(spectrum_lines(truth)))
        seeds = [(c, truth.linewidth, truth.amplitude) for c in lines]
        pulls = []
        for trial in range(200):
            spectrum = synthesize_spectrum(truth, noise="poisson", seed=(11, trial))
            fit = fit_peaks(spectrum, 3, init=seeds)
            pulls.append([(p.center - c) / p.center_err for p, c in zip(fit.peaks, lines)])
        pulls = np.abs(np.array(pulls))

        within_one = np.mean(pulls < 1, axis=0)
        within_two = np.mean(pulls < 2, axis=0)
        assert np.all(within_two >= 0.9)
        assert np.all((within_one > 0.55) & (within_one < 0.8))


class TestPeakCountSelection:

    def test_single_line_not_split(self):
        assert select_peak_count(single_line(), [1, 2, 4]).n_peaks == 1

    def test_two_lines_detected(self):
        x = np.linspace(-150.0, 150.0, 301)
        counts = lorentzian_sum(x, [(-40.0, 22.0, 900.0), (40.0, 22.0, 900.0)])
        fit = select_peak_count(SpectrumData(x, counts), [1, 2, 4])
        assert fit.n_peaks == 2


class TestZeemanSeries:

    def test_zero_field_quadruplet_refused(self):
        series = fit_quadruplet_series(polarized_series())
        zero = series.points[0]
        assert zero.b_field == 0.0
        assert not zero.resolved
        assert zero.failure is None

    def test_resolved_quadruplets(self):
        series = fit_quadruplet_series(polarized_series())
        assert series.b_values == FIELDS
        for point in series.points[1:]:
            assert point.resolved
            assert len(point.centers) == 4
            assert list(point.centers) == sorted(point.centers)

    def test_equal_g_factors_merge_inner_pair(self):
        series = fit_quadruplet_series(polarized_series(g_h=0.34))
        assert all(point.merged_inner for point in series.points if point.b_field > 0)

    def test_needs_three_fields(self):
        spectra = [s for s in polarized_series() if s.b_field in (0.0, 1.0)]
        with pytest.raises(InsufficientPoints):
            fit_quadruplet_series(spectra)

    def test_noiseless_round_trip(self):
        series = fit_quadruplet_series(polarized_series())
        diamagnetic = remove_diamagnetic(series)
        result = extract_g_factors(diamagnetic)

        assert diamagnetic.kappa == pytest.approx(5.07, rel=1e-6)
        assert diamagnetic.e0 == pytest.approx(1393000.0, abs=1e-3)
        assert result.g_sum == pytest.approx(0.64, rel=0.01)
        assert result.g_diff == pytest.approx(0.04, rel=0.01)
        assert result.g_e == pytest.approx(0.34, rel=0.01)
        assert result.g_h == pytest.approx(0.30, rel=0.01)
        assert result.assignment_ambiguous
        assert result.kappa == diamagnetic.kappa

    def test_corrected_pairs_antisymmetric(self):
        corrected = remove_diamagnetic(fit_quadruplet_series(polarized_series())).corrected
        for point in corrected.resolved():
            c = point.centers
            assert c[0] + c[3] == pytest.approx(0.0, abs=1e-4)
            assert c[1] + c[2] == pytest.approx(0.0, abs=1e-4)

    def test_noisy_diamagnetic_coefficient(self):
        diamagnetic = remove_diamagnetic(fit_quadruplet_series(polarized_series(noise="poisson")))
        assert diamagnetic.kappa == pytest.approx(5.07, abs=0.03)

    @pytest.mark.slow
    @pytest.mark.parametrize("g_sum, ratio, kappa", ROUND_TRIP_CASES)
    def test_polarized_round_trip_over_ranges(self, g_sum, ratio, kappa):
        assert_round_trip(polarized_series, g_sum, ratio, kappa)

    @pytest.mark.slow
    @pytest.mark.parametrize("g_sum, ratio, kappa", ROUND_TRIP_CASES)
    def test_unpolarized_round_trip_over_ranges(self, g_sum, ratio, kappa):
        assert_round_trip(unpolarized_series, g_sum, ratio, kappa)

    @pytest.mark.slow
    def test_unpolarized_round_trip_random(self, rng):
        for _ in range(12):
            assert_round_trip(
                unpolarized_series, rng.uniform(0.3, 1.0), rng.uniform(0.0, 0.5), rng.uniform(0.0, 10.0)
            )

    def test_unpolarized_zero_field_unresolved(self):
        series = fit_quadruplet_series(unpolarized_series())
        assert not series.points[0].resolved
        assert series.points[0].mean_energy == pytest.approx(1393000.0, abs=1e-3)
        assert series.points[-1].resolved

    def test_asymmetric_four_lines_left_unresolved(self):
        x = np.linspace(-300.0, 300.0, 601)
        lines = [(-60.0, 22.0, 900.0), (-20.0, 22.0, 900.0), (30.0, 22.0, 900.0), (80.0, 22.0, 900.0)]
        spectra = [SpectrumData(x, lorentzian_sum(x, lines), b_field=b) for b in (1.0, 2.0, 3.0)]
        series = fit_quadruplet_series(spectra)
        for point in series.points:
            assert not point.resolved
            assert point.failure is None
            assert point.n_lines in (1, 2)


class TestDiamagnetic:

    def test_zero_coefficient(self):
        series = ZeemanSeries([quadruplet_point(b, 1000.0, 0.0, 0.34, 0.30) for b in FIELDS])
        fit = remove_diamagnetic(series)
        assert fit.kappa == pytest.approx(0.0, abs=1e-9)
        for point in fit.corrected.points:
            assert point.mean_energy == pytest.approx(0.0, abs=1e-9)

    def test_random_coefficients_recovered(self, rng):
        for _ in range(20):
            kappa = rng.uniform(0.0, 10.0)
            e0 = rng.uniform(1.2e6, 1.5e6)
            series = ZeemanSeries([quadruplet_point(b, e0, kappa, 0.34, 0.30) for b in FIELDS])
            fit = remove_diamagnetic(series)
            assert fit.kappa == pytest.approx(kappa, abs=1e-8)

    def test_insufficient_points(self):
        series = ZeemanSeries([quadruplet_point(b, 1000.0, 5.07, 0.34, 0.30) for b in (0.0, 1.0)])
        with pytest.raises(InsufficientPoints):
            remove_diamagnetic(series)


class TestGFactors:

    def test_equal_g_factors(self):
        series = ZeemanSeries([quadruplet_point(b, 0.0, 0.0, 0.34, 0.34) for b in FIELDS])
        assert series.points[-1].outer_separation == pytest.approx(196.8, abs=0.01)
        result = extract_g_factors(series)
        assert result.g_sum == pytest.approx(0.68, abs=1e-9)
        assert result.g_diff == pytest.approx(0.0, abs=1e-9)
        assert result.g_e == pytest.approx(0.34, abs=1e-9)
        assert result.g_h == pytest.approx(0.34, abs=1e-9)
        assert not result.assignment_ambiguous
        assert result.n_points == 5

    def test_branch_splitting_in_ghz(self):
        series = ZeemanSeries([quadruplet_point(b, 0.0, 0.0, 0.34, 0.34) for b in FIELDS])
        assert extract_g_factors(series).branch_splitting_ghz(5.0) == pytest.approx(23.8, rel=0.005)

    def test_zero_field_only(self):
        series = ZeemanSeries([quadruplet_point(0.0, 0.0, 0.0, 0.34, 0.30)])
        with pytest.raises(ZeroField):
            extract_g_factors(series)

    def test_negative_slope(self):
        points = [quadruplet_point(b, 0.0, 0.0, 0.34, 0.30) for b in (1.0, 2.0)]
        flipped = [
            ZeemanPoint(b_field=p.b_field, centers=p.centers[::-1], resolved=True, mean_energy=0.0)
            for p in points
        ]
        with pytest.raises(NegativeSlope):
            extract_g_factors(ZeemanSeries(flipped))


class TestFss:

    def test_identical_spectra(self):
        h = synthesize_spectrum(make_truth(0.0, "H"), noise="none")
        result = extract_fss(h, h)
        assert result.fss == pytest.approx(0.0, abs=1e-9)

    def test_noiseless(self):
        h = synthesize_spectrum(make_truth(0.0, "H"), noise="none")
        v = synthesize_spectrum(make_truth(0.0, "V"), noise="none")
        result = extract_fss(h, v)
        assert result.fss == pytest.approx(1.8, abs=1e-5)
        assert result.center_h > result.center_v

    def test_noisy_within_two_sigma(self):
        # amplitud 2500 → SNR de pico 50; 20 semillas fijas
        inside = 0
        for trial in range(20):
            h = synthesize_spectrum(make_truth(0.0, "H", amplitude=2500.0), noise="poisson", seed=(7, 2 * trial))
            v = synthesize_spectrum(make_truth(0.0, "V", amplitude=2500.0), noise="poisson", seed=(7, 2 * trial + 1))
            result = extract_fss(h, v)
            assert result.fss_err > 0
            inside += abs(result.fss - 1.8) < 2 * result.fss_err
        assert inside >= 16

    def test_requires_zero_field(self):
        h = synthesize_spectrum(make_truth(1.0, "H"), noise="none")
        with pytest.raises(ValueError):
            extract_fss(h, h)


class TestSaturation:

    def test_exact_model(self):
        p = np.array([0.05, 0.1, 0.3, 0.6, 1.0, 2.0, 5.0, 10.0])
        fit = fit_saturation(p, 1000.0 * p / (p + 1.0))
        assert fit.i_max == pytest.approx(1000.0, rel=1e-6)
        assert fit.p_sat == pytest.approx(1.0, rel=1e-6)
        assert fit.residual_norm < 1e-8 * 1000.0
        assert not fit.unbounded

    def test_linear_data_unbounded(self):
        p = np.array([0.1, 0.2, 0.3, 0.4, 0.5])
        fit = fit_saturation(p, 50.0 * p)
        assert fit.unbounded
        assert np.isinf(fit.p_sat)

    def test_too_few_points(self):
        with pytest.raises(InsufficientPoints):
            fit_saturation([0.1, 1.0, 10.0], [1.0, 5.0, 9.0])


class TestPowerBroadening:

    def test_exact_linear(self):
        p = np.array([0.1, 1.0, 2.5, 5.0, 7.5, 10.0])
        fit = fit_power_broadening(p, 11.5 + 2.5 * p)
        assert fit.linear.residual_norm < 1e-8
        assert fit.linear.slope == pytest.approx(2.5, rel=1e-9)
        assert fit.best == "linear"

    def test_exact_square_root(self):
        p = np.array([0.1, 0.5, 1.0, 2.0, 4.0, 8.0])
        widths = 10.0 * np.sqrt(1 + p / 1.5)
        fit = fit_power_broadening(p, widths)
        assert fit.sqrt.w0 == pytest.approx(10.0, rel=1e-6)
        assert fit.sqrt.p_sat == pytest.approx(1.5, rel=1e-6)
        assert fit.sqrt.residual_norm < 1e-8 * 10.0
        assert fit.best == "sqrt"
        assert fit.natural_hwhm == pytest.approx(5.0, rel=1e-6)
        assert fit.drive_coefficient == pytest.approx(5.0 / np.sqrt(3.0), rel=1e-6)

    def test_measured_endpoints(self):
        fit = fit_power_broadening([0.1, 1.0, 5.0, 10.0], [11.5, 14.0, 25.0, 36.0])
        for value in (fit.linear.intercept, fit.linear.slope, fit.sqrt.w0, fit.sqrt.residual_norm):
            assert np.isfinite(value)
        assert fit.best in ("linear", "sqrt")


class TestResonanceProduct:

    def test_not_unimodal(self):
        x = np.linspace(-2, 2, 5)
        with pytest.raises(NotUnimodal):
            fit_resonance_product(ResonanceProfile(x, [0.0, 1.0, 0.5, 1.0, 0.0]), 1.0)

    def test_negative_splitting(self):
        x = np.linspace(-2, 2, 41)
        with pytest.raises(ValueError):
            fit_resonance_product(ResonanceProfile(x, 1 / (1 + x ** 2)), -1.0)

    def test_exact_product_recovered(self):
        x = np.linspace(-3, 3, 301)
        shift, hwhm = 0.4, 0.8
        y = 0.2 / ((1 + ((x - shift) / hwhm) ** 2) * (1 + ((x + shift) / hwhm) ** 2))
        fit = fit_resonance_product(ResonanceProfile(x, y), 2 * shift)
        assert fit.product.hwhm_ghz == pytest.approx(hwhm, rel=1e-6)
        assert fit.product.splitting_ghz == pytest.approx(2 * shift, rel=1e-6)
        assert fit.product.amplitudes[0] == pytest.approx(0.2, rel=1e-6)
        assert fit.sum.splitting_ghz == 2 * shift
        assert fit.product_preferred

    def test_splitting_fitted_from_wrong_seed(self):
        x = np.linspace(-3, 3, 301)
        shift, hwhm = 0.4, 0.8
        y = 0.2 / ((1 + ((x - shift) / hwhm) ** 2) * (1 + ((x + shift) / hwhm) ** 2))
        fit = fit_resonance_product(ResonanceProfile(x, y), 1.4)
        assert fit.product.splitting_ghz == pytest.approx(2 * shift, rel=1e-5)
        assert fit.product.residual_norm < 1e-6

    def test_pure_lorentzian_gives_zero_splitting(self):
        x = np.linspace(-3, 3, 301)
        fit = fit_resonance_product(ResonanceProfile(x, 0.3 / (1 + (x / 1.2) ** 2)), 1.0)
        assert fit.product.splitting_ghz == pytest.approx(0.0, abs=0.05)


class TestSynthesizer:

    def test_zero_field_fss_lines(self):
        truth = make_truth(0.0, "U")
        lines = spectrum_lines(truth)
        assert len(lines) == 2
        assert lines[1] - lines[0] == pytest.approx(1.8)

    def test_equal_g_factors_three_visible_lines(self):
        truth = make_truth(5.0, "U", g_h=0.34)
        lines = spectrum_lines(truth)
        assert len(set(lines)) == 3
        spectrum = synthesize_spectrum(truth, noise="none")
        center = truth.e0 + truth.kappa * 25.0
        at_center = np.interp(center, spectrum.abscissa, spectrum.counts)
        at_outer = np.interp(lines[0], spectrum.abscissa, spectrum.counts)
        assert at_center > 1.9 * truth.amplitude
        assert at_center > 1.7 * at_outer

    def test_polarization_selection(self):
        h = spectrum_lines(make_truth(5.0, "H"))
        v = spectrum_lines(make_truth(5.0, "V"))
        assert h[1] - h[0] > v[1] - v[0] > 0

    def test_noiseless_equals_lineshape(self):
        truth = make_truth(2.0, "U")
        spectrum = synthesize_spectrum(truth, noise="none")
        expected = lorentzian_sum(
            spectrum.abscissa, [(c, truth.linewidth, truth.amplitude) for c in spectrum_lines(truth)]
        )
        assert np.array_equal(spectrum.counts, expected)

    def test_fixed_seed_deterministic(self):
        truth = make_truth(3.0, "H")
        first = synthesize_spectrum(truth, seed=(7, 3))
        second = synthesize_spectrum(truth, seed=(7, 3))
        other = synthesize_spectrum(truth, seed=(8, 3))
        assert np.array_equal(first.counts, second.counts)
        assert not np.array_equal(first.counts, other.counts)

    def test_invalid_linewidth(self):
        with pytest.raises(ValueError):
            synthesize_spectrum(make_truth(1.0, "H", linewidth=0.0))
