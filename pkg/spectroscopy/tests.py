import random
import tempfile
from dataclasses import replace
from pathlib import Path

import numpy as np
from django.conf import settings
from django.test import SimpleTestCase, tag

from errors import ConfigError, DegenerateSpectrumError
from spectroscopy.models import LineShape, LossChain, LossElement, SpectrumPoint
from spectroscopy.services import (
    bootstrap_fit,
    chain_transmission,
    extinction_to_scattering,
    fit_lorentzian,
    fitted_transmission,
    lorentzian,
    model_points,
    read_loss_chain,
    read_spectrum,
    spectrum_frame,
    synthetic_spectrum,
    transmission_model,
)

CHAIN_PATH = Path(settings.BASE_DIR) / 'spectroscopy' / 'data' / 'transmission_chain.csv'
DETUNINGS = np.linspace(-25, 25, 26)


def with_sigma(points, sigma=0.005):
    return [replace(point, sigma=sigma) for point in points]


class LineShapeTests(SimpleTestCase):
    def test_lorentzian_profile(self):
        self.assertEqual(float(lorentzian(2.0, 2.0, 6.0)), 1.0)
        self.assertAlmostEqual(float(lorentzian(5.0, 2.0, 6.0)), 0.5)

    def test_transmission_includes_collected_light(self):
        points = transmission_model([0.0, 1000.0], p_sc_max=0.1, fwhm=6.0, collection=0.05)
        self.assertAlmostEqual(points[0].transmission, 1 - 0.1 + 0.05 * 0.1)
        self.assertAlmostEqual(points[1].transmission, 1.0, places=5)

    def test_no_scattering_transmits_everything(self):
        points = transmission_model(DETUNINGS, p_sc_max=0.0, fwhm=7.5, collection=0.05, laser_linewidth=1.0)
        self.assertEqual([point.transmission for point in points], [1.0] * len(DETUNINGS))

    def test_extinction_to_scattering(self):
        self.assertAlmostEqual(extinction_to_scattering(0.098, 0.05), 0.098 / 0.95)
        self.assertEqual(extinction_to_scattering(0.098), 0.098)
        with self.assertRaises(ConfigError):
            extinction_to_scattering(0.1, 1.0)

    def test_sub_natural_width_warns(self):
        with self.assertLogs('spectroscopy.services', level='WARNING'):
            model_points(DETUNINGS, LineShape(p_sc_max=0.1, fwhm=3.0))

    def test_laser_linewidth_broadens(self):
        shape = LineShape(p_sc_max=0.1, fwhm=6.0, laser_linewidth=1.0)
        self.assertAlmostEqual(shape.effective_fwhm, np.hypot(6.0, 1.0))

    def test_invalid_shape(self):
        with self.assertRaises(ConfigError):
            LineShape(p_sc_max=0.1, fwhm=0.0)
        with self.assertRaises(ConfigError):
            LineShape(p_sc_max=1.5, fwhm=6.0)


class LorentzianFitTests(SimpleTestCase):
    def test_noiseless_spectrum_is_recovered(self):
        shape = LineShape(p_sc_max=0.098, fwhm=7.5, center=1.5)
        fit = fit_lorentzian(with_sigma(model_points(DETUNINGS, shape)))
        self.assertAlmostEqual(fit.extinction, 0.098, places=8)
        self.assertAlmostEqual(fit.fwhm, 7.5, places=6)
        self.assertAlmostEqual(fit.center, 1.5, places=6)
        self.assertAlmostEqual(fit.baseline, 1.0, places=8)
        self.assertEqual(fit.dof, 22)
        self.assertLess(fit.chi_square, 1e-10)

    def test_fitted_dip_bottoms_at_the_center(self):
        points = synthetic_spectrum(DETUNINGS, LineShape(p_sc_max=0.098, fwhm=7.5, center=2.3), 0.005, seed=9)
        fit = fit_lorentzian(points)
        grid = np.linspace(-25, 25, 50001)
        curve = fitted_transmission(fit, grid)
        self.assertAlmostEqual(grid[np.argmin(curve)], fit.center, delta=1e-3)
        self.assertLess(float(fitted_transmission(fit, [fit.center])[0]), curve.min() + 1e-12)

    def test_point_order_does_not_matter(self):
        points = synthetic_spectrum(DETUNINGS, LineShape(p_sc_max=0.074, fwhm=9.1), 0.005, seed=3)
        shuffled = list(points)
        random.Random(11).shuffle(shuffled)
        self.assertEqual(fit_lorentzian(points), fit_lorentzian(shuffled))

    def test_flat_spectrum_is_degenerate(self):
        points = [SpectrumPoint(d, 1.0, 0.01) for d in DETUNINGS]
        with self.assertRaises(DegenerateSpectrumError):
            fit_lorentzian(points)

    def test_too_few_points(self):
        points = with_sigma(model_points([-1.0, 0.0, 1.0], LineShape(p_sc_max=0.1, fwhm=6.0)))
        with self.assertRaises(ConfigError):
            fit_lorentzian(points)

    def test_zero_uncertainty_is_rejected(self):
        points = model_points(DETUNINGS, LineShape(p_sc_max=0.1, fwhm=6.0))
        with self.assertRaises(ConfigError):
            fit_lorentzian(points)

    def test_curvature_errors_match_resampling(self):
        points = synthetic_spectrum(DETUNINGS, LineShape(p_sc_max=0.098, fwhm=7.5), 0.005, seed=5)
        fit = fit_lorentzian(points)
        spread = bootstrap_fit(points, fit, resamples=100, seed=6)
        self.assertAlmostEqual(spread['extinction'] / fit.extinction_sigma, 1.0, delta=0.35)
        self.assertAlmostEqual(spread['fwhm'] / fit.fwhm_sigma, 1.0, delta=0.35)

    @tag('slow')
    def test_synthetic_spectra_round_trip(self):
        """Both measured line shapes are fit back within 2 sigma in at least 90 of 100 seeds."""
        for extinction, fwhm in ((0.098, 7.5), (0.074, 9.1)):
            shape = LineShape(p_sc_max=extinction, fwhm=fwhm)
            hits = {'extinction': 0, 'fwhm': 0, 'center': 0}
            for seed in range(100):
                fit = fit_lorentzian(synthetic_spectrum(DETUNINGS, shape, 0.005, seed=seed))
                hits['extinction'] += abs(fit.extinction - extinction) <= 2 * fit.extinction_sigma
                hits['fwhm'] += abs(fit.fwhm - fwhm) <= 2 * fit.fwhm_sigma
                hits['center'] += abs(fit.center) <= 2 * fit.center_sigma
            for name, count in hits.items():
                self.assertGreaterEqual(count, 90, f'{name} at eps={extinction}: {count}/100')


class SpectrumFileTests(SimpleTestCase):
    def test_read_written_spectrum(self):
        points = synthetic_spectrum(DETUNINGS, LineShape(p_sc_max=0.098, fwhm=7.5), 0.005, seed=1)
        with tempfile.TemporaryDirectory() as directory:
            path = Path(directory) / 'spectrum.csv'
            spectrum_frame(points).to_csv(path, index=False, float_format='%.17g')
            loaded = read_spectrum(path)
        self.assertEqual(len(loaded), len(points))
        np.testing.assert_allclose(
            [(p.detuning, p.transmission, p.sigma) for p in loaded],
            [(p.detuning, p.transmission, p.sigma) for p in points],
            rtol=1e-14,
        )

    def test_missing_columns(self):
        with tempfile.TemporaryDirectory() as directory:
            path = Path(directory) / 'spectrum.csv'
            path.write_text('detuning_mhz,transmission\n0,0.9\n', encoding='utf-8')
            with self.assertRaises(ConfigError) as caught:
                read_spectrum(path)
        self.assertIn('sigma', str(caught.exception))


class LossChainTests(SimpleTestCase):
    def test_bundled_chain(self):
        """Methods loss chain leaves 53 % of the light."""
        chain = read_loss_chain(CHAIN_PATH)
        self.assertEqual(len(chain.elements), 3)
        self.assertAlmostEqual(chain_transmission(chain), 0.531, delta=0.005)

    def test_order_does_not_matter(self):
        chain = read_loss_chain(CHAIN_PATH)
        reversed_chain = LossChain(elements=tuple(reversed(chain.elements)))
        self.assertAlmostEqual(chain_transmission(chain), chain_transmission(reversed_chain), places=15)

    def test_transmission_column(self):
        with tempfile.TemporaryDirectory() as directory:
            path = Path(directory) / 'chain.csv'
            path.write_text('name,transmission\nwindow,0.9\nfiber,0.5\n', encoding='utf-8')
            self.assertAlmostEqual(chain_transmission(read_loss_chain(path)), 0.45)

    def test_invalid_elements(self):
        with self.assertRaises(ConfigError):
            LossChain(elements=())
        with self.assertRaises(ConfigError):
            LossElement(name='opaque', transmission=0.0)
