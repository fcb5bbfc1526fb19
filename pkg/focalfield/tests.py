import math
from dataclasses import replace
from unittest import mock

import numpy as np
from django.test import SimpleTestCase, override_settings, tag
from joblib import parallel_config

from errors import ConfigError, NumericalError, QuadratureError
from focalfield import quadrature
from focalfield.models import AngularAmplitude, BeamGeometry, FocalField
from focalfield.serializers import BeamGeometrySerializer, ScanSerializer
from focalfield.services import (
    best_focus,
    experiment_anchors,
    focal_field,
    focusing_na,
    focusing_strength_for_na,
    lens_transform,
    paraxial_focal_waist,
    scan_focusing,
    scattering_probability,
)


def experiment_beam(**changes):
    serializer = BeamGeometrySerializer(data={
        'wavelength_nm': 780.24,
        'focal_length_mm': 4.5,
        'aperture_na': 0.55,
        'focal_waist_nm': 860,
    })
    serializer.is_valid(raise_exception=True)
    return replace(serializer.save(), **changes)


class QuadratureTests(SimpleTestCase):
    def test_polynomial_is_exact(self):
        """Ensure a low-degree polynomial integrates exactly."""
        value, _ = quadrature.integrate(lambda x: 3 * x ** 2, 0.0, 2.0)
        self.assertAlmostEqual(float(value), 8.0, places=12)

    def test_smooth_integrand_converges(self):
        value, order = quadrature.integrate(np.sin, 0.0, math.pi)
        self.assertAlmostEqual(float(value), 2.0, places=10)
        self.assertGreaterEqual(order, 64)

    def test_vector_valued_integrand(self):
        scales = np.array([1.0, 2.0, 3.0])[:, None]
        value, _ = quadrature.integrate(lambda x: scales * np.exp(-x), 0.0, 1.0)
        np.testing.assert_allclose(value, scales[:, 0] * (1 - math.exp(-1)), rtol=1e-12)

    def test_non_convergence_is_reported(self):
        """Ensure the order cap raises instead of returning an unconverged value."""
        with self.assertRaises(QuadratureError) as caught:
            quadrature.integrate(lambda x: np.cos(400 * x), 0.0, 10.0, min_order=8, max_order=32)
        self.assertEqual(caught.exception.order, 32)


class BeamGeometryTests(SimpleTestCase):
    def test_focal_waist_calibration(self):
        """Ensure the input waist reproduces the 860 nm paraxial focal waist."""
        beam = experiment_beam()
        self.assertAlmostEqual(paraxial_focal_waist(beam) / 860e-9, 1.0, delta=0.01)
        self.assertAlmostEqual(beam.input_waist, 1.29955e-3, delta=1e-7)

    def test_invalid_geometry_is_rejected(self):
        with self.assertRaises(ConfigError):
            experiment_beam(aperture_na=1.0)
        with self.assertRaises(ConfigError):
            experiment_beam(input_waist=0.0)
        with self.assertRaises(ConfigError):
            experiment_beam(wavelength=-1.0)

    def test_serializer_needs_exactly_one_waist(self):
        serializer = BeamGeometrySerializer(data={
            'wavelength_nm': 780.24,
            'focal_length_mm': 4.5,
            'aperture_na': 0.55,
            'focal_waist_nm': 860,
            'input_waist_mm': 1.3,
        })
        self.assertFalse(serializer.is_valid())
        self.assertIn('input_waist_mm', serializer.errors)

    def test_scan_serializer_parses_grid(self):
        serializer = ScanSerializer(data={'range': '0.1:0.5:5', 'model': 'full'})
        self.assertTrue(serializer.is_valid(), serializer.errors)
        scan = serializer.save()
        np.testing.assert_allclose(scan['values'], [0.1, 0.2, 0.3, 0.4, 0.5])
        self.assertEqual(scan['models'], ('full',))

    def test_scan_serializer_rejects_bad_grid(self):
        serializer = ScanSerializer(data={'range': '0.1:0.5:0'})
        self.assertFalse(serializer.is_valid())
        self.assertIn('range', serializer.errors)


class LensTransformTests(SimpleTestCase):
    def test_transmitted_fraction_through_aperture(self):
        """Ensure aperture truncation matches a direct 2-D integration of the Gaussian."""
        beam = experiment_beam(input_waist=3.5e-3)
        na = beam.aperture_na
        expected = 1 - math.exp(-2 * beam.focal_length ** 2 * na ** 2 / (beam.input_waist ** 2 * (1 - na ** 2)))
        self.assertAlmostEqual(beam.transmitted_fraction, expected, places=12)

        radius = beam.aperture_radius
        x = np.linspace(-radius, radius, 1601)
        xx, yy = np.meshgrid(x, x)
        inside = xx ** 2 + yy ** 2 <= radius ** 2
        gaussian = np.exp(-2 * (xx ** 2 + yy ** 2) / beam.input_waist ** 2)
        direct = gaussian[inside].sum() * (x[1] - x[0]) ** 2 / (math.pi * beam.input_waist ** 2 / 2)
        self.assertAlmostEqual(direct, expected, delta=5e-3)

    def test_weak_focusing_is_identity(self):
        angular = lens_transform(experiment_beam(input_waist=1e-4))
        theta = np.array([0.0, 1e-4])
        np.testing.assert_allclose(angular.apodization(theta), 1.0, atol=1e-7)
        co, cross, axial = angular.circular_components(theta)
        np.testing.assert_allclose(co, 1.0, atol=1e-8)
        np.testing.assert_allclose(cross, 0.0, atol=1e-8)
        self.assertLess(abs(axial[1]), 1e-4)

    def test_off_axis_rays_gain_other_components(self):
        angular = lens_transform(experiment_beam())
        co, cross, axial = angular.circular_components(0.5)
        self.assertNotEqual(cross, 0.0)
        self.assertNotEqual(axial, 0.0)
        self.assertEqual(angular.azimuthal_orders, {'co': 0, 'cross': 2, 'axial': 1})

    def test_both_mappings_conserve_energy(self):
        for lens in (BeamGeometry.TANGENT, BeamGeometry.APLANATIC):
            field = focal_field(experiment_beam(lens=lens, power=1.0), FocalField.FULL)
            self.assertLess(field.energy.relative_error, 1e-4, lens)

    def test_missing_apodization_breaks_the_balance(self):
        for lens in (BeamGeometry.TANGENT, BeamGeometry.APLANATIC):
            flat = mock.patch.object(AngularAmplitude, 'apodization', lambda self, theta: np.ones_like(theta))
            with flat, self.assertRaises(NumericalError):
                focal_field(experiment_beam(lens=lens, power=1.0), FocalField.FULL)


class FocalFieldTests(SimpleTestCase):
    def test_zero_power_gives_zero_field(self):
        field = focal_field(experiment_beam(power=0.0), FocalField.FULL)
        self.assertEqual((field.e_plus, field.e_minus, field.e_z), (0j, 0j, 0j))

    def test_field_scales_with_root_power(self):
        for model in (FocalField.PARAXIAL, FocalField.FULL):
            single = focal_field(experiment_beam(power=1e-9), model)
            double = focal_field(experiment_beam(power=2e-9), model)
            self.assertAlmostEqual(abs(double.e_plus) / abs(single.e_plus), math.sqrt(2), places=10)

    def test_sigma_plus_focus_has_only_co_rotating_component(self):
        field = focal_field(experiment_beam(power=1.0), FocalField.FULL)
        self.assertGreater(abs(field.e_plus), 0)
        self.assertEqual(field.e_minus, 0j)
        self.assertEqual(field.e_z, 0j)

    def test_sigma_minus_mirrors_sigma_plus(self):
        plus = scattering_probability(experiment_beam(), FocalField.FULL)
        minus = scattering_probability(experiment_beam(handedness=BeamGeometry.SIGMA_MINUS), FocalField.FULL)
        self.assertAlmostEqual(plus.probability, minus.probability, places=12)

    def test_energy_balance_recorded(self):
        field = focal_field(experiment_beam(power=1.0), FocalField.PARAXIAL)
        self.assertLess(field.energy.relative_error, 1e-4)
        self.assertAlmostEqual(field.energy.transmitted_power, experiment_beam().transmitted_fraction)

    def test_unknown_model_is_rejected(self):
        with self.assertRaises(ConfigError):
            focal_field(experiment_beam(), 'vectorial')

    def test_paraxial_best_focus_lies_before_geometric_focus(self):
        self.assertLess(best_focus(experiment_beam()), 0.0)


class ScatteringProbabilityTests(SimpleTestCase):
    def test_full_model_anchor(self):
        """Full model at the experiment geometry gives 20.3 % within 5 % relative."""
        result = scattering_probability(experiment_beam(), FocalField.FULL)
        self.assertAlmostEqual(result.probability / 0.203, 1.0, delta=0.05)
        self.assertAlmostEqual(result.cross_section_ratio - result.cross_section_ratio ** 2 / 4,
                               result.probability, places=14)

    def test_paraxial_model_anchor(self):
        """Either paraxial reading matches 2.2 % within 15 % relative."""
        anchors = experiment_anchors(experiment_beam())
        candidates = [anchors['paraxial'].probability, anchors['paraxial_optimized'].probability]
        self.assertTrue(any(abs(p / 0.022 - 1) <= 0.15 for p in candidates), candidates)
        self.assertGreaterEqual(anchors['paraxial_optimized'].probability, anchors['paraxial'].probability)

    def test_probability_independent_of_power(self):
        values = {scattering_probability(experiment_beam(power=p), FocalField.FULL).probability
                  for p in (1e-12, 1e-11, 1e-10)}
        self.assertEqual(len(values), 1)

    def test_doubling_quadrature_order_is_stable(self):
        coarse = scattering_probability(experiment_beam(), FocalField.FULL).probability
        with override_settings(QUADRATURE_MIN_ORDER=512):
            fine = scattering_probability(experiment_beam(), FocalField.FULL).probability
        self.assertLess(abs(fine - coarse) / coarse, 1e-5)

    def test_weak_focusing_probability_vanishes_monotonically(self):
        beam = experiment_beam()
        values = [
            scattering_probability(replace(beam, input_waist=u * beam.focal_length), FocalField.FULL).probability
            for u in (0.08, 0.04, 0.02, 0.01)
        ]
        self.assertTrue(all(a > b for a, b in zip(values, values[1:])), values)
        self.assertLess(values[-1], 1e-3)

    def test_paraxial_limit_agreement(self):
        """Full and paraxial models agree within 5 % for u <= 0.05."""
        frame = scan_focusing(experiment_beam(), [0.02, 0.03, 0.04, 0.05])
        relative = np.abs(frame['p_sc_full'] - frame['p_sc_paraxial']) / frame['p_sc_paraxial']
        self.assertTrue((relative < 0.05).all(), relative.tolist())


class ScanFocusingTests(SimpleTestCase):
    def test_empty_grid_gives_empty_table(self):
        frame = scan_focusing(experiment_beam(), [])
        self.assertEqual(list(frame.columns), ['u', 'na', 'p_sc_paraxial', 'p_sc_full'])
        self.assertEqual(len(frame), 0)

    def test_single_point(self):
        frame = scan_focusing(experiment_beam(), [0.3], models=(FocalField.FULL,))
        self.assertEqual(len(frame), 1)
        self.assertTrue(np.isnan(frame.loc[0, 'p_sc_paraxial']))
        self.assertAlmostEqual(frame.loc[0, 'na'], focusing_na(0.3))

    def test_non_monotone_grid_is_rejected(self):
        with self.assertRaises(ConfigError):
            scan_focusing(experiment_beam(), [0.1, 0.3, 0.2])

    def test_rows_follow_grid_order_with_workers(self):
        grid = [0.5, 0.4, 0.3, 0.2]
        serial = scan_focusing(experiment_beam(), grid, models=(FocalField.FULL,), n_jobs=1)
        with parallel_config(backend='threading'):
            parallel = scan_focusing(experiment_beam(), grid, models=(FocalField.FULL,), n_jobs=2)
        np.testing.assert_array_equal(serial['u'], grid)
        np.testing.assert_allclose(parallel['p_sc_full'], serial['p_sc_full'], rtol=0, atol=0)

    def test_na_axis_round_trip(self):
        self.assertAlmostEqual(focusing_na(focusing_strength_for_na(0.9)), 0.9, places=12)

    @tag('slow')
    def test_strong_focusing_reaches_95_percent(self):
        """Full-model NA scan peaks at 95 +- 3 percentage points near NA 0.9."""
        beam = experiment_beam(aperture_na=0.9999)
        frame = scan_focusing(beam, np.linspace(0.05, 0.99, 100), axis='na', models=(FocalField.FULL,))
        best = frame.loc[frame['p_sc_full'].idxmax()]
        self.assertAlmostEqual(best.p_sc_full, 0.95, delta=0.03)
        self.assertAlmostEqual(best.na, 0.9, delta=0.05)
