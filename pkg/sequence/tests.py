import math
import random
from unittest import mock

import numpy as np
from django.test import SimpleTestCase, tag
from joblib import parallel_config

from errors import ConfigError, ExcludedEventError, NumericalError, ReductionError
from sequence.models import SequenceConfig, TransmissionEstimate, TrapEvent
from sequence.services import (
    EVENT_COLUMNS,
    calibrate_estimator,
    measure_point,
    point_rates,
    reduce_event,
    simulate_event,
    synthesize_spectrum,
    weighted_average,
)
from spectroscopy.models import LineShape
from spectroscopy.services import fit_lorentzian

DETUNINGS = np.linspace(-25, 25, 11)


class ReduceEventTests(SimpleTestCase):
    def test_transmission_and_weight(self):
        event = TrapEvent(intervals=((0.13, 60), (0.14, 64)), reference_time=2.0, reference_counts=1000)
        estimate = reduce_event(event)
        expected = (124 / 0.27) * (2.0 / 1000)
        self.assertAlmostEqual(estimate.value, expected, places=12)
        self.assertAlmostEqual(estimate.weight, 2.0 * 0.27 / 2.27, places=12)
        self.assertAlmostEqual(estimate.sigma, expected * math.sqrt(1 / 124 + 1 / 1000), places=12)

    def test_worked_example(self):
        event = TrapEvent(intervals=((0.135, 1215),), reference_time=2.0, reference_counts=20000)
        estimate = reduce_event(event)
        self.assertAlmostEqual(estimate.value, 0.9, places=12)
        self.assertAlmostEqual(estimate.sigma, 0.9 * math.sqrt(1 / 1215 + 1 / 20000), places=12)

    def test_equal_rates_give_unit_transmission(self):
        event = TrapEvent(intervals=((1.0, 500), (1.0, 500)), reference_time=2.0, reference_counts=1000)
        estimate = reduce_event(event)
        self.assertAlmostEqual(estimate.value, 1.0, places=12)
        self.assertAlmostEqual(estimate.weight, 1.0, places=12)

    def test_zero_measured_counts_keep_an_error_bar(self):
        event = TrapEvent(intervals=((0.13, 0),), reference_time=2.0, reference_counts=1000)
        estimate = reduce_event(event)
        self.assertEqual(estimate.value, 0.0)
        self.assertEqual(estimate.sigma, 0.0)

    def test_event_without_intervals_is_excluded(self):
        event = TrapEvent(intervals=(), reference_time=2.0, reference_counts=1000)
        self.assertTrue(event.excluded)
        with self.assertRaises(ExcludedEventError):
            reduce_event(event)

    def test_zero_reference_counts(self):
        event = TrapEvent(intervals=((0.13, 60),), reference_time=2.0, reference_counts=0)
        with self.assertRaises(ReductionError):
            reduce_event(event)


class WeightedAverageTests(SimpleTestCase):
    def setUp(self):
        rng = np.random.default_rng(8)
        self.estimates = [
            TransmissionEstimate(value=float(v), weight=float(w), sigma=float(s))
            for v, w, s in zip(rng.normal(0.9, 0.05, 50), rng.uniform(0.1, 0.5, 50), rng.uniform(0.01, 0.1, 50))
        ]

    def test_order_does_not_matter(self):
        shuffled = list(self.estimates)
        random.Random(3).shuffle(shuffled)
        self.assertEqual(weighted_average(self.estimates), weighted_average(shuffled))

    def test_single_estimate_passes_through(self):
        self.assertEqual(weighted_average(self.estimates[:1]), self.estimates[0])

    def test_empty_list(self):
        with self.assertRaises(ReductionError):
            weighted_average([])

    def test_identical_estimates_shrink_by_root_n(self):
        estimate = TransmissionEstimate(value=0.9, weight=0.3, sigma=0.02)
        for count in (4, 16, 100):
            average = weighted_average([estimate] * count)
            self.assertAlmostEqual(average.value, 0.9, places=12)
            self.assertAlmostEqual(average.sigma, 0.02 / math.sqrt(count), places=12)

    def test_propagated_sigma(self):
        a = TransmissionEstimate(value=0.8, weight=1.0, sigma=0.1)
        b = TransmissionEstimate(value=1.0, weight=3.0, sigma=0.2)
        average = weighted_average([a, b])
        self.assertAlmostEqual(average.value, 0.95)
        self.assertAlmostEqual(average.sigma, math.sqrt(0.1 ** 2 + 0.6 ** 2) / 4)
        self.assertEqual(average.weight, 4.0)


class SimulateEventTests(SimpleTestCase):
    def test_intervals_fit_inside_the_dwell(self):
        config = SequenceConfig(settle_time=0.02)
        rng = np.random.default_rng(1)
        for _ in range(200):
            event = simulate_event(config, rng)
            total = sum(tau + config.settle_time for tau, _ in event.intervals)
            self.assertLessEqual(total, event.dwell + 1e-12)
            for tau, counts in event.intervals:
                self.assertGreaterEqual(tau, config.interval_min)
                self.assertLessEqual(tau, config.interval_max)
                self.assertGreaterEqual(counts, 0)

    def test_mean_intervals_per_event(self):
        """1.5 s mean dwell sliced into 130-140 ms intervals gives about 11 intervals per event."""
        config = SequenceConfig()
        rng = np.random.default_rng(17)
        counts = [len(simulate_event(config, rng).intervals) for _ in range(5000)]
        self.assertAlmostEqual(np.mean(counts), 10.6, delta=0.5)

    def test_unit_transmission_matches_reference_rate(self):
        config = SequenceConfig(true_transmission=1.0, events=400)
        rng = np.random.default_rng(23)
        events = [simulate_event(config, rng) for _ in range(config.events)]
        measured = sum(e.measurement_counts for e in events) / sum(e.measurement_time for e in events)
        reference = sum(e.reference_counts for e in events) / sum(e.reference_time for e in events)
        self.assertAlmostEqual(measured / reference, 1.0, delta=0.02)

    def test_invalid_config(self):
        with self.assertRaises(ConfigError):
            SequenceConfig(interval_min=0.2, interval_max=0.1)
        with self.assertRaises(ConfigError):
            SequenceConfig(events=0)


class SynthesizeSpectrumTests(SimpleTestCase):
    def setUp(self):
        self.config = SequenceConfig(events=40)
        self.shape = LineShape(p_sc_max=0.098, fwhm=7.5)

    def test_rates_keep_scattering_constant(self):
        rates = point_rates(self.config, self.shape, [0.0, 3.75, 1000.0])
        np.testing.assert_allclose(rates[:2], [500.0, 1000.0])
        self.assertEqual(rates[2], 500.0 * self.config.max_rate_factor)

    def test_zero_extinction_is_flat(self):
        shape = LineShape(p_sc_max=0.0, fwhm=7.5)
        points, _ = synthesize_spectrum(self.config, shape, DETUNINGS, seed=31)
        for point in points:
            self.assertLess(abs(point.transmission - 1.0), 4 * point.sigma, point)

    def test_doubling_events_shrinks_error_bars(self):
        sigmas = {}
        for events in (50, 100):
            config = SequenceConfig(true_transmission=0.9, events=events)
            children = np.random.SeedSequence(5).spawn(20)
            sigmas[events] = np.mean([measure_point(config, child)[0].sigma for child in children])
        self.assertAlmostEqual(sigmas[50] / sigmas[100], math.sqrt(2), delta=0.1)

    def test_all_excluded_point_names_the_detuning(self):
        config = SequenceConfig(mean_dwell=1e-3, events=5)
        with self.assertRaises(ReductionError) as caught:
            synthesize_spectrum(config, self.shape, [2.5], seed=1, n_jobs=1)
        self.assertIsInstance(caught.exception, NumericalError)
        self.assertIn('+2.5 MHz', str(caught.exception))
        self.assertIn('excluded', str(caught.exception))

    def test_photonless_point_is_a_numerical_failure(self):
        empty = (TransmissionEstimate(value=0.0, weight=1.0, sigma=0.0), [])
        with mock.patch('sequence.services.measure_point', return_value=empty):
            with self.assertRaises(NumericalError) as caught:
                synthesize_spectrum(self.config, self.shape, [-5.0], seed=1, n_jobs=1)
        self.assertIn('-5 MHz', str(caught.exception))

    def test_same_seed_same_output(self):
        points, events = synthesize_spectrum(self.config, self.shape, DETUNINGS, seed=12)
        again, events_again = synthesize_spectrum(self.config, self.shape, DETUNINGS, seed=12)
        self.assertEqual(points, again)
        self.assertTrue(events.equals(events_again))
        self.assertEqual(list(events.columns), EVENT_COLUMNS)

    def test_workers_do_not_change_results(self):
        serial, _ = synthesize_spectrum(self.config, self.shape, DETUNINGS, seed=12, n_jobs=1)
        with parallel_config(backend='threading'):
            parallel, _ = synthesize_spectrum(self.config, self.shape, DETUNINGS, seed=12, n_jobs=3)
        self.assertEqual(serial, parallel)

    def test_event_log_marks_excluded_events(self):
        config = SequenceConfig(events=60, mean_dwell=0.2)
        _, events = synthesize_spectrum(config, self.shape, [0.0], seed=4)
        excluded = events[events['excluded'] == 1]
        self.assertGreater(len(excluded), 0)
        self.assertTrue((excluded['interval_id'] == 0).all())
        self.assertEqual(events['event_id'].nunique(), 60)

    def test_stark_offset_moves_the_line(self):
        config = SequenceConfig(events=100)
        detunings = np.linspace(10, 60, 26)
        points, _ = synthesize_spectrum(config, self.shape, detunings, seed=21, stark_offset=35.0)
        fit = fit_lorentzian(points)
        self.assertAlmostEqual(fit.center, 35.0, delta=3 * fit.center_sigma + 0.1)

    def test_fit_recovers_generating_extinction(self):
        config = SequenceConfig(events=100)
        points, _ = synthesize_spectrum(config, self.shape, np.linspace(-25, 25, 26), seed=22)
        fit = fit_lorentzian(points)
        self.assertAlmostEqual(fit.extinction, 0.098, delta=3 * fit.extinction_sigma)
        self.assertAlmostEqual(fit.fwhm, 7.5, delta=3 * fit.fwhm_sigma)


class CalibrationTests(SimpleTestCase):
    def test_estimator_slope_is_one(self):
        """At high rates the recovered transmission follows the true one with slope 1."""
        truths = [0.5, 0.7, 0.9, 1.0]
        means = [
            calibrate_estimator(SequenceConfig(true_transmission=t, count_rate=2e4, events=40), 10, base_seed=3)['mean']
            for t in truths
        ]
        slope, intercept = np.polyfit(truths, means, 1)
        self.assertAlmostEqual(slope, 1.0, delta=0.01)
        self.assertAlmostEqual(intercept, 0.0, delta=0.01)

    @tag('slow')
    def test_estimator_calibration(self):
        """200-seed Monte Carlo recovers T within 2 sigma with a sigma ratio in [0.8, 1.2]."""
        report = calibrate_estimator(SequenceConfig(true_transmission=0.902), 200, base_seed=7)
        self.assertLess(report['deviation_in_sigma'], 2.0)
        self.assertGreaterEqual(report['sigma_ratio'], 0.8)
        self.assertLessEqual(report['sigma_ratio'], 1.2)
