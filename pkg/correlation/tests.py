import numpy as np
from django.test import SimpleTestCase, tag
from scipy import linalg

from correlation.models import G2Histogram, G2Settings, PhotonStream, TwoLevelDrive, coincidence_bins
from correlation.serializers import G2SettingsSerializer, TwoLevelDriveSerializer
from correlation.services import (
    chi_square,
    excited_population,
    g2_bloch,
    g2_closed_form,
    histogram_frame,
    histogram_g2,
    merge_histograms,
    sample_waiting_times,
    signal_fractions,
    simulate_streams,
    subtract_background,
    waiting_time_density,
)
from errors import ConfigError

WEAK_DRIVES = (0.1, 0.3, 1.0)


def experiment_drive(**options):
    return TwoLevelDrive.from_lifetime(62.0, 27e-9, **options)


class TwoLevelDriveTests(SimpleTestCase):
    def test_lifetime_conversion(self):
        drive = experiment_drive()
        self.assertAlmostEqual(drive.linewidth_mhz, 5.8946, places=3)
        self.assertAlmostEqual(drive.gamma, 1 / 27, places=12)

    def test_serializer_accepts_lifetime(self):
        serializer = TwoLevelDriveSerializer(data={'rabi_mhz': 62, 'lifetime_ns': 27})
        self.assertTrue(serializer.is_valid(), serializer.errors)
        drive = serializer.save()
        self.assertEqual(drive.rabi_mhz, 62.0)
        self.assertAlmostEqual(drive.linewidth_mhz, experiment_drive().linewidth_mhz, places=9)

    def test_serializer_needs_one_linewidth(self):
        serializer = TwoLevelDriveSerializer(data={'rabi_mhz': 62})
        self.assertFalse(serializer.is_valid())
        self.assertIn('linewidth_mhz', serializer.errors)

    def test_invalid_drive(self):
        with self.assertRaises(ConfigError):
            TwoLevelDrive(rabi_mhz=62, linewidth_mhz=0)
        with self.assertRaises(ConfigError):
            TwoLevelDrive(rabi_mhz=62, linewidth_mhz=6, split_ratio=1.0)

    def test_zero_duration_is_rejected(self):
        with self.assertRaises(ConfigError):
            G2Settings(duration=0.0)


class ClosedFormTests(SimpleTestCase):
    def test_antibunching_at_zero_delay(self):
        drives = (
            experiment_drive(),
            experiment_drive(detuning_mhz=15.0),
            TwoLevelDrive(rabi_mhz=0.3, linewidth_mhz=6.0),
        )
        for drive in drives:
            self.assertAlmostEqual(float(g2_closed_form(drive, 0.0)), 0.0, places=12)
            self.assertAlmostEqual(float(g2_bloch(drive, [0.0, 1.0])[0]), 0.0, places=12)

    def test_long_delays_decorrelate(self):
        """Far beyond 1/Gamma both the closed form and the Bloch integration sit at 1."""
        tau = np.linspace(600, 3000, 121)
        drive = experiment_drive()
        closed = g2_closed_form(drive, tau)
        np.testing.assert_allclose(closed, 1.0, rtol=0, atol=1e-6)
        np.testing.assert_allclose(g2_bloch(drive, tau), closed, rtol=0, atol=1e-6)

    def test_matches_bloch_integration(self):
        """Closed form and numerical Bloch integration agree within 1e-6 on 0..200 ns."""
        tau = np.linspace(0, 200, 2001)
        drive = experiment_drive()
        np.testing.assert_allclose(g2_closed_form(drive, tau), g2_bloch(drive, tau), rtol=0, atol=1e-6)

    def test_detuned_drive_matches_bloch_integration(self):
        tau = np.linspace(0, 150, 301)
        drive = experiment_drive(detuning_mhz=15.0)
        np.testing.assert_allclose(g2_closed_form(drive, tau), g2_bloch(drive, tau), rtol=0, atol=1e-6)

    def test_weak_drive_is_overdamped(self):
        drive = TwoLevelDrive(rabi_mhz=0.5, linewidth_mhz=6.0)
        values = g2_closed_form(drive, np.linspace(0, 300, 601))
        self.assertTrue(np.all(np.diff(values) >= -1e-12))

    def test_first_rabi_maximum(self):
        tau = np.linspace(0, 15, 15001)
        values = g2_closed_form(experiment_drive(), tau)
        self.assertAlmostEqual(tau[np.argmax(values)], 8.07, delta=0.2)
        self.assertGreater(values.max(), 1.0)

    def test_symmetric_and_decays_to_one(self):
        drive = experiment_drive()
        self.assertEqual(float(g2_closed_form(drive, -12.0)), float(g2_closed_form(drive, 12.0)))
        self.assertAlmostEqual(float(g2_closed_form(drive, 2000.0)), 1.0, places=9)

    def test_population_reaches_steady_state(self):
        drive = experiment_drive()
        self.assertAlmostEqual(float(excited_population(drive, 5000.0)), drive.steady_state_excited, places=10)


class WaitingTimeTests(SimpleTestCase):
    def test_density_is_normalized(self):
        times = np.linspace(0, 1500, 30001)
        density = waiting_time_density(experiment_drive(), times)
        self.assertEqual(density[0], 0.0)
        self.assertAlmostEqual(np.trapz(density, times), 1.0, places=4)

    def test_weak_drives_are_tabulated(self):
        for rabi in WEAK_DRIVES:
            drive = TwoLevelDrive(rabi_mhz=rabi, linewidth_mhz=6.0)
            samples = sample_waiting_times(drive, 20000, np.random.default_rng(11))
            self.assertAlmostEqual(samples.mean() / (1e9 / drive.emission_rate), 1.0, delta=0.03, msg=rabi)

    def test_weak_drive_streams(self):
        drive = TwoLevelDrive(rabi_mhz=0.3, linewidth_mhz=6.0)
        d1, d2 = simulate_streams(drive, 1e-2, seed=1)
        expected = sum(drive.detected_rates()) * 1e-2
        self.assertAlmostEqual((len(d1) + len(d2)) / expected, 1.0, delta=0.1)

    def test_degenerate_no_emission_evolution(self):
        """At Omega = Gamma / 2 on resonance the density stays normalized."""
        drive = TwoLevelDrive(rabi_mhz=3.0, linewidth_mhz=6.0)
        times = np.linspace(0, 4000, 20001)
        self.assertAlmostEqual(np.trapz(waiting_time_density(drive, times), times), 1.0, places=4)

    def test_detuned_density_matches_matrix_exponential(self):
        drive = experiment_drive(detuning_mhz=20.0)
        times = np.linspace(0, 300, 61)
        generator = -1j * np.array([[0.0, drive.rabi / 2], [drive.rabi / 2, -drive.detuning - 0.5j * drive.gamma]])
        excited = np.array([linalg.expm(generator * t)[1, 0] for t in times])
        np.testing.assert_allclose(waiting_time_density(drive, times), drive.gamma * np.abs(excited) ** 2,
                                   rtol=1e-8, atol=1e-14)

    def test_mean_delay_matches_emission_rate(self):
        drive = experiment_drive()
        samples = sample_waiting_times(drive, 20000, np.random.default_rng(4))
        self.assertAlmostEqual(samples.mean() / (1e9 / drive.emission_rate), 1.0, delta=0.03)


class StreamTests(SimpleTestCase):
    def test_same_seed_same_streams(self):
        first = simulate_streams(experiment_drive(), 1e-4, seed=9)
        second = simulate_streams(experiment_drive(), 1e-4, seed=9)
        for a, b in zip(first, second):
            np.testing.assert_array_equal(a.timestamps, b.timestamps)

    def test_rates_follow_drive(self):
        drive = experiment_drive(detection_efficiency=0.5, background_rate=1e5)
        d1, d2 = simulate_streams(drive, 2e-3, seed=2)
        expected = drive.detected_rates()[0] + drive.background_rate
        self.assertAlmostEqual(d1.rate / expected, 1.0, delta=0.05)
        self.assertEqual((d1.label, d2.label), ('D1', 'D2'))

    def test_non_positive_duration_is_rejected(self):
        with self.assertRaises(ConfigError):
            simulate_streams(experiment_drive(), 0.0, seed=1)

    def test_unsorted_timestamps_are_rejected(self):
        with self.assertRaises(ConfigError):
            PhotonStream(label='D1', timestamps=[2e-6, 1e-6], duration=1e-3)


class HistogramTests(SimpleTestCase):
    def test_single_pair_lands_in_its_bin(self):
        d1 = PhotonStream('D1', [1e-6], 1e-3)
        d2 = PhotonStream('D2', [1.0000055e-6], 1e-3)
        histogram = histogram_g2(d1, d2)
        self.assertEqual(int(histogram.counts.sum()), 1)
        self.assertEqual(int(np.argmax(histogram.counts)), 105)
        self.assertAlmostEqual(histogram.centers[105], 5.5)

    def test_empty_stream_is_flagged(self):
        d1 = PhotonStream('D1', [], 1e-3)
        d2 = PhotonStream('D2', [1e-6], 1e-3)
        histogram = histogram_g2(d1, d2)
        self.assertTrue(histogram.insufficient_data)
        self.assertEqual(int(histogram.counts.sum()), 0)

    def test_swapping_detectors_mirrors_delays(self):
        d1, d2 = simulate_streams(experiment_drive(background_rate=2e5), 2e-4, seed=6)
        forward = histogram_g2(d1, d2)
        backward = histogram_g2(d2, d1)
        np.testing.assert_array_equal(forward.counts, backward.counts[::-1])
        np.testing.assert_allclose(forward.centers, -backward.centers[::-1])

    def test_bin_width_must_divide_window(self):
        d1, d2 = simulate_streams(experiment_drive(), 1e-4, seed=5)
        with self.assertRaises(ConfigError):
            histogram_g2(d1, d2, bin_width_ns=3.0, window_ns=100.0)
        self.assertEqual(coincidence_bins(100.0, 0.5), 400)
        with self.assertRaises(ConfigError):
            G2Settings(duration=1e-3, bin_width_ns=3.0)
        serializer = G2SettingsSerializer(data={'duration_s': 1e-3, 'bin_width_ns': 3.0})
        self.assertFalse(serializer.is_valid())
        self.assertIn('bin_width_ns', serializer.errors)

    def test_chunked_histogram_equals_single_pass(self):
        d1, d2 = simulate_streams(experiment_drive(), 2e-4, seed=5)
        single = histogram_g2(d1, d2, chunks=1)
        chunked = histogram_g2(d1, d2, chunks=7)
        np.testing.assert_array_equal(single.counts, chunked.counts)

    def test_merge_needs_matching_bins(self):
        d1, d2 = simulate_streams(experiment_drive(), 1e-4, seed=5)
        with self.assertRaises(ConfigError):
            merge_histograms([histogram_g2(d1, d2, bin_width_ns=1.0), histogram_g2(d1, d2, bin_width_ns=2.0)])

    def test_background_subtraction(self):
        d1, d2 = simulate_streams(experiment_drive(), 2e-4, seed=5)
        histogram = histogram_g2(d1, d2)
        values, sigma = subtract_background(histogram, 1.0)
        np.testing.assert_array_equal(values, histogram.values)
        values, _ = subtract_background(histogram, 0.5)
        np.testing.assert_allclose(values, (histogram.values - 0.75) / 0.25)
        with self.assertRaises(ConfigError):
            subtract_background(histogram, 0.0)

    def test_accidental_level_subtracts_to_zero(self):
        """A histogram holding only the accidental level 1 - rho1 rho2 corrects to zero."""
        edges = np.linspace(-100.0, 100.0, 201)
        histogram = G2Histogram(edges=edges, counts=np.full(200, 25, dtype=np.int64), duration=1e-3,
                                singles=(10000, 10000))
        self.assertAlmostEqual(histogram.normalization, 100.0)
        values, _ = subtract_background(histogram, np.sqrt(0.75))
        np.testing.assert_allclose(values, 0.0, atol=1e-12)

    def test_background_corrected_antibunching(self):
        drive = experiment_drive(background_rate=4e6)
        d1, d2 = simulate_streams(drive, 2e-3, seed=14)
        histogram = histogram_g2(d1, d2)
        rho1, rho2 = signal_fractions(drive)
        values, sigma = subtract_background(histogram, rho1, rho2)
        center = slice(99, 101)
        self.assertGreater(histogram.values[center].mean(), 0.35)
        self.assertLess(abs(values[center].mean()), 4 * sigma[center].mean() + 0.05)

    def test_chi_square_with_background(self):
        drive = experiment_drive(background_rate=2e6)
        d1, d2 = simulate_streams(drive, 1e-3, seed=3)
        chi2, dof = chi_square(drive, histogram_g2(d1, d2))
        self.assertEqual(dof, 200)
        self.assertGreaterEqual(chi2 / dof, 0.6)
        self.assertLessEqual(chi2 / dof, 1.4)

    def test_frame_columns(self):
        d1, d2 = simulate_streams(experiment_drive(), 1e-4, seed=5)
        histogram = histogram_g2(d1, d2)
        frame = histogram_frame(histogram, subtract_background(histogram, 0.9))
        self.assertEqual(list(frame.columns), ['tau_ns', 'g2', 'sigma', 'counts', 'g2_corrected', 'sigma_corrected'])
        self.assertEqual(len(frame), 200)

    @tag('slow')
    def test_simulated_histogram_matches_closed_form(self):
        """Seeded stream with over 10^4 coincidences gives chi2/dof within [0.7, 1.3]."""
        drive = experiment_drive()
        d1, d2 = simulate_streams(drive, 5e-3, seed=20080801)
        histogram = histogram_g2(d1, d2)
        self.assertGreaterEqual(int(histogram.counts.sum()), 10_000)
        chi2, dof = chi_square(drive, histogram)
        self.assertGreaterEqual(chi2 / dof, 0.7)
        self.assertLessEqual(chi2 / dof, 1.3)
        zero = int(np.argmin(np.abs(histogram.centers + 0.5)))
        self.assertLess(histogram.values[zero], 0.2)
