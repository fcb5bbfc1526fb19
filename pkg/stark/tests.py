import tempfile
from dataclasses import replace
from pathlib import Path

from django.conf import settings
from django.test import SimpleTestCase
from scipy import constants
from sympy import Rational

from errors import ConfigError
from stark.models import EXCITED, GROUND, FortParams
from stark.serializers import FortParamsSerializer
from stark.services import (
    DIPOLE_AU,
    POLARIZABILITY_AU,
    calibrate_power,
    polarizability_components,
    probe_resonance_offset,
    read_line_table,
    shift_table,
    sublevel_shifts,
    trap_depth,
)


class LineTableTests(SimpleTestCase):
    def setUp(self):
        self.lines = read_line_table(settings.LINE_TABLE_PATH)

    def test_bundled_table(self):
        self.assertEqual(self.lines.version, '2024.1')
        self.assertEqual(self.lines.nuclear_spin, Rational(3, 2))
        self.assertIn('5S1/2', self.lines.levels)
        self.assertIn('5P3/2', self.lines.levels)
        d2 = [line for line in self.lines.transitions if line.lower == '5S1/2' and line.upper == '5P3/2']
        self.assertEqual(len(d2), 1)
        self.assertAlmostEqual(d2[0].wavelength_nm, 780.2415, places=4)

    def test_couplings_see_lines_from_both_ends(self):
        couplings = self.lines.couplings('5P3/2')
        lower = [c for c in couplings if c.partner == '5S1/2']
        self.assertEqual(len(lower), 1)
        self.assertLess(lower[0].angular_frequency, 0)
        self.assertTrue(any(c.angular_frequency > 0 for c in couplings))

    def test_missing_file(self):
        with self.assertRaises(ConfigError) as caught:
            read_line_table('/nonexistent/lines.dat')
        self.assertIn('/nonexistent/lines.dat', str(caught.exception))

    def test_malformed_row_names_the_line(self):
        with tempfile.TemporaryDirectory() as directory:
            path = Path(directory) / 'lines.dat'
            path.write_text('# version: test\n5S1/2 5P3/2 1/2 3/2 780.24 6.07\n', encoding='utf-8')
            with self.assertRaises(ConfigError) as caught:
                read_line_table(path)
        self.assertIn('lines.dat:2', str(caught.exception))

    def test_missing_required_transitions(self):
        bundled = Path(settings.LINE_TABLE_PATH).read_text(encoding='utf-8')
        trimmed = '\n'.join(line for line in bundled.splitlines() if not line.startswith('5P3/2  6S1/2'))
        with tempfile.TemporaryDirectory() as directory:
            path = Path(directory) / 'lines.dat'
            path.write_text(trimmed + '\n', encoding='utf-8')
            with self.assertRaises(ConfigError) as caught:
                read_line_table(path)
        self.assertIn('5P3/2-6S1/2', str(caught.exception))


class FortParamsTests(SimpleTestCase):
    def setUp(self):
        self.lines = read_line_table(settings.LINE_TABLE_PATH)
        self.fort = calibrate_power(FortParams(waist=1.4e-6, power=1.0), self.lines, 27.0)

    def test_peak_intensity(self):
        fort = FortParams(waist=2e-6, power=10e-3)
        self.assertAlmostEqual(fort.peak_intensity, 2 * 10e-3 / (constants.pi * 4e-12))

    def test_calibration_reaches_depth(self):
        self.assertAlmostEqual(trap_depth(self.fort, self.lines), 27.0, places=8)
        self.assertGreater(self.fort.power, 5e-3)
        self.assertLess(self.fort.power, 80e-3)

    def test_serializer_calibrates_from_depth(self):
        serializer = FortParamsSerializer(data={'waist_um': 1.4, 'trap_depth_mhz': 27},
                                          context={'lines': self.lines})
        self.assertTrue(serializer.is_valid(), serializer.errors)
        fort = serializer.save()
        self.assertAlmostEqual(fort.power, self.fort.power, places=12)

    def test_serializer_needs_one_strength(self):
        serializer = FortParamsSerializer(data={'waist_um': 1.4, 'power_mw': 20, 'trap_depth_mhz': 27})
        self.assertFalse(serializer.is_valid())
        self.assertIn('power_mw', serializer.errors)

    def test_resonant_trap_is_rejected(self):
        with self.assertRaises(ConfigError):
            sublevel_shifts(replace(self.fort, wavelength=780.2415e-9), self.lines)

    def test_invalid_trap(self):
        with self.assertRaises(ConfigError):
            FortParams(waist=0.0, power=1e-3)
        with self.assertRaises(ConfigError):
            FortParams(waist=1e-6, power=-1e-3)


class SublevelShiftTests(SimpleTestCase):
    def setUp(self):
        self.lines = read_line_table(settings.LINE_TABLE_PATH)
        self.fort = calibrate_power(FortParams(waist=1.4e-6, power=1.0), self.lines, 27.0)

    def test_shifts_are_linear_in_power(self):
        """Doubling the power doubles every shift and the depth, over a power decade."""
        for scale in (0.3, 1.0, 3.0):
            fort = replace(self.fort, power=scale * self.fort.power)
            doubled = replace(fort, power=2 * fort.power)
            self.assertAlmostEqual(trap_depth(doubled, self.lines) / trap_depth(fort, self.lines), 2.0, delta=0.02)
            self.assertAlmostEqual(trap_depth(fort, self.lines), 27.0 * scale, delta=0.27 * scale)
            for level in (GROUND, EXCITED):
                single = sublevel_shifts(fort, self.lines, level)
                double = sublevel_shifts(doubled, self.lines, level)
                for m in level.m_values:
                    self.assertAlmostEqual(double[m] / single[m], 2.0, delta=0.02)

    def test_zero_power_gives_no_shift(self):
        shifts = sublevel_shifts(replace(self.fort, power=0.0), self.lines)
        self.assertTrue(all(value == 0 for value in shifts.shifts.values()))

    def test_ground_state_is_trapped_with_small_spread(self):
        """F=2 sublevels are lowered by 27 MHz on average with a spread of about 1 MHz."""
        ground = sublevel_shifts(self.fort, self.lines, GROUND)
        self.assertEqual(sorted(ground.shifts), [-2, -1, 0, 1, 2])
        self.assertTrue(all(value < 0 for value in ground.shifts.values()))
        self.assertGreaterEqual(ground.spread, 0.5)
        self.assertLessEqual(ground.spread, 2.0)

    def test_excited_sublevels_shift_upwards(self):
        excited = sublevel_shifts(self.fort, self.lines, EXCITED)
        self.assertEqual(len(excited.shifts), 7)
        self.assertTrue(all(value > 0 for value in excited.shifts.values()), excited.shifts)
        self.assertGreater(excited.stretched(1), excited.stretched(-1))

    def test_reversed_handedness_mirrors_sublevels(self):
        plus = sublevel_shifts(self.fort, self.lines, EXCITED)
        minus = sublevel_shifts(replace(self.fort, handedness=FortParams.SIGMA_MINUS), self.lines, EXCITED)
        for m in EXCITED.m_values:
            self.assertAlmostEqual(plus[m], minus[-m], places=9)

    def test_probe_offsets_differ_by_handedness(self):
        plus = probe_resonance_offset(self.fort, self.lines, FortParams.SIGMA_PLUS)
        minus = probe_resonance_offset(self.fort, self.lines, FortParams.SIGMA_MINUS)
        self.assertGreater(plus, minus)
        self.assertGreater(minus, 27.0)

    def test_shift_table_lists_both_levels(self):
        table = shift_table(self.fort, self.lines)
        self.assertEqual(list(table.columns), ['level', 'f', 'm_f', 'shift_mhz'])
        self.assertEqual(len(table), 12)


class PolarizabilityTests(SimpleTestCase):
    def setUp(self):
        self.lines = read_line_table(settings.LINE_TABLE_PATH)
        self.fort = FortParams(waist=1.4e-6, power=20e-3)

    def scalar_sum(self, label, j):
        omega = self.fort.angular_frequency
        total = 0.0
        for coupling in self.lines.couplings(label):
            w0 = coupling.angular_frequency
            d = coupling.transition.dipole_au * DIPOLE_AU
            total += 2 * w0 * d ** 2 / (3 * int(2 * j + 1) * constants.hbar * (w0 ** 2 - omega ** 2))
        return total / POLARIZABILITY_AU

    def test_scalar_part_matches_sum_over_states(self):
        for label, j in (('5S1/2', Rational(1, 2)), ('5P3/2', Rational(3, 2))):
            alpha = polarizability_components(self.fort, self.lines, label, j)
            self.assertAlmostEqual(alpha.scalar / self.scalar_sum(label, j), 1.0, places=9)

    def test_ground_state_has_no_tensor_part(self):
        alpha = polarizability_components(self.fort, self.lines, '5S1/2', Rational(1, 2))
        self.assertEqual(alpha.tensor, 0.0)
        self.assertGreater(alpha.scalar, 0)
