import io
import json
import tempfile
from pathlib import Path
from unittest import mock

import pandas as pd
import yaml
from django.conf import settings
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase

from errors import ConfigError, FitError, OutputError
from runs.models import RunConfig
from runs.services import OutputDirectory, flatten_errors, load_run_config, merge_overrides
from runs.validators import parse_grid

BASE_DIR = Path(settings.BASE_DIR)


def base_config(output_dir):
    return {
        'seed': 42,
        'output_dir': str(output_dir),
        'beam': {
            'wavelength_nm': 780.24,
            'focal_length_mm': 4.5,
            'aperture_na': 0.55,
            'focal_waist_nm': 860,
        },
        'fort': {'waist_um': 1.4, 'trap_depth_mhz': 27},
        'lines': {'path': str(BASE_DIR / 'stark' / 'data' / 'rb87_lines.dat')},
        'spectrum': {'detunings': '-25:25:11', 'extinction': 0.098, 'fwhm_mhz': 7.5, 'sigma': 0.005},
        'losses': {'path': str(BASE_DIR / 'spectroscopy' / 'data' / 'transmission_chain.csv')},
        'drive': {'rabi_mhz': 62, 'lifetime_ns': 27},
        'g2': {'duration_s': 2e-4},
        'sequence': {'events': 20},
    }


class ConfigTestCase(SimpleTestCase):
    def setUp(self):
        self.directory = tempfile.TemporaryDirectory()
        self.root = Path(self.directory.name)
        self.output = self.root / 'out'

    def tearDown(self):
        self.directory.cleanup()

    def write_config(self, data, name='run.yaml'):
        path = self.root / name
        path.write_text(yaml.safe_dump(data), encoding='utf-8')
        return path


class LoadRunConfigTests(ConfigTestCase):
    def test_bundled_configuration_loads(self):
        config = load_run_config(settings.DEFAULT_CONFIG)
        for name in RunConfig.SECTIONS:
            self.assertIsNotNone(getattr(config, name), name)
        self.assertEqual(config.seed, 20080801)
        self.assertAlmostEqual(config.fort.power, 20.5e-3, delta=1e-3)

    def test_missing_file_names_the_path(self):
        with self.assertRaises(ConfigError) as caught:
            load_run_config(self.root / 'absent.yaml')
        self.assertIn('absent.yaml', str(caught.exception))

    def test_errors_are_collected_per_field(self):
        data = base_config(self.output)
        data['beam']['aperture_na'] = 1.5
        data['drive']['split_ratio'] = 0
        with self.assertRaises(ConfigError) as caught:
            load_run_config(self.write_config(data))
        message = str(caught.exception)
        self.assertIn('beam.aperture_na', message)
        self.assertIn('drive.split_ratio', message)

    def test_seed_must_fit_64_bits(self):
        data = base_config(self.output)
        data['seed'] = 2 ** 64
        with self.assertRaises(ConfigError):
            load_run_config(self.write_config(data))
        data['seed'] = 2 ** 64 - 1
        self.assertEqual(load_run_config(self.write_config(data)).seed, 2 ** 64 - 1)

    def test_relative_paths_resolve_against_config(self):
        data = base_config(self.output)
        chain = self.root / 'data' / 'chain.csv'
        chain.parent.mkdir()
        chain.write_text('name,loss\nwindow,0.5\n', encoding='utf-8')
        data['losses']['path'] = 'data/chain.csv'
        config = load_run_config(self.write_config(data))
        self.assertEqual(config.losses.elements[0].transmission, 0.5)

    def test_missing_referenced_file(self):
        data = base_config(self.output)
        data['losses']['path'] = 'nowhere.csv'
        with self.assertRaises(ConfigError) as caught:
            load_run_config(self.write_config(data))
        self.assertIn('nowhere.csv', str(caught.exception))

    def test_hash_ignores_output_dir_but_not_inputs(self):
        data = base_config(self.output)
        first = load_run_config(self.write_config(data)).config_hash
        data['output_dir'] = str(self.root / 'elsewhere')
        self.assertEqual(load_run_config(self.write_config(data)).config_hash, first)
        data['spectrum']['fwhm_mhz'] = 9.1
        self.assertNotEqual(load_run_config(self.write_config(data)).config_hash, first)

    def test_overrides_are_validated(self):
        path = self.write_config(base_config(self.output))
        with self.assertRaises(ConfigError):
            load_run_config(path, {'g2': {'duration_s': 0}})
        config = load_run_config(path, {'seed': 7, 'format': None})
        self.assertEqual(config.seed, 7)

    def test_require_lists_missing_sections(self):
        data = base_config(self.output)
        del data['drive']
        config = load_run_config(self.write_config(data))
        with self.assertRaises(ConfigError) as caught:
            config.require('drive', 'g2')
        self.assertIn('drive', str(caught.exception))
        self.assertNotIn('g2,', str(caught.exception))

    def test_merge_and_flatten_helpers(self):
        merged = merge_overrides({'a': {'b': 1, 'c': 2}}, {'a': {'b': 3, 'c': None}, 'd': None})
        self.assertEqual(merged, {'a': {'b': 3, 'c': 2}})
        lines = flatten_errors({'beam': {'aperture_na': ['bad'], 'non_field_errors': ['worse']}})
        self.assertEqual(lines, ['beam.aperture_na: bad', 'beam: worse'])

    def test_grid_parsing(self):
        self.assertEqual(parse_grid('1:1:1').tolist(), [1.0])
        with self.assertRaises(ConfigError):
            parse_grid('1:2')


class OutputDirectoryTests(ConfigTestCase):
    def test_refuses_paths_outside(self):
        output = OutputDirectory(self.output)
        with self.assertRaises(OutputError):
            output.path_for('../escape.csv')
        with self.assertRaises(OutputError):
            output.path_for('/tmp/escape.csv')

    def test_table_formats(self):
        frame = pd.DataFrame({'x': [0.5, 1.0], 'y': [1, 2]})
        OutputDirectory(self.output, metadata={'seed': 3}).write_table('table', frame)
        text = (self.output / 'table.csv').read_text(encoding='utf-8')
        self.assertTrue(text.startswith('# seed=3\nx,y\n'))

        OutputDirectory(self.output, fmt=RunConfig.KV, metadata={'seed': 3}).write_table('table', frame)
        document = yaml.safe_load((self.output / 'table.yaml').read_text(encoding='utf-8'))
        self.assertEqual(document['columns'], {'x': [0.5, 1.0], 'y': [1, 2]})
        self.assertEqual(document['metadata'], {'seed': 3})

    def test_write_failure_is_output_error(self):
        blocker = self.root / 'file'
        blocker.write_text('', encoding='utf-8')
        with self.assertRaises(OutputError):
            OutputDirectory(blocker / 'sub').write_record('record', {'a': 1})


class CommandTests(ConfigTestCase):
    def run_command(self, name, *args, data=None):
        path = self.write_config(data or base_config(self.output))
        stdout = io.StringIO()
        call_command(name, '--config', str(path), *args, stdout=stdout)
        return stdout.getvalue()

    def test_losses_prints_total(self):
        output = self.run_command('losses')
        self.assertIn('0.531', output)
        self.assertTrue((self.output / 'loss_chain.csv').is_file())

    def test_missing_config_exit_status(self):
        with self.assertRaises(CommandError) as caught:
            call_command('losses', '--config', str(self.root / 'absent.yaml'), stdout=io.StringIO())
        self.assertEqual(caught.exception.returncode, 1)
        self.assertIn('absent.yaml', str(caught.exception))

    def test_missing_section_exit_status(self):
        data = base_config(self.output)
        del data['losses']
        with self.assertRaises(CommandError) as caught:
            self.run_command('losses', data=data)
        self.assertEqual(caught.exception.returncode, 1)

    def test_g2_zero_duration_rejected_before_simulation(self):
        with mock.patch('correlation.management.commands.g2.simulate_streams') as simulate:
            with self.assertRaises(CommandError) as caught:
                self.run_command('g2', '--duration', '0')
        self.assertEqual(caught.exception.returncode, 1)
        simulate.assert_not_called()
        self.assertFalse(self.output.exists())

    def test_numerical_failure_exit_status(self):
        with mock.patch('spectroscopy.management.commands.spectrum.fit_lorentzian', side_effect=FitError('no')):
            with self.assertRaises(CommandError) as caught:
                self.run_command('spectrum')
        self.assertEqual(caught.exception.returncode, 2)
        self.assertFalse(self.output.exists())

    def test_output_error_exit_status(self):
        blocker = self.root / 'blocker'
        blocker.write_text('', encoding='utf-8')
        with self.assertRaises(CommandError) as caught:
            self.run_command('losses', '--out', str(blocker / 'out'))
        self.assertEqual(caught.exception.returncode, 3)

    def test_field_single_point_range(self):
        self.run_command('field', '--model', 'full', '--scan', 'u', '--range', '0.3:0.3:1')
        frame = pd.read_csv(self.output / 'field_scan.csv', comment='#')
        self.assertEqual(len(frame), 1)
        self.assertEqual(list(frame.columns)[:4], ['u', 'na', 'p_sc_paraxial', 'p_sc_full'])

    def test_field_anchor_lines(self):
        output = self.run_command('field', '--anchor', '--model', 'full', '--range', '0.3:0.3:1')
        lines = output.splitlines()
        self.assertTrue(lines[0].startswith('paraxial P_sc = '))
        self.assertTrue(lines[1].startswith('full P_sc = 20.'))

    def test_stark_summary(self):
        output = self.run_command('stark')
        self.assertIn('trap depth 27.00 MHz', output)
        table = pd.read_csv(self.output / 'stark_shifts.csv', comment='#')
        self.assertEqual(len(table), 12)

    def test_spectrum_from_input_file(self):
        spectrum = self.root / 'measured.csv'
        self.run_command('spectrum')
        frame = pd.read_csv(self.output / 'spectrum.csv', comment='#')
        frame[['detuning_mhz', 'transmission', 'sigma']].to_csv(spectrum, index=False)
        self.run_command('spectrum', '--input', str(spectrum), '--out', str(self.root / 'refit'))
        first = pd.read_csv(self.output / 'spectrum_fit.csv', comment='#').set_index('key')['value']
        second = pd.read_csv(self.root / 'refit' / 'spectrum_fit.csv', comment='#').set_index('key')['value']
        self.assertAlmostEqual(float(first['extinction']), float(second['extinction']), places=6)

    def test_manifest(self):
        self.run_command('g2')
        manifest = json.loads((self.output / 'manifest.json').read_text(encoding='utf-8'))
        self.assertEqual(manifest['command'], 'g2')
        self.assertEqual(manifest['seed'], 42)
        self.assertEqual(len(manifest['config_hash']), 64)
        self.assertEqual(manifest['line_table_version'], '2024.1')
        self.assertIn('numpy', manifest['versions'])
        self.assertEqual(manifest['files'], ['photon_streams.csv', 'g2_histogram.csv', 'g2_summary.csv'])

    def test_sequence_is_reproducible(self):
        """Two runs with the same seed write byte-identical files."""
        self.run_command('sequence', '--out', str(self.root / 'a'))
        self.run_command('sequence', '--out', str(self.root / 'b'))
        names = sorted(p.name for p in (self.root / 'a').iterdir())
        self.assertIn('sequence_events.csv', names)
        for name in names:
            self.assertEqual((self.root / 'a' / name).read_bytes(), (self.root / 'b' / name).read_bytes(), name)

    def test_sequence_seed_changes_output(self):
        self.run_command('sequence', '--out', str(self.root / 'a'))
        self.run_command('sequence', '--seed', '43', '--out', str(self.root / 'b'))
        self.assertNotEqual((self.root / 'a' / 'sequence_events.csv').read_bytes(),
                            (self.root / 'b' / 'sequence_events.csv').read_bytes())

    def test_kv_format(self):
        self.run_command('losses', '--format', 'kv')
        document = yaml.safe_load((self.output / 'loss_total.yaml').read_text(encoding='utf-8'))
        self.assertAlmostEqual(document['transmission'], 0.5316, places=4)
        self.assertEqual(document['metadata']['seed'], 42)
