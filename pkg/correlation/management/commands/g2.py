import numpy as np
import pandas as pd

from correlation.services import (
    chi_square,
    expected_g2,
    g2_closed_form,
    histogram_frame,
    histogram_g2,
    signal_fractions,
    simulate_streams,
    subtract_background,
)
from runs.command import RunCommand
from runs.models import Artifact


class Command(RunCommand):
    help = 'Simulate two-detector photon streams and histogram their intensity correlation'
    required_sections = ('drive', 'g2')

    def add_command_arguments(self, parser):
        parser.add_argument('--duration', type=float, help='Stream duration in seconds')

    def config_overrides(self, options):
        if options['duration'] is not None:
            return {'g2': {'duration_s': options['duration']}}
        return {}

    def compute(self, config, options):
        drive, g2 = config.drive, config.g2
        d1, d2 = simulate_streams(drive, g2.duration, config.seed)
        histogram = histogram_g2(d1, d2, g2.bin_width_ns, g2.window_ns, chunks=g2.chunks)

        corrected = None
        if drive.background_rate > 0 and not histogram.insufficient_data:
            rho1, rho2 = signal_fractions(drive)
            corrected = subtract_background(histogram, rho1, rho2)
        frame = histogram_frame(histogram, corrected)
        frame['closed_form'] = expected_g2(drive, histogram)

        summary = {
            'duration_s': g2.duration,
            'singles_d1': len(d1),
            'singles_d2': len(d2),
            'coincidences': int(histogram.counts.sum()),
            'insufficient_data': histogram.insufficient_data,
            'g2_zero_closed_form': float(g2_closed_form(drive, 0.0)),
        }
        if not histogram.insufficient_data:
            chi2, dof = chi_square(drive, histogram)
            summary.update({'chi_square': chi2, 'dof': dof, 'reduced_chi_square': chi2 / dof if dof else float('nan')})
            zero = int(np.argmin(np.abs(histogram.centers)))
            summary['g2_zero_bin'] = float(histogram.values[zero])
            self.stdout.write(f'{summary["coincidences"]} coincidences, chi2/dof = {summary["reduced_chi_square"]:.3f}')
        else:
            self.stdout.write('no coincidences: histogram marked insufficient')

        streams = pd.concat([
            pd.DataFrame({'detector': stream.label, 't_s': stream.timestamps}) for stream in (d1, d2)
        ], ignore_index=True)
        metadata = {'rabi_mhz': drive.rabi_mhz, 'linewidth_mhz': drive.linewidth_mhz}
        return [
            Artifact('photon_streams', streams, metadata=metadata),
            Artifact('g2_histogram', frame, metadata=metadata),
            Artifact('g2_summary', summary, kind=Artifact.RECORD, metadata=metadata),
        ]
