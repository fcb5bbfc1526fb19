from errors import ConfigError
from runs.command import RunCommand
from runs.models import Artifact
from sequence.services import calibrate_estimator, synthesize_spectrum
from spectroscopy.services import fit_lorentzian, fitted_transmission, spectrum_frame
from stark.services import probe_resonance_offset


class Command(RunCommand):
    help = 'Simulate the trapping-event measurement sequence and fit the resulting spectrum'
    required_sections = ('spectrum', 'sequence')

    def add_command_arguments(self, parser):
        parser.add_argument('--calibration-runs', type=int, default=0,
                            help='Also repeat one data point over this many seeds')

    def validate_options(self, config, options):
        if config.sequence['stark_offset']:
            config.require('fort')
        if options['calibration_runs'] == 1 or options['calibration_runs'] < 0:
            raise ConfigError('--calibration-runs needs 0 or at least 2 seeds')

    def compute(self, config, options):
        sequence = config.sequence['config']
        spectrum = config.spectrum
        offset = 0.0
        if config.sequence['stark_offset']:
            offset = probe_resonance_offset(config.fort, config.lines, spectrum.probe_handedness)

        points, events = synthesize_spectrum(sequence, spectrum.shape, spectrum.detunings, config.seed,
                                             stark_offset=offset)
        fit = fit_lorentzian(points)
        frame = spectrum_frame(points)
        frame['fit'] = fitted_transmission(fit, frame['detuning_mhz'].to_numpy())
        record = fit.as_record()
        record['reduced_chi_square'] = fit.reduced_chi_square
        record['excluded_events'] = int(events.drop_duplicates('event_id')['excluded'].sum())
        self.stdout.write(
            f'extinction {100 * fit.extinction:.2f} +- {100 * fit.extinction_sigma:.2f} %, '
            f'FWHM {fit.fwhm:.2f} +- {fit.fwhm_sigma:.2f} MHz'
        )

        metadata = {'stark_offset_mhz': offset, 'count_rate': sequence.count_rate}
        artifacts = [
            Artifact('sequence_events', events, metadata=metadata),
            Artifact('sequence_spectrum', frame, metadata=metadata),
            Artifact('sequence_fit', record, kind=Artifact.RECORD, metadata=metadata),
        ]
        if options['calibration_runs']:
            report = calibrate_estimator(sequence, options['calibration_runs'], base_seed=config.seed)
            self.stdout.write(
                f'calibration: mean {report["mean"]:.4f}, sigma ratio {report["sigma_ratio"]:.3f}'
            )
            artifacts.append(Artifact('sequence_calibration', report, kind=Artifact.RECORD))
        return artifacts
