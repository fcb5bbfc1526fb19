from dataclasses import replace
from pathlib import Path

from runs.command import RunCommand
from runs.models import Artifact
from spectroscopy.services import (
    bootstrap_fit,
    extinction_to_scattering,
    fit_lorentzian,
    fitted_transmission,
    read_spectrum,
    spectrum_frame,
    synthetic_spectrum,
)
from stark.services import probe_resonance_offset


class Command(RunCommand):
    help = 'Fit a Lorentzian to a measured or synthetic transmission spectrum'
    required_sections = ('spectrum',)

    def add_command_arguments(self, parser):
        parser.add_argument('--input', help='Spectrum CSV (detuning_mhz, transmission, sigma) to fit')

    def config_overrides(self, options):
        if options['input']:
            return {'spectrum': {'input': str(Path(options['input']).resolve())}}
        return {}

    def validate_options(self, config, options):
        if config.spectrum.stark_center:
            config.require('fort')

    def compute(self, config, options):
        spectrum = config.spectrum
        shape = spectrum.shape
        if spectrum.stark_center:
            offset = probe_resonance_offset(config.fort, config.lines, spectrum.probe_handedness)
            shape = replace(shape, center=shape.center + offset)

        if spectrum.input_path:
            points = read_spectrum(spectrum.input_path)
            source = Path(spectrum.input_path).name
        else:
            points = synthetic_spectrum(list(spectrum.detunings), shape, spectrum.sigma, config.seed)
            source = 'synthetic'

        fit = fit_lorentzian(points)
        record = fit.as_record()
        record['reduced_chi_square'] = fit.reduced_chi_square
        record['p_sc_max'] = extinction_to_scattering(fit.extinction, shape.collection)
        if spectrum.bootstrap:
            spread = bootstrap_fit(points, fit, resamples=spectrum.bootstrap, seed=config.seed)
            record.update({f'{name}_bootstrap_sigma': value for name, value in spread.items()})

        self.stdout.write(
            f'extinction {100 * fit.extinction:.2f} +- {100 * fit.extinction_sigma:.2f} %, '
            f'FWHM {fit.fwhm:.2f} +- {fit.fwhm_sigma:.2f} MHz, center {fit.center:.2f} MHz'
        )
        frame = spectrum_frame(points)
        frame['fit'] = fitted_transmission(fit, frame['detuning_mhz'].to_numpy())
        return [
            Artifact('spectrum', frame, metadata={'source': source}),
            Artifact('spectrum_fit', record, kind=Artifact.RECORD, metadata={'source': source}),
        ]
