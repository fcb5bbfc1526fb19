from dataclasses import replace

from focalfield.models import FocalField
from focalfield.serializers import ScanSerializer
from focalfield.services import experiment_anchors, scan_focusing
from runs.command import RunCommand
from runs.models import Artifact


class Command(RunCommand):
    help = 'Scan the atom scattering probability over focusing strength or NA'
    required_sections = ('beam',)

    def add_command_arguments(self, parser):
        parser.add_argument('--model', choices=[key for key, _ in ScanSerializer.MODEL_CHOICES],
                            help='Focal-field model(s) to evaluate')
        parser.add_argument('--scan', choices=[key for key, _ in ScanSerializer.AXIS_CHOICES],
                            help='Scan axis: u = w_L/f or convergence NA')
        parser.add_argument('--range', help='Grid start:stop:count')
        parser.add_argument('--anchor', action='store_true',
                            help='Print P_sc of both models at the configured geometry')

    def config_overrides(self, options):
        return {'scan': {'model': options['model'], 'axis': options['scan'], 'range': options['range']}}

    def compute(self, config, options):
        beam = config.beam
        scan = config.scan
        artifacts = []

        if options['anchor']:
            anchors = experiment_anchors(beam)
            paraxial, optimized, full = anchors['paraxial'], anchors['paraxial_optimized'], anchors['full']
            self.stdout.write(
                f'paraxial P_sc = {paraxial.percent:.2f} % '
                f'(waist-optimized {optimized.percent:.2f} % at u = {optimized.beam.focusing_strength:.3f})'
            )
            self.stdout.write(f'full P_sc = {full.percent:.2f} %')
            artifacts.append(Artifact('field_anchors', {
                'u': beam.focusing_strength,
                'p_sc_paraxial': paraxial.probability,
                'paraxial_focus_offset_m': paraxial.axial_offset,
                'p_sc_paraxial_optimized': optimized.probability,
                'u_paraxial_optimized': optimized.beam.focusing_strength,
                'p_sc_full': full.probability,
                'cross_section_ratio_full': full.cross_section_ratio,
            }, kind=Artifact.RECORD))

        template = beam if scan['aperture_na'] is None else replace(beam, aperture_na=scan['aperture_na'])
        frame = scan_focusing(template, scan['values'], axis=scan['axis'], models=scan['models'])
        frame['transmitted_fraction'] = [
            replace(template, input_waist=u * template.focal_length).transmitted_fraction for u in frame['u']
        ]
        artifacts.append(Artifact('field_scan', frame, metadata={
            'axis': scan['axis'],
            'lens': template.lens,
            'aperture_na': template.aperture_na,
        }))
        if FocalField.FULL in scan['models'] and len(frame):
            best = frame.loc[frame['p_sc_full'].idxmax()]
            self.stdout.write(f'full-model maximum {100 * best.p_sc_full:.2f} % at NA = {best.na:.3f}')
        return artifacts
