from runs.command import RunCommand
from runs.models import Artifact
from stark.models import EXCITED, GROUND, FortParams
from stark.services import (
    polarizability_components,
    probe_resonance_offset,
    shift_table,
    sublevel_shifts,
    trap_depth,
)


class Command(RunCommand):
    help = 'Light shifts of the 5S1/2 F=2 and 5P3/2 F\'=3 sublevels in the FORT'
    required_sections = ('fort',)

    def compute(self, config, options):
        fort, lines = config.fort, config.lines
        ground = sublevel_shifts(fort, lines, GROUND)
        excited = sublevel_shifts(fort, lines, EXCITED)
        summary = {
            'fort_power_mw': fort.power * 1e3,
            'peak_intensity_w_m2': fort.peak_intensity,
            'trap_depth_mhz': trap_depth(fort, lines),
            'ground_spread_mhz': ground.spread,
            'excited_mean_mhz': excited.mean,
            'excited_stretched_plus_mhz': excited.stretched(1),
            'excited_stretched_minus_mhz': excited.stretched(-1),
            'probe_offset_sigma_plus_mhz': probe_resonance_offset(fort, lines, FortParams.SIGMA_PLUS),
            'probe_offset_sigma_minus_mhz': probe_resonance_offset(fort, lines, FortParams.SIGMA_MINUS),
        }
        for level in (GROUND, EXCITED):
            alpha = polarizability_components(fort, lines, level.label, level.j)
            for part in ('scalar', 'vector', 'tensor'):
                summary[f'alpha_{part}_{level.label}_au'] = float(getattr(alpha, part))

        self.stdout.write(f'trap depth {summary["trap_depth_mhz"]:.2f} MHz at {summary["fort_power_mw"]:.3f} mW')
        self.stdout.write(f'{GROUND} sublevel spread {ground.spread:.3f} MHz')
        self.stdout.write(
            f'probe resonance offsets: sigma+ {summary["probe_offset_sigma_plus_mhz"]:.2f} MHz, '
            f'sigma- {summary["probe_offset_sigma_minus_mhz"]:.2f} MHz'
        )
        metadata = {'line_table': lines.version, 'handedness': fort.handedness}
        return [
            Artifact('stark_shifts', shift_table(fort, lines), metadata=metadata),
            Artifact('stark_summary', summary, kind=Artifact.RECORD, metadata=metadata),
        ]
