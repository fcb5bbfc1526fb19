from pathlib import Path

import numpy as np
import pandas as pd

from runs.command import RunCommand
from runs.models import Artifact
from spectroscopy.services import chain_transmission


class Command(RunCommand):
    help = 'Total transmission of the optical loss chain from the atom to the detector'
    required_sections = ('losses',)

    def add_command_arguments(self, parser):
        parser.add_argument('--chain', help='Loss chain CSV (name, loss or transmission)')

    def config_overrides(self, options):
        if options['chain']:
            return {'losses': {'path': str(Path(options['chain']).resolve())}}
        return {}

    def compute(self, config, options):
        chain = config.losses
        total = chain_transmission(chain)
        self.stdout.write(f'{total:.4f}')
        frame = pd.DataFrame({
            'name': [element.name for element in chain.elements],
            'transmission': [element.transmission for element in chain.elements],
        })
        frame['cumulative'] = np.cumprod(frame['transmission'])
        return [
            Artifact('loss_chain', frame),
            Artifact('loss_total', {'transmission': total, 'loss': 1 - total}, kind=Artifact.RECORD),
        ]
