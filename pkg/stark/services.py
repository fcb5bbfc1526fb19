import logging
from dataclasses import replace
from functools import lru_cache
from pathlib import Path

import numpy as np
import pandas as pd
from scipy import constants
from scipy.constants import physical_constants
from sympy import Rational, SympifyError
from sympy.physics.wigner import clebsch_gordan

from errors import ConfigError
from .models import EXCITED, GROUND, FortParams, LevelShifts, LineTable, Polarizability, Transition

logger = logging.getLogger(__name__)

DIPOLE_AU = physical_constants['atomic unit of electric dipole mom.'][0]
POLARIZABILITY_AU = physical_constants['atomic unit of electric polarizability'][0]

LINE_COLUMNS = ['lower', 'upper', 'j_lower', 'j_upper', 'wavelength_nm', 'linewidth_mhz', 'dipole_au', 'source']

# Dominant partners of 5S1/2 and 5P3/2 for trap light near 980 nm
REQUIRED_LINES = [
    ('5S1/2', '5P1/2'),
    ('5S1/2', '5P3/2'),
    ('5P3/2', '4D3/2'),
    ('5P3/2', '4D5/2'),
    ('5P3/2', '6S1/2'),
]


def read_line_table(path):
    """Load a whitespace-separated line table with ``# key: value`` header directives."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f'line table not found: {path}')

    directives = {}
    transitions = []
    with path.open(encoding='utf-8') as handle:
        for number, raw in enumerate(handle, start=1):
            text = raw.strip()
            if text.startswith('#'):
                key, sep, value = text.lstrip('#').partition(':')
                if sep and key.strip() in ('version', 'nuclear_spin'):
                    directives[key.strip()] = value.strip()
                continue
            if not text:
                continue
            fields = text.split()
            if len(fields) != len(LINE_COLUMNS):
                raise ConfigError(f'{path}:{number}: expected {len(LINE_COLUMNS)} fields, found {len(fields)}')
            record = dict(zip(LINE_COLUMNS, fields))
            try:
                transitions.append(Transition(
                    lower=record['lower'],
                    upper=record['upper'],
                    j_lower=Rational(record['j_lower']),
                    j_upper=Rational(record['j_upper']),
                    wavelength_nm=float(record['wavelength_nm']),
                    linewidth_mhz=float(record['linewidth_mhz']),
                    dipole_au=float(record['dipole_au']),
                    source=record['source'],
                ))
            except (TypeError, ValueError, SympifyError) as exc:
                raise ConfigError(f'{path}:{number}: {exc}') from exc

    if not transitions:
        raise ConfigError(f'{path}: no transitions')
    present = {(line.lower, line.upper) for line in transitions}
    missing = [f'{lower}-{upper}' for lower, upper in REQUIRED_LINES if (lower, upper) not in present]
    if missing:
        raise ConfigError(f'{path}: missing required transitions {", ".join(missing)}')
    try:
        nuclear_spin = Rational(directives.get('nuclear_spin', '3/2'))
    except (TypeError, ValueError, SympifyError) as exc:
        raise ConfigError(f'{path}: bad nuclear_spin directive') from exc

    table = LineTable(
        transitions=tuple(transitions),
        version=directives.get('version', ''),
        nuclear_spin=nuclear_spin,
        path=str(path),
    )
    logger.debug('loaded %d transitions from %s (version %s)', len(transitions), path, table.version)
    return table


@lru_cache(maxsize=None)
def _clebsch_gordan(j1, m1, j2, m2, j3, m3):
    return float(clebsch_gordan(j1, j2, j3, m1, m2, m3))


def _fine_structure_shifts(fort, lines, label, j):
    """Light shift (Hz) of each |J m_J> by second-order perturbation over the line table."""
    couplings = lines.couplings(label)
    if not couplings:
        raise ConfigError(f'line table has no transitions for {label}')

    omega = fort.angular_frequency
    for coupling in couplings:
        detuning_mhz = abs(coupling.transition.frequency_mhz - constants.c / fort.wavelength / 1e6)
        if detuning_mhz <= coupling.transition.linewidth_mhz:
            raise ConfigError(
                f'FORT at {fort.wavelength * 1e9:.4f} nm is resonant with '
                f'{coupling.transition.lower}-{coupling.transition.upper}'
            )

    q = fort.polarization_index
    # E0^2/4 expressed through the peak intensity
    prefactor = fort.peak_intensity / (2 * constants.c * constants.epsilon_0 * constants.hbar * constants.h)
    shifts = {}
    for m in [-j + k for k in range(int(2 * j) + 1)]:
        total = 0.0
        for coupling in couplings:
            jp = coupling.j_partner
            weight = (coupling.transition.dipole_au * DIPOLE_AU) ** 2 / int(2 * jp + 1)
            absorb = _clebsch_gordan(j, m, 1, q, jp, m + q) ** 2
            emit = _clebsch_gordan(j, m, 1, -q, jp, m - q) ** 2
            w0 = coupling.angular_frequency
            total += weight * (absorb / (w0 - omega) + emit / (w0 + omega))
        shifts[m] = -prefactor * total
    return shifts


def sublevel_shifts(fort, lines, level=GROUND):
    """Light shifts (MHz) of the |F m_F> sublevels of ``level`` at the trap centre.

    Hyperfine structure is degenerate for the polarizability: the fine-structure
    shifts are projected onto |F m_F> with Clebsch-Gordan weights.
    """
    fine = _fine_structure_shifts(fort, lines, level.label, level.j)
    nuclear = lines.nuclear_spin
    shifts = {}
    for m_f in level.m_values:
        value = 0.0
        for m_j, shift in fine.items():
            m_i = m_f - m_j
            if abs(m_i) > nuclear:
                continue
            value += _clebsch_gordan(level.j, m_j, nuclear, m_i, level.f, m_f) ** 2 * shift
        shifts[m_f] = value / 1e6
    return LevelShifts(level=level, shifts=shifts)


def trap_depth(fort, lines):
    """Mean lowering (MHz) of the F=2 ground sublevels; positive when trapping."""
    return -sublevel_shifts(fort, lines, GROUND).mean


def probe_resonance_offset(fort, lines, probe_handedness):
    """Shift (MHz) of the stretched |g+-> -> |e+-> resonance selected by the probe."""
    sign = 1 if probe_handedness == FortParams.SIGMA_PLUS else -1
    excited = sublevel_shifts(fort, lines, EXCITED).stretched(sign)
    ground = sublevel_shifts(fort, lines, GROUND).stretched(sign)
    return excited - ground


def calibrate_power(fort, lines, depth_mhz):
    """Return ``fort`` with the power that yields a trap depth of ``depth_mhz``."""
    reference = trap_depth(replace(fort, power=1.0), lines)
    if reference <= 0:
        raise ConfigError(f'FORT at {fort.wavelength * 1e9:.1f} nm does not trap the ground state')
    calibrated = replace(fort, power=depth_mhz / reference)
    logger.info('FORT power %.4g mW gives %.3g MHz trap depth (I0 = %.4g W/m^2)',
                calibrated.power * 1e3, depth_mhz, calibrated.peak_intensity)
    return calibrated


def polarizability_components(fort, lines, label, j):
    """Split the |J m_J> shifts into scalar, vector and tensor polarizabilities (a.u.)."""
    shifts = _fine_structure_shifts(replace(fort, power=1.0), lines, label, j)
    field_factor = replace(fort, power=1.0).peak_intensity / (2 * constants.c * constants.epsilon_0)
    m = np.array([float(k) for k in shifts])
    # Delta E = -(E0^2/4) alpha(m)
    alpha = -np.array(list(shifts.values())) * constants.h / field_factor / POLARIZABILITY_AU
    jf = float(j)
    columns = [np.ones_like(m), fort.polarization_index * m / (2 * jf)]
    if jf > 0.5:
        columns.append((3 * m ** 2 - jf * (jf + 1)) / (jf * (2 * jf - 1)))
    coefficients, *_ = np.linalg.lstsq(np.column_stack(columns), alpha, rcond=None)
    tensor = coefficients[2] if jf > 0.5 else 0.0
    return Polarizability(label=label, j=j, scalar=coefficients[0], vector=coefficients[1], tensor=tensor)


def shift_table(fort, lines):
    """Long-format frame of every sublevel shift of both levels."""
    rows = []
    for level in (GROUND, EXCITED):
        for m_f, shift in sublevel_shifts(fort, lines, level).shifts.items():
            rows.append({'level': level.label, 'f': level.f, 'm_f': m_f, 'shift_mhz': shift})
    return pd.DataFrame(rows, columns=['level', 'f', 'm_f', 'shift_mhz'])
