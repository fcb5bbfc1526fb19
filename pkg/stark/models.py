import math
from dataclasses import dataclass, field

from scipy import constants
from sympy import Rational

from errors import ConfigError


@dataclass(frozen=True)
class Transition:
    """One electric-dipole line between two fine-structure levels."""

    lower: str
    upper: str
    j_lower: Rational
    j_upper: Rational
    wavelength_nm: float
    linewidth_mhz: float
    dipole_au: float
    source: str

    @property
    def angular_frequency(self):
        return 2 * math.pi * constants.c / (self.wavelength_nm * 1e-9)

    @property
    def frequency_mhz(self):
        return constants.c / (self.wavelength_nm * 1e-9) / 1e6


@dataclass(frozen=True)
class Coupling:
    """A line seen from one of its levels; ``angular_frequency`` is negative for a lower partner."""

    partner: str
    j_partner: Rational
    angular_frequency: float
    transition: Transition


@dataclass(frozen=True)
class LineTable:
    transitions: tuple
    version: str = ''
    nuclear_spin: Rational = Rational(3, 2)
    path: str = ''

    def __post_init__(self):
        for line in self.transitions:
            if not line.wavelength_nm > 0:
                raise ConfigError(f'{line.lower}-{line.upper}: wavelength must be positive')
            if not line.linewidth_mhz > 0:
                raise ConfigError(f'{line.lower}-{line.upper}: linewidth must be positive')
            if not line.dipole_au >= 0:
                raise ConfigError(f'{line.lower}-{line.upper}: dipole element must be non-negative')

    @property
    def levels(self):
        return sorted({line.lower for line in self.transitions} | {line.upper for line in self.transitions})

    def couplings(self, label):
        found = []
        for line in self.transitions:
            if line.lower == label:
                found.append(Coupling(line.upper, line.j_upper, line.angular_frequency, line))
            elif line.upper == label:
                found.append(Coupling(line.lower, line.j_lower, -line.angular_frequency, line))
        return found


@dataclass(frozen=True)
class AtomicLevel:
    label: str
    j: Rational
    f: int

    @property
    def m_values(self):
        return list(range(-self.f, self.f + 1))

    @property
    def j_projections(self):
        return [-self.j + k for k in range(int(2 * self.j) + 1)]

    def __str__(self):
        return f'{self.label} F={self.f}'


GROUND = AtomicLevel('5S1/2', Rational(1, 2), 2)
EXCITED = AtomicLevel('5P3/2', Rational(3, 2), 3)


@dataclass(frozen=True)
class FortParams:
    """Circularly polarized trap beam at its focus."""

    SIGMA_PLUS = 'sigma_plus'
    SIGMA_MINUS = 'sigma_minus'

    HANDEDNESS_CHOICES = [
        (SIGMA_PLUS, 'Right-circular, sigma+ about the quantization axis'),
        (SIGMA_MINUS, 'Left-circular, sigma- about the quantization axis'),
    ]

    waist: float
    power: float
    wavelength: float = 980e-9
    handedness: str = SIGMA_PLUS

    def __post_init__(self):
        if not self.waist > 0:
            raise ConfigError(f'FORT waist must be positive, got {self.waist!r}')
        if not (self.power >= 0 and math.isfinite(self.power)):
            raise ConfigError(f'FORT power must be finite and non-negative, got {self.power!r}')
        if not self.wavelength > 0:
            raise ConfigError(f'FORT wavelength must be positive, got {self.wavelength!r}')
        if self.handedness not in dict(self.HANDEDNESS_CHOICES):
            raise ConfigError(f'unknown FORT handedness {self.handedness!r}')

    @property
    def peak_intensity(self):
        """I0 = 2P / (pi w^2) at the trap centre."""
        return 2 * self.power / (math.pi * self.waist ** 2)

    @property
    def polarization_index(self):
        return 1 if self.handedness == self.SIGMA_PLUS else -1

    @property
    def angular_frequency(self):
        return 2 * math.pi * constants.c / self.wavelength


@dataclass(frozen=True)
class LevelShifts:
    """Light shifts (MHz) of every m_F sublevel; negative means lowered."""

    level: AtomicLevel
    shifts: dict = field(default_factory=dict)

    def __getitem__(self, m):
        return self.shifts[m]

    @property
    def mean(self):
        return sum(self.shifts.values()) / len(self.shifts)

    @property
    def spread(self):
        return max(self.shifts.values()) - min(self.shifts.values())

    def stretched(self, sign):
        return self.shifts[sign * self.level.f]


@dataclass(frozen=True)
class Polarizability:
    """Scalar, vector and tensor dynamic polarizabilities in atomic units."""

    label: str
    j: Rational
    scalar: float
    vector: float
    tensor: float
