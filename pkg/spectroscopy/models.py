import math
from dataclasses import dataclass

from errors import ConfigError

# Natural linewidth of the D2 line; synthetic spectra narrower than this are unphysical
NATURAL_LINEWIDTH_MHZ = 6.0


@dataclass(frozen=True)
class SpectrumPoint:
    detuning: float
    transmission: float
    sigma: float

    def __post_init__(self):
        if not self.sigma >= 0:
            raise ConfigError(f'transmission uncertainty must be non-negative, got {self.sigma!r}')
        if not self.transmission > 0:
            raise ConfigError(f'transmission must be positive, got {self.transmission!r}')


@dataclass(frozen=True)
class LineShape:
    """Generating parameters of a Lorentzian extinction line."""

    p_sc_max: float
    fwhm: float
    center: float = 0.0
    collection: float = 0.0
    laser_linewidth: float = 0.0

    def __post_init__(self):
        if not self.fwhm > 0:
            raise ConfigError(f'FWHM must be positive, got {self.fwhm!r}')
        if not 0 <= self.collection < 1:
            raise ConfigError(f'collection efficiency must lie in [0, 1), got {self.collection!r}')
        if not 0 <= self.p_sc_max <= 1:
            raise ConfigError(f'peak scattering probability must lie in [0, 1], got {self.p_sc_max!r}')
        if not self.laser_linewidth >= 0:
            raise ConfigError(f'laser linewidth must be non-negative, got {self.laser_linewidth!r}')

    @property
    def effective_fwhm(self):
        """Lorentzian width with the laser linewidth added in quadrature."""
        return math.hypot(self.fwhm, self.laser_linewidth)


@dataclass(frozen=True)
class LorentzianFit:
    center: float
    fwhm: float
    extinction: float
    baseline: float
    center_sigma: float
    fwhm_sigma: float
    extinction_sigma: float
    baseline_sigma: float
    chi_square: float
    dof: int
    iterations: int

    @property
    def reduced_chi_square(self):
        return self.chi_square / self.dof if self.dof > 0 else math.nan

    def as_record(self):
        return {
            'center_mhz': self.center,
            'center_sigma_mhz': self.center_sigma,
            'fwhm_mhz': self.fwhm,
            'fwhm_sigma_mhz': self.fwhm_sigma,
            'extinction': self.extinction,
            'extinction_sigma': self.extinction_sigma,
            'baseline': self.baseline,
            'baseline_sigma': self.baseline_sigma,
            'chi_square': self.chi_square,
            'dof': self.dof,
        }


@dataclass(frozen=True)
class LossElement:
    name: str
    transmission: float

    def __post_init__(self):
        if not 0 < self.transmission <= 1:
            raise ConfigError(f'{self.name}: transmission must lie in (0, 1], got {self.transmission!r}')


@dataclass(frozen=True)
class LossChain:
    elements: tuple

    def __post_init__(self):
        if not self.elements:
            raise ConfigError('loss chain is empty')


@dataclass(frozen=True)
class SpectrumSettings:
    """What the spectrum command fits: an input file or a synthetic spectrum of ``shape``."""

    SIGMA_PLUS = 'sigma_plus'
    SIGMA_MINUS = 'sigma_minus'

    PROBE_CHOICES = [
        (SIGMA_PLUS, 'Probe drives |g+> -> |e+>'),
        (SIGMA_MINUS, 'Probe drives |g-> -> |e->'),
    ]

    shape: LineShape
    detunings: tuple
    sigma: float = 0.005
    input_path: str = ''
    stark_center: bool = False
    probe_handedness: str = SIGMA_PLUS
    bootstrap: int = 0
