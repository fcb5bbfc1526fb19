import math
from dataclasses import dataclass

import numpy as np
from scipy import constants

from errors import ConfigError


@dataclass(frozen=True)
class BeamGeometry:
    """Circularly polarized Gaussian beam focused by an ideal lens."""

    SIGMA_PLUS = 'sigma_plus'
    SIGMA_MINUS = 'sigma_minus'

    HANDEDNESS_CHOICES = [
        (SIGMA_PLUS, 'σ+'),
        (SIGMA_MINUS, 'σ-'),
    ]

    # Ray mappings from lens-plane radius to converging-sphere angle
    TANGENT = 'tangent'
    APLANATIC = 'aplanatic'

    LENS_CHOICES = [
        (TANGENT, 'Tangent mapping, rho = f tan(theta)'),
        (APLANATIC, 'Sine condition, rho = f sin(theta)'),
    ]

    wavelength: float
    input_waist: float
    focal_length: float
    aperture_na: float
    power: float = 1e-12
    handedness: str = SIGMA_PLUS
    lens: str = TANGENT

    def __post_init__(self):
        if not self.wavelength > 0:
            raise ConfigError(f'wavelength must be positive, got {self.wavelength!r}')
        if not self.input_waist > 0:
            raise ConfigError(f'input waist must be positive, got {self.input_waist!r}')
        if not self.focal_length > 0:
            raise ConfigError(f'focal length must be positive, got {self.focal_length!r}')
        if not 0 < self.aperture_na < 1:
            raise ConfigError(f'aperture NA must lie in (0, 1), got {self.aperture_na!r}')
        if not self.power >= 0:
            raise ConfigError(f'power must be non-negative, got {self.power!r}')
        if self.handedness not in dict(self.HANDEDNESS_CHOICES):
            raise ConfigError(f'unknown handedness {self.handedness!r}')
        if self.lens not in dict(self.LENS_CHOICES):
            raise ConfigError(f'unknown lens mapping {self.lens!r}')
        if not math.isfinite(self.focusing_strength):
            raise ConfigError('focusing strength w_L/f must be finite')

    @property
    def focusing_strength(self):
        """u = w_L / f."""
        return self.input_waist / self.focal_length

    @property
    def wavenumber(self):
        return 2 * np.pi / self.wavelength

    @property
    def theta_max(self):
        return math.asin(self.aperture_na)

    @property
    def aperture_radius(self):
        """Radius of the lens-plane disc mapped onto [0, theta_max]."""
        if self.lens == self.APLANATIC:
            return self.focal_length * self.aperture_na
        return self.focal_length * math.tan(self.theta_max)

    @property
    def transmitted_fraction(self):
        return -math.expm1(-2 * self.aperture_radius ** 2 / self.input_waist ** 2)

    @property
    def field_amplitude(self):
        """Peak lens-plane field E0 (V/m) of a Gaussian carrying ``power``."""
        return math.sqrt(4 * self.power / (constants.c * constants.epsilon_0 * math.pi * self.input_waist ** 2))

    @property
    def cross_section(self):
        """Resonant two-level cross section 3 lambda^2 / 2 pi."""
        return 3 * self.wavelength ** 2 / (2 * np.pi)


@dataclass(frozen=True)
class AngularAmplitude:
    """Field on the converging reference sphere of radius f, theta in [0, theta_max].

    For an input of handedness s the sphere field decomposes into the circular basis as
    A(theta) * [co(theta), cross(theta) e^{2 i s phi}, axial(theta) e^{i s phi}], where
    ``co`` feeds the component of the input handedness.
    """

    beam: BeamGeometry
    theta_max: float
    theta_limit: float

    @property
    def azimuthal_orders(self):
        s = 1 if self.beam.handedness == BeamGeometry.SIGMA_PLUS else -1
        return {'co': 0, 'cross': 2 * s, 'axial': s}

    def radius(self, theta):
        """Lens-plane radius of the ray arriving at polar angle theta."""
        f = self.beam.focal_length
        if self.beam.lens == BeamGeometry.APLANATIC:
            return f * np.sin(theta)
        return f * np.tan(theta)

    def apodization(self, theta):
        """Energy-conserving field weight of the ray mapping."""
        cos_t = np.cos(theta)
        if self.beam.lens == BeamGeometry.APLANATIC:
            return np.sqrt(cos_t)
        return cos_t ** -1.5

    def amplitude(self, theta):
        rho = self.radius(theta)
        envelope = np.exp(-(rho / self.beam.input_waist) ** 2)
        return self.beam.field_amplitude * envelope * self.apodization(theta)

    def circular_components(self, theta):
        """Rows (co, cross, axial) of the polarization rotation onto the sphere."""
        cos_t = np.cos(theta)
        return np.array([
            (1 + cos_t) / 2,
            (cos_t - 1) / 2,
            -np.sin(theta) / np.sqrt(2),
        ])


@dataclass(frozen=True)
class EnergyBalance:
    """Power carried by the integrated input against the transmitted Gaussian power.

    ``carried_power`` is the flux of the apodized field over the reference sphere (full
    model) or of the lens-plane Gaussian inside the cut-off (paraxial model). It checks the
    ray-mapping apodization and the integration range; it is not a focal-plane integral.
    """

    incident_power: float
    transmitted_power: float
    carried_power: float

    @property
    def relative_error(self):
        if self.transmitted_power == 0:
            return abs(self.carried_power)
        return abs(self.carried_power - self.transmitted_power) / self.transmitted_power


@dataclass(frozen=True)
class FocalField:
    """Circular-basis field components (V/m) on the optical axis near the focus."""

    PARAXIAL = 'paraxial'
    FULL = 'full'

    MODEL_CHOICES = [
        (PARAXIAL, 'Parabolic wavefront, unchanged polarization'),
        (FULL, 'Vector focusing with apodization'),
    ]

    e_plus: complex
    e_minus: complex
    e_z: complex
    model: str
    handedness: str
    axial_offset: float
    energy: EnergyBalance
    quadrature_order: int

    @property
    def co_rotating(self):
        return self.e_plus if self.handedness == BeamGeometry.SIGMA_PLUS else self.e_minus

    @property
    def co_rotating_intensity(self):
        return constants.c * constants.epsilon_0 / 2 * abs(self.co_rotating) ** 2


@dataclass(frozen=True)
class ScatteringResult:
    probability: float
    cross_section_ratio: float
    model: str
    beam: BeamGeometry
    axial_offset: float = 0.0

    @property
    def percent(self):
        return 100 * self.probability
