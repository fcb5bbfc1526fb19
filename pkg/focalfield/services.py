import logging
import math
from dataclasses import replace

import numpy as np
import pandas as pd
from django.conf import settings
from joblib import Parallel, delayed
from scipy import constants, optimize

from errors import ConfigError, NumericalError
from . import quadrature
from .models import AngularAmplitude, BeamGeometry, EnergyBalance, FocalField, ScatteringResult

logger = logging.getLogger(__name__)

# Gaussian envelope is below exp(-36) beyond this many input waists
GAUSSIAN_TAIL = 6.0
BEST_FOCUS_GRID = 192
SCAN_COLUMNS = ['u', 'na', 'p_sc_paraxial', 'p_sc_full']

_IMPEDANCE_FACTOR = constants.c * constants.epsilon_0 / 2


def paraxial_focal_waist(beam):
    """Gaussian-optics focal waist lambda f / (pi w_L)."""
    return beam.wavelength * beam.focal_length / (math.pi * beam.input_waist)


def input_waist_for_focal_waist(wavelength, focal_length, focal_waist):
    if focal_waist <= 0:
        raise ConfigError(f'focal waist must be positive, got {focal_waist!r}')
    return wavelength * focal_length / (math.pi * focal_waist)


def focusing_na(u):
    """Convergence NA of the 1/e^2 ray for focusing strength u."""
    return u / math.sqrt(1 + u * u)


def focusing_strength_for_na(na):
    if not 0 < na < 1:
        raise ConfigError(f'focusing NA must lie in (0, 1), got {na!r}')
    return na / math.sqrt(1 - na * na)


def lens_transform(beam):
    """Map the lens-plane Gaussian onto the converging reference sphere.

    Rays land at theta in [0, arcsin(NA)]; the Gaussian tail beyond a few waists is
    cut from the integration range.
    """
    if not 0 < beam.aperture_na < 1:
        raise ConfigError(f'aperture NA must lie in (0, 1), got {beam.aperture_na!r}')
    if beam.input_waist <= 0:
        raise ConfigError(f'input waist must be positive, got {beam.input_waist!r}')

    ratio = GAUSSIAN_TAIL * beam.focusing_strength
    if beam.lens == BeamGeometry.APLANATIC:
        tail = math.asin(min(1.0, ratio))
    else:
        tail = math.atan(ratio)
    return AngularAmplitude(beam=beam, theta_max=beam.theta_max, theta_limit=min(beam.theta_max, tail))


def _full_field(beam, axial_offset):
    angular = lens_transform(beam)
    k = beam.wavenumber
    f = beam.focal_length

    def integrand(theta):
        co = angular.circular_components(theta)[0]
        value = angular.amplitude(theta) * co * np.sin(theta)
        if axial_offset:
            value = value * np.exp(1j * k * axial_offset * np.cos(theta))
        return value

    # Sphere flux equals the lens-plane power only if the apodization conserves energy
    def flux_density(theta):
        return _IMPEDANCE_FACTOR * angular.amplitude(theta) ** 2 * f ** 2 * np.sin(theta) * 2 * np.pi

    value, order = quadrature.integrate(integrand, 0.0, angular.theta_limit)
    flux, _ = quadrature.integrate(flux_density, 0.0, angular.theta_limit)
    # Cross-rotating and axial components carry azimuthal order != 0 and cancel on axis
    return complex(-1j * k * f * value), float(flux), order


def _paraxial_kernel(beam, distances):
    """Rayleigh-Sommerfeld integral K(d) of the lens-plane field to the axis point d."""
    w = beam.input_waist
    k = beam.wavenumber
    f = beam.focal_length
    d = np.atleast_1d(np.asarray(distances, dtype=float))[:, None]
    rho_limit = min(beam.aperture_radius, GAUSSIAN_TAIL * w)

    def integrand(rho):
        r2 = d * d + rho * rho
        # r - d without cancellation
        excess = rho * rho / (np.sqrt(r2) + d) - rho * rho / (2 * f)
        return np.exp(-(rho / w) ** 2 + 1j * k * excess) * d * rho / r2

    return quadrature.integrate(integrand, 0.0, rho_limit)


def _paraxial_field(beam, axial_offset):
    d = beam.focal_length + axial_offset
    if d <= 0:
        raise ConfigError(f'axial offset {axial_offset!r} lies behind the lens')
    kernel, order = _paraxial_kernel(beam, [d])
    e0 = beam.field_amplitude
    field = 2 * np.pi * e0 / (1j * beam.wavelength) * np.exp(1j * beam.wavenumber * d) * kernel[0]

    w = beam.input_waist
    flux, _ = quadrature.integrate(
        lambda rho: _IMPEDANCE_FACTOR * e0 ** 2 * np.exp(-2 * (rho / w) ** 2) * 2 * np.pi * rho,
        0.0,
        min(beam.aperture_radius, GAUSSIAN_TAIL * w),
    )
    return complex(field), float(flux), order


def focal_field(beam, model=FocalField.FULL, axial_offset=0.0):
    """On-axis field at ``axial_offset`` (m) from the geometric focus."""
    if model == FocalField.FULL:
        co, flux, order = _full_field(beam, axial_offset)
    elif model == FocalField.PARAXIAL:
        co, flux, order = _paraxial_field(beam, axial_offset)
    else:
        raise ConfigError(f'unknown focal-field model {model!r}')

    energy = EnergyBalance(
        incident_power=beam.power,
        transmitted_power=beam.power * beam.transmitted_fraction,
        carried_power=flux,
    )
    if energy.relative_error > 1e-4:
        raise NumericalError(f'apodized input misses the transmitted power by {energy.relative_error:.2e} relative')

    if beam.handedness == BeamGeometry.SIGMA_PLUS:
        e_plus, e_minus = co, 0j
    else:
        e_plus, e_minus = 0j, co
    logger.debug('%s focal field at offset %.3g m: |E_co| = %.6g V/m (order %d)', model, axial_offset, abs(co), order)
    return FocalField(
        e_plus=e_plus,
        e_minus=e_minus,
        e_z=0j,
        model=model,
        handedness=beam.handedness,
        axial_offset=axial_offset,
        energy=energy,
        quadrature_order=order,
    )


def best_focus(beam):
    """Axial offset (m) of peak on-axis intensity under the paraxial model."""
    f = beam.focal_length
    z_focus = math.pi * paraxial_focal_waist(beam) ** 2 / beam.wavelength
    z_input = math.pi * beam.input_waist ** 2 / beam.wavelength
    rho = min(beam.aperture_radius, beam.input_waist)

    # From the marginal focus of the 1/e^2 ray (or the imaged input waist) to a few
    # Rayleigh ranges past the geometric focus
    lower = min(f / math.hypot(1.0, rho / f), f / (1 + (f / z_input) ** 2)) - z_focus
    lower = max(lower, 1e-3 * f)
    upper = f + 4 * z_focus

    grid = np.linspace(lower, upper, BEST_FOCUS_GRID)
    kernel, _ = _paraxial_kernel(beam, grid)
    intensity = np.abs(kernel) ** 2
    i = int(np.argmax(intensity))

    def negative_intensity(d):
        value, _ = _paraxial_kernel(beam, [d])
        return -abs(value[0]) ** 2

    result = optimize.minimize_scalar(
        negative_intensity,
        bounds=(grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]),
        method='bounded',
        options={'xatol': 1e-6 * z_focus},
    )
    distance = result.x if -result.fun >= intensity[i] else grid[i]
    logger.debug('paraxial best focus %.4g um from geometric focus', (distance - f) * 1e6)
    return float(distance - f)


def scattering_probability(beam, model=FocalField.FULL):
    """Probability that the atom at the focus scatters a probe photon out of the mode.

    R = sigma I_co / P_in is evaluated at unit power, so the result does not depend on
    ``beam.power``; the reported probability is 1 - |1 - R/2|^2. The paraxial model
    is evaluated at its best focus.
    """
    fresnel = beam.input_waist ** 2 / (beam.wavelength * beam.focal_length)
    if fresnel < 1:
        logger.warning('Fresnel number %.2f < 1: focal-field models lose validity at u=%.3g',
                       fresnel, beam.focusing_strength)

    unit = replace(beam, power=1.0)
    offset = best_focus(unit) if model == FocalField.PARAXIAL else 0.0
    field = focal_field(unit, model, axial_offset=offset)
    ratio = beam.cross_section * field.co_rotating_intensity / unit.power
    return ScatteringResult(
        probability=float(ratio - ratio * ratio / 4),
        cross_section_ratio=float(ratio),
        model=model,
        beam=beam,
        axial_offset=offset,
    )


def optimize_input_waist(beam, model=FocalField.PARAXIAL, bounds=(0.02, 3.0), points=24):
    """Maximize P_sc over w_L at fixed lens, aperture and wavelength."""
    f = beam.focal_length

    def probability(u):
        return scattering_probability(replace(beam, input_waist=u * f), model).probability

    grid = np.geomspace(*bounds, points)
    values = [probability(u) for u in grid]
    i = int(np.argmax(values))
    result = optimize.minimize_scalar(
        lambda u: -probability(u),
        bounds=(grid[max(i - 1, 0)], grid[min(i + 1, points - 1)]),
        method='bounded',
        options={'xatol': 1e-5},
    )
    u = result.x if -result.fun >= values[i] else grid[i]
    return scattering_probability(replace(beam, input_waist=u * f), model)


def _scan_point(template, index, u, models):
    beam = replace(template, input_waist=u * template.focal_length)
    row = {'u': u, 'na': focusing_na(u), 'p_sc_paraxial': np.nan, 'p_sc_full': np.nan}
    for model in models:
        try:
            row[f'p_sc_{model}'] = scattering_probability(beam, model).probability
        except NumericalError as exc:
            raise type(exc)(f'scan point {index} (u={u:.6g}, {model}): {exc}') from exc
    return row


def scan_focusing(template, values, axis='u', models=(FocalField.PARAXIAL, FocalField.FULL), n_jobs=None):
    """Scattering probability over a monotone grid of focusing strengths or NAs.

    Rows come back in grid order whatever the number of workers.
    """
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return pd.DataFrame(columns=SCAN_COLUMNS, dtype=float)
    steps = np.diff(values)
    if values.size > 1 and not (np.all(steps > 0) or np.all(steps < 0)):
        raise ConfigError('scan grid must be strictly monotone')

    if axis == 'u':
        if np.any(values <= 0):
            raise ConfigError('focusing strengths must be positive')
        strengths = values
    elif axis == 'na':
        strengths = np.array([focusing_strength_for_na(na) for na in values])
    else:
        raise ConfigError(f'unknown scan axis {axis!r}')

    n_jobs = settings.N_JOBS if n_jobs is None else n_jobs
    rows = Parallel(n_jobs=n_jobs)(
        delayed(_scan_point)(template, i, float(u), models) for i, u in enumerate(strengths)
    )
    logger.info('scanned %d focusing strengths (%s)', len(rows), ', '.join(models))
    return pd.DataFrame(rows, columns=SCAN_COLUMNS)


def experiment_anchors(beam):
    """Paraxial (at w_L and waist-optimized) and full-model P_sc for one geometry."""
    paraxial = scattering_probability(beam, FocalField.PARAXIAL)
    optimized = optimize_input_waist(beam, FocalField.PARAXIAL)
    full = scattering_probability(beam, FocalField.FULL)
    logger.warning(
        'paraxial P_sc is %.2f%% at the configured waist and %.2f%% at the optimal waist '
        '(u=%.3f); the quoted paraxial maximum may refer to either',
        paraxial.percent, optimized.percent, optimized.beam.focusing_strength,
    )
    return {'paraxial': paraxial, 'paraxial_optimized': optimized, 'full': full}
