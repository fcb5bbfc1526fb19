import logging
import math
from pathlib import Path

import numpy as np
import pandas as pd
from django.conf import settings
from scipy import optimize

from errors import ConfigError, DegenerateSpectrumError, FitError
from .models import (
    NATURAL_LINEWIDTH_MHZ,
    LineShape,
    LorentzianFit,
    LossChain,
    LossElement,
    SpectrumPoint,
)

logger = logging.getLogger(__name__)

SPECTRUM_COLUMNS = ['detuning_mhz', 'transmission', 'sigma']
MIN_FIT_POINTS = 5


def lorentzian(detuning, center, fwhm):
    """Unit-height Lorentzian profile."""
    half = fwhm / 2
    return half * half / ((np.asarray(detuning, dtype=float) - center) ** 2 + half * half)


def transmission_model(detunings, p_sc_max, fwhm, center=0.0, collection=0.0, laser_linewidth=0.0):
    """Noiseless transmission T = 1 - P_sc + alpha P_sc over a detuning grid (MHz)."""
    shape = LineShape(
        p_sc_max=p_sc_max,
        fwhm=fwhm,
        center=center,
        collection=collection,
        laser_linewidth=laser_linewidth,
    )
    return model_points(detunings, shape)


def model_points(detunings, shape):
    if shape.fwhm < NATURAL_LINEWIDTH_MHZ:
        logger.warning('FWHM %.3g MHz is below the %.1f MHz natural linewidth', shape.fwhm, NATURAL_LINEWIDTH_MHZ)
    values = model_transmission(detunings, shape)
    return [SpectrumPoint(detuning=float(d), transmission=float(t), sigma=0.0) for d, t in zip(detunings, values)]


def model_transmission(detunings, shape):
    p_sc = shape.p_sc_max * lorentzian(detunings, shape.center, shape.effective_fwhm)
    return 1 - p_sc + shape.collection * p_sc


def extinction_to_scattering(extinction, collection=0.0):
    """P_sc = epsilon / (1 - alpha)."""
    if not 0 <= collection < 1:
        raise ConfigError(f'collection efficiency must lie in [0, 1), got {collection!r}')
    if not 0 <= extinction < 1:
        raise ConfigError(f'extinction must lie in [0, 1), got {extinction!r}')
    return extinction / (1 - collection)


def synthetic_spectrum(detunings, shape, sigma, seed):
    """Model spectrum with Gaussian noise of standard deviation ``sigma`` per point."""
    rng = np.random.default_rng(seed)
    exact = np.array([p.transmission for p in model_points(detunings, shape)])
    sigma = np.broadcast_to(np.asarray(sigma, dtype=float), exact.shape)
    noisy = exact + rng.normal(0.0, 1.0, exact.shape) * sigma
    return [SpectrumPoint(float(d), float(t), float(s)) for d, t, s in zip(detunings, noisy, sigma)]


def _fit_model(params, detuning):
    center, fwhm, extinction, baseline = params
    return baseline * (1 - extinction * lorentzian(detuning, center, fwhm))


def _initial_guess(detuning, transmission):
    lowest = int(np.argmin(transmission))
    baseline = float(np.max(transmission))
    depth = baseline - float(transmission[lowest])
    inside = detuning[transmission <= baseline - depth / 2]
    span = float(inside.max() - inside.min())
    if span <= 0:
        span = float(np.min(np.diff(np.unique(detuning))))
    return np.array([detuning[lowest], span, depth / baseline, baseline])


def _as_arrays(points):
    table = np.array([(p.detuning, p.transmission, p.sigma) for p in points], dtype=float).reshape(-1, 3)
    # Sort on every column so the fit sees the same sequence for any input order
    order = np.lexsort((table[:, 2], table[:, 1], table[:, 0]))
    return table[order].T


def fit_lorentzian(points, max_nfev=None):
    """Weighted least-squares Lorentzian dip with curvature (inverse Hessian) uncertainties."""
    detuning, transmission, sigma = _as_arrays(points)
    if detuning.size < MIN_FIT_POINTS:
        raise ConfigError(f'need at least {MIN_FIT_POINTS} spectrum points, got {detuning.size}')
    if not np.all(np.isfinite(sigma) & (sigma > 0)):
        raise ConfigError('every spectrum point needs a finite positive uncertainty')
    if np.ptp(transmission) == 0:
        raise DegenerateSpectrumError('all transmission values are equal; no line to fit')

    max_nfev = settings.FIT_MAX_NFEV if max_nfev is None else max_nfev

    def residuals(params):
        return (_fit_model(params, detuning) - transmission) / sigma

    start = _initial_guess(detuning, transmission)
    result = optimize.least_squares(
        residuals,
        start,
        method='lm',
        x_scale='jac',
        ftol=1e-12,
        xtol=1e-12,
        gtol=1e-12,
        max_nfev=max_nfev,
    )
    if result.status <= 0:
        raise FitError(f'Lorentzian fit did not converge after {result.nfev} evaluations: {result.message}')

    try:
        covariance = np.linalg.inv(result.jac.T @ result.jac)
    except np.linalg.LinAlgError as exc:
        raise FitError('singular curvature matrix at the optimum') from exc
    errors = np.sqrt(np.clip(np.diag(covariance), 0, None))

    center, fwhm, extinction, baseline = result.x
    if not 0 <= extinction < 1:
        raise FitError(f'fitted extinction {extinction:.4g} is not a transmission dip')
    if np.ptp(detuning) <= abs(fwhm):
        logger.warning('spectrum spans %.3g MHz, less than the fitted FWHM %.3g MHz', np.ptp(detuning), abs(fwhm))

    fit = LorentzianFit(
        center=float(center),
        fwhm=float(abs(fwhm)),
        extinction=float(extinction),
        baseline=float(baseline),
        center_sigma=float(errors[0]),
        fwhm_sigma=float(errors[1]),
        extinction_sigma=float(errors[2]),
        baseline_sigma=float(errors[3]),
        chi_square=float(2 * result.cost),
        dof=int(detuning.size - 4),
        iterations=int(result.nfev),
    )
    logger.debug('Lorentzian fit: eps=%.5f+-%.5f fwhm=%.4f+-%.4f MHz after %d evaluations',
                 fit.extinction, fit.extinction_sigma, fit.fwhm, fit.fwhm_sigma, fit.iterations)
    return fit


def fitted_transmission(fit, detunings):
    """Fitted line shape evaluated on ``detunings``."""
    params = np.array([fit.center, fit.fwhm, fit.extinction, fit.baseline])
    return _fit_model(params, np.asarray(detunings, dtype=float))


def bootstrap_fit(points, fit, resamples=200, seed=0):
    """Parametric resampling spread of the fit parameters, as a cross-check of the curvature errors."""
    detuning, _, sigma = _as_arrays(points)
    expected = fitted_transmission(fit, detuning)
    rng = np.random.default_rng(seed)
    samples = []
    for _ in range(resamples):
        noisy = expected + rng.normal(0.0, 1.0, expected.shape) * sigma
        try:
            refit = fit_lorentzian([SpectrumPoint(d, t, s) for d, t, s in zip(detuning, noisy, sigma)])
        except (FitError, DegenerateSpectrumError):
            continue
        samples.append([refit.center, refit.fwhm, refit.extinction, refit.baseline])
    if len(samples) < 2:
        raise FitError('too few successful resampled fits')
    spread = np.std(np.array(samples), axis=0, ddof=1)
    return dict(zip(['center', 'fwhm', 'extinction', 'baseline'], spread.tolist()))


def spectrum_frame(points):
    return pd.DataFrame(
        [(p.detuning, p.transmission, p.sigma) for p in points],
        columns=SPECTRUM_COLUMNS,
    )


def read_spectrum(path):
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f'spectrum file not found: {path}')
    frame = pd.read_csv(path, comment='#')
    missing = set(SPECTRUM_COLUMNS) - set(frame.columns)
    if missing:
        raise ConfigError(f'{path}: missing columns {", ".join(sorted(missing))}')
    return [
        SpectrumPoint(float(row.detuning_mhz), float(row.transmission), float(row.sigma))
        for row in frame.itertuples(index=False)
    ]


def read_loss_chain(path):
    """Loss chain from a CSV file with a ``name`` column and ``loss`` or ``transmission``."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f'loss chain file not found: {path}')
    frame = pd.read_csv(path, comment='#')
    if 'name' not in frame.columns or not ({'loss', 'transmission'} & set(frame.columns)):
        raise ConfigError(f'{path}: expected columns name and loss or transmission')
    if 'transmission' in frame.columns:
        factors = frame['transmission'].astype(float)
    else:
        factors = 1 - frame['loss'].astype(float)
    return LossChain(elements=tuple(
        LossElement(name=str(name), transmission=float(value)) for name, value in zip(frame['name'], factors)
    ))


def chain_transmission(chain):
    """Product of the element transmission factors."""
    return math.prod(element.transmission for element in chain.elements)
