import logging
import math
from dataclasses import replace

import numpy as np
import pandas as pd
from django.conf import settings
from joblib import Parallel, delayed

from errors import ExcludedEventError, ReductionError
from spectroscopy.models import SpectrumPoint
from spectroscopy.services import lorentzian, model_transmission
from .models import TransmissionEstimate, TrapEvent

logger = logging.getLogger(__name__)

EVENT_COLUMNS = ['event_id', 'interval_id', 'tau_m_s', 'n_m', 'tau_r_s', 'n_r', 'detuning_mhz', 'excluded']


def simulate_event(config, rng):
    """One trapping event: exponential dwell sliced into whole measurement intervals."""
    dwell = rng.exponential(config.mean_dwell)
    cycle_min = config.settle_time + config.interval_min
    slots = int(dwell // cycle_min) + 1
    taus = rng.uniform(config.interval_min, config.interval_max, slots)
    ends = np.cumsum(taus + config.settle_time)
    # The last, partial interval is dropped when the atom is found missing
    taus = taus[ends <= dwell]

    counts = rng.poisson(config.count_rate * config.true_transmission * taus)
    reference = int(rng.poisson(config.count_rate * config.reference_time))
    return TrapEvent(
        intervals=tuple((float(t), int(n)) for t, n in zip(taus, counts)),
        reference_time=config.reference_time,
        reference_counts=reference,
        dwell=float(dwell),
    )


def reduce_event(event):
    """T = (sum n_m / sum tau_m)(tau_r / n_r), weighted by tau_r sum tau_m / (tau_r + sum tau_m)."""
    if event.excluded:
        raise ExcludedEventError('trap event has no measurement intervals')
    if event.reference_counts == 0:
        raise ReductionError('reference count n_r is zero')

    tau_m = event.measurement_time
    n_m = event.measurement_counts
    tau_r = event.reference_time
    n_r = event.reference_counts

    value = (n_m / tau_m) * (tau_r / n_r)
    # Poisson propagation; equals T sqrt(1/n_m + 1/n_r) whenever n_m > 0
    sigma = math.sqrt(n_m * (tau_r / (n_r * tau_m)) ** 2 + value ** 2 / n_r)
    return TransmissionEstimate(value=value, weight=tau_r * tau_m / (tau_r + tau_m), sigma=sigma)


def weighted_average(estimates):
    """Weighted mean with propagated shot-noise standard deviation."""
    estimates = list(estimates)
    if not estimates:
        raise ReductionError('no transmission estimates to average')
    if len(estimates) == 1:
        return estimates[0]
    # fsum is exactly rounded, so the result does not depend on input order
    total = math.fsum(e.weight for e in estimates)
    value = math.fsum(e.weight * e.value for e in estimates) / total
    sigma = math.sqrt(math.fsum((e.weight * e.sigma) ** 2 for e in estimates)) / total
    return TransmissionEstimate(value=value, weight=total, sigma=sigma)


def _event_rngs(seed_sequence, count):
    return [np.random.default_rng(child) for child in seed_sequence.spawn(count)]


def measure_point(config, seed_sequence):
    """Simulate and reduce ``config.events`` trapping events; returns (estimate, events)."""
    events = [simulate_event(config, rng) for rng in _event_rngs(seed_sequence, config.events)]
    kept = [event for event in events if not event.excluded]
    if len(kept) < len(events):
        logger.debug('%d of %d trapping events had no complete interval', len(events) - len(kept), len(events))
    if not kept:
        raise ReductionError(f'all {len(events)} trapping events were excluded')
    estimate = weighted_average(reduce_event(event) for event in kept)
    return estimate, events


def _measure_detuning(config, seed_sequence, detuning):
    try:
        estimate, events = measure_point(config, seed_sequence)
    except ReductionError as exc:
        raise ReductionError(f'detuning {detuning:+.4g} MHz: {exc}') from exc
    if not estimate.value > 0:
        raise ReductionError(f'detuning {detuning:+.4g} MHz: no photons detected in any measurement interval')
    return estimate, events


def point_rates(config, shape, detunings):
    """No-atom count rate per point, raised off resonance to keep the scattering rate constant."""
    detunings = np.asarray(detunings, dtype=float)
    if shape.p_sc_max == 0:
        return np.full(detunings.shape, config.count_rate)
    relative = lorentzian(detunings, shape.center, shape.effective_fwhm)
    return config.count_rate * np.minimum(1 / relative, config.max_rate_factor)


def synthesize_spectrum(config, shape, detunings, seed, stark_offset=0.0, n_jobs=None):
    """End-to-end synthetic transmission spectrum; returns (points, event log frame).

    The line sits at ``shape.center + stark_offset`` (MHz).
    """
    shape = replace(shape, center=shape.center + stark_offset)
    detunings = np.asarray(detunings, dtype=float)
    truth = model_transmission(detunings, shape)
    rates = point_rates(config, shape, detunings)
    children = np.random.SeedSequence(seed).spawn(detunings.size)

    n_jobs = settings.N_JOBS if n_jobs is None else n_jobs
    results = Parallel(n_jobs=n_jobs)(
        delayed(_measure_detuning)(
            replace(config, true_transmission=float(t), count_rate=float(r)), child, float(detuning),
        )
        for t, r, child, detuning in zip(truth, rates, children, detunings)
    )

    points = []
    rows = []
    event_id = 0
    for detuning, (estimate, events) in zip(detunings, results):
        points.append(SpectrumPoint(detuning=float(detuning), transmission=estimate.value, sigma=estimate.sigma))
        for event in events:
            if event.excluded:
                rows.append((event_id, 0, 0.0, 0, event.reference_time, event.reference_counts, detuning, 1))
            for interval_id, (tau, counts) in enumerate(event.intervals, start=1):
                rows.append((event_id, interval_id, tau, counts, event.reference_time,
                             event.reference_counts, detuning, 0))
            event_id += 1
    logger.info('synthesized %d spectrum points from %d trapping events', len(points), event_id)
    return points, pd.DataFrame(rows, columns=EVENT_COLUMNS)


def calibrate_estimator(config, seeds, base_seed=0, n_jobs=None):
    """Repeat one data point over independent seeds and compare scatter with propagated errors."""
    children = np.random.SeedSequence(base_seed).spawn(seeds)
    n_jobs = settings.N_JOBS if n_jobs is None else n_jobs
    results = Parallel(n_jobs=n_jobs)(delayed(measure_point)(config, child) for child in children)
    values = np.array([estimate.value for estimate, _ in results])
    sigmas = np.array([estimate.sigma for estimate, _ in results])

    mean = float(values.mean())
    empirical = float(values.std(ddof=1))
    propagated = float(sigmas.mean())
    report = {
        'true_transmission': config.true_transmission,
        'seeds': seeds,
        'mean': mean,
        'empirical_sigma': empirical,
        'propagated_sigma': propagated,
        'sigma_ratio': empirical / propagated,
        'deviation_in_sigma': abs(mean - config.true_transmission) / propagated,
    }
    logger.info('estimator calibration over %d seeds: sigma ratio %.3f', seeds, report['sigma_ratio'])
    return report
