import logging
from functools import lru_cache

import numpy as np
import pandas as pd
from django.conf import settings
from joblib import Parallel, delayed
from scipy import integrate, linalg

from errors import ConfigError, NumericalError
from .models import G2Histogram, PhotonStream, coincidence_bins

logger = logging.getLogger(__name__)

# Survival probability left in the tail of the tabulated waiting-time distribution
WAITING_TAIL = 1e-13
WAITING_MAX_POINTS = 2_000_000
# Uniform steps per fast decay time or beat period
WAITING_STEPS = 200
WAITING_TAIL_POINTS = 4000
WAITING_EXTENSIONS = 8
# Condition number above which the no-emission eigenbasis is treated as defective
DEFECTIVE_CONDITION = 1e6


def _bloch_matrix(drive):
    """Optical Bloch equations x' = M x + b for x = (u, v, w), w = rho_ee - rho_gg, rates in 1/ns."""
    g, o, d = drive.gamma, drive.rabi, drive.detuning
    matrix = np.array([
        [-g / 2, d, 0.0],
        [-d, -g / 2, -o],
        [0.0, o, -g],
    ])
    offset = np.array([0.0, 0.0, -g])
    return matrix, offset


def _steady_state(drive):
    matrix, offset = _bloch_matrix(drive)
    return np.linalg.solve(matrix, -offset)


def excited_population(drive, times_ns):
    """rho_ee(t) of the ground-initialized Bloch evolution (spectral solution)."""
    matrix, _ = _bloch_matrix(drive)
    steady = _steady_state(drive)
    eigenvalues, vectors = np.linalg.eig(matrix)
    start = np.linalg.solve(vectors, np.array([0.0, 0.0, -1.0]) - steady)
    t = np.abs(np.asarray(times_ns, dtype=float))
    w = steady[2] + np.real(np.exp(np.multiply.outer(t, eigenvalues)) @ (vectors[2] * start))
    return (1 + w) / 2


def g2_closed_form(drive, tau_ns):
    """g2(tau) = rho_ee(|tau|) / rho_ee(inf) for an atom restarted in the ground state.

    On resonance this is 1 - exp(-3 Gamma tau / 4) [cos(W tau) + 3 Gamma / (4 W) sin(W tau)]
    with W = sqrt(Omega^2 - Gamma^2 / 16); otherwise the Bloch matrix is diagonalized.
    """
    if not drive.gamma > 0:
        raise ConfigError('g2 needs a positive linewidth')
    tau = np.abs(np.asarray(tau_ns, dtype=float))
    g, o = drive.gamma, drive.rabi
    if drive.detuning == 0:
        # W may be imaginary below Omega = Gamma/4; sinc keeps the expression finite at W = 0
        oscillation = np.sqrt(complex(o * o - g * g / 16))
        bracket = np.cos(oscillation * tau) + 0.75 * g * tau * np.sinc(oscillation * tau / np.pi)
        return 1 - np.real(np.exp(-0.75 * g * tau) * bracket)
    if o == 0:
        raise ConfigError('g2 is undefined for an undriven, detuned atom')
    return excited_population(drive, tau) / drive.steady_state_excited


def g2_bloch(drive, tau_ns, rtol=1e-12, atol=1e-14):
    """g2 from direct numerical integration of the Bloch equations (quantum regression)."""
    tau = np.abs(np.asarray(tau_ns, dtype=float))
    matrix, offset = _bloch_matrix(drive)
    steady = _steady_state(drive)
    excited = (1 + steady[2]) / 2
    if excited == 0:
        raise ConfigError('g2 is undefined without a steady-state excited population')

    order = np.argsort(tau)
    solution = integrate.solve_ivp(
        lambda t, x: matrix @ x + offset,
        (0.0, float(tau.max()) if tau.size else 0.0),
        np.array([0.0, 0.0, -1.0]),
        method='DOP853',
        t_eval=tau[order],
        rtol=rtol,
        atol=atol,
    )
    if not solution.success:
        raise NumericalError(f'Bloch integration failed: {solution.message}')
    result = np.empty_like(tau)
    result[order] = (1 + solution.y[2]) / 2 / excited
    return result


def _no_emission_generator(drive):
    g, o, d = drive.gamma, drive.rabi, drive.detuning
    # Amplitudes (c_g, c_e) under the effective Hamiltonian, hbar = 1
    return -1j * np.array([
        [0.0, o / 2],
        [o / 2, -d - 0.5j * g],
    ])


def _no_emission_amplitudes(drive, times_ns):
    """(c_g, c_e) after ``times_ns`` without emission, starting in the ground state."""
    times = np.asarray(times_ns, dtype=float)
    generator = _no_emission_generator(drive)
    eigenvalues, vectors = np.linalg.eig(generator)
    if np.linalg.cond(vectors) < DEFECTIVE_CONDITION:
        weights = np.linalg.solve(vectors, np.array([1.0, 0.0]))
        amplitudes = (np.exp(np.multiply.outer(times, eigenvalues)) * weights) @ vectors.T
    else:
        # Eigenbasis degenerates at Omega = Gamma / 2 on resonance
        amplitudes = linalg.expm(np.multiply.outer(times, generator))[..., :, 0]
    return amplitudes[..., 0], amplitudes[..., 1]


def waiting_time_density(drive, times_ns):
    """Density (1/ns) of the delay to the next emission after the atom is reset to the ground state."""
    _, excited = _no_emission_amplitudes(drive, times_ns)
    return drive.gamma * np.abs(excited) ** 2


def _survival(drive, times_ns):
    ground, excited = _no_emission_amplitudes(drive, times_ns)
    return np.abs(ground) ** 2 + np.abs(excited) ** 2


def _waiting_time_grid(drive):
    """Uniform steps while the fast mode and its beat survive, geometric steps over the slow tail."""
    eigenvalues = np.linalg.eigvals(_no_emission_generator(drive))
    rates = -eigenvalues.real
    slow, fast = float(rates.min()), float(rates.max())
    if not slow > 0:
        raise ConfigError('waiting times need a driven atom')
    beat = abs(float(eigenvalues[0].imag - eigenvalues[1].imag))
    step = min(1 / fast, 2 * np.pi / beat if beat else np.inf) / WAITING_STEPS
    tail = -np.log(WAITING_TAIL)
    settled = tail / fast
    count = int(np.ceil(settled / step)) + 1
    if count > WAITING_MAX_POINTS:
        raise NumericalError(
            f'waiting-time distribution needs more than {WAITING_MAX_POINTS} points (drive too strong)'
        )
    uniform = np.linspace(0.0, settled, count)
    horizon = max(settled, tail / (2 * slow))
    return uniform, slow, horizon


@lru_cache(maxsize=16)
def _waiting_time_table(drive):
    """Times (ns) and cumulative distribution of the emission delay."""
    uniform, slow, horizon = _waiting_time_grid(drive)
    for _ in range(WAITING_EXTENSIONS):
        if horizon > uniform[-1]:
            geometric = np.geomspace(uniform[-1], horizon, WAITING_TAIL_POINTS)[1:]
            times = np.concatenate([uniform, geometric])
        else:
            times = uniform
        survival = _survival(drive, times)
        if survival[-1] < WAITING_TAIL:
            break
        horizon = max(2 * horizon, 2 * uniform[-1])
    else:
        raise NumericalError(f'waiting-time tail still above {WAITING_TAIL} at {horizon:.4g} ns')
    cumulative = np.maximum.accumulate(1 - survival)
    cumulative[-1] = 1.0
    logger.debug('tabulated waiting times to %.4g ns with %d points (slowest decay %.3g /ns)',
                 times[-1], times.size, slow)
    return times, cumulative


def sample_waiting_times(drive, size, rng):
    """Inverse-transform samples (ns) of the emission delay."""
    times, cumulative = _waiting_time_table(drive)
    return np.interp(rng.random(size), cumulative, times)


def _emission_times(drive, duration, rng):
    if drive.rabi == 0:
        return np.empty(0)
    batch = int(duration * drive.emission_rate * 1.05) + 64
    chunks = []
    elapsed = 0.0
    while elapsed <= duration:
        times = elapsed + np.cumsum(sample_waiting_times(drive, batch, rng)) * 1e-9
        chunks.append(times)
        elapsed = times[-1]
    emissions = np.concatenate(chunks)
    return emissions[emissions <= duration]


def simulate_streams(drive, duration, seed):
    """Renewal-process emissions routed to two detectors plus Poisson background."""
    if not duration > 0:
        raise ConfigError(f'stream duration must be positive, got {duration!r}')
    rng = np.random.default_rng(seed)

    emissions = _emission_times(drive, duration, rng)
    detected = rng.random(emissions.size) < drive.detection_efficiency
    first = rng.random(emissions.size) < drive.split_ratio

    streams = []
    for label, mask in (('D1', detected & first), ('D2', detected & ~first)):
        background = rng.uniform(0.0, duration, rng.poisson(drive.background_rate * duration))
        stamps = np.unique(np.concatenate([emissions[mask], background]))
        streams.append(PhotonStream(label=label, timestamps=stamps, duration=duration))
    logger.info('simulated %d emissions over %.4g s: %d and %d detections',
                emissions.size, duration, len(streams[0]), len(streams[1]))
    return tuple(streams)


def _pair_counts(first, second, edges_ns):
    window = max(abs(edges_ns[0]), abs(edges_ns[-1])) * 1e-9
    lower = np.searchsorted(second, first - window, side='left')
    upper = np.searchsorted(second, first + window, side='right')
    per_event = upper - lower
    total = int(per_event.sum())
    if total == 0:
        return np.zeros(edges_ns.size - 1, dtype=np.int64)
    starts = np.repeat(lower, per_event)
    offsets = np.arange(total) - np.repeat(np.cumsum(per_event) - per_event, per_event)
    delays = (second[starts + offsets] - np.repeat(first, per_event)) * 1e9
    counts, _ = np.histogram(delays, bins=edges_ns)
    return counts.astype(np.int64)


def merge_histograms(parts):
    """Sum coincidence counts of histograms over disjoint chunks of detector 1."""
    parts = list(parts)
    if not parts:
        raise ConfigError('nothing to merge')
    edges = parts[0].edges
    if any(not np.array_equal(edges, part.edges) for part in parts):
        raise ConfigError('histograms have different bins')
    counts = np.sum([part.counts for part in parts], axis=0)
    return G2Histogram(
        edges=edges,
        counts=counts,
        duration=parts[0].duration,
        singles=parts[0].singles,
        insufficient_data=all(part.insufficient_data for part in parts),
    )


def histogram_g2(d1, d2, bin_width_ns=1.0, window_ns=100.0, chunks=1, n_jobs=None):
    """Histogram delays t2 - t1 between detector-1 and detector-2 events within +-window."""
    bins = coincidence_bins(window_ns, bin_width_ns)
    if d1.duration != d2.duration:
        raise ConfigError('streams must cover the same duration')

    edges = np.linspace(-window_ns, window_ns, bins + 1)
    singles = (len(d1), len(d2))
    if not len(d1) or not len(d2):
        logger.warning('empty photon stream: g2 histogram has no data')
        return G2Histogram(edges=edges, counts=np.zeros(bins, dtype=np.int64), duration=d1.duration,
                           singles=singles, insufficient_data=True)

    pieces = np.array_split(d1.timestamps, chunks)
    n_jobs = settings.N_JOBS if n_jobs is None else n_jobs
    counts = Parallel(n_jobs=n_jobs)(delayed(_pair_counts)(piece, d2.timestamps, edges) for piece in pieces)
    parts = [
        G2Histogram(edges=edges, counts=c, duration=d1.duration, singles=singles) for c in counts
    ]
    return merge_histograms(parts)


def subtract_background(histogram, rho1, rho2=None):
    """Remove uncorrelated background, rho = signal / (signal + background) per detector."""
    rho2 = rho1 if rho2 is None else rho2
    product = rho1 * rho2
    if not 0 < product <= 1:
        raise ConfigError('signal fractions must lie in (0, 1]')
    return (histogram.values - (1 - product)) / product, histogram.sigma / product


def signal_fractions(drive):
    rates = drive.detected_rates()
    return tuple(r / (r + drive.background_rate) if r else 0.0 for r in rates)


def expected_g2(drive, histogram, samples=16):
    """Bin-averaged closed-form g2 as measured with the drive's background."""
    width = histogram.bin_width
    offsets = (np.arange(samples) + 0.5) / samples * width
    tau = histogram.edges[:-1, None] + offsets[None, :]
    ideal = g2_closed_form(drive, tau).mean(axis=1)
    rho1, rho2 = signal_fractions(drive)
    return 1 + rho1 * rho2 * (ideal - 1)


def chi_square(drive, histogram):
    """Pearson chi-square of the coincidence counts against the closed form; returns (chi2, dof)."""
    expected = expected_g2(drive, histogram) * histogram.normalization
    used = expected > 0
    chi2 = float(np.sum((histogram.counts[used] - expected[used]) ** 2 / expected[used]))
    return chi2, int(used.sum())


def histogram_frame(histogram, corrected=None):
    frame = pd.DataFrame({
        'tau_ns': histogram.centers,
        'g2': histogram.values,
        'sigma': histogram.sigma,
        'counts': histogram.counts,
    })
    if corrected is not None:
        frame['g2_corrected'], frame['sigma_corrected'] = corrected
    return frame
