import math
from dataclasses import dataclass

import numpy as np

from errors import ConfigError


@dataclass(frozen=True)
class TwoLevelDrive:
    """Resonance-fluorescence source and detection setup.

    Frequencies are ordinary frequencies in MHz (Omega/2pi, Gamma/2pi, Delta/2pi);
    rates are per second.
    """

    rabi_mhz: float
    linewidth_mhz: float
    detuning_mhz: float = 0.0
    background_rate: float = 0.0
    split_ratio: float = 0.5
    detection_efficiency: float = 1.0

    def __post_init__(self):
        if not self.linewidth_mhz > 0:
            raise ConfigError(f'linewidth must be positive, got {self.linewidth_mhz!r}')
        if not self.rabi_mhz >= 0:
            raise ConfigError(f'Rabi frequency must be non-negative, got {self.rabi_mhz!r}')
        if not math.isfinite(self.detuning_mhz):
            raise ConfigError('detuning must be finite')
        if not self.background_rate >= 0:
            raise ConfigError(f'background rate must be non-negative, got {self.background_rate!r}')
        if not 0 < self.split_ratio < 1:
            raise ConfigError(f'split ratio must lie in (0, 1), got {self.split_ratio!r}')
        if not 0 < self.detection_efficiency <= 1:
            raise ConfigError(f'detection efficiency must lie in (0, 1], got {self.detection_efficiency!r}')

    @classmethod
    def from_lifetime(cls, rabi_mhz, lifetime, **kwargs):
        return cls(rabi_mhz=rabi_mhz, linewidth_mhz=1 / (2 * math.pi * lifetime) / 1e6, **kwargs)

    # Angular rates in rad/ns
    @property
    def rabi(self):
        return 2 * math.pi * self.rabi_mhz * 1e-3

    @property
    def gamma(self):
        return 2 * math.pi * self.linewidth_mhz * 1e-3

    @property
    def detuning(self):
        return 2 * math.pi * self.detuning_mhz * 1e-3

    @property
    def steady_state_excited(self):
        return (self.rabi ** 2 / 4) / (self.detuning ** 2 + self.gamma ** 2 / 4 + self.rabi ** 2 / 2)

    @property
    def emission_rate(self):
        """Photons per second scattered in steady state."""
        return self.gamma * 1e9 * self.steady_state_excited

    def detected_rates(self):
        """Signal count rates (s^-1) on detectors 1 and 2."""
        detected = self.emission_rate * self.detection_efficiency
        return detected * self.split_ratio, detected * (1 - self.split_ratio)


@dataclass(frozen=True)
class PhotonStream:
    label: str
    timestamps: np.ndarray
    duration: float

    def __post_init__(self):
        stamps = np.asarray(self.timestamps, dtype=float)
        if stamps.ndim != 1:
            raise ConfigError(f'{self.label}: timestamps must be one-dimensional')
        if stamps.size and (np.any(np.diff(stamps) <= 0) or stamps[0] < 0 or stamps[-1] > self.duration):
            raise ConfigError(f'{self.label}: timestamps must be strictly increasing within [0, duration]')
        stamps.flags.writeable = False
        object.__setattr__(self, 'timestamps', stamps)

    def __len__(self):
        return self.timestamps.size

    @property
    def rate(self):
        return len(self) / self.duration


def coincidence_bins(window_ns, bin_width_ns):
    """Number of bins spanning [-W, W]; the bin width must divide 2W."""
    if not bin_width_ns > 0 or not window_ns > 0:
        raise ConfigError('bin width and window must be positive')
    ratio = 2 * window_ns / bin_width_ns
    bins = int(round(ratio))
    if bins < 1 or not math.isclose(ratio, bins, rel_tol=1e-9):
        raise ConfigError(f'bin width {bin_width_ns} ns does not divide the window [-{window_ns}, {window_ns}] ns')
    return bins


@dataclass(frozen=True)
class G2Settings:
    duration: float
    bin_width_ns: float = 1.0
    window_ns: float = 100.0
    chunks: int = 1

    def __post_init__(self):
        if not self.duration > 0:
            raise ConfigError(f'stream duration must be positive, got {self.duration!r}')
        coincidence_bins(self.window_ns, self.bin_width_ns)
        if self.chunks < 1:
            raise ConfigError('chunks must be at least 1')


@dataclass(frozen=True)
class G2Histogram:
    """Coincidences of t2 - t1 binned over [-W, W] (ns) and their normalization."""

    edges: np.ndarray
    counts: np.ndarray
    duration: float
    singles: tuple
    insufficient_data: bool = False

    @property
    def centers(self):
        return (self.edges[:-1] + self.edges[1:]) / 2

    @property
    def bin_width(self):
        return float(self.edges[1] - self.edges[0])

    @property
    def normalization(self):
        """Uncorrelated expectation r1 r2 dt T per bin."""
        n1, n2 = self.singles
        if not n1 or not n2:
            return 0.0
        return n1 * n2 * self.bin_width * 1e-9 / self.duration

    @property
    def values(self):
        norm = self.normalization
        return self.counts / norm if norm else np.zeros_like(self.counts, dtype=float)

    @property
    def sigma(self):
        norm = self.normalization
        return np.sqrt(self.counts) / norm if norm else np.zeros_like(self.counts, dtype=float)
