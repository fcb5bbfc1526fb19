from dataclasses import dataclass

from errors import ConfigError


@dataclass(frozen=True)
class SequenceConfig:
    """One data point of the trapping-event measurement sequence.

    ``count_rate`` is the detected probe rate without an atom on resonance; times
    are in seconds.
    """

    true_transmission: float = 1.0
    count_rate: float = 500.0
    interval_min: float = 0.130
    interval_max: float = 0.140
    reference_time: float = 2.0
    mean_dwell: float = 1.5
    events: int = 100
    settle_time: float = 0.0
    max_rate_factor: float = 50.0

    def __post_init__(self):
        if not 0 < self.true_transmission <= 1:
            raise ConfigError(f'true transmission must lie in (0, 1], got {self.true_transmission!r}')
        if not self.count_rate >= 0:
            raise ConfigError(f'count rate must be non-negative, got {self.count_rate!r}')
        if not 0 < self.interval_min <= self.interval_max:
            raise ConfigError('measurement intervals need 0 < interval_min <= interval_max')
        if not self.reference_time > 0 or not self.mean_dwell > 0:
            raise ConfigError('reference time and mean dwell must be positive')
        if self.events < 1:
            raise ConfigError(f'need at least one trapping event per point, got {self.events!r}')
        if not self.settle_time >= 0:
            raise ConfigError(f'settle time must be non-negative, got {self.settle_time!r}')
        if not self.max_rate_factor >= 1:
            raise ConfigError('max_rate_factor must be at least 1')


@dataclass(frozen=True)
class TrapEvent:
    """Measurement intervals (tau_m, n_m) of one trapped atom and its reference count."""

    intervals: tuple
    reference_time: float
    reference_counts: int
    dwell: float = 0.0

    def __post_init__(self):
        for tau, counts in self.intervals:
            if not tau > 0 or counts < 0:
                raise ConfigError('intervals need positive duration and non-negative counts')
        if self.reference_counts < 0:
            raise ConfigError('reference counts must be non-negative')

    @property
    def excluded(self):
        return not self.intervals

    @property
    def measurement_time(self):
        return sum(tau for tau, _ in self.intervals)

    @property
    def measurement_counts(self):
        return sum(counts for _, counts in self.intervals)


@dataclass(frozen=True)
class TransmissionEstimate:
    value: float
    weight: float
    sigma: float

    def __post_init__(self):
        if not self.weight > 0:
            raise ConfigError(f'weight must be positive, got {self.weight!r}')
        if not self.sigma >= 0:
            raise ConfigError(f'standard deviation must be non-negative, got {self.sigma!r}')
