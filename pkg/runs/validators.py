import numpy as np
from rest_framework import serializers

from errors import ConfigError


def positive(value):
    if not value > 0:
        raise serializers.ValidationError('Ensure this value is greater than zero.')


def non_negative(value):
    if not value >= 0:
        raise serializers.ValidationError('Ensure this value is not negative.')


def unit_interval(value):
    if not 0 < value < 1:
        raise serializers.ValidationError('Ensure this value lies strictly between 0 and 1.')


def parse_grid(text):
    """Evenly spaced grid from ``a:b:n``; n = 1 gives the single value a."""
    parts = str(text).split(':')
    if len(parts) != 3:
        raise ConfigError(f'grid {text!r} is not of the form start:stop:count')
    try:
        start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError as exc:
        raise ConfigError(f'grid {text!r} is not of the form start:stop:count') from exc
    if count < 1:
        raise ConfigError(f'grid {text!r} needs at least one point')
    if not (np.isfinite(start) and np.isfinite(stop)):
        raise ConfigError(f'grid {text!r} has non-finite bounds')
    return np.linspace(start, stop, count)


class GridField(serializers.CharField):
    """``start:stop:count`` string validated into a numpy grid."""

    def to_internal_value(self, data):
        text = super().to_internal_value(data)
        try:
            parse_grid(text)
        except ConfigError as exc:
            raise serializers.ValidationError(str(exc)) from exc
        return text
