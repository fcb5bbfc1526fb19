from rest_framework import serializers

from errors import ConfigError
from runs.validators import non_negative, positive, unit_interval
from .models import G2Settings, TwoLevelDrive, coincidence_bins


class TwoLevelDriveSerializer(serializers.Serializer):
    """Driven two-level source; the linewidth is given directly or as an excited-state lifetime."""
    rabi_mhz = serializers.FloatField(validators=[non_negative])
    linewidth_mhz = serializers.FloatField(required=False, validators=[positive])
    lifetime_ns = serializers.FloatField(required=False, validators=[positive])
    detuning_mhz = serializers.FloatField(default=0.0)
    background_rate = serializers.FloatField(default=0.0, validators=[non_negative])
    split_ratio = serializers.FloatField(default=0.5, validators=[unit_interval])
    detection_efficiency = serializers.FloatField(default=1.0, min_value=0, max_value=1)

    def validate(self, attrs):
        if ('linewidth_mhz' in attrs) == ('lifetime_ns' in attrs):
            raise serializers.ValidationError({'linewidth_mhz': 'Give exactly one of linewidth_mhz and lifetime_ns.'})
        if not attrs['detection_efficiency'] > 0:
            raise serializers.ValidationError({'detection_efficiency': 'Ensure this value is greater than zero.'})
        return attrs

    def create(self, validated_data):
        options = {
            'detuning_mhz': validated_data['detuning_mhz'],
            'background_rate': validated_data['background_rate'],
            'split_ratio': validated_data['split_ratio'],
            'detection_efficiency': validated_data['detection_efficiency'],
        }
        if 'lifetime_ns' in validated_data:
            return TwoLevelDrive.from_lifetime(validated_data['rabi_mhz'], validated_data['lifetime_ns'] * 1e-9, **options)
        return TwoLevelDrive(rabi_mhz=validated_data['rabi_mhz'], linewidth_mhz=validated_data['linewidth_mhz'], **options)


class G2SettingsSerializer(serializers.Serializer):
    duration_s = serializers.FloatField(validators=[positive])
    bin_width_ns = serializers.FloatField(default=1.0, validators=[positive])
    window_ns = serializers.FloatField(default=100.0, validators=[positive])
    chunks = serializers.IntegerField(default=1, min_value=1)

    def validate(self, attrs):
        try:
            coincidence_bins(attrs['window_ns'], attrs['bin_width_ns'])
        except ConfigError as exc:
            raise serializers.ValidationError({'bin_width_ns': str(exc)}) from exc
        return attrs

    def create(self, validated_data):
        return G2Settings(
            duration=validated_data['duration_s'],
            bin_width_ns=validated_data['bin_width_ns'],
            window_ns=validated_data['window_ns'],
            chunks=validated_data['chunks'],
        )
