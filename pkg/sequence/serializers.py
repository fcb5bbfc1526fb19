from rest_framework import serializers

from runs.validators import non_negative, positive
from .models import SequenceConfig


class SequenceConfigSerializer(serializers.Serializer):
    """Trapping-event measurement sequence (times in seconds, rates per second)."""
    count_rate = serializers.FloatField(default=500.0, validators=[positive])
    interval_min_s = serializers.FloatField(default=0.130, validators=[positive])
    interval_max_s = serializers.FloatField(default=0.140, validators=[positive])
    reference_time_s = serializers.FloatField(default=2.0, validators=[positive])
    mean_dwell_s = serializers.FloatField(default=1.5, validators=[positive])
    events = serializers.IntegerField(default=100, min_value=1)
    settle_time_s = serializers.FloatField(default=0.0, validators=[non_negative])
    max_rate_factor = serializers.FloatField(default=50.0, min_value=1)
    true_transmission = serializers.FloatField(default=0.902, min_value=0, max_value=1)
    stark_offset = serializers.BooleanField(default=False)

    def validate(self, attrs):
        if attrs['interval_max_s'] < attrs['interval_min_s']:
            raise serializers.ValidationError({'interval_max_s': 'Must not be shorter than interval_min_s.'})
        if not attrs['true_transmission'] > 0:
            raise serializers.ValidationError({'true_transmission': 'Ensure this value is greater than zero.'})
        return attrs

    def create(self, validated_data):
        config = SequenceConfig(
            true_transmission=validated_data['true_transmission'],
            count_rate=validated_data['count_rate'],
            interval_min=validated_data['interval_min_s'],
            interval_max=validated_data['interval_max_s'],
            reference_time=validated_data['reference_time_s'],
            mean_dwell=validated_data['mean_dwell_s'],
            events=validated_data['events'],
            settle_time=validated_data['settle_time_s'],
            max_rate_factor=validated_data['max_rate_factor'],
        )
        return {'config': config, 'stark_offset': validated_data['stark_offset']}
