import math

from django.conf import settings
from rest_framework import serializers

from runs.validators import positive
from .models import FortParams
from .services import calibrate_power, read_line_table


class LineTableSerializer(serializers.Serializer):
    path = serializers.CharField(default=settings.LINE_TABLE_PATH)

    def create(self, validated_data):
        return read_line_table(validated_data['path'])


class FortParamsSerializer(serializers.Serializer):
    """Trap beam; the strength is fixed by exactly one of power, peak intensity or trap depth."""
    STRENGTH_FIELDS = ['power_mw', 'peak_intensity', 'trap_depth_mhz']

    waist_um = serializers.FloatField(validators=[positive])
    wavelength_nm = serializers.FloatField(default=980.0, validators=[positive])
    handedness = serializers.ChoiceField(choices=FortParams.HANDEDNESS_CHOICES, default=FortParams.SIGMA_PLUS)
    power_mw = serializers.FloatField(required=False, min_value=0)
    peak_intensity = serializers.FloatField(required=False, min_value=0, help_text='W/m^2')
    trap_depth_mhz = serializers.FloatField(required=False, validators=[positive])

    def validate(self, attrs):
        given = [key for key in self.STRENGTH_FIELDS if key in attrs]
        if len(given) != 1:
            raise serializers.ValidationError(
                {'power_mw': f'Give exactly one of {", ".join(self.STRENGTH_FIELDS)}.'})
        return attrs

    def create(self, validated_data):
        waist = validated_data['waist_um'] * 1e-6
        if 'power_mw' in validated_data:
            power = validated_data['power_mw'] * 1e-3
        elif 'peak_intensity' in validated_data:
            power = validated_data['peak_intensity'] * math.pi * waist ** 2 / 2
        else:
            power = 1.0
        fort = FortParams(
            waist=waist,
            power=power,
            wavelength=validated_data['wavelength_nm'] * 1e-9,
            handedness=validated_data['handedness'],
        )
        if 'trap_depth_mhz' in validated_data:
            fort = calibrate_power(fort, self.context['lines'], validated_data['trap_depth_mhz'])
        return fort
