from rest_framework import serializers

from runs.validators import GridField, non_negative, parse_grid, positive, unit_interval
from .models import BeamGeometry, FocalField
from .services import input_waist_for_focal_waist


class BeamGeometrySerializer(serializers.Serializer):
    """Probe beam and lens; the input waist is given directly or through the focal waist."""
    wavelength_nm = serializers.FloatField(validators=[positive])
    focal_length_mm = serializers.FloatField(validators=[positive])
    aperture_na = serializers.FloatField(validators=[unit_interval])
    input_waist_mm = serializers.FloatField(required=False, validators=[positive])
    focal_waist_nm = serializers.FloatField(required=False, validators=[positive])
    power_w = serializers.FloatField(default=1e-12, validators=[non_negative])
    handedness = serializers.ChoiceField(choices=BeamGeometry.HANDEDNESS_CHOICES, default=BeamGeometry.SIGMA_PLUS)
    lens = serializers.ChoiceField(choices=BeamGeometry.LENS_CHOICES, default=BeamGeometry.TANGENT)

    def validate(self, attrs):
        given = [key for key in ('input_waist_mm', 'focal_waist_nm') if key in attrs]
        if len(given) != 1:
            raise serializers.ValidationError(
                {'input_waist_mm': 'Give exactly one of input_waist_mm and focal_waist_nm.'})
        return attrs

    def create(self, validated_data):
        wavelength = validated_data['wavelength_nm'] * 1e-9
        focal_length = validated_data['focal_length_mm'] * 1e-3
        if 'input_waist_mm' in validated_data:
            input_waist = validated_data['input_waist_mm'] * 1e-3
        else:
            input_waist = input_waist_for_focal_waist(wavelength, focal_length, validated_data['focal_waist_nm'] * 1e-9)
        return BeamGeometry(
            wavelength=wavelength,
            input_waist=input_waist,
            focal_length=focal_length,
            aperture_na=validated_data['aperture_na'],
            power=validated_data['power_w'],
            handedness=validated_data['handedness'],
            lens=validated_data['lens'],
        )


class ScanSerializer(serializers.Serializer):
    """Focusing scan over u = w_L/f or over the convergence NA."""
    BOTH = 'both'

    MODEL_CHOICES = FocalField.MODEL_CHOICES + [(BOTH, 'Paraxial and full')]
    AXIS_CHOICES = [
        ('u', 'Focusing strength w_L/f'),
        ('na', 'Convergence NA of the 1/e^2 ray'),
    ]

    axis = serializers.ChoiceField(choices=AXIS_CHOICES, default='u')
    range = GridField(default='0.02:2.5:100')
    model = serializers.ChoiceField(choices=MODEL_CHOICES, default=BOTH)
    aperture_na = serializers.FloatField(required=False, validators=[unit_interval])

    def create(self, validated_data):
        model = validated_data['model']
        return {
            'axis': validated_data['axis'],
            'values': parse_grid(validated_data['range']),
            'models': (FocalField.PARAXIAL, FocalField.FULL) if model == self.BOTH else (model,),
            'aperture_na': validated_data.get('aperture_na'),
        }
