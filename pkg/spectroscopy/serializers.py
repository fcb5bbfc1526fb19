from rest_framework import serializers

from errors import ConfigError
from runs.validators import GridField, non_negative, parse_grid, positive
from .models import LineShape, SpectrumSettings
from .services import extinction_to_scattering, read_loss_chain


class SpectrumSerializer(serializers.Serializer):
    """Line shape and detuning grid; the depth is given as P_sc or as extinction."""
    detunings = GridField(default='-20:20:41')
    p_sc_max = serializers.FloatField(required=False, min_value=0, max_value=1)
    extinction = serializers.FloatField(required=False, min_value=0)
    fwhm_mhz = serializers.FloatField(validators=[positive])
    center_mhz = serializers.FloatField(default=0.0)
    stark_center = serializers.BooleanField(default=False)
    collection = serializers.FloatField(default=0.0, min_value=0)
    laser_linewidth_mhz = serializers.FloatField(default=0.0, validators=[non_negative])
    sigma = serializers.FloatField(default=0.005, validators=[positive])
    probe_handedness = serializers.ChoiceField(choices=SpectrumSettings.PROBE_CHOICES,
                                               default=SpectrumSettings.SIGMA_PLUS)
    input = serializers.CharField(required=False, allow_blank=True, default='')
    bootstrap = serializers.IntegerField(default=0, min_value=0)

    def validate(self, attrs):
        if ('p_sc_max' in attrs) == ('extinction' in attrs):
            raise serializers.ValidationError({'p_sc_max': 'Give exactly one of p_sc_max and extinction.'})
        if not attrs['collection'] < 1:
            raise serializers.ValidationError({'collection': 'Ensure this value is less than 1.'})
        if 'extinction' in attrs:
            try:
                attrs['p_sc_max'] = extinction_to_scattering(attrs.pop('extinction'), attrs['collection'])
            except ConfigError as exc:
                raise serializers.ValidationError({'extinction': str(exc)}) from exc
            if attrs['p_sc_max'] > 1:
                raise serializers.ValidationError({'extinction': 'Implies a scattering probability above 1.'})
        return attrs

    def create(self, validated_data):
        shape = LineShape(
            p_sc_max=validated_data['p_sc_max'],
            fwhm=validated_data['fwhm_mhz'],
            center=validated_data['center_mhz'],
            collection=validated_data['collection'],
            laser_linewidth=validated_data['laser_linewidth_mhz'],
        )
        return SpectrumSettings(
            shape=shape,
            detunings=tuple(parse_grid(validated_data['detunings']).tolist()),
            sigma=validated_data['sigma'],
            input_path=validated_data['input'],
            stark_center=validated_data['stark_center'],
            probe_handedness=validated_data['probe_handedness'],
            bootstrap=validated_data['bootstrap'],
        )


class LossChainSerializer(serializers.Serializer):
    path = serializers.CharField()

    def create(self, validated_data):
        return read_loss_chain(validated_data['path'])
