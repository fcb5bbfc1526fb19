from django.conf import settings
from rest_framework import serializers

from correlation.serializers import G2SettingsSerializer, TwoLevelDriveSerializer
from focalfield.serializers import BeamGeometrySerializer, ScanSerializer
from sequence.serializers import SequenceConfigSerializer
from spectroscopy.serializers import LossChainSerializer, SpectrumSerializer
from stark.serializers import FortParamsSerializer, LineTableSerializer
from .models import RunConfig

MAX_SEED = 2 ** 64 - 1


class RunConfigSerializer(serializers.Serializer):
    """Whole configuration file: global keys plus one optional section per module."""
    seed = serializers.IntegerField(default=settings.DEFAULT_SEED, min_value=0, max_value=MAX_SEED)
    output_dir = serializers.CharField(default=settings.OUTPUT_DIR)
    format = serializers.ChoiceField(choices=RunConfig.FORMAT_CHOICES, default=RunConfig.DSV)
    beam = BeamGeometrySerializer(required=False)
    scan = ScanSerializer(required=False)
    lines = LineTableSerializer(required=False)
    fort = FortParamsSerializer(required=False)
    spectrum = SpectrumSerializer(required=False)
    losses = LossChainSerializer(required=False)
    drive = TwoLevelDriveSerializer(required=False)
    g2 = G2SettingsSerializer(required=False)
    sequence = SequenceConfigSerializer(required=False)

    def validate(self, attrs):
        if 'fort' in attrs and 'lines' not in attrs:
            attrs['lines'] = {'path': settings.LINE_TABLE_PATH}
        return attrs

    def create(self, validated_data):
        sections = {}
        # Lines first: the trap-depth calibration of the FORT needs them
        for name in RunConfig.SECTIONS:
            if name not in validated_data:
                continue
            if name == 'fort':
                self.context['lines'] = sections.get('lines')
            sections[name] = self.fields[name].create(validated_data[name])
        return RunConfig(
            seed=validated_data['seed'],
            output_dir=validated_data['output_dir'],
            format=validated_data['format'],
            config_hash=self.context.get('config_hash', ''),
            path=self.context.get('path'),
            **sections,
        )


class ManifestSerializer(serializers.Serializer):
    command = serializers.CharField()
    config_hash = serializers.CharField()
    seed = serializers.IntegerField()
    versions = serializers.DictField(child=serializers.CharField())
    line_table_version = serializers.CharField(allow_blank=True)
    files = serializers.ListField(child=serializers.CharField())
