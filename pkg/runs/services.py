import copy
import hashlib
import json
import logging
import os
import tempfile
from pathlib import Path

import django
import joblib
import numpy as np
import pandas as pd
import rest_framework
import scipy
import sympy
import yaml
from django.conf import settings
from rest_framework.renderers import JSONRenderer

from errors import ConfigError, OutputError
from .models import Artifact, RunConfig, RunManifest
from .serializers import ManifestSerializer, RunConfigSerializer

logger = logging.getLogger(__name__)

# (section, key) pairs naming input files, resolved against the config file's directory
PATH_FIELDS = [('lines', 'path'), ('losses', 'path'), ('spectrum', 'input')]

FLOAT_FORMAT = '%.12g'


def merge_overrides(raw, overrides):
    """Deep-merge ``overrides`` into a copy of ``raw``; None values are skipped."""
    merged = copy.deepcopy(raw)
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if isinstance(value, dict):
            section = merged.get(key) or {}
            if not isinstance(section, dict):
                raise ConfigError(f'section {key!r} must be a mapping')
            merged[key] = merge_overrides(section, value)
        else:
            merged[key] = value
    return merged


def flatten_errors(detail, prefix=''):
    """DRF error detail as ``section.field: message`` lines."""
    if isinstance(detail, dict):
        lines = []
        for key, value in detail.items():
            name = prefix if key == 'non_field_errors' else (f'{prefix}.{key}' if prefix else str(key))
            lines.extend(flatten_errors(value, name))
        return lines
    if isinstance(detail, list):
        lines = []
        for item in detail:
            lines.extend(flatten_errors(item, prefix))
        return lines
    return [f'{prefix}: {detail}' if prefix else str(detail)]


def file_digest(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def config_hash(validated_data):
    """SHA-256 of the canonical validated config; input files enter by content."""
    canonical = copy.deepcopy(dict(validated_data))
    canonical.pop('output_dir', None)
    for section, key in PATH_FIELDS:
        value = (canonical.get(section) or {}).get(key)
        if value:
            canonical[section] = dict(canonical[section], **{key: f'sha256:{file_digest(value)}'})
    text = json.dumps(canonical, sort_keys=True, default=str, separators=(',', ':'))
    return hashlib.sha256(text.encode('utf-8')).hexdigest()


def _resolve_paths(raw, base):
    for section, key in PATH_FIELDS:
        values = raw.get(section)
        if isinstance(values, dict) and values.get(key):
            path = Path(values[key])
            if not path.is_absolute():
                values[key] = str(base / path)
            if not Path(values[key]).is_file():
                raise ConfigError(f'{section}.{key}: file not found: {values[key]}')
    return raw


def load_run_config(path=None, overrides=None):
    """Read, validate and build the run configuration; nothing is computed on failure."""
    path = Path(path or settings.DEFAULT_CONFIG)
    if not path.is_file():
        raise ConfigError(f'configuration file not found: {path}')
    try:
        raw = yaml.safe_load(path.read_text(encoding='utf-8')) or {}
    except (yaml.YAMLError, UnicodeDecodeError) as exc:
        raise ConfigError(f'{path}: not valid YAML: {exc}') from exc
    if not isinstance(raw, dict):
        raise ConfigError(f'{path}: top level must be a mapping')

    raw = _resolve_paths(merge_overrides(raw, overrides), path.resolve().parent)
    serializer = RunConfigSerializer(data=raw, context={'path': path})
    if not serializer.is_valid():
        problems = '; '.join(flatten_errors(serializer.errors))
        raise ConfigError(f'{path}: invalid configuration: {problems}')
    serializer.context['config_hash'] = config_hash(serializer.validated_data)
    config = serializer.save()
    logger.debug('loaded %s (hash %s)', path, config.config_hash[:12])
    return config


def artifact_versions():
    return {
        'atomlens': settings.ATOMLENS_VERSION,
        'django': django.get_version(),
        'djangorestframework': rest_framework.VERSION,
        'joblib': joblib.__version__,
        'numpy': np.__version__,
        'pandas': pd.__version__,
        'scipy': scipy.__version__,
        'sympy': sympy.__version__,
    }


def _native(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, (list, tuple)):
        return [_native(item) for item in value]
    if isinstance(value, dict):
        return {str(key): _native(item) for key, item in value.items()}
    return value


class OutputDirectory:
    """Atomic writer confined to one output directory."""

    def __init__(self, root, fmt=RunConfig.DSV, metadata=None):
        self.root = Path(root).resolve()
        self.format = fmt
        self.metadata = dict(metadata or {})
        self.written = []

    def path_for(self, filename):
        target = (self.root / filename).resolve()
        if not target.is_relative_to(self.root) or target == self.root:
            raise OutputError(f'refusing to write {filename!r} outside {self.root}')
        return target

    def _write(self, filename, text):
        target = self.path_for(filename)
        try:
            target.parent.mkdir(parents=True, exist_ok=True)
            with tempfile.NamedTemporaryFile('w', encoding='utf-8', newline='\n', dir=target.parent,
                                             prefix=f'.{target.name}.', delete=False) as handle:
                handle.write(text)
            os.replace(handle.name, target)
        except OSError as exc:
            raise OutputError(f'could not write {target}: {exc}') from exc
        self.written.append(str(target.relative_to(self.root)))
        logger.info('wrote %s', target)
        return target

    def _header(self, metadata):
        merged = {**self.metadata, **metadata}
        return ''.join(f'# {key}={_native(value)}\n' for key, value in merged.items())

    def write_table(self, name, frame, metadata=None):
        metadata = metadata or {}
        if self.format == RunConfig.KV:
            document = {
                'metadata': _native({**self.metadata, **metadata}),
                'columns': _native(frame.to_dict(orient='list')),
            }
            return self._write(f'{name}.yaml', yaml.safe_dump(document, sort_keys=False))
        body = frame.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator='\n')
        return self._write(f'{name}.csv', self._header(metadata) + body)

    def write_record(self, name, record, metadata=None):
        metadata = metadata or {}
        if self.format == RunConfig.KV:
            document = {'metadata': _native({**self.metadata, **metadata}), **_native(record)}
            return self._write(f'{name}.yaml', yaml.safe_dump(document, sort_keys=False))
        frame = pd.DataFrame({'key': list(record), 'value': [_native(v) for v in record.values()]})
        body = frame.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator='\n')
        return self._write(f'{name}.csv', self._header(metadata) + body)

    def write(self, artifact: Artifact):
        if artifact.kind == Artifact.RECORD:
            return self.write_record(artifact.name, artifact.data, artifact.metadata)
        return self.write_table(artifact.name, artifact.data, artifact.metadata)

    def write_manifest(self, manifest: RunManifest):
        data = ManifestSerializer(manifest).data
        rendered = JSONRenderer().render(data, renderer_context={'indent': 2}).decode('utf-8')
        return self._write('manifest.json', rendered + '\n')
