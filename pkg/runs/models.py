from dataclasses import dataclass, field
from pathlib import Path

from errors import ConfigError


@dataclass(frozen=True)
class RunConfig:
    """Validated run configuration: one domain object per configured section."""

    DSV = 'dsv'
    KV = 'kv'

    FORMAT_CHOICES = [
        (DSV, 'Comma-separated values behind a # metadata header'),
        (KV, 'Structured key-value (YAML)'),
    ]

    SECTIONS = ['beam', 'scan', 'lines', 'fort', 'spectrum', 'losses', 'drive', 'g2', 'sequence']

    seed: int
    output_dir: Path
    format: str = DSV
    config_hash: str = ''
    path: Path = None
    beam: object = None
    scan: object = None
    lines: object = None
    fort: object = None
    spectrum: object = None
    losses: object = None
    drive: object = None
    g2: object = None
    sequence: object = None

    def require(self, *names):
        missing = [name for name in names if getattr(self, name) is None]
        if missing:
            where = f' in {self.path}' if self.path else ''
            raise ConfigError(f'missing configuration section(s) {", ".join(missing)}{where}')


@dataclass(frozen=True)
class Artifact:
    """One output file before it is written: a table or a flat record."""

    TABLE = 'table'
    RECORD = 'record'

    name: str
    data: object
    kind: str = TABLE
    metadata: dict = field(default_factory=dict)


@dataclass(frozen=True)
class RunManifest:
    command: str
    config_hash: str
    seed: int
    versions: dict
    line_table_version: str = ''
    files: tuple = ()
