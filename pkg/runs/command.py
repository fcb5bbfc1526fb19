import logging

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from errors import AtomLensError, ConfigError, NumericalError, OutputError
from .models import RunConfig, RunManifest
from .services import OutputDirectory, artifact_versions, load_run_config

logger = logging.getLogger(__name__)


class RunCommand(BaseCommand):
    """Shared flow of every subcommand: validate, compute, then write.

    Subclasses set ``required_sections`` and implement ``compute`` returning the
    artifacts to write. Nothing touches the output directory until ``compute`` has
    returned.
    """

    required_sections = ()

    def add_arguments(self, parser):
        parser.add_argument('--config', default=settings.DEFAULT_CONFIG, help='YAML run configuration')
        parser.add_argument('--seed', type=int, help='Override the configured seed')
        parser.add_argument('--out', help='Override the output directory')
        parser.add_argument('--format', choices=[key for key, _ in RunConfig.FORMAT_CHOICES],
                            help='Table format')
        self.add_command_arguments(parser)

    def add_command_arguments(self, parser):
        pass

    def config_overrides(self, options):
        """Command-line values merged into the YAML before validation."""
        return {}

    def validate_options(self, config, options):
        pass

    def compute(self, config, options):
        raise NotImplementedError

    def handle(self, *args, **options):
        try:
            overrides = {
                'seed': options['seed'],
                'output_dir': options['out'],
                'format': options['format'],
                **self.config_overrides(options),
            }
            config = load_run_config(options['config'], overrides)
            config.require(*self.required_sections)
            self.validate_options(config, options)

            artifacts = self.compute(config, options)

            output = OutputDirectory(
                config.output_dir,
                fmt=config.format,
                metadata={'config_hash': config.config_hash, 'seed': config.seed},
            )
            for artifact in artifacts:
                output.write(artifact)
            output.write_manifest(RunManifest(
                command=self.command_name,
                config_hash=config.config_hash,
                seed=config.seed,
                versions=artifact_versions(),
                line_table_version=config.lines.version if config.lines is not None else '',
                files=tuple(output.written),
            ))
        except ConfigError as exc:
            raise CommandError(f'configuration error: {exc}', returncode=exc.exit_status) from exc
        except NumericalError as exc:
            raise CommandError(f'numerical failure: {exc}', returncode=exc.exit_status) from exc
        except (OutputError, OSError) as exc:
            raise CommandError(f'output error: {exc}', returncode=OutputError.exit_status) from exc
        except AtomLensError as exc:
            raise CommandError(str(exc), returncode=1) from exc

    @property
    def command_name(self):
        return self.__module__.rsplit('.', 1)[-1]
