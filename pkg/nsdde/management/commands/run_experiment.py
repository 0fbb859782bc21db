import dataclasses
from pathlib import Path

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError
from django.db import DatabaseError

from config.nsdde_settings import NSDDE_ERROR_MESSAGES, NSDDE_SUCCESS_MESSAGES
from nsdde.exceptions import NSDDEError, OutputWriteError
from nsdde.models import ExperimentRun
from nsdde.serializers import config_as_dict, parse_config
from nsdde.services import run_experiment


class Command(BaseCommand):
    help = (
        'Run a tamed Euler-Maruyama ensemble from a key = value config file '
        'and write moments, exponents, certificate and assumption reports'
    )

    def add_arguments(self, parser):
        parser.add_argument('config_path', type=str,
                            help='UTF-8 experiment config file')
        parser.add_argument(
            '--workers',
            type=int,
            default=settings.NSDDE['WORKERS'],
            help='Worker processes for path simulation'
        )
        parser.add_argument(
            '--strict',
            action='store_true',
            help='Fail when a hypothesis check fails'
        )
        parser.add_argument(
            '--out',
            type=str,
            help='Output directory (overrides out.dir)'
        )

    def handle(self, *args, **options):
        if options['workers'] < 1:
            raise CommandError('--workers must be at least 1')
        config = self._load_config(options['config_path'])
        if options['out']:
            resolved = dict(config.resolved, **{'out.dir': options['out']})
            config = dataclasses.replace(
                config, out_dir=Path(options['out']), resolved=resolved
            )
        strict = options['strict'] or config.strict

        self.stdout.write('🧪 Resolved configuration:')
        for line in config.echo():
            self.stdout.write(f'   {line}')

        try:
            outcome = run_experiment(config, workers=options['workers'],
                                     strict=strict)
        except OutputWriteError as e:
            self._record(config, options, strict, 'failed', str(e))
            raise CommandError(
                f"{NSDDE_ERROR_MESSAGES['io_failed']}: {e}"
            ) from e
        except NSDDEError as e:
            self._record(config, options, strict, 'failed', str(e))
            raise CommandError(str(e)) from e

        for name, path in outcome.files.items():
            self.stdout.write(f'📄 {name}: {path}')
        for failure in outcome.hypothesis_failures:
            self.stdout.write(self.style.WARNING(f'⚠️  {failure}'))
        self._record(config, options, strict, outcome.status,
                     '\n'.join(outcome.messages), outcome)

        if outcome.exit_status:
            raise CommandError('\n'.join(outcome.messages),
                               returncode=outcome.exit_status)
        for message in outcome.messages:
            self.stdout.write(self.style.WARNING(f'⚠️  {message}'))
        self.stdout.write(self.style.SUCCESS(
            f"✅ {NSDDE_SUCCESS_MESSAGES['run_completed']}"
        ))

    def _load_config(self, path):
        try:
            text = Path(path).read_text(encoding='utf-8')
        except (OSError, UnicodeDecodeError) as e:
            raise CommandError(f'Cannot read config {path}: {e}') from e
        try:
            return parse_config(text)
        except NSDDEError as e:
            raise CommandError(
                f"{NSDDE_ERROR_MESSAGES['config_invalid']}: {e}"
            ) from e

    def _record(self, config, options, strict, status, message,
                outcome=None):
        try:
            ExperimentRun.objects.create(
                system_name=config.system.name,
                seed=config.seed,
                path_count=config.N,
                workers=options['workers'],
                strict=strict,
                status=status,
                ms_slope=outcome.ms_slope if outcome else None,
                divergence_count=outcome.divergence_count if outcome else 0,
                out_dir=str(config.out_dir),
                message=message,
                config=config_as_dict(config),
            )
        except DatabaseError as e:
            self.stderr.write(self.style.WARNING(
                f'⚠️  Run ledger not updated: {e}'
            ))
