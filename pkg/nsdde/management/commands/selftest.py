from django.core.management.base import BaseCommand, CommandError

from config.nsdde_settings import NSDDE_SUCCESS_MESSAGES
from nsdde.selftest import run_selftest


class Command(BaseCommand):
    help = 'Run the numerical property suites and print pass/fail per suite'

    def add_arguments(self, parser):
        parser.add_argument(
            '--alpha',
            type=float,
            help='Taming exponent to test instead of the scheme default'
        )
        parser.add_argument('--seed', type=int, default=0)

    def handle(self, *args, **options):
        self.stdout.write('🧪 Running property suites...')
        report = run_selftest(alpha=options['alpha'], seed=options['seed'])
        self.stdout.write(report.text(), ending='')
        if not report.passed:
            names = ', '.join(r.name for r in report.failures)
            raise CommandError(f'Failed suites: {names}')
        self.stdout.write(self.style.SUCCESS(
            f"✅ {NSDDE_SUCCESS_MESSAGES['selftest_passed']}"
        ))
