"""
Tamed NSDDE Experiment Configuration Settings

Defaults for the experiment runner and the assumption checkers.
Environment overrides are applied in settings.py.
"""

NSDDE_DEFAULT_SETTINGS = {
    # Scheme
    'ALPHA': 0.5,
    'DIVERGENCE_THRESHOLD': 1e150,

    # Ensemble
    'PATH_COUNT': 1000,
    'SEED': 0,
    'WORKERS': 1,

    # Exponent estimation
    'WINDOW_FRACTION': 0.5,
    'AS_TAIL_FRACTION': 0.01,
    'AS_MARGIN': 0.1,
    'BOOTSTRAP_RESAMPLES': 1000,
    'BOOTSTRAP_SEED': 20240601,

    # Assumption checkers
    'CHECK_RADIUS': 10.0,
    'CHECK_SAMPLES': 10_000,
    'CHECK_SEED': 12345,
    'TOLERANCE': 1e-9,

    # Stability condition defaults
    'LAMBDA1': 3.0,
    'LAMBDA2': 1.0,
    'LAMBDA3': 0.1,

    # Output
    'DEFAULT_OUT_DIR': 'results',
    'CSV_FLOAT_FORMAT': '.16e',

    # Logging
    'LOG_LEVEL': 'INFO',
}

# Output files written by run_experiment
NSDDE_OUTPUT_FILES = {
    'moments': 'moments.csv',
    'exponents': 'exponents.csv',
    'certificate': 'certificate.txt',
    'assumptions': 'assumptions.txt',
}

# Messages
NSDDE_ERROR_MESSAGES = {
    'diverged': 'Path ensemble diverged',
    'hypothesis_failed': 'Stability hypothesis check failed',
    'io_failed': 'Could not write output file',
    'config_invalid': 'Invalid experiment configuration',
}

NSDDE_SUCCESS_MESSAGES = {
    'run_completed': 'Experiment completed',
    'selftest_passed': 'All self-test suites passed',
}
