import csv
import io
import logging
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from django.conf import settings

from config.nsdde_settings import NSDDE_ERROR_MESSAGES, NSDDE_OUTPUT_FILES

from .exceptions import (
    CannotFitError,
    HypothesisViolatedError,
    OutputWriteError,
)
from .serializers import ExperimentConfig
from .systems import (
    InitialSegment,
    SigmaVariant,
    check_coercivity,
    check_contraction,
    check_local_monotonicity,
    check_sigma_condition,
    sample_pairs,
    sample_quads,
)
from .stability import (
    estimate_ms_exponent,
    estimate_second_moment,
    find_decay_base,
    fraction_within_as_bound,
    path_as_exponents,
    recursion_diagnostics,
    segment_moments,
    verify_weighted_bound,
)

logger = logging.getLogger(__name__)

EXIT_SUCCESS = 0
EXIT_DIVERGED = 1
EXIT_HYPOTHESIS_FAILED = 2


def format_float(value) -> str:
    """Fixed 17-significant-digit rendering used in every output file."""
    return format(float(value), settings.NSDDE['CSV_FLOAT_FORMAT'])


def atomic_write(path: Path, text: str):
    """Write text under a temporary name in the same directory, then rename."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
        try:
            with os.fdopen(fd, 'w', encoding='utf-8', newline='') as f:
                f.write(text)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
    except OSError as e:
        raise OutputWriteError(path, e.strerror or str(e)) from e
    return path


def _csv_text(header, rows):
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(header)
    writer.writerows(rows)
    return buffer.getvalue()


def moments_csv(traj) -> str:
    rows = [
        (k, format_float(t), format_float(mean), format_float(err))
        for k, (t, mean, err) in enumerate(
            zip(traj.times, traj.moments, traj.std_errors))
    ]
    return _csv_text(('step', 'k_times_h', 'mean_sq', 'std_err'), rows)


def exponents_csv(estimate, as_exponents, within, as_tail) -> str:
    if estimate is None:
        ms = (math.nan, math.nan, math.nan)
    else:
        ms = (estimate.slope, estimate.ci_low, estimate.ci_high)
    if as_exponents.size:
        quantiles = np.quantile(as_exponents, [0.05, 0.5, 0.95])
    else:
        quantiles = (math.nan,) * 3
    row = [format_float(v) for v in (*ms, *quantiles, as_tail, within)]
    return _csv_text(
        ('ms_slope', 'ms_ci_lo', 'ms_ci_hi', 'as_q05', 'as_q50', 'as_q95',
         'as_tail', 'as_fraction_within'),
        [row],
    )


@dataclass
class ExperimentOutcome:
    exit_status: int
    status: str
    files: dict = field(default_factory=dict)
    messages: list = field(default_factory=list)
    ms_slope: Optional[float] = None
    divergence_count: int = 0
    hypothesis_failures: list = field(default_factory=list)


def check_assumptions(system, config: ExperimentConfig):
    """Run every checker on the default samples; returns (reports, K_tilde, kappa)."""
    opts = settings.NSDDE
    n = system.state_dim
    pairs = sample_pairs(n, opts['CHECK_SAMPLES'], opts['CHECK_RADIUS'],
                         opts['CHECK_SEED'])
    quads = sample_quads(n, opts['CHECK_SAMPLES'], opts['CHECK_RADIUS'],
                         opts['CHECK_SEED'])

    contraction = check_contraction(system.D, pairs, opts['TOLERANCE'])
    kappa = config.kappa
    if kappa is None:
        kappa = contraction.estimated_constant

    K_tilde = config.K_tilde
    if K_tilde is None:
        first_pass = check_coercivity(system, 1.0, pairs)
        K_tilde = max(first_pass.estimated_constant, opts['TOLERANCE'])
    coercivity = check_coercivity(system, K_tilde, pairs)

    monotonicity = check_local_monotonicity(system, opts['CHECK_RADIUS'],
                                            quads)
    sigma_reports = [
        check_sigma_condition(system, config.params, config.grid.h, variant,
                              pairs)
        for variant in SigmaVariant
    ]
    reports = [coercivity, contraction, monotonicity, *sigma_reports]
    return reports, K_tilde, kappa


def _certificate_lines(config, K_tilde, kappa, cert, cert_error, weighted,
                       recursion, reports):
    f = format_float
    p = config.params
    lines = [
        f"kappa: {f(kappa)}",
        f"K_tilde: {f(K_tilde)}",
        f"lambda1: {f(p.lambda1)}",
        f"lambda2: {f(p.lambda2)}",
        f"lambda3: {f(p.lambda3)}",
        f"tau: {f(config.grid.tau)}",
        f"h: {f(config.grid.h)}",
        f"hypothesis.lambda1_gt_2: {p.lambda1 > 2}",
        f"hypothesis.lambda2_gt_lambda3_gt_0: {p.lambda2 > p.lambda3 > 0}",
        f"hypothesis.lambda2_gt_lambda3_plus_4K_tilde: "
        f"{p.lambda2 > p.lambda3 + 4 * K_tilde}",
    ]
    if cert is None:
        lines += [
            f"f_at_one: {f(cert_error.f_at_one)}",
            f"certificate: unavailable ({cert_error})",
        ]
    else:
        lines += [
            f"f_at_one: {f(cert.f_at_one)}",
            f"C_bar: {f(cert.C_bar)}",
            f"C: {f(cert.C)}",
            f"ms_rate: {f(cert.ms_rate)}",
            f"as_rate: {f(cert.as_rate)}",
        ]
    if weighted is not None:
        lines += [
            f"empirical_K_bar: {f(weighted.empirical_K_bar)}",
            f"weighted_bound.trend_slope: {f(weighted.trend_slope)}",
            f"weighted_bound.positive_trend: {weighted.positive_trend}",
            f"literal_display_rate: {f(weighted.literal_display_rate)}",
        ]
    if recursion is not None:
        lines += [
            f"recursion.c1: {f(recursion.c1)}",
            f"recursion.c2: {f(recursion.c2)}",
            f"recursion.final_moment_bound: "
            f"{f(recursion.moment_bounds[-1])}",
        ]
    for report in reports:
        label = report.assumption_id.value
        if report.variant is not None:
            label = f"{label}[{report.variant.value}]"
        lines.append(f"check.{label}: {report.holds_on_sample}")
    return lines


def run_experiment(config: ExperimentConfig, workers=1,
                   strict=None) -> ExperimentOutcome:
    """Simulate the ensemble and write moments, exponents, certificate and
    assumption reports into config.out_dir."""
    strict = config.strict if strict is None else strict
    opts = settings.NSDDE
    out = Path(config.out_dir)
    grid = config.grid
    system = config.system.build()
    segment = InitialSegment.constant(grid.tau, config.segment_value)
    outcome = ExperimentOutcome(exit_status=EXIT_SUCCESS, status='success')

    reports, K_tilde, kappa = check_assumptions(system, config)

    cert, cert_error = None, None
    try:
        cert = find_decay_base(kappa, grid.tau, config.params.lambda2,
                               config.params.lambda3, K_tilde, grid.h)
    except HypothesisViolatedError as e:
        cert_error = e
        outcome.hypothesis_failures.append(f"certificate: {e}")

    for report in reports:
        if not report.holds_on_sample:
            label = report.assumption_id.value
            if report.variant is not None:
                label = f"{label}[{report.variant.value}]"
            outcome.hypothesis_failures.append(
                f"{label}: {report.violation_count} sampled violations"
            )

    logger.info("simulating %d paths of %s (%s, M=%d)", config.N,
                system.name, config.scheme.kind.value, grid.M)
    traj = estimate_second_moment(system, segment, grid, config.scheme,
                                  config.seed, config.N, workers=workers)
    outcome.divergence_count = traj.divergence_count
    files = outcome.files
    files['moments'] = atomic_write(out / NSDDE_OUTPUT_FILES['moments'],
                                    moments_csv(traj))

    estimate = None
    try:
        estimate = estimate_ms_exponent(
            traj, config.window_fraction,
            resamples=opts['BOOTSTRAP_RESAMPLES'],
            bootstrap_seed=opts['BOOTSTRAP_SEED'],
        )
        outcome.ms_slope = estimate.slope
    except CannotFitError as e:
        outcome.messages.append(f"mean-square exponent unavailable: {e}")

    as_exponents = np.array([])
    within = math.nan
    if len(traj.times) >= 2:
        as_exponents = path_as_exponents(traj, config.as_tail_fraction)
        if estimate is not None:
            within = fraction_within_as_bound(as_exponents, estimate.slope,
                                              opts['AS_MARGIN'])
    files['exponents'] = atomic_write(
        out / NSDDE_OUTPUT_FILES['exponents'],
        exponents_csv(estimate, as_exponents, within,
                      config.as_tail_fraction),
    )

    weighted, recursion = None, None
    if cert is not None:
        weighted = verify_weighted_bound(traj, cert)
        seg_moments, z0 = segment_moments(segment, grid, system)
        recursion = recursion_diagnostics(cert, seg_moments, grid, z0)
    files['certificate'] = atomic_write(
        out / NSDDE_OUTPUT_FILES['certificate'],
        '\n'.join(_certificate_lines(config, K_tilde, kappa, cert,
                                     cert_error, weighted, recursion,
                                     reports)) + '\n',
    )
    files['assumptions'] = atomic_write(
        out / NSDDE_OUTPUT_FILES['assumptions'],
        '\n'.join(line for r in reports for line in r.summary_lines()) + '\n',
    )

    if traj.divergence_count:
        outcome.exit_status = EXIT_DIVERGED
        outcome.status = 'diverged'
        outcome.messages.insert(0, (
            f"{NSDDE_ERROR_MESSAGES['diverged']}: {traj.divergence_count} "
            f"of {config.N} paths, first at step {traj.first_divergence_step}"
        ))
    elif strict and outcome.hypothesis_failures:
        outcome.exit_status = EXIT_HYPOTHESIS_FAILED
        outcome.status = 'hypothesis_failed'
        outcome.messages.insert(0, (
            f"{NSDDE_ERROR_MESSAGES['hypothesis_failed']}: "
            + '; '.join(outcome.hypothesis_failures)
        ))
    return outcome
