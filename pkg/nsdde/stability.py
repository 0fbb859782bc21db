"""Moment ensembles, exponent estimators and the decay-base certificate.

The limsup in the stability definitions is not finitely computable, so
the mean-square exponent is a regression slope of log E|Y_k|^2 over the
final part of the horizon and the pathwise exponent is a tail-window
maximum of log|Y_k| / kh.
"""

import concurrent.futures
import logging
import math
import multiprocessing
import os
import pickle
from concurrent.futures.process import BrokenProcessPool
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import optimize, stats

from .exceptions import (
    CannotFitError,
    HypothesisViolatedError,
    InvalidArgumentError,
)
from .grid import BrownianDriver, TimeGrid
from .scheme import SchemeConfig, simulate_path
from .systems import InitialSegment, NeutralSystem

logger = logging.getLogger(__name__)

MIN_FIT_POINTS = 10
ROOT_TOLERANCE = 1e-10
BRACKET_WIDTH = 1e-12
BOOTSTRAP_RESAMPLES = 1000
BOOTSTRAP_SEED = 20240601
AS_TAIL_FRACTION = 0.01

# local callables fail with AttributeError before Python 3.14
PICKLING_ERRORS = (pickle.PicklingError, AttributeError, TypeError)


@dataclass
class MomentTrajectory:
    times: np.ndarray
    moments: np.ndarray
    std_errors: np.ndarray
    path_count: int
    # per-path |Y_k|^2, shape (path_count, len(times)); None for synthetic input
    samples: Optional[np.ndarray] = None
    divergence_count: int = 0
    first_divergence_step: Optional[int] = None

    @classmethod
    def from_moments(cls, times, moments, path_count=1):
        moments = np.asarray(moments, dtype=float)
        return cls(times=np.asarray(times, dtype=float), moments=moments,
                   std_errors=np.zeros_like(moments), path_count=path_count)

    @property
    def h(self) -> float:
        return float(self.times[1] - self.times[0])


@dataclass(frozen=True)
class ExponentEstimate:
    slope: float
    ci_low: float
    ci_high: float
    points: int


@dataclass(frozen=True)
class StabilityCertificate:
    kappa: float
    K_tilde: float
    lambda2: float
    lambda3: float
    tau: float
    h: float
    f_at_one: float
    C_bar: float
    C: float
    ms_rate: float
    as_rate: float

    @property
    def hypothesis_gap(self) -> float:
        """lambda2 - lambda3 - 4 K_tilde; positive exactly when f(1) < 0."""
        return self.lambda2 - self.lambda3 - 4.0 * self.K_tilde


@dataclass(frozen=True)
class WeightedBoundReport:
    weights: np.ndarray
    empirical_K_bar: float
    trend_slope: float
    trend_lower: float
    positive_trend: bool
    literal_display_rate: float


@dataclass(frozen=True)
class RecursionDiagnostics:
    c1: float
    c2: float
    weighted_bounds: np.ndarray
    moment_bounds: np.ndarray


def _simulate_chunk(system, segment, grid, config, seed, stream_ids):
    results = []
    for stream_id in stream_ids:
        driver = BrownianDriver(seed=seed, stream_id=stream_id,
                                noise_dim=system.noise_dim)
        path = simulate_path(system, segment, grid, config, driver,
                             decompose=False)
        results.append((stream_id, path.squared_norms, path.diverged_at))
    return results


def _default_start_method():
    methods = multiprocessing.get_all_start_methods()
    if os.name == 'posix' and 'fork' in methods:
        return 'fork'
    return 'spawn' if 'spawn' in methods else methods[0]


def _chunks(count, pieces):
    size = max(1, math.ceil(count / pieces))
    return [range(start, min(start + size, count))
            for start in range(0, count, size)]


def _picklable(args):
    try:
        pickle.dumps(args)
    except PICKLING_ERRORS as exc:
        logger.warning("ensemble arguments cannot be sent to worker processes "
                       "(%s); running serially", exc)
        return False
    return True


def _run_chunks_parallel(chunks, args, workers):
    context = multiprocessing.get_context(_default_start_method())
    results = {}
    with concurrent.futures.ProcessPoolExecutor(
        max_workers=workers, mp_context=context,
    ) as executor:
        futures = {
            executor.submit(_simulate_chunk, *args, list(chunk)): i
            for i, chunk in enumerate(chunks)
        }
        for future in concurrent.futures.as_completed(futures):
            results[futures[future]] = future.result()
    return [row for i in sorted(results) for row in results[i]]


def estimate_second_moment(system: NeutralSystem, segment: InitialSegment,
                           grid: TimeGrid, config: SchemeConfig, seed: int,
                           N: int, workers: int = 1) -> MomentTrajectory:
    """Ensemble estimate of E|Y_k|^2 over N paths with stream ids 0..N-1.

    Rows are reduced in stream-id order, so the result does not depend on
    the worker count or on scheduling.
    """
    if N < 2:
        raise InvalidArgumentError(f"path count must be >= 2, got {N}")
    args = (system, segment, grid, config, seed)
    workers = max(1, min(int(workers), N))
    if workers > 1 and _picklable(args):
        chunks = _chunks(N, workers * 4)
        try:
            rows = _run_chunks_parallel(chunks, args, workers)
        except BrokenProcessPool as exc:
            logger.warning("process pool broke (%s); running serially", exc)
            rows = _simulate_chunk(*args, range(N))
    else:
        rows = _simulate_chunk(*args, range(N))
    rows.sort(key=lambda row: row[0])

    diverged = [d for _, _, d in rows if d is not None]
    length = grid.M + 1
    first = None
    if diverged:
        first = min(diverged)
        length = first
        logger.warning("%d of %d paths diverged; first at step %d",
                       len(diverged), N, first)

    samples = np.vstack([sq[:length] for _, sq, _ in rows])
    moments = samples.mean(axis=0)
    std_errors = samples.std(axis=0, ddof=1) / math.sqrt(N)
    return MomentTrajectory(
        times=grid.times[:length],
        moments=moments,
        std_errors=std_errors,
        path_count=N,
        samples=samples,
        divergence_count=len(diverged),
        first_divergence_step=first,
    )


def _window_mask(times, fraction):
    if not 0 < fraction <= 1:
        raise InvalidArgumentError(
            f"window fraction must lie in (0, 1], got {fraction!r}"
        )
    start = times[0] + (1.0 - fraction) * (times[-1] - times[0])
    return times >= start - 1e-9 * max(abs(times[-1]), 1.0)


def _slopes(t, log_values):
    """Least-squares slopes of each row of log_values against t."""
    centred = t - t.mean()
    return (log_values - log_values.mean(axis=-1, keepdims=True)) @ centred / (
        centred @ centred)


def estimate_ms_exponent(traj: MomentTrajectory, window_fraction=0.5,
                         resamples=BOOTSTRAP_RESAMPLES,
                         bootstrap_seed=BOOTSTRAP_SEED,
                         confidence=0.95) -> ExponentEstimate:
    """Slope of log E|Y_k|^2 against kh over the final window, with a
    bootstrap confidence interval over resampled paths."""
    if len(traj.times) < 2:
        raise CannotFitError("trajectory has fewer than two points")
    mask = _window_mask(traj.times, window_fraction)
    t = traj.times[mask]
    window = traj.moments[mask]
    if t.size < MIN_FIT_POINTS:
        raise CannotFitError(
            f"only {t.size} points in the fit window; need {MIN_FIT_POINTS}"
        )
    if np.any(window <= 0):
        raise CannotFitError("zero or negative moment in the fit window")

    slope = float(_slopes(t, np.log(window)))
    if traj.samples is None or resamples < 1:
        return ExponentEstimate(slope, slope, slope, int(t.size))

    rng = np.random.default_rng(bootstrap_seed)
    rows = traj.samples[:, mask]
    n = rows.shape[0]
    boot = []
    for _ in range(resamples):
        means = rows[rng.integers(0, n, n)].mean(axis=0)
        if np.all(means > 0):
            boot.append(np.log(means))
    if not boot:
        raise CannotFitError("no bootstrap resample had positive moments")
    boot_slopes = _slopes(t, np.array(boot))
    tail = 50.0 * (1.0 - confidence)
    low, high = np.percentile(boot_slopes, [tail, 100.0 - tail])
    return ExponentEstimate(slope, float(low), float(high), int(t.size))


def eval_f(x, kappa, tau, lambda2, lambda3, K_tilde, h) -> float:
    """f(x) = (1+x^tau)(x-1)(1+kappa^2)
              + (-lambda2 + x^tau lambda3 + 2 K_tilde (1+x^tau)) h"""
    xt = x ** tau
    return ((1 + xt) * (x - 1) * (1 + kappa ** 2)
            + (-lambda2 + xt * lambda3 + 2 * K_tilde * (1 + xt)) * h)


def find_decay_base(kappa, tau, lambda2, lambda3, K_tilde,
                    h) -> StabilityCertificate:
    """Root C_bar > 1 of f by bisection, and the decay base C = (1+C_bar)/2."""
    if not 0 < h < 1:
        raise InvalidArgumentError(f"h must lie in (0, 1), got {h!r}")

    def f(x):
        return eval_f(x, kappa, tau, lambda2, lambda3, K_tilde, h)

    f_at_one = f(1.0)
    if f_at_one >= 0:
        raise HypothesisViolatedError(
            f_at_one, lambda2 - lambda3 - 4.0 * K_tilde
        )

    x_hi = 2.0
    while f(x_hi) <= 0:
        x_hi *= 2.0
        if x_hi > 2.0 ** 64:
            raise CannotFitError("could not bracket the root of f")
    C_bar = optimize.bisect(f, 1.0, x_hi, xtol=BRACKET_WIDTH, maxiter=500)
    residual = f(C_bar)
    if abs(residual) > ROOT_TOLERANCE:
        logger.warning("f(C_bar) = %r exceeds the root tolerance", residual)

    C = 0.5 * (1.0 + C_bar)
    ms_rate = -math.log(C)
    logger.info("decay base C_bar=%r C=%r ms_rate=%r", C_bar, C, ms_rate)
    return StabilityCertificate(
        kappa=kappa, K_tilde=K_tilde, lambda2=lambda2, lambda3=lambda3,
        tau=tau, h=h, f_at_one=f_at_one, C_bar=C_bar, C=C,
        ms_rate=ms_rate, as_rate=ms_rate / 2.0,
    )


def sign_changes(values) -> int:
    signs = np.sign(np.asarray(values, dtype=float))
    signs = signs[signs != 0]
    return int(np.count_nonzero(signs[1:] != signs[:-1]))


def verify_weighted_bound(traj: MomentTrajectory,
                          cert: StabilityCertificate,
                          confidence=0.95) -> WeightedBoundReport:
    """w_k = C^{kh} E|Y_k|^2: its supremum and a one-sided growth test."""
    if len(traj.times) > 1 and not math.isclose(traj.h, cert.h,
                                                rel_tol=1e-9):
        raise InvalidArgumentError(
            f"trajectory step {traj.h!r} differs from certificate h {cert.h!r}"
        )
    weights = cert.C ** traj.times * traj.moments
    k_bar = float(np.max(weights))

    slope, lower = 0.0, 0.0
    positive = False
    if weights.size >= 3:
        fit = stats.linregress(np.arange(weights.size), weights)
        slope = float(fit.slope)
        t_crit = stats.t.ppf(confidence, weights.size - 2)
        lower = slope - t_crit * float(fit.stderr)
        positive = lower > 1e-12 * max(k_bar, 1e-300)

    literal = -math.log(cert.C) * math.log(k_bar) if k_bar > 0 else math.nan
    return WeightedBoundReport(
        weights=weights,
        empirical_K_bar=k_bar,
        trend_slope=slope,
        trend_lower=lower,
        positive_trend=positive,
        literal_display_rate=literal,
    )


def tail_exponents(norms, h, tail_fraction=AS_TAIL_FRACTION) -> np.ndarray:
    """max over the tail window of log|Y_k| / kh, one value per row.

    The window is the final tail_fraction of the steps (at least the last
    one) and is set apart from the mean-square fit window: the maximum
    over a long window sits above the pathwise exponent. Rows with
    |Y_k| = 0 inside the window give -inf.
    """
    norms = np.atleast_2d(np.asarray(norms, dtype=float))
    if not 0 < tail_fraction <= 1:
        raise InvalidArgumentError(
            f"tail fraction must lie in (0, 1], got {tail_fraction!r}"
        )
    last = norms.shape[1] - 1
    if last < 1:
        raise CannotFitError("path has no steps after k = 0")
    first = max(1, math.ceil((1.0 - tail_fraction) * last))
    k = np.arange(first, last + 1)
    window = norms[:, first:]
    with np.errstate(divide='ignore'):
        exponents = np.max(np.log(window) / (k * h), axis=1)
    exponents[np.any(window == 0.0, axis=1)] = -math.inf
    return exponents


def estimate_as_exponent(path, grid: TimeGrid,
                         tail_fraction=AS_TAIL_FRACTION) -> float:
    values = getattr(path, 'values', path)
    norms = np.linalg.norm(np.atleast_2d(np.asarray(values, dtype=float)),
                           axis=-1)
    return float(tail_exponents(norms, grid.h, tail_fraction)[0])


def path_as_exponents(traj: MomentTrajectory,
                      tail_fraction=AS_TAIL_FRACTION):
    if traj.samples is None:
        raise InvalidArgumentError("trajectory carries no per-path samples")
    return tail_exponents(np.sqrt(traj.samples), traj.h, tail_fraction)


def fraction_within_as_bound(exponents, ms_slope, margin=0.1) -> float:
    exponents = np.asarray(exponents, dtype=float)
    return float(np.mean(exponents <= ms_slope / 2.0 + margin))


def segment_moments(segment: InitialSegment, grid: TimeGrid,
                    system: NeutralSystem, seed=0, count=1):
    """E|xi(ih)|^2 for i = -m..0 and E|Z_0|^2 = E|xi(0) - D(xi(-tau))|^2.

    Random segments are averaged over the realizations the ensemble uses.
    """
    realizations = [segment]
    if segment.is_random:
        realizations = [
            segment.realize(BrownianDriver(seed, i).segment_generator())
            for i in range(count)
        ]
    offsets = grid.offsets
    moments = np.zeros(grid.m + 1)
    z0 = 0.0
    for seg in realizations:
        values = [seg.value(theta) for theta in offsets]
        moments += [float(v @ v) for v in values]
        z = values[-1] - system.neutral(values[0])
        z0 += float(z @ z)
    return moments / len(realizations), z0 / len(realizations)


def recursion_diagnostics(cert: StabilityCertificate, segment_moments,
                          grid: TimeGrid, z0_moment=None) -> RecursionDiagnostics:
    """c1, c2 and the unrolled bound a_{k+1} <= c1 sum c2^i + c2^{q+1} E|xi|^2.

    Without z0_moment, E|Z_0|^2 is bounded by (1+kappa^2)(E|xi(0)|^2 +
    E|xi(-tau)|^2). The bound is reported as computed; c2 > 1 whenever
    C > 1 so it need not stay bounded in k.
    """
    seg = np.asarray(segment_moments, dtype=float)
    m, h = grid.m, grid.h
    if seg.size != m + 1:
        raise InvalidArgumentError(
            f"expected {m + 1} segment moments, got {seg.size}"
        )
    k2 = 1.0 + cert.kappa ** 2
    C = cert.C
    if z0_moment is None:
        z0_moment = k2 * (seg[m] + seg[0])

    i = np.arange(-m, 0)
    weights = ((C ** ((i + 1) * h) - C ** (i * h)) * k2
               + C ** ((i + 1) * h) * (cert.lambda3 + 2 * cert.K_tilde) * h)
    c1 = k2 * (z0_moment + C ** cert.tau * float(weights @ seg[:m]))
    c2 = k2 * C ** cert.tau

    j = np.arange(1, grid.M + 1)
    q = j // m
    geometric = np.array([np.sum(c2 ** np.arange(n + 1)) for n in q])
    weighted = c1 * geometric + c2 ** (q + 1) * seg[j - q * m]
    return RecursionDiagnostics(
        c1=c1, c2=c2, weighted_bounds=weighted,
        moment_bounds=weighted / C ** (j * h),
    )
