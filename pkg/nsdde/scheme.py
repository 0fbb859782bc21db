"""Tamed and classic Euler-Maruyama steppers for NSDDEs.

Both schemes advance Z_k = Y_k - D(Y_{k-m}) one step at a time:

    Z_{k+1} = Z_k + drift(Y_k, Y_{k-m}) h + sigma(Y_k, Y_{k-m}) dw_k
    Y_{k+1} = Z_{k+1} + D(Y_{k+1-m})

where drift is the tamed b_h = b / (1 + h^alpha |b|) or the raw b.
"""

import enum
import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .exceptions import (
    InvalidArgumentError,
    OutOfRangeError,
    PathDivergedError,
)
from .grid import BrownianDriver, DelayBuffer, TimeGrid, buffer_init
from .systems import InitialSegment, NeutralSystem, hs_norm_sq

logger = logging.getLogger(__name__)

DIVERGENCE_THRESHOLD = 1e150


class SchemeKind(str, enum.Enum):
    TAMED = 'tamed'
    CLASSIC = 'classic'


def _check_alpha(alpha):
    if not 0 < alpha <= 0.5:
        raise InvalidArgumentError(
            f"alpha must lie in (0, 0.5] (tamed drift exponent), got {alpha!r}"
        )


@dataclass(frozen=True)
class SchemeConfig:
    alpha: float = 0.5
    kind: SchemeKind = SchemeKind.TAMED
    divergence_threshold: float = DIVERGENCE_THRESHOLD

    def __post_init__(self):
        _check_alpha(self.alpha)
        object.__setattr__(self, 'kind', SchemeKind(self.kind))


@dataclass(frozen=True)
class PathState:
    k: int
    Y: np.ndarray
    buffer: DelayBuffer
    Z: np.ndarray


@dataclass(frozen=True)
class StepDecomposition:
    M1: float
    M2: float
    M3: float


def tame_drift(b_value, h, alpha):
    if not 0 < h < 1:
        raise InvalidArgumentError(f"h must lie in (0, 1), got {h!r}")
    _check_alpha(alpha)
    b = np.asarray(b_value, dtype=float)
    # finite for any finite b; np.sum(b * b) overflows past ~1e154
    return b / (1.0 + h ** alpha * math.hypot(*b.ravel()))


def elementary_bound(a, b, eps):
    """Right-hand side of |a + b|^2 <= (1 + eps)(|a|^2 + |b|^2 / eps)."""
    if not eps > 0:
        raise InvalidArgumentError(f"eps must be positive, got {eps!r}")
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return (1.0 + eps) * (float(np.sum(a * a)) + float(np.sum(b * b)) / eps)


def initial_state(system: NeutralSystem, segment: InitialSegment,
                  grid: TimeGrid) -> PathState:
    buffer = buffer_init(segment, grid)
    y0 = buffer.lag(0)
    return PathState(k=0, Y=y0, buffer=buffer,
                     Z=y0 - system.neutral(buffer.lag(grid.m)))


def _drift(state, system, grid, config):
    raw = system.drift(state.Y, state.buffer.lag(grid.m))
    if config.kind is SchemeKind.CLASSIC:
        return raw
    return tame_drift(raw, grid.h, config.alpha)


def _advance(state, system, grid, drift, dw, threshold):
    y_lag = state.buffer.lag(grid.m)
    noise = system.diffusion(state.Y, y_lag) @ np.asarray(dw, dtype=float)
    with np.errstate(over='ignore', invalid='ignore'):
        z_next = state.Z + drift * grid.h + noise
        # Y_{k+1-m} is lag m-1 before the push
        y_next = z_next + system.neutral(state.buffer.lag(grid.m - 1))
        size = float(np.max(np.abs(y_next)))
    if not math.isfinite(size) or size > threshold:
        raise PathDivergedError(state.k + 1, size)
    return PathState(k=state.k + 1, Y=y_next,
                     buffer=state.buffer.push(y_next), Z=z_next)


def step_tamed(state: PathState, system: NeutralSystem, grid: TimeGrid,
               config: SchemeConfig, dw) -> PathState:
    drift = tame_drift(system.drift(state.Y, state.buffer.lag(grid.m)),
                       grid.h, config.alpha)
    return _advance(state, system, grid, drift, dw,
                    config.divergence_threshold)


def step_classic(state: PathState, system: NeutralSystem, grid: TimeGrid,
                 dw, threshold=DIVERGENCE_THRESHOLD) -> PathState:
    with np.errstate(over='ignore', invalid='ignore'):
        drift = system.drift(state.Y, state.buffer.lag(grid.m))
    return _advance(state, system, grid, drift, dw, threshold)


def step(state, system, grid, config: SchemeConfig, dw) -> PathState:
    if config.kind is SchemeKind.CLASSIC:
        return step_classic(state, system, grid, dw,
                            config.divergence_threshold)
    return step_tamed(state, system, grid, config, dw)


def decompose_step(state: PathState, system: NeutralSystem, grid: TimeGrid,
                   config: SchemeConfig, dw) -> StepDecomposition:
    """The three martingale-difference terms of one step.

    M3 uses |dw|^2 - h literally; for noise_dim > 1 its mean is
    |sigma|^2 (noise_dim - 1) h rather than 0.
    """
    dw = np.asarray(dw, dtype=float)
    sigma = system.diffusion(state.Y, state.buffer.lag(grid.m))
    noise = sigma @ dw
    drift_step = _drift(state, system, grid, config) * grid.h
    return StepDecomposition(
        M1=2.0 * float(np.dot(state.Z, noise)),
        M2=2.0 * float(np.dot(drift_step, noise)),
        M3=hs_norm_sq(sigma) * (float(np.dot(dw, dw)) - grid.h),
    )


@dataclass
class SimulatedPath:
    values: np.ndarray
    segment_values: np.ndarray
    decompositions: Optional[np.ndarray]
    stream_id: int
    diverged_at: Optional[int] = None

    @property
    def diverged(self) -> bool:
        return self.diverged_at is not None

    @property
    def squared_norms(self) -> np.ndarray:
        return np.sum(self.values * self.values, axis=1)


def simulate_path(system: NeutralSystem, segment: InitialSegment,
                  grid: TimeGrid, config: SchemeConfig,
                  driver: BrownianDriver, strict=False,
                  decompose=True) -> SimulatedPath:
    """Iterate the scheme over Y_0..Y_M.

    A diverging path is truncated before the offending step and its step
    index recorded; with strict=True the PathDivergedError propagates.
    """
    if driver.noise_dim != system.noise_dim:
        raise InvalidArgumentError(
            f"driver noise_dim {driver.noise_dim} does not match system "
            f"noise_dim {system.noise_dim}"
        )
    segment = segment.realize(driver.segment_generator())
    state = initial_state(system, segment, grid)
    segment_values = np.array(state.buffer.entries)
    increments = driver.increments(grid.h, grid.M)

    values = [state.Y]
    parts = [] if decompose else None
    diverged_at = None
    for k in range(grid.M):
        dw = increments[k]
        if decompose:
            d = decompose_step(state, system, grid, config, dw)
            parts.append((d.M1, d.M2, d.M3))
        try:
            state = step(state, system, grid, config, dw)
        except PathDivergedError as exc:
            if strict:
                raise
            diverged_at = exc.step_index
            logger.debug("stream %d diverged at step %d",
                         driver.stream_id, exc.step_index)
            break
        values.append(state.Y)

    decompositions = None
    if decompose:
        decompositions = np.array(parts, dtype=float).reshape(-1, 3)
    return SimulatedPath(
        values=np.array(values),
        segment_values=segment_values,
        decompositions=decompositions,
        stream_id=driver.stream_id,
        diverged_at=diverged_at,
    )


def interpolate(path: SimulatedPath, grid: TimeGrid, s: float) -> np.ndarray:
    """Piecewise-constant Y(s) = Y_{floor(s/h)}; the segment for s < 0."""
    if not -grid.tau <= s <= grid.T:
        raise OutOfRangeError(
            f"s = {s!r} lies outside [-tau, T] = [{-grid.tau!r}, {grid.T!r}]"
        )
    k = math.floor(round(s / grid.h, 9))
    if k < 0:
        return path.segment_values[k + grid.m]
    if k >= len(path.values):
        raise OutOfRangeError(
            f"s = {s!r} lies past the divergence step {path.diverged_at}"
        )
    return path.values[k]


def cumulative_path(system: NeutralSystem, segment: InitialSegment,
                    grid: TimeGrid, config: SchemeConfig, increments,
                    steps=None) -> np.ndarray:
    """Summed form of the scheme over a full history list.

    Y_{k+1} = D(Y_{k+1-m}) + xi(0) - D(xi(-tau))
              + sum_{i<=k} drift(Y_i, Y_{i-m}) h + sum_{i<=k} sigma dw_i
    """
    steps = grid.M if steps is None else steps
    m = grid.m
    history = [segment.value(k * grid.h) for k in range(-m, 1)]
    base = history[m] - system.neutral(history[0])
    drift_sum = np.zeros(system.state_dim)
    noise_sum = np.zeros(system.state_dim)
    for k in range(steps):
        y_k, y_lag = history[k + m], history[k]
        raw = system.drift(y_k, y_lag)
        if config.kind is SchemeKind.TAMED:
            raw = tame_drift(raw, grid.h, config.alpha)
        drift_sum = drift_sum + raw * grid.h
        noise_sum = noise_sum + system.diffusion(y_k, y_lag) @ np.asarray(
            increments[k], dtype=float)
        history.append(system.neutral(history[k + 1]) + base
                       + drift_sum + noise_sum)
    return np.array(history[m:])
