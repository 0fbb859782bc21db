"""Time grid, Brownian increments and the delay-lag buffer.

The grid ties the step size to both the delay and the horizon,
h = tau/m = T/M, so that Y_{k-m} always falls on a stored grid point.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from .exceptions import (
    GridIncompatibleError,
    InvalidArgumentError,
    StepTooLargeError,
)

logger = logging.getLogger(__name__)

GRID_RELATIVE_TOLERANCE = 1e-9


@dataclass(frozen=True)
class TimeGrid:
    tau: float
    T: float
    m: int
    M: int
    h: float

    @property
    def times(self) -> np.ndarray:
        """Grid times kh for k = 0..M."""
        return np.arange(self.M + 1) * self.h

    @property
    def offsets(self) -> np.ndarray:
        """Initial-segment offsets kh for k = -m..0."""
        return np.arange(-self.m, 1) * self.h


def make_grid(tau: float, T: float, m: int) -> TimeGrid:
    if not tau > 0:
        raise InvalidArgumentError(f"tau must be positive, got {tau!r}")
    if not T > tau:
        raise InvalidArgumentError(
            f"T must exceed tau (T={T!r}, tau={tau!r})"
        )
    if int(m) != m or m < 1:
        raise InvalidArgumentError(f"m must be a positive integer, got {m!r}")
    m = int(m)

    h = tau / m
    if not 0 < h < 1:
        raise StepTooLargeError(
            f"step size h = tau/m = {h!r} must lie in (0, 1)"
        )

    ratio = T / h
    M = round(ratio)
    if M < 1 or abs(ratio - M) > GRID_RELATIVE_TOLERANCE * ratio:
        raise GridIncompatibleError(
            f"grid incompatibility: T/h = {T!r}/{h!r} = {ratio!r} "
            f"is not an integer"
        )
    logger.debug("grid tau=%s T=%s m=%d M=%d h=%s", tau, T, m, M, h)
    return TimeGrid(tau=float(tau), T=float(T), m=m, M=int(M), h=h)


@dataclass(frozen=True)
class BrownianDriver:
    """Reproducible Wiener increments for one path.

    The stream for (seed, stream_id) is a Philox counter-based generator
    keyed through SeedSequence spawn keys, so every path can be
    regenerated on its own, in any order, on any worker.
    """

    seed: int
    stream_id: int
    noise_dim: int = 1

    def _seed_sequence(self, *extra) -> np.random.SeedSequence:
        return np.random.SeedSequence(
            self.seed, spawn_key=(self.stream_id, *extra)
        )

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(self._seed_sequence()))

    def segment_generator(self) -> np.random.Generator:
        """Independent stream for drawing a random initial segment."""
        return np.random.Generator(np.random.Philox(self._seed_sequence(1)))

    def increments(self, h: float, count: int) -> np.ndarray:
        """Rows 0..count-1 of the increment sequence, shape (count, noise_dim).

        Row k is the same whatever count is requested.
        """
        if count < 0:
            raise InvalidArgumentError(f"count must be >= 0, got {count}")
        normals = self.generator().standard_normal((count, self.noise_dim))
        return math.sqrt(h) * normals


def sample_increment(driver: BrownianDriver, step_index: int,
                     h: float) -> np.ndarray:
    if step_index < 0:
        raise InvalidArgumentError(
            f"step_index must be >= 0, got {step_index}"
        )
    return driver.increments(h, step_index + 1)[step_index]


class DelayBuffer:
    """The last m+1 states Y_{k-m}, ..., Y_k with head index k.

    Instances are treated as values: push returns a new buffer.
    """

    __slots__ = ('capacity', 'entries', 'head_index')

    def __init__(self, entries, head_index: int = 0):
        self.entries = tuple(np.asarray(e, dtype=float) for e in entries)
        self.capacity = len(self.entries)
        self.head_index = head_index

    @property
    def m(self) -> int:
        return self.capacity - 1

    def push(self, value) -> 'DelayBuffer':
        buf = DelayBuffer.__new__(DelayBuffer)
        buf.entries = self.entries[1:] + (np.asarray(value, dtype=float),)
        buf.capacity = self.capacity
        buf.head_index = self.head_index + 1
        return buf

    def lag(self, lag: int) -> np.ndarray:
        """Y_{k-lag} for lag in 0..m."""
        if not 0 <= lag <= self.m:
            raise InvalidArgumentError(
                f"lag must lie in 0..{self.m}, got {lag}"
            )
        return self.entries[self.m - lag]

    def lookup(self, j: int) -> np.ndarray:
        """Y_j for j in k-m..k."""
        return self.lag(self.head_index - j)

    def __repr__(self):
        return f"DelayBuffer(m={self.m}, head_index={self.head_index})"


def buffer_init(segment, grid: TimeGrid) -> DelayBuffer:
    """Fill Y_{-m}, ..., Y_0 from a deterministic initial segment."""
    if segment.is_random:
        raise InvalidArgumentError(
            "random initial segment must be realized before buffer_init"
        )
    if not math.isclose(segment.tau, grid.tau, rel_tol=GRID_RELATIVE_TOLERANCE):
        raise InvalidArgumentError(
            f"segment delay {segment.tau!r} does not match grid tau "
            f"{grid.tau!r}"
        )
    if segment.support_start > -grid.tau * (1.0 - GRID_RELATIVE_TOLERANCE):
        raise InvalidArgumentError(
            f"initial segment covers only [{segment.support_start!r}, 0]; "
            f"it must be defined on [{-grid.tau!r}, 0]"
        )
    entries =[segment.value(k * grid.h) for k in range(-grid.m, 1)]
    return DelayBuffer(entries, head_index=0)


def buffer_push(buffer: DelayBuffer, value) -> DelayBuffer:
    return buffer.push(value)


def buffer_lag(buffer: DelayBuffer, lag: int) -> np.ndarray:
    return buffer.lag(lag)
