"""NSDDE systems, initial segments and the standing-assumption checkers.

The system is

    d[X(t) - D(X(t - tau))] = b(X(t), X(t - tau)) dt
                              + sigma(X(t), X(t - tau)) dw(t)

with an n-dimensional state and a noise_dim-dimensional Wiener process.

The checkers are sampling-based falsifiers: every assumption quantifies
over all of R^n, so a report gives the empirical supremum over the sample
(a lower bound on the true constant) and the worst sampled point, never a
proof.
"""

import enum
import logging
import math
from dataclasses import dataclass, field
from functools import partial
from typing import Callable, Optional

import numpy as np

from .exceptions import InvalidArgumentError

logger = logging.getLogger(__name__)

DEFAULT_TOLERANCE = 1e-9
DEFAULT_RADIUS = 10.0
DEFAULT_SAMPLE_COUNT = 10_000
DEFAULT_SAMPLE_SEED = 12345


def hs_norm_sq(matrix) -> float:
    """Squared Hilbert-Schmidt norm trace(A^T A)."""
    a = np.asarray(matrix, dtype=float)
    return float(np.sum(a * a))


def _vector(value) -> np.ndarray:
    return np.atleast_1d(np.asarray(value, dtype=float))


@dataclass(frozen=True)
class NeutralSystem:
    state_dim: int
    noise_dim: int
    D: Callable
    b: Callable
    sigma: Callable
    name: str = 'custom'

    def __post_init__(self):
        if self.state_dim < 1 or self.noise_dim < 1:
            raise InvalidArgumentError(
                "state_dim and noise_dim must be positive integers"
            )
        origin = np.zeros(self.state_dim)
        if np.any(_vector(self.D(origin)) != 0.0):
            raise InvalidArgumentError("neutral term must satisfy D(0) = 0")
        shape = np.shape(self.sigma(origin, origin))
        if shape != (self.state_dim, self.noise_dim):
            raise InvalidArgumentError(
                f"sigma must return a {self.state_dim}x{self.noise_dim} "
                f"matrix, got shape {shape}"
            )

    def neutral(self, y) -> np.ndarray:
        return _vector(self.D(y))

    def drift(self, x, y) -> np.ndarray:
        return _vector(self.b(x, y))

    def diffusion(self, x, y) -> np.ndarray:
        return np.asarray(self.sigma(x, y), dtype=float).reshape(
            self.state_dim, self.noise_dim
        )


def _constant_value(value, theta):
    return value


def _lookup_value(items, tolerance, theta):
    for offset, value in items:
        if abs(offset - theta) <= tolerance:
            return value
    raise InvalidArgumentError(f"initial segment has no value at offset {theta!r}")


@dataclass(frozen=True)
class InitialSegment:
    """The initial data xi on [-tau, 0].

    Either deterministic (values_at: theta -> n-vector) or random
    (sampler: Generator -> values_at), realized once per path.
    """

    tau: float
    values_at: Optional[Callable] = None
    sampler: Optional[Callable] = None
    start: Optional[float] = None

    def __post_init__(self):
        if not self.tau > 0:
            raise InvalidArgumentError(f"tau must be positive, got {self.tau!r}")
        if (self.values_at is None) == (self.sampler is None):
            raise InvalidArgumentError(
                "initial segment needs exactly one of values_at or sampler"
            )

    @classmethod
    def constant(cls, tau, value) -> 'InitialSegment':
        return cls(tau=tau, values_at=partial(_constant_value, _vector(value)))

    @classmethod
    def from_values(cls, tau, values) -> 'InitialSegment':
        items = tuple(sorted(
            (float(theta), _vector(v)) for theta, v in values.items()
        ))
        return cls(tau=tau, values_at=partial(_lookup_value, items, 1e-9 * tau))

    @property
    def is_random(self) -> bool:
        return self.sampler is not None

    @property
    def support_start(self) -> float:
        return -self.tau if self.start is None else self.start

    def realize(self, rng: np.random.Generator) -> 'InitialSegment':
        if not self.is_random:
            return self
        return InitialSegment(
            tau=self.tau, values_at=self.sampler(rng), start=self.start
        )

    def value(self, theta: float) -> np.ndarray:
        slack = 1e-9 * self.tau
        if theta < self.support_start - slack or theta > slack:
            raise InvalidArgumentError(
                f"initial segment is not defined at offset {theta!r} "
                f"(support [{self.support_start!r}, 0])"
            )
        if self.is_random:
            raise InvalidArgumentError("random initial segment must be realized")
        v = _vector(self.values_at(theta))
        if not np.all(np.isfinite(v)):
            raise InvalidArgumentError(
                f"initial segment value at {theta!r} is not finite"
            )
        return v


@dataclass(frozen=True)
class StabilityParams:
    lambda1: float
    lambda2: float
    lambda3: float

    def __post_init__(self):
        if not self.lambda1 > 2:
            raise InvalidArgumentError(
                f"lambda1 must exceed 2, got {self.lambda1!r}"
            )
        if not self.lambda2 > self.lambda3 > 0:
            raise InvalidArgumentError(
                "lambda2 > lambda3 > 0 is required, got "
                f"lambda2={self.lambda2!r}, lambda3={self.lambda3!r}"
            )


class AssumptionId(str, enum.Enum):
    A1 = 'A1'
    A2 = 'A2'
    A3 = 'A3'
    SIGMA = 'SigmaCond'


class SigmaVariant(str, enum.Enum):
    # rhs scaled by 1/h
    STATEMENT = 'statement'
    # rhs scaled by h
    PROOF = 'proof'


@dataclass
class AssumptionReport:
    assumption_id: AssumptionId
    holds_on_sample: bool
    estimated_constant: float
    worst_point: Optional[tuple]
    sample_count: int
    violation_count: int = 0
    auxiliary_constant: Optional[float] = None
    variant: Optional[SigmaVariant] = None
    pointwise: tuple = ()
    negative_rhs_points: tuple = ()
    notes: list = field(default_factory=list)

    def summary_lines(self):
        label = self.assumption_id.value
        if self.variant is not None:
            label = f"{label}[{self.variant.value}]"
        lines = [
            f"{label}.holds_on_sample: {self.holds_on_sample}",
            f"{label}.estimated_constant: {self.estimated_constant!r}",
            f"{label}.sample_count: {self.sample_count}",
            f"{label}.violation_count: {self.violation_count}",
            f"{label}.worst_point: {_format_point(self.worst_point)}",
        ]
        if self.auxiliary_constant is not None:
            lines.append(
                f"{label}.auxiliary_constant: {self.auxiliary_constant!r}"
            )
        if self.assumption_id is AssumptionId.SIGMA:
            lines.append(
                f"{label}.negative_rhs_count: {len(self.negative_rhs_points)}"
            )
        lines.extend(f"{label}.note: {note}" for note in self.notes)
        return lines


def _format_point(point):
    if point is None:
        return 'none'
    return '(' + ', '.join(
        '[' + ', '.join(repr(float(c)) for c in np.ravel(p)) + ']'
        for p in point
    ) + ')'


def _require_samples(samples):
    samples = list(samples)
    if not samples:
        raise InvalidArgumentError("sample list must not be empty")
    return samples


def _ball_points(rng, count, dim, radius):
    directions = rng.standard_normal((count, dim))
    norms = np.linalg.norm(directions, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    radii = radius * rng.random((count, 1)) ** (1.0 / dim)
    return directions / norms * radii


def _axis_points(dim, radius):
    points = []
    for i in range(dim):
        for scale in (radius, 0.5 * radius, 1.0, -1.0, -0.5 * radius, -radius):
            p = np.zeros(dim)
            p[i] = scale
            points.append(p)
    return points


def sample_pairs(dim, count=DEFAULT_SAMPLE_COUNT, radius=DEFAULT_RADIUS,
                 seed=DEFAULT_SAMPLE_SEED):
    """Pairs (x, y): origin, axis points, then uniform draws on the ball."""
    zero = np.zeros(dim)
    special = [(zero, zero)]
    for p in _axis_points(dim, radius):
        special.extend([(p, zero), (zero, p), (p, p)])
    rng = np.random.default_rng(seed)
    n_random = max(count - len(special), 0)
    xs = _ball_points(rng, n_random, dim, radius)
    ys = _ball_points(rng, n_random, dim, radius)
    return special[:count] + list(zip(xs, ys))


def sample_quads(dim, count=DEFAULT_SAMPLE_COUNT, radius=DEFAULT_RADIUS,
                 seed=DEFAULT_SAMPLE_SEED):
    """Quads (x, y, x_bar, y_bar) inside the radius ball."""
    zero = np.zeros(dim)
    special = [(zero, zero, zero, zero)]
    for p in _axis_points(dim, radius):
        special.extend([(p, zero, zero, zero), (zero, p, zero, zero),
                        (p, p, -p, zero)])
    rng = np.random.default_rng(seed)
    n_random = max(count - len(special), 0)
    draws = [_ball_points(rng, n_random, dim, radius) for _ in range(4)]
    return special[:count] + list(zip(*draws))


def check_contraction(D, sample_pairs, tolerance=DEFAULT_TOLERANCE):
    """(A2): D(0) = 0 and |D(x) - D(x_bar)| <= kappa |x - x_bar|, kappa < 1."""
    pairs = _require_samples(sample_pairs)
    if tolerance < 0:
        raise InvalidArgumentError("tolerance must be >= 0")

    kappa_hat = 0.0
    worst = None
    violations = 0
    for x, x_bar in pairs:
        x, x_bar = _vector(x), _vector(x_bar)
        gap = np.linalg.norm(x - x_bar)
        if gap == 0.0:
            continue
        ratio = np.linalg.norm(_vector(D(x)) - _vector(D(x_bar))) / gap
        if ratio >= 1.0 - tolerance:
            violations += 1
        if worst is None or ratio > kappa_hat:
            kappa_hat, worst = float(ratio), (x, x_bar)

    dim = _vector(pairs[0][0]).size
    d_origin = float(np.linalg.norm(_vector(D(np.zeros(dim)))))
    report = AssumptionReport(
        assumption_id=AssumptionId.A2,
        holds_on_sample=kappa_hat < 1.0 - tolerance and d_origin <= tolerance,
        estimated_constant=kappa_hat,
        worst_point=worst,
        sample_count=len(pairs),
        violation_count=violations + (d_origin > tolerance),
    )
    if d_origin > tolerance:
        report.notes.append(f"|D(0)| = {d_origin!r} exceeds tolerance")
    return report


def check_coercivity(system: NeutralSystem, K_tilde, sample_pairs):
    """(A1): <x - D(y), b(x,y)> v |sigma(x,y)|^2 <= K_tilde (1 + |x|^2 + |y|^2)."""
    if not K_tilde > 0:
        raise InvalidArgumentError(f"K_tilde must be positive, got {K_tilde!r}")
    pairs = _require_samples(sample_pairs)

    estimate = 0.0
    worst = None
    violations = 0
    for x, y in pairs:
        x, y = _vector(x), _vector(y)
        inner = float(np.dot(x - system.neutral(y), system.drift(x, y)))
        lhs = max(inner, hs_norm_sq(system.diffusion(x, y)))
        ratio = lhs / (1.0 + float(np.dot(x, x)) + float(np.dot(y, y)))
        if ratio > K_tilde:
            violations += 1
        if worst is None or ratio > estimate:
            estimate, worst = ratio, (x, y)

    return AssumptionReport(
        assumption_id=AssumptionId.A1,
        holds_on_sample=violations == 0,
        estimated_constant=estimate,
        worst_point=worst,
        sample_count=len(pairs),
        violation_count=violations,
    )


def check_local_monotonicity(system: NeutralSystem, radius, sample_quads,
                             K_tilde_R=None):
    """(A3) on the radius ball; also estimates K_R = sup |b| on the sample.

    With a target K_tilde_R the report holds iff the estimate does not
    exceed it; without one it holds iff the estimate is finite.
    """
    if not radius > 0:
        raise InvalidArgumentError(f"radius must be positive, got {radius!r}")
    quads = _require_samples(sample_quads)
    limit = radius * (1.0 + 1e-12)

    estimate = 0.0
    worst = None
    sup_b = 0.0
    for quad in quads:
        x, y, x_bar, y_bar = (_vector(p) for p in quad)
        if max(np.linalg.norm(p) for p in (x, y, x_bar, y_bar)) > limit:
            raise InvalidArgumentError(
                f"sampled point outside the ball of radius {radius!r}"
            )
        b_xy, b_bar = system.drift(x, y), system.drift(x_bar, y_bar)
        sup_b = max(sup_b, float(np.linalg.norm(b_xy)),
                    float(np.linalg.norm(b_bar)))
        denom = float(np.sum((x - x_bar) ** 2) + np.sum((y - y_bar) ** 2))
        if denom == 0.0:
            continue
        shift = x - system.neutral(y) - x_bar + system.neutral(y_bar)
        inner = float(np.dot(shift, b_xy - b_bar))
        spread = hs_norm_sq(system.diffusion(x, y) - system.diffusion(x_bar, y_bar))
        ratio = max(inner, spread) / denom
        if worst is None or ratio > estimate:
            estimate, worst = ratio, (x, y, x_bar, y_bar)

    if K_tilde_R is None:
        holds = math.isfinite(estimate)
    else:
        holds = estimate <= K_tilde_R
    return AssumptionReport(
        assumption_id=AssumptionId.A3,
        holds_on_sample=holds,
        estimated_constant=estimate,
        worst_point=worst,
        sample_count=len(quads),
        violation_count=0 if holds else 1,
        auxiliary_constant=sup_b,
    )


def sigma_condition_rhs(params: StabilityParams, h, variant, x, y) -> float:
    base = (-params.lambda1 - params.lambda2 * float(np.dot(x, x))
            + params.lambda3 * float(np.dot(y, y)))
    if SigmaVariant(variant) is SigmaVariant.STATEMENT:
        return base / h
    return base * h


def check_sigma_condition(system: NeutralSystem, params: StabilityParams, h,
                          variant, sample_pairs):
    """|sigma(x,y)|^2 <= factor * (-l1 - l2|x|^2 + l3|y|^2), factor 1/h or h.

    The origin pair is always probed. estimated_constant is the largest
    excess |sigma|^2 - rhs over the sample (positive means violated).
    """
    if not 0 < h < 1:
        raise InvalidArgumentError(f"h must lie in (0, 1), got {h!r}")
    variant = SigmaVariant(variant)
    pairs = [(_vector(x), _vector(y)) for x, y in sample_pairs]
    origin = np.zeros(system.state_dim)
    if not any(not x.any() and not y.any() for x, y in pairs):
        pairs.append((origin, origin))

    pointwise = []
    negative = []
    worst = None
    worst_excess = -math.inf
    for x, y in pairs:
        rhs = sigma_condition_rhs(params, h, variant, x, y)
        excess = hs_norm_sq(system.diffusion(x, y)) - rhs
        pointwise.append(excess <= 0.0)
        if rhs < 0.0:
            negative.append((x, y))
        if excess > worst_excess:
            worst_excess, worst = excess, (x, y)

    violations = pointwise.count(False)
    report = AssumptionReport(
        assumption_id=AssumptionId.SIGMA,
        holds_on_sample=violations == 0,
        estimated_constant=worst_excess,
        worst_point=worst,
        sample_count=len(pairs),
        violation_count=violations,
        variant=variant,
        pointwise=tuple(pointwise),
        negative_rhs_points=tuple(negative),
    )
    if negative:
        report.notes.append(
            f"right-hand side negative at {len(negative)} sampled pairs; "
            "no sigma can satisfy the condition there"
        )
    return report


class LinearSystem:
    """D(y) = kappa0 y, b(x,y) = -a x + btilde y, sigma(x,y) = s y."""

    def __init__(self, kappa0=0.1, a=2.0, btilde=0.25, s=0.25):
        if not abs(kappa0) < 1:
            raise InvalidArgumentError(f"|kappa0| must be < 1, got {kappa0!r}")
        self.kappa0, self.a, self.btilde, self.s = kappa0, a, btilde, s

    def neutral(self, y):
        return self.kappa0 * y

    def drift(self, x, y):
        return -self.a * x + self.btilde * y

    def diffusion(self, x, y):
        return self.s * np.reshape(y, (-1, 1))


class CubicSystem:
    """D = 0, b(x,y) = -x^3, sigma = 0."""

    def neutral(self, y):
        return np.zeros_like(y)

    def drift(self, x, y):
        return -x ** 3

    def diffusion(self, x, y):
        return np.zeros((np.size(x), 1))


class PureNoiseSystem:
    """D = 0, b = 0, sigma = 1."""

    def neutral(self, y):
        return np.zeros_like(y)

    def drift(self, x, y):
        return np.zeros_like(x)

    def diffusion(self, x, y):
        return np.ones((np.size(x), 1))


BUILTIN_SYSTEMS = {
    'linear': LinearSystem,
    'cubic': CubicSystem,
    'pure_noise': PureNoiseSystem,
}


@dataclass(frozen=True)
class BuiltinSystem:
    name: str
    parameters: dict = field(default_factory=dict)

    def build(self) -> NeutralSystem:
        try:
            factory = BUILTIN_SYSTEMS[self.name]
        except KeyError:
            raise InvalidArgumentError(
                f"unknown built-in system {self.name!r}; expected one of "
                f"{sorted(BUILTIN_SYSTEMS)}"
            ) from None
        impl = factory(**self.parameters)
        return NeutralSystem(
            state_dim=1,
            noise_dim=1,
            D=impl.neutral,
            b=impl.drift,
            sigma=impl.diffusion,
            name=self.name,
        )
