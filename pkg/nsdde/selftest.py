"""Property suites run by `manage.py selftest`.

Each suite returns a SuiteResult; an exception inside a suite is recorded
as a failure of that suite, never raised. Report text carries no timings
so two runs on the same machine print the same bytes.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .grid import BrownianDriver, DelayBuffer, make_grid, sample_increment
from .scheme import (
    SchemeConfig,
    SchemeKind,
    decompose_step,
    elementary_bound,
    initial_state,
    simulate_path,
    tame_drift,
)
from .services import moments_csv
from .stability import (
    estimate_second_moment,
    eval_f,
    find_decay_base,
    sign_changes,
)
from .systems import BuiltinSystem, InitialSegment

logger = logging.getLogger(__name__)

ULP_SLACK = 4 * np.finfo(float).eps


@dataclass
class SuiteResult:
    name: str
    passed: bool
    detail: str


@dataclass
class SelftestReport:
    results: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    @property
    def failures(self):
        return [r for r in self.results if not r.passed]

    def text(self) -> str:
        lines = [
            f"{'PASS' if r.passed else 'FAIL'} {r.name}: {r.detail}"
            for r in self.results
        ]
        lines.append(
            f"{len(self.results) - len(self.failures)}/{len(self.results)} "
            f"suites passed"
        )
        return '\n'.join(lines) + '\n'


def taming_bound(alpha, seed, draws=100_000):
    """|b_h| <= min(|b|, h^-alpha) and |b_h h| <= h^(1-alpha)."""
    rng = np.random.default_rng(seed)
    b = rng.standard_normal(draws) * 10.0 ** rng.uniform(-3, 8, draws)
    h = rng.uniform(1e-6, 1.0, draws)
    if alpha is None:
        alphas = rng.uniform(1e-3, 0.5, draws)
    else:
        SchemeConfig(alpha=alpha)
        alphas = np.full(draws, float(alpha))

    tamed = b / (1.0 + h ** alphas * np.abs(b))
    for i in range(0, draws, draws // 100):
        expected = tame_drift([b[i]], h[i], alphas[i])[0]
        if not math.isclose(expected, tamed[i], rel_tol=1e-12):
            return False, f"tame_drift disagrees at draw {i}"

    slack = 1.0 + ULP_SLACK
    over_b = np.abs(tamed) > np.abs(b) * slack
    over_cap = np.abs(tamed) > h ** -alphas * slack
    over_step = np.abs(tamed * h) > h ** (1.0 - alphas) * slack
    bad = int(np.count_nonzero(over_b | over_cap | over_step))
    return bad == 0, f"{draws} draws, {bad} bound violations"


def elementary_inequality(alpha, seed, draws=10_000):
    rng = np.random.default_rng(seed)
    bad = 0
    for _ in range(draws):
        a, b = rng.standard_normal(3), rng.standard_normal(3) * 5.0
        eps = 10.0 ** rng.uniform(-4, 4)
        lhs = float(np.sum((a + b) ** 2))
        if lhs > elementary_bound(a, b, eps) * (1.0 + 1e-12):
            bad += 1
    return bad == 0, f"{draws} draws, {bad} violations"


def buffer_oracle(alpha, seed, m=7, pushes=50):
    rng = np.random.default_rng(seed)
    history = [rng.standard_normal(2) for _ in range(m + 1)]
    buffer = DelayBuffer(history)
    for _ in range(pushes):
        value = rng.standard_normal(2)
        history.append(value)
        buffer = buffer.push(value)
        for lag in range(m + 1):
            if not np.array_equal(buffer.lag(lag), history[-1 - lag]):
                return False, f"lag {lag} mismatch at head {buffer.head_index}"
    return True, f"{pushes} pushes, m={m}, every lag matched"


def increments_ks(alpha, seed, count=100_000, h=0.01):
    driver = BrownianDriver(seed=seed, stream_id=3)
    block = driver.increments(h, count)
    result = stats.kstest(block[:, 0] / math.sqrt(h), 'norm')
    for k in (0, 1, count // 2, count - 1):
        if not np.array_equal(sample_increment(driver, k, h), block[k]):
            return False, f"sample_increment row {k} differs from block"
    if not np.array_equal(block, driver.increments(h, count)):
        return False, "increment block is not reproducible"
    return result.pvalue > 1e-3, f"KS p-value {result.pvalue:.4f}"


def martingale_means(alpha, seed, draws=100_000):
    """Sample means of M1, M2, M3 from one fixed state stay within 4 SE."""
    system = BuiltinSystem('linear').build()
    grid = make_grid(1.0, 2.0, 10)
    config = SchemeConfig(alpha=0.5 if alpha is None else alpha)
    state = initial_state(system, InitialSegment.constant(1.0, 1.5), grid)
    dws = BrownianDriver(seed=seed, stream_id=11).increments(grid.h, draws)
    parts = np.array([
        (d.M1, d.M2, d.M3)
        for d in (decompose_step(state, system, grid, config, dw)
                  for dw in dws)
    ])
    means = parts.mean(axis=0)
    errors = parts.std(axis=0, ddof=1) / math.sqrt(draws)
    z = np.abs(means) / np.where(errors > 0, errors, 1.0)
    detail = ', '.join(f"M{i + 1} {z[i]:.2f} SE" for i in range(3))
    return bool(np.all(z <= 4.0)), detail


def certificate_root(alpha, seed):
    args = dict(kappa=0.1, tau=1.0, lambda2=1.0, lambda3=0.1, K_tilde=0.05,
                h=0.01)
    cert = find_decay_base(**args)
    if not math.isclose(cert.f_at_one, -0.007, rel_tol=1e-12):
        return False, f"f(1) = {cert.f_at_one!r}, expected -0.007"
    residual = eval_f(cert.C_bar, **args)
    grid = np.linspace(1.0, 2.0 * cert.C_bar, 10_000)
    changes = sign_changes(eval_f(grid, **args))
    ok = abs(residual) <= 1e-10 and changes == 1
    return ok, (f"C_bar {cert.C_bar:.12f}, |f(C_bar)| {abs(residual):.1e}, "
                f"{changes} sign change(s)")


def determinism(alpha, seed):
    system = BuiltinSystem('linear').build()
    grid = make_grid(1.0, 3.0, 5)
    segment = InitialSegment.constant(1.0, 1.0)
    config = SchemeConfig(alpha=0.5 if alpha is None else alpha)
    texts = [
        moments_csv(estimate_second_moment(system, segment, grid, config,
                                           seed, 24, workers=workers))
        for workers in (1, 1, 2)
    ]
    same = len(set(texts)) == 1
    return same, ("identical moments across reruns and worker counts" if same
                  else "moments differ between runs")


def blow_up_contrast(alpha, seed):
    """Classic EM on b = -x^3 from 10 explodes; tamed EM on the same noise decays."""
    system = BuiltinSystem('cubic').build()
    grid = make_grid(1.0, 2.0, 10)
    segment = InitialSegment.constant(1.0, 10.0)
    driver = BrownianDriver(seed=seed, stream_id=0)
    classic = simulate_path(system, segment, grid,
                            SchemeConfig(kind=SchemeKind.CLASSIC), driver,
                            decompose=False)
    tamed = simulate_path(system, segment, grid,
                          SchemeConfig(alpha=0.5 if alpha is None else alpha),
                          driver, decompose=False)

    early = np.abs(classic.values[:6, 0])
    exploded = classic.diverged_at is not None and classic.diverged_at <= 5
    exploded = exploded or bool(np.any(early > 1e10))
    y = np.abs(tamed.values[:, 0])
    large = y[:-1] > 1.0
    decreasing = bool(np.all(y[1:][large] < y[:-1][large]))
    ok = exploded and not tamed.diverged and y.max() <= 10.0 and decreasing
    return ok, (f"classic max |Y| over 5 steps {early.max():.3e}, "
                f"tamed sup |Y| {y.max():.4f}")


SUITES = (
    ('taming-bound', taming_bound),
    ('elementary-inequality', elementary_inequality),
    ('buffer-oracle', buffer_oracle),
    ('increments-ks', increments_ks),
    ('martingale-means', martingale_means),
    ('certificate-root', certificate_root),
    ('determinism', determinism),
    ('blow-up-contrast', blow_up_contrast),
)


def run_selftest(alpha=None, seed=0) -> SelftestReport:
    """Run every suite; alpha overrides the taming exponent under test."""
    report = SelftestReport()
    for name, suite in SUITES:
        try:
            passed, detail = suite(alpha, seed)
        except Exception as exc:
            passed, detail = False, f"{type(exc).__name__}: {exc}"
        logger.debug("suite %s passed=%s", name, passed)
        report.results.append(SuiteResult(name, bool(passed), detail))
    return report
