import math

import numpy as np
from django.test import SimpleTestCase

from nsdde.exceptions import (
    InvalidArgumentError,
    OutOfRangeError,
    PathDivergedError,
)
from nsdde.grid import BrownianDriver, make_grid
from nsdde.scheme import (
    SchemeConfig,
    SchemeKind,
    cumulative_path,
    decompose_step,
    elementary_bound,
    initial_state,
    interpolate,
    simulate_path,
    step,
    tame_drift,
)
from nsdde.systems import BuiltinSystem, InitialSegment, NeutralSystem


class TameDriftTests(SimpleTestCase):
    def test_bounds(self):
        rng = np.random.default_rng(0)
        for _ in range(2000):
            b = rng.standard_normal(2) * 10.0 ** rng.uniform(-2, 6)
            h = rng.uniform(1e-4, 0.99)
            alpha = rng.uniform(0.01, 0.5)
            tamed = tame_drift(b, h, alpha)
            size = np.linalg.norm(tamed)
            slack = 1 + 1e-15
            self.assertLessEqual(size, np.linalg.norm(b) * slack)
            self.assertLessEqual(size, h ** -alpha * slack)
            self.assertLessEqual(size * h, h ** (1 - alpha) * slack)

    def test_moderate_drift(self):
        self.assertAlmostEqual(tame_drift(1000.0, 0.01, 0.5)[()],
                               1000.0 / 101.0, places=12)

    def test_huge_drift_saturates_at_cap(self):
        # |b| h^alpha >> 1, so b_h -> h^-alpha sign(b) = 10 sign(b)
        self.assertAlmostEqual(tame_drift([1e200], 0.01, 0.5)[0], 10.0,
                               places=12)
        self.assertAlmostEqual(tame_drift([-1e300], 0.01, 0.5)[0], -10.0,
                               places=12)
        tamed = tame_drift([1e200, -1e200], 0.01, 0.5)
        self.assertTrue(np.allclose(tamed, [10 / math.sqrt(2),
                                            -10 / math.sqrt(2)],
                                    rtol=1e-12, atol=0))

    def test_alpha_range(self):
        with self.assertRaises(InvalidArgumentError):
            tame_drift([1.0], 0.1, 0.7)
        with self.assertRaises(InvalidArgumentError):
            SchemeConfig(alpha=0.0)
        with self.assertRaises(InvalidArgumentError) as cm:
            SchemeConfig(alpha=0.7)
        self.assertIn('alpha must lie in (0, 0.5]', str(cm.exception))

    def test_step_size_range(self):
        with self.assertRaises(InvalidArgumentError):
            tame_drift([1.0], 1.0, 0.5)

    def test_kind_coerced(self):
        self.assertIs(SchemeConfig(kind='classic').kind, SchemeKind.CLASSIC)

    def test_elementary_bound(self):
        self.assertAlmostEqual(elementary_bound([1.0], [1.0], 1.0), 4.0)
        self.assertGreaterEqual(elementary_bound([3.0], [-1.0], 0.2), 4.0)
        with self.assertRaises(InvalidArgumentError):
            elementary_bound([1.0], [1.0], 0.0)


class BlowUpContrastTests(SimpleTestCase):
    def setUp(self):
        self.system = BuiltinSystem('cubic').build()
        self.grid = make_grid(1.0, 2.0, 10)
        self.segment = InitialSegment.constant(1.0, 10.0)
        self.driver = BrownianDriver(seed=0, stream_id=0)

    def test_classic_explodes(self):
        path = simulate_path(self.system, self.segment, self.grid,
                             SchemeConfig(kind=SchemeKind.CLASSIC),
                             self.driver, decompose=False)
        y = path.values[:, 0]
        self.assertAlmostEqual(y[1], -90.0, places=9)
        self.assertAlmostEqual(y[2], 72810.0, delta=1e-6)
        self.assertLess(y[3], -1e13)
        self.assertTrue(path.diverged)
        self.assertEqual(path.diverged_at, 6)
        self.assertEqual(len(path.values), 6)

    def test_classic_strict_raises(self):
        with self.assertRaises(PathDivergedError) as cm:
            simulate_path(self.system, self.segment, self.grid,
                          SchemeConfig(kind='classic'), self.driver,
                          strict=True, decompose=False)
        self.assertEqual(cm.exception.step_index, 6)

    def test_tamed_decays(self):
        path = simulate_path(self.system, self.segment, self.grid,
                             SchemeConfig(alpha=0.5), self.driver)
        y = np.abs(path.values[:, 0])
        self.assertFalse(path.diverged)
        self.assertEqual(len(y), self.grid.M + 1)
        self.assertLessEqual(y.max(), 10.0)
        large = y[:-1] > 1.0
        self.assertTrue(np.all(y[1:][large] < y[:-1][large]))


class PathTests(SimpleTestCase):
    def test_pure_noise_is_summed_increments(self):
        system = BuiltinSystem('pure_noise').build()
        grid = make_grid(1.0, 2.0, 4)
        driver = BrownianDriver(seed=5, stream_id=1)
        path = simulate_path(system, InitialSegment.constant(1.0, 1.0), grid,
                             SchemeConfig(), driver)
        expected = 1.0 + np.concatenate(
            [[0.0], np.cumsum(driver.increments(grid.h, grid.M)[:, 0])]
        )
        self.assertTrue(np.allclose(path.values[:, 0], expected,
                                    rtol=0, atol=1e-12))

    def test_stepwise_matches_summed_form(self):
        system = BuiltinSystem('linear').build()
        grid = make_grid(1.0, 4.0, 5)
        segment = InitialSegment.constant(1.0, 1.0)
        driver = BrownianDriver(seed=11, stream_id=2)
        for config in (SchemeConfig(), SchemeConfig(kind='classic')):
            path = simulate_path(system, segment, grid, config, driver)
            summed = cumulative_path(system, segment, grid, config,
                                     driver.increments(grid.h, grid.M))
            self.assertTrue(np.allclose(path.values, summed,
                                        rtol=1e-10, atol=1e-12))

    def test_same_driver_same_path(self):
        system = BuiltinSystem('linear').build()
        grid = make_grid(1.0, 3.0, 5)
        segment = InitialSegment.constant(1.0, 1.0)
        a = simulate_path(system, segment, grid, SchemeConfig(),
                          BrownianDriver(3, 7))
        b = simulate_path(system, segment, grid, SchemeConfig(),
                          BrownianDriver(3, 7))
        self.assertTrue(np.array_equal(a.values, b.values))
        self.assertTrue(np.array_equal(a.decompositions, b.decompositions))

    def test_noise_dimension_mismatch(self):
        system = BuiltinSystem('linear').build()
        grid = make_grid(1.0, 2.0, 4)
        with self.assertRaises(InvalidArgumentError):
            simulate_path(system, InitialSegment.constant(1.0, 1.0), grid,
                          SchemeConfig(), BrownianDriver(0, 0, noise_dim=2))

    def test_single_step(self):
        system = BuiltinSystem('linear').build()
        grid = make_grid(1.0, 2.0, 10)
        state = initial_state(system, InitialSegment.constant(1.0, 1.5), grid)
        self.assertAlmostEqual(state.Z[0], 1.35)
        nxt = step(state, system, grid, SchemeConfig(), np.array([0.1]))
        b = -2.0 * 1.5 + 0.25 * 1.5
        tamed = b / (1 + math.sqrt(0.1) * abs(b))
        expected_z = 1.35 + tamed * 0.1 + 0.375 * 0.1
        self.assertAlmostEqual(nxt.Z[0], expected_z)
        self.assertAlmostEqual(nxt.Y[0], expected_z + 0.15)
        self.assertEqual(nxt.k, 1)

    def test_neutral_term_keeps_constant_segment(self):
        system = NeutralSystem(1, 1, D=lambda y: 0.3 * y,
                               b=lambda x, y: np.zeros_like(x),
                               sigma=lambda x, y: np.zeros((1, 1)))
        grid = make_grid(1.0, 3.0, 4)
        path = simulate_path(system, InitialSegment.constant(1.0, 2.5), grid,
                             SchemeConfig(), BrownianDriver(1, 0),
                             strict=True)
        self.assertEqual(len(path.values), grid.M + 1)
        self.assertTrue(np.allclose(path.values[:, 0], 2.5,
                                    rtol=0, atol=1e-12))

    def test_classic_and_tamed_agree_for_small_drift(self):
        system = BuiltinSystem('linear').build()
        grid = make_grid(1.0, 2.0, 100)
        state = initial_state(system, InitialSegment.constant(1.0, 1e-4),
                              grid)
        dw = np.array([0.05])
        b = float(system.drift(state.Y, state.buffer.lag(grid.m))[0])
        tamed = step(state, system, grid, SchemeConfig(alpha=0.5), dw)
        classic = step(state, system, grid, SchemeConfig(kind='classic'), dw)
        # |b - b_h| <= h^alpha |b|^2
        bound = grid.h ** 1.5 * b * b
        gap = abs(tamed.Y[0] - classic.Y[0])
        self.assertLessEqual(gap, bound * (1 + 1e-6))
        self.assertLess(gap, 1e-9 * abs(classic.Y[0]))

    def test_decompose_step(self):
        system = BuiltinSystem('linear').build()
        grid = make_grid(1.0, 2.0, 10)
        state = initial_state(system, InitialSegment.constant(1.0, 1.5), grid)
        parts = decompose_step(state, system, grid, SchemeConfig(),
                               np.array([0.1]))
        b = -2.0 * 1.5 + 0.25 * 1.5
        tamed = b / (1 + math.sqrt(0.1) * abs(b))
        self.assertAlmostEqual(parts.M1, 2 * 1.35 * 0.0375)
        self.assertAlmostEqual(parts.M2, 2 * tamed * 0.1 * 0.0375)
        self.assertAlmostEqual(parts.M3, 0.375 ** 2 * (0.01 - 0.1))


class InterpolateTests(SimpleTestCase):
    def setUp(self):
        self.system = BuiltinSystem('linear').build()
        self.grid = make_grid(1.0, 2.0, 4)
        segment = InitialSegment.from_values(
            1.0, {-1.0: 5.0, -0.75: 4.0, -0.5: 3.0, -0.25: 2.0, 0.0: 1.0}
        )
        self.path = simulate_path(self.system, segment, self.grid,
                                  SchemeConfig(), BrownianDriver(0, 0))

    def test_piecewise_constant(self):
        self.assertEqual(interpolate(self.path, self.grid, 0.37)[0],
                         self.path.values[1, 0])
        self.assertEqual(interpolate(self.path, self.grid, 0.5)[0],
                         self.path.values[2, 0])
        self.assertEqual(interpolate(self.path, self.grid, 2.0)[0],
                         self.path.values[8, 0])

    def test_segment_region(self):
        self.assertEqual(interpolate(self.path, self.grid, -0.5)[0], 3.0)
        self.assertEqual(interpolate(self.path, self.grid, -1.0)[0], 5.0)

    def test_out_of_range(self):
        with self.assertRaises(OutOfRangeError):
            interpolate(self.path, self.grid, 2.5)
        with self.assertRaises(OutOfRangeError):
            interpolate(self.path, self.grid, -1.5)
