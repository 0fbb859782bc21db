import numpy as np
from django.test import SimpleTestCase

from nsdde.exceptions import InvalidArgumentError
from nsdde.systems import (
    AssumptionId,
    BuiltinSystem,
    InitialSegment,
    NeutralSystem,
    SigmaVariant,
    StabilityParams,
    check_coercivity,
    check_contraction,
    check_local_monotonicity,
    check_sigma_condition,
    sample_pairs,
    sample_quads,
    sigma_condition_rhs,
)


class NeutralSystemTests(SimpleTestCase):
    def test_neutral_term_must_vanish_at_origin(self):
        with self.assertRaises(InvalidArgumentError):
            NeutralSystem(1, 1, D=lambda y: y + 1.0, b=lambda x, y: -x,
                          sigma=lambda x, y: np.zeros((1, 1)))

    def test_sigma_shape_checked(self):
        with self.assertRaises(InvalidArgumentError):
            NeutralSystem(2, 1, D=lambda y: 0 * y, b=lambda x, y: -x,
                          sigma=lambda x, y: np.zeros((2, 2)))

    def test_builtin_linear(self):
        system = BuiltinSystem('linear').build()
        self.assertEqual(system.name, 'linear')
        x, y = np.array([1.0]), np.array([2.0])
        self.assertAlmostEqual(system.neutral(y)[0], 0.2)
        self.assertAlmostEqual(system.drift(x, y)[0], -1.5)
        self.assertAlmostEqual(system.diffusion(x, y)[0, 0], 0.5)

    def test_unknown_builtin(self):
        with self.assertRaises(InvalidArgumentError):
            BuiltinSystem('quartic').build()


class InitialSegmentTests(SimpleTestCase):
    def test_needs_exactly_one_source(self):
        with self.assertRaises(InvalidArgumentError):
            InitialSegment(tau=1.0)
        with self.assertRaises(InvalidArgumentError):
            InitialSegment(tau=1.0, values_at=lambda t: 1.0,
                           sampler=lambda rng: None)

    def test_value_outside_support(self):
        segment = InitialSegment.constant(1.0, 2.0)
        self.assertEqual(segment.value(-0.5)[0], 2.0)
        with self.assertRaises(InvalidArgumentError):
            segment.value(-1.5)
        with self.assertRaises(InvalidArgumentError):
            segment.value(0.1)

    def test_random_segment_realizes(self):
        segment = InitialSegment(
            tau=1.0, sampler=lambda rng: (lambda t, v=rng.normal(): v)
        )
        with self.assertRaises(InvalidArgumentError):
            segment.value(0.0)
        realized = segment.realize(np.random.default_rng(0))
        self.assertFalse(realized.is_random)
        self.assertTrue(np.isfinite(realized.value(-1.0)[0]))

    def test_non_finite_value_rejected(self):
        segment = InitialSegment(tau=1.0, values_at=lambda t: np.nan)
        with self.assertRaises(InvalidArgumentError):
            segment.value(0.0)


class StabilityParamsTests(SimpleTestCase):
    def test_bounds(self):
        StabilityParams(3.0, 1.0, 0.1)
        with self.assertRaises(InvalidArgumentError):
            StabilityParams(2.0, 1.0, 0.1)
        with self.assertRaises(InvalidArgumentError):
            StabilityParams(3.0, 0.1, 1.0)
        with self.assertRaises(InvalidArgumentError):
            StabilityParams(3.0, 1.0, 0.0)


class SamplerTests(SimpleTestCase):
    def test_pairs_include_origin_and_stay_in_ball(self):
        pairs = sample_pairs(2, 300, 5.0, seed=1)
        self.assertEqual(len(pairs), 300)
        self.assertFalse(pairs[0][0].any() or pairs[0][1].any())
        for x, y in pairs:
            self.assertLessEqual(np.linalg.norm(x), 5.0 + 1e-12)
            self.assertLessEqual(np.linalg.norm(y), 5.0 + 1e-12)

    def test_seeded(self):
        a = sample_quads(1, 100, 2.0, seed=4)
        b = sample_quads(1, 100, 2.0, seed=4)
        for qa, qb in zip(a, b):
            for pa, pb in zip(qa, qb):
                self.assertTrue(np.array_equal(pa, pb))


class CheckerTests(SimpleTestCase):
    def setUp(self):
        self.linear = BuiltinSystem('linear').build()
        self.pairs = sample_pairs(1, 2000, 10.0, seed=3)

    def test_contraction_estimates_kappa(self):
        report = check_contraction(self.linear.D, self.pairs)
        self.assertEqual(report.assumption_id, AssumptionId.A2)
        self.assertTrue(report.holds_on_sample)
        self.assertAlmostEqual(report.estimated_constant, 0.1, places=9)

    def test_contraction_violation(self):
        report = check_contraction(lambda y: 1.2 * y, self.pairs)
        self.assertFalse(report.holds_on_sample)
        self.assertGreater(report.violation_count, 0)
        self.assertAlmostEqual(report.estimated_constant, 1.2, places=9)

    def test_contraction_fails_on_shifted_origin(self):
        report = check_contraction(lambda y: 0.5 * y + 1.0, self.pairs)
        self.assertFalse(report.holds_on_sample)
        self.assertAlmostEqual(report.estimated_constant, 0.5, places=9)
        self.assertEqual(report.violation_count, 1)
        self.assertIn('|D(0)| = 1.0', report.notes[0])

        unit = check_contraction(lambda y: y + 1.0, self.pairs)
        self.assertFalse(unit.holds_on_sample)
        self.assertTrue(any('|D(0)|' in note for note in unit.notes))

    def test_estimates_never_shrink_as_sample_grows(self):
        for check in (lambda p: check_contraction(lambda y: np.sin(y), p),
                      lambda p: check_coercivity(self.linear, 1.0, p)):
            estimates = [check(self.pairs[:n]).estimated_constant
                         for n in (1, 10, 100, 500, 2000)]
            self.assertEqual(estimates, sorted(estimates))

    def test_coercivity_cubic_point(self):
        cubic = NeutralSystem(1, 1, D=lambda y: 0.0 * y,
                              b=lambda x, y: x ** 3,
                              sigma=lambda x, y: np.zeros((1, 1)))
        report = check_coercivity(cubic, 1.0,
                                  [(np.array([2.0]), np.array([0.0]))])
        # <2, 8> / (1 + 4) = 3.2
        self.assertAlmostEqual(report.estimated_constant, 3.2)
        self.assertFalse(report.holds_on_sample)

    def test_empty_sample_rejected(self):
        with self.assertRaises(InvalidArgumentError):
            check_contraction(self.linear.D, [])

    def test_coercivity_linear(self):
        report = check_coercivity(self.linear, 0.1, self.pairs)
        self.assertTrue(report.holds_on_sample)
        self.assertLessEqual(report.estimated_constant, 0.0625)
        self.assertGreater(report.estimated_constant, 0.05)

    def test_coercivity_violation(self):
        report = check_coercivity(self.linear, 0.01, self.pairs)
        self.assertFalse(report.holds_on_sample)
        self.assertIsNotNone(report.worst_point)

    def test_coercivity_rejects_nonpositive_constant(self):
        with self.assertRaises(InvalidArgumentError):
            check_coercivity(self.linear, 0.0, self.pairs)

    def test_local_monotonicity_reports_drift_bound(self):
        cubic = BuiltinSystem('cubic').build()
        quads = sample_quads(1, 200, 2.0, seed=5)
        report = check_local_monotonicity(cubic, 2.0, quads)
        self.assertTrue(report.holds_on_sample)
        self.assertAlmostEqual(report.auxiliary_constant, 8.0)
        self.assertLessEqual(report.estimated_constant, 0.0)

    def test_local_monotonicity_target_constant(self):
        quads = sample_quads(1, 200, 2.0, seed=5)
        report = check_local_monotonicity(self.linear, 2.0, quads,
                                          K_tilde_R=1e-6)
        self.assertFalse(report.holds_on_sample)

    def test_local_monotonicity_rejects_points_outside_ball(self):
        quads = sample_quads(1, 50, 5.0, seed=5)
        with self.assertRaises(InvalidArgumentError):
            check_local_monotonicity(self.linear, 1.0, quads)

    def test_sigma_condition_rhs_variants(self):
        params = StabilityParams(3.0, 1.0, 0.1)
        x, y = np.array([1.0]), np.array([2.0])
        base = -3.0 - 1.0 + 0.4
        self.assertAlmostEqual(
            sigma_condition_rhs(params, 0.1, SigmaVariant.STATEMENT, x, y),
            base / 0.1)
        self.assertAlmostEqual(
            sigma_condition_rhs(params, 0.1, SigmaVariant.PROOF, x, y),
            base * 0.1)

    def test_sigma_condition_fails_at_origin(self):
        params = StabilityParams(3.0, 1.0, 0.1)
        pairs = sample_pairs(1, 200, 10.0, seed=3)[1:]
        for variant in SigmaVariant:
            report = check_sigma_condition(self.linear, params, 0.1, variant,
                                           pairs)
            self.assertEqual(report.sample_count, len(pairs) + 1)
            self.assertFalse(report.holds_on_sample)
            self.assertFalse(report.pointwise[-1])
            self.assertTrue(report.negative_rhs_points)
            self.assertTrue(report.notes)
            self.assertGreater(report.estimated_constant, 0.0)

    def test_summary_lines_label_variant(self):
        params = StabilityParams(3.0, 1.0, 0.1)
        report = check_sigma_condition(self.linear, params, 0.1,
                                       'proof', self.pairs[:10])
        lines = report.summary_lines()
        self.assertTrue(lines[0].startswith('SigmaCond[proof].holds_on_sample'))
