import unittest

import numpy as np

from cwfr import measures
from cwfr.errors import ConstraintError, MeasureError, ShapeMismatchError
from cwfr.grid import build_grids


class MakeMeasureTest(unittest.TestCase):
    def setUp(self):
        self.spatial, self.temporal = build_grids("interval", 4, 4)

    def testUniform(self):
        rho = measures.make_measure(measures.Uniform(1.0), self.spatial)
        np.testing.assert_allclose(rho.density, [1.0, 1.0, 1.0, 1.0])
        self.assertAlmostEqual(rho.total_mass, 1.0, places=14)

    def testDiracCell(self):
        rho = measures.make_measure(measures.DiracCell(2, 3.0), self.spatial)
        np.testing.assert_allclose(rho.density, [0.0, 0.0, 12.0, 0.0], err_msg="3 / dx at cell 2")

    def testBumpIsRenormalized(self):
        spatial, _ = build_grids("interval", 50, 1)
        rho = measures.make_measure(measures.Bump(0.5, 0.1, 2.0), spatial)
        self.assertAlmostEqual(rho.total_mass, 2.0, delta=1e-12, msg="bump mass after renormalization")
        self.assertIn(int(np.argmax(rho.density)), (24, 25))

    def testBumpWrapsOnCircle(self):
        spatial, _ = build_grids("circle", 20, 1)
        rho = measures.make_measure(measures.Bump(0.0, 0.05), spatial)
        self.assertAlmostEqual(rho.density[0], rho.density[-1], places=12, msg="periodic distance")

    def testBlockCoversPartialCells(self):
        rho = measures.make_measure(measures.Block(0.0, 0.375, 1.5), self.spatial)
        np.testing.assert_allclose(rho.density, [4.0, 2.0, 0.0, 0.0])
        self.assertAlmostEqual(rho.total_mass, 1.5, places=14)

    def testRandomDensityIsSeeded(self):
        first = measures.make_measure(measures.RandomDensity(seed=7), self.spatial)
        second = measures.make_measure(measures.RandomDensity(seed=7), self.spatial)
        np.testing.assert_array_equal(first.density, second.density)
        self.assertAlmostEqual(first.total_mass, 1.0, places=12)

    def testMixtureAddsMasses(self):
        mixture = measures.Mixture((measures.Uniform(1.0), measures.DiracCell(0, 0.5)))
        self.assertAlmostEqual(measures.make_measure(mixture, self.spatial).total_mass, 1.5, places=14)

    def testInvalidPresets(self):
        with self.assertRaises(MeasureError):
            measures.make_measure(measures.DiracCell(4, 1.0), self.spatial)
        with self.assertRaises(MeasureError):
            measures.make_measure(measures.Uniform(-1.0), self.spatial)
        with self.assertRaises(MeasureError):
            measures.make_measure(measures.Bump(0.5, 0.0), self.spatial)
        with self.assertRaises(ShapeMismatchError):
            measures.make_measure(measures.Explicit((1.0, 2.0)), self.spatial)
        with self.assertRaises(MeasureError):
            measures.DiscreteMeasure(self.spatial, [1.0, -1.0, 0.0, 0.0])


class ConstraintPresetTest(unittest.TestCase):
    def setUp(self):
        self.grids = build_grids("interval", 8, 4)
        self.circle = build_grids("circle", 8, 4)

    def testTotalMass(self):
        spec = measures.constraint_preset("total_mass", {"F": {"poly": [1.0, 1.0]}}, self.grids)
        self.assertEqual(spec.d, 1)
        np.testing.assert_allclose(spec.h_values, 1.0)
        np.testing.assert_allclose(spec.f_values[:, 0], 1.0 + self.grids[1].nodes)
        self.assertFalse(spec.time_independent, msg="F changes with time")

    def testSphericalHkIsTimeIndependent(self):
        spec = measures.constraint_preset("spherical_hk", {}, self.grids)
        self.assertTrue(spec.time_independent)
        np.testing.assert_allclose(spec.f_values, 1.0)

    def testNoneIsUnconstrained(self):
        spec = measures.constraint_preset("none", {}, self.grids)
        self.assertEqual(spec.d, 0)
        self.assertEqual(measures.constraint_eval(spec, np.ones((5, 8))).shape, (5, 0))

    def testClosureOnCircle(self):
        spec = measures.constraint_preset("closure", {}, self.circle)
        self.assertEqual(spec.d, 2)
        values = measures.constraint_eval(spec, np.ones((5, 8)))
        np.testing.assert_allclose(values, 0.0, atol=1e-14, err_msg="uniform density is closed")

    def testClosureSymmetricDensity(self):
        spatial, _ = self.circle
        spec = measures.constraint_preset("closure", {}, self.circle)
        x = spatial.cell_centers
        density = 1.0 + 0.5 * np.cos(4 * np.pi * x)
        values = measures.constraint_eval(spec, np.repeat(density[None, :], 5, axis=0))
        np.testing.assert_allclose(values, 0.0, atol=1e-12)

    def testClosureDiracIsNotClosed(self):
        spatial, _ = self.circle
        spec = measures.constraint_preset("closure", {}, self.circle)
        rho = measures.make_measure(measures.DiracCell(1, 1.0), spatial)
        values = measures.constraint_eval(spec, np.repeat(rho.density[None, :], 5, axis=0))
        x = spatial.cell_centers[1]
        np.testing.assert_allclose(values[0], [np.cos(2 * np.pi * x), np.sin(2 * np.pi * x)], atol=1e-12)

    def testClosureNeedsCircle(self):
        with self.assertRaises(ConstraintError):
            measures.constraint_preset("closure", {}, self.grids)

    def testMomentFeasibleForUniform(self):
        spatial, _ = self.grids
        spec = measures.constraint_preset("moment", {"centers": [0.5]}, self.grids)
        rho = measures.make_measure(measures.Uniform(1.0), spatial)
        self.assertTrue(measures.check_feasibility(spec, rho, rho).feasible)

    def testBarrierProfile(self):
        spatial, temporal = build_grids("interval", 40, 10)
        spec = measures.constraint_preset("barrier", {"start": [0.4, 0.6], "end": [0.5, 0.7]},
                                          (spatial, temporal))
        self.assertTrue(np.all(spec.h_values >= 0))
        x = spatial.cell_centers
        first, last = spec.h_values[0, 0], spec.h_values[0, -1]
        self.assertTrue(np.all(first[(x < 0.4) | (x > 0.6)] == 0), msg="zero outside the start region")
        self.assertTrue(np.all(first[(x > 0.41) & (x < 0.59)] > 0), msg="positive inside the start region")
        self.assertTrue(np.all(last[(x < 0.5) | (x > 0.7)] == 0), msg="zero outside the end region")
        np.testing.assert_allclose(spec.f_values, 0.0)

    def testEmptyBarrier(self):
        with self.assertRaises(ConstraintError):
            measures.constraint_preset("barrier", {"start": [0.5, 0.4]}, self.grids)

    def testUnknownPreset(self):
        with self.assertRaises(ConstraintError):
            measures.constraint_preset("torsion", {}, self.grids)

    def testExplicitTimeIndependent(self):
        spec = measures.constraint_preset("explicit", {"h": [[1.0] * 8], "f": [1.0]}, self.grids)
        self.assertTrue(spec.time_independent)
        self.assertEqual(spec.h_values.shape, (1, 5, 8))

    def testSamplesContinuousInTime(self):
        def jump(temporal):
            spec = measures.constraint_preset("barrier", {"start": [0.2, 0.4], "end": [0.6, 0.8]},
                                              build_grids("interval", 64, temporal))
            return np.max(np.abs(np.diff(spec.h_values, axis=1)))
        self.assertLess(jump(64), jump(16), msg="samples of a moving barrier get closer with more steps")


class EvalAndFeasibilityTest(unittest.TestCase):
    def setUp(self):
        self.spatial, self.temporal = build_grids("interval", 8, 4)
        self.grids = (self.spatial, self.temporal)
        self.rho = measures.make_measure(measures.Uniform(1.0), self.spatial)

    def testConstantPathSatisfiesSphericalHk(self):
        spec = measures.constraint_preset("spherical_hk", {}, self.grids)
        path = np.repeat(self.rho.density[None, :], 5, axis=0)
        np.testing.assert_allclose(measures.constraint_eval(spec, path), 0.0, atol=1e-14)

    def testScaledPathSatisfiesTotalMass(self):
        spec = measures.constraint_preset("total_mass", {"F": {"poly": [1.0, 1.0]}}, self.grids)
        path = (1.0 + self.temporal.nodes[:, None]) * self.rho.density[None, :]
        np.testing.assert_allclose(measures.constraint_eval(spec, path), 0.0, atol=1e-14)

    def testLinearity(self):
        rng = np.random.default_rng(2)
        spec = measures.constraint_preset("moment", {"centers": [0.2, 0.7]}, self.grids)
        first, second = rng.normal(size=(2, 5, 8))
        combined = measures.constraint_values(spec, 2.0 * first - 3.0 * second)
        expected = 2.0 * measures.constraint_values(spec, first) - 3.0 * measures.constraint_values(spec, second)
        np.testing.assert_allclose(combined, expected, atol=1e-12)

    def testFeasibility(self):
        spec = measures.constraint_preset("total_mass", {"F": {"poly": [1.0, 1.0]}}, self.grids)
        report = measures.check_feasibility(spec, self.rho, self.rho.scaled(2.0))
        self.assertTrue(report.feasible, msg=str(report))
        report = measures.check_feasibility(spec, self.rho, self.rho.scaled(3.0))
        self.assertFalse(report.feasible)
        np.testing.assert_allclose(report.residual_1, [1.0], atol=1e-12)
        self.assertEqual(report.to_dict()["feasible"], False)

    def testShapeMismatch(self):
        spec = measures.constraint_preset("spherical_hk", {}, self.grids)
        with self.assertRaises(ShapeMismatchError):
            measures.constraint_eval(spec, np.ones((4, 8)))


class TimeFunctionTest(unittest.TestCase):
    def setUp(self):
        _, self.temporal = build_grids("interval", 2, 4)

    def testForms(self):
        nodes = self.temporal.nodes
        np.testing.assert_allclose(measures.sample_time_function(2.0, self.temporal), 2.0)
        np.testing.assert_allclose(measures.sample_time_function(lambda t: t ** 2, self.temporal), nodes ** 2)
        np.testing.assert_allclose(measures.sample_time_function({"poly": [1, 0, 1]}, self.temporal),
                                   1 + nodes ** 2)
        np.testing.assert_allclose(measures.sample_time_function({"samples": [1, 2, 3, 4, 5]}, self.temporal),
                                   [1, 2, 3, 4, 5])

    def testWrongSampleCount(self):
        with self.assertRaises(ConstraintError):
            measures.sample_time_function({"samples": [1, 2]}, self.temporal)
        with self.assertRaises(ConstraintError):
            measures.sample_time_function({"spline": [1, 2]}, self.temporal)

    def testNonNumericValues(self):
        for value in ("abc", {"poly": ["a", 1]}, {"samples": "abcde"}, [None, 1, 2, 3, 4]):
            with self.assertRaises(ConstraintError, msg=repr(value)):
                measures.sample_time_function(value, self.temporal)


if __name__ == "__main__":
    unittest.main()
