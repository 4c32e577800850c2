import unittest

import numpy as np

from cwfr import paths
from cwfr.errors import PathConstructionError, ShapeMismatchError
from cwfr.grid import build_grids
from cwfr.measures import Block, Bump, DiracCell, Uniform, constraint_eval, constraint_preset, make_measure

LOG2_HALF = 0.5 * np.log(2.0)
LINEAR_MASS = {"poly": [1.0, 1.0]}


class ConstructorTest(unittest.TestCase):
    def setUp(self):
        self.grids = build_grids("interval", 32, 16)
        spatial, _ = self.grids
        self.rho0 = make_measure(Bump(0.3, 0.1, 1.0), spatial)
        self.rho1 = make_measure(Bump(0.7, 0.15, 1.0), spatial)

    def _all_paths(self):
        double = self.rho0.scaled(2.0)
        return {
            "constant": paths.constant_path(self.rho0, self.grids, 1.0),
            "teleport": paths.teleport_path(self.rho0, self.rho1, self.grids, 1.0),
            "linear_fr": paths.linear_fr_path(self.rho0, self.rho1, self.grids, 1.0),
            "scaling": paths.scaling_path(self.rho0, LINEAR_MASS, self.grids, 1.0),
            "balanced_quantile": paths.balanced_quantile_path(self.rho0, self.rho1, self.grids, 1.0),
            "scaled_balanced": paths.scaled_balanced_path(self.rho0, self.rho1.scaled(2.0), LINEAR_MASS,
                                                          self.grids, 1.0),
            "reverse": paths.time_reverse(paths.linear_fr_path(self.rho0, double, self.grids, 1.0)),
        }

    def testContinuityHoldsExactly(self):
        for name, path in self._all_paths().items():
            self.assertLess(path.max_continuity_residual(), 1e-10, msg="continuity residual of {}".format(name))
            self.assertGreaterEqual(path.energy(), 0.0, msg="energy of {}".format(name))
        self.assertEqual(sorted(paths.PATH_CONSTRUCTORS),
                         sorted(set(self._all_paths()) - {"reverse"}))

    def testEndpointsAreReproduced(self):
        for name in ("teleport", "linear_fr", "balanced_quantile"):
            path = self._all_paths()[name]
            np.testing.assert_array_equal(path.rho_nodes[0], self.rho0.density, err_msg=name)
            np.testing.assert_array_equal(path.rho_nodes[-1], self.rho1.density, err_msg=name)

    def testConstantPathHasZeroEnergy(self):
        self.assertEqual(paths.constant_path(self.rho0, self.grids, 1.0).energy(), 0.0)

    def testMeasureOnOtherGrid(self):
        other = make_measure(Uniform(1.0), build_grids("interval", 8, 1)[0])
        with self.assertRaises(ShapeMismatchError):
            paths.linear_fr_path(self.rho0, other, self.grids, 1.0)


class TeleportTest(unittest.TestCase):
    def setUp(self):
        self.spatial, self.temporal = build_grids("circle", 10, 8)
        self.rho0 = make_measure(Uniform(1.0), self.spatial)
        self.rho1 = make_measure(DiracCell(3, 0.5), self.spatial)

    def testHalfwayDensityVanishes(self):
        path = paths.teleport_path(self.rho0, self.rho1, (self.spatial, self.temporal), 1.0)
        np.testing.assert_array_equal(path.rho_nodes[4], 0.0)
        np.testing.assert_array_equal(path.omega_faces, 0.0)
        self.assertAlmostEqual(path.sqrt_energy(), paths.teleport_energy_bound(self.rho0, self.rho1, 1.0),
                               places=10)

    def testOddStepsRejected(self):
        with self.assertRaises(PathConstructionError):
            paths.teleport_path(self.rho0, self.rho1, build_grids("circle", 10, 7), 1.0)


class LinearFisherRaoTest(unittest.TestCase):
    def setUp(self):
        self.spatial, _ = build_grids("interval", 16, 64)
        self.grids = build_grids("interval", 16, 64)

    def testEqualEndpoints(self):
        rho = make_measure(Bump(0.5, 0.2), self.spatial)
        path = paths.linear_fr_path(rho, rho, self.grids, 1.0)
        self.assertAlmostEqual(path.energy(), 0.0, places=12)

    def testDoublingMatchesScalingEnergy(self):
        rho = make_measure(Uniform(1.0), self.spatial)
        path = paths.linear_fr_path(rho, rho.scaled(2.0), self.grids, 1.0)
        self.assertAlmostEqual(path.energy(), LOG2_HALF, delta=1e-3)
        np.testing.assert_allclose(path.zeta_mid, 1.0, err_msg="source is constant in time")

    def testDisjointDiracsDivergeLogarithmically(self):
        rho0 = make_measure(DiracCell(2, 1.0), self.spatial)
        rho1 = make_measure(DiracCell(12, 1.0), self.spatial)
        energies = []
        for n_steps in (16, 64):
            grids = build_grids("interval", 16, n_steps)
            energy = paths.linear_fr_path(rho0, rho1, grids, 1.0).energy()
            harmonic = np.sum(1.0 / (np.arange(n_steps) + 0.5))
            self.assertAlmostEqual(energy, harmonic, delta=1e-10 * harmonic,
                                   msg="(delta^2 / 2) (m0 + m1) sum 1 / (j + 1/2) with n = {}".format(n_steps))
            energies.append(energy)
        self.assertAlmostEqual(energies[1] - energies[0], np.log(4.0), delta=0.05)


class ScalingTest(unittest.TestCase):
    def setUp(self):
        self.spatial, _ = build_grids("interval", 8, 1)
        self.rho0 = make_measure(Uniform(1.0), self.spatial)

    def testClosedForm(self):
        self.assertAlmostEqual(paths.scaling_energy(LINEAR_MASS, 1.0), LOG2_HALF, places=6)
        self.assertAlmostEqual(paths.scaling_energy(LINEAR_MASS, 2.0), 4.0 * LOG2_HALF, places=6)

    def testConvergesToClosedForm(self):
        errors = []
        for n_steps in (4, 8, 16, 32, 64):
            grids = build_grids("interval", 8, n_steps)
            path = paths.scaling_path(self.rho0, LINEAR_MASS, grids, 1.0)
            errors.append(abs(path.energy() - LOG2_HALF))
            np.testing.assert_allclose(constraint_eval(constraint_preset("total_mass", {"F": LINEAR_MASS}, grids),
                                                       path.rho_nodes), 0.0, atol=1e-13)
        self.assertTrue(all(later < earlier for earlier, later in zip(errors, errors[1:])), msg=str(errors))
        self.assertLess(errors[-1], 1e-3)

    def testConstantMassIsStationary(self):
        path = paths.scaling_path(self.rho0, 1.0, build_grids("interval", 8, 4), 1.0)
        np.testing.assert_array_equal(path.zeta_mid, 0.0)
        self.assertEqual(path.energy(), 0.0)

    def testPreconditions(self):
        grids = build_grids("interval", 8, 4)
        with self.assertRaises(PathConstructionError):
            paths.scaling_path(self.rho0, {"poly": [2.0, 1.0]}, grids, 1.0)
        with self.assertRaises(PathConstructionError):
            paths.scaling_path(self.rho0, {"poly": [1.0, -2.0]}, grids, 1.0)


class BalancedQuantileTest(unittest.TestCase):
    def setUp(self):
        self.grids = build_grids("interval", 64, 64)
        self.spatial = self.grids[0]

    def testEqualEndpoints(self):
        rho = make_measure(Bump(0.4, 0.15), self.spatial)
        path = paths.balanced_quantile_path(rho, rho, self.grids, 1.0)
        self.assertAlmostEqual(path.energy(), 0.0, places=12)
        np.testing.assert_array_equal(path.zeta_mid, 0.0)

    def testBlockTranslation(self):
        rho0 = make_measure(Block(0.0, 0.5), self.spatial)
        rho1 = make_measure(Block(0.5, 1.0), self.spatial)
        path = paths.balanced_quantile_path(rho0, rho1, self.grids, 1.0)
        self.assertAlmostEqual(path.energy(), 0.125, delta=0.05 * 0.125, msg="half of the squared distance")
        np.testing.assert_allclose(path.rho_nodes[32], make_measure(Block(0.25, 0.75), self.spatial).density,
                                   atol=1e-10, err_msg="halfway the block sits in the middle")
        np.testing.assert_array_equal(path.omega_faces[:, [0, -1]], 0.0)

    def testDiracTranslation(self):
        rho0 = make_measure(DiracCell(16), self.spatial)
        rho1 = make_measure(DiracCell(48), self.spatial)
        energy = paths.balanced_quantile_path(rho0, rho1, self.grids, 1.0).energy()
        self.assertGreaterEqual(energy, 0.125)
        self.assertLessEqual(energy, 0.2)

    def testPreconditions(self):
        rho = make_measure(Uniform(1.0), self.spatial)
        with self.assertRaises(PathConstructionError):
            paths.balanced_quantile_path(rho, rho.scaled(2.0), self.grids, 1.0)
        circle = build_grids("circle", 8, 4)
        on_circle = make_measure(Uniform(1.0), circle[0])
        with self.assertRaises(PathConstructionError):
            paths.balanced_quantile_path(on_circle, on_circle, circle, 1.0)


class ScaledBalancedTest(unittest.TestCase):
    def setUp(self):
        self.grids = build_grids("interval", 48, 48)
        spatial = self.grids[0]
        self.rho0 = make_measure(Bump(0.35, 0.15), spatial)
        self.rho1 = make_measure(Bump(0.65, 0.15), spatial)

    def testUnitMassReducesToBalanced(self):
        scaled = paths.scaled_balanced_path(self.rho0, self.rho1, 1.0, self.grids, 1.0)
        balanced = paths.balanced_quantile_path(self.rho0, self.rho1, self.grids, 1.0)
        np.testing.assert_allclose(scaled.rho_nodes, balanced.rho_nodes, atol=1e-12)
        np.testing.assert_allclose(scaled.omega_faces, balanced.omega_faces, atol=1e-12)
        np.testing.assert_allclose(scaled.zeta_mid, 0.0, atol=1e-9)

    def testEnergyBound(self):
        end = self.rho1.scaled(2.0)
        path = paths.scaled_balanced_path(self.rho0, end, LINEAR_MASS, self.grids, 1.0)
        np.testing.assert_array_equal(path.rho_nodes[-1], end.density)
        balanced = paths.balanced_quantile_path(self.rho0, self.rho1, self.grids, 1.0).energy()
        bound = paths.scaled_balanced_energy_bound(balanced, LINEAR_MASS, 1.0)
        self.assertLessEqual(path.energy(), 1.1 * bound)

    def testMassMismatch(self):
        with self.assertRaises(PathConstructionError):
            paths.scaled_balanced_path(self.rho0, self.rho1, LINEAR_MASS, self.grids, 1.0)


class ReverseAndConcatenateTest(unittest.TestCase):
    def setUp(self):
        self.grids = build_grids("interval", 16, 8)
        spatial = self.grids[0]
        self.rho = make_measure(Uniform(1.0), spatial)
        self.bump = make_measure(Bump(0.6, 0.2, 2.0), spatial)

    def testDoubleReverseIsIdentity(self):
        path = paths.linear_fr_path(self.rho, self.bump, self.grids, 1.0)
        twice = paths.time_reverse(paths.time_reverse(path))
        np.testing.assert_array_equal(twice.rho_nodes, path.rho_nodes)
        np.testing.assert_array_equal(twice.omega_faces, path.omega_faces)
        np.testing.assert_array_equal(twice.zeta_mid, path.zeta_mid)
        self.assertAlmostEqual(paths.time_reverse(path).energy(), path.energy(), delta=1e-12 * path.energy())

    def testConcatenationDoublesEnergy(self):
        first = paths.scaling_path(self.rho, LINEAR_MASS, self.grids, 1.0)
        second = paths.linear_fr_path(self.rho.scaled(2.0), self.bump, self.grids, 1.0)
        joined = paths.concatenate(first, second)
        self.assertEqual(joined.temporal.n_steps, 16)
        expected = 2.0 * (first.energy() + second.energy())
        self.assertAlmostEqual(joined.energy(), expected, delta=1e-10 * expected)
        self.assertLess(joined.max_continuity_residual(), 1e-10)

    def testGapRejected(self):
        first = paths.constant_path(self.rho, self.grids, 1.0)
        second = paths.constant_path(self.bump, self.grids, 1.0)
        with self.assertRaises(PathConstructionError):
            paths.concatenate(first, second)


if __name__ == "__main__":
    unittest.main()
