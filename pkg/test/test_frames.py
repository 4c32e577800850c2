import os
import tempfile
import unittest

import numpy as np
import openpyxl

from cwfr import frames
from cwfr.errors import ShapeMismatchError
from cwfr.grid import build_grids
from cwfr.measures import Block, Bump, make_measure
from cwfr.paths import PathTriple, balanced_quantile_path, linear_fr_path
from cwfr.solver import ConvergenceLog, ConvergenceRecord


class FrameTableTestCase(unittest.TestCase):
    def setUp(self):
        self.folder = tempfile.TemporaryDirectory()
        self.addCleanup(self.folder.cleanup)
        self.grids = build_grids("interval", 12, 6)
        spatial, _ = self.grids
        self.path = balanced_quantile_path(make_measure(Block(0.0, 0.5), spatial),
                                           make_measure(Bump(0.7, 0.1), spatial), self.grids, 1.0)

    def _file(self, name):
        return os.path.join(self.folder.name, name)

    def testFromPathShape(self):
        table = frames.FrameTable.from_path(self.path, stride=2)
        np.testing.assert_allclose(table.times, [1 / 12, 5 / 12, 9 / 12])
        self.assertEqual(table.rho.shape, (3, 12))
        self.assertEqual(len(list(table.rows())), 36)

    def testCsvRoundTripIsByteIdentical(self):
        first, second = self._file("frames.csv"), self._file("again/frames.csv")
        frames.FrameTable.from_path(self.path).to_csv(first)
        frames.FrameTable.from_csv(first).to_csv(second)
        with open(first, "rb") as left, open(second, "rb") as right:
            self.assertEqual(left.read(), right.read(), msg="csv written twice differs")
        with open(first) as csvfile:
            self.assertEqual(csvfile.readline(), "t,x,rho,omega,zeta\n")

    def testExcelRoundTrip(self):
        table = frames.FrameTable.from_path(self.path)
        table.to_excel(self._file("frames.xlsx"))
        loaded = frames.FrameTable.from_excel(self._file("frames.xlsx"))
        np.testing.assert_array_equal(loaded.rho, table.rho)
        np.testing.assert_array_equal(loaded.omega, table.omega)
        np.testing.assert_array_equal(loaded.times, table.times)

    def testMissingHeader(self):
        with open(self._file("bare.csv"), "w") as csvfile:
            csvfile.write("0.5,0.5,1,0,0\n")
        with self.assertRaises(ShapeMismatchError):
            frames.FrameTable.from_csv(self._file("bare.csv"))

    def testNegativeDensityIsClampedAndLogged(self):
        spatial, temporal = self.grids
        rho = np.ones((temporal.n_steps + 1, spatial.n_cells))
        rho[3, 4] = -3.0
        path = PathTriple.from_arrays(rho, np.zeros((6, 13)), np.zeros((6, 12)), spatial, 1.0)
        with self.assertLogs("cwfr.frames", level="WARNING") as logs:
            table = frames.FrameTable.from_path(path)
        self.assertTrue(np.all(table.rho >= 0))
        self.assertIn("1.000e+00", logs.output[0])

    def testDensityAt(self):
        table = frames.FrameTable.from_path(self.path)
        np.testing.assert_array_equal(table.density_at(table.times[2]), table.rho[2])
        with self.assertRaises(ShapeMismatchError):
            table.density_at(0.0)


class WritersTestCase(unittest.TestCase):
    def setUp(self):
        self.folder = tempfile.TemporaryDirectory()
        self.addCleanup(self.folder.cleanup)
        self.grids = build_grids("circle", 8, 4)
        spatial, _ = self.grids
        self.path = linear_fr_path(make_measure(Bump(0.2, 0.1), spatial), make_measure(Bump(0.6, 0.2, 2.0), spatial),
                                   self.grids, 0.5)
        self.log = ConvergenceLog([ConvergenceRecord(100, 1e-3, 0.5, 1e-12, 0.0),
                                   ConvergenceRecord(200, 1e-5, 0.4, 1e-12, 0.0)])

    def _file(self, name):
        return os.path.join(self.folder.name, name)

    def testConvergenceCsv(self):
        frames.write_convergence_csv(self.log, self._file("convergence.csv"))
        with open(self._file("convergence.csv")) as csvfile:
            lines = csvfile.read().splitlines()
        self.assertEqual(lines[0], "iteration,dr_residual,energy,ce_residual,constraint_residual")
        self.assertEqual(len(lines), 3)
        self.assertTrue(lines[2].startswith("200,"))

    def testReportWorkbook(self):
        table = frames.FrameTable.from_path(self.path)
        frames.write_report_excel(self._file("report.xlsx"), table, self.log, {"energy": 0.4, "g": [1, 2]})
        book = openpyxl.load_workbook(self._file("report.xlsx"))
        self.assertEqual(book.sheetnames, ["summary", "frames", "convergence"])
        self.assertEqual(book["summary"]["B2"].value, "[1, 2]")
        self.assertEqual(book["convergence"].max_row, 3)

    def testPotentialRoundTrip(self):
        spatial, temporal = self.grids
        phi = np.arange(40, dtype=float).reshape(5, 8) / 7.0
        frames.write_potential_csv(temporal.nodes, spatial.cell_centers, phi, self._file("phi.csv"))
        np.testing.assert_array_equal(frames.read_potential_csv(self._file("phi.csv")), phi)

    def testPathArchive(self):
        spatial, _ = self.grids
        frames.save_path(self.path, self._file("path.npz"))
        loaded = frames.load_path(self._file("path.npz"), spatial)
        np.testing.assert_array_equal(loaded.rho_nodes, self.path.rho_nodes)
        np.testing.assert_array_equal(loaded.zeta_mid, self.path.zeta_mid)
        self.assertEqual(loaded.delta, 0.5)
        with self.assertRaises(ShapeMismatchError):
            frames.load_path(self._file("path.npz"), build_grids("interval", 8, 4)[0])

    def testJsonIsSorted(self):
        frames.write_json({"b": 1, "a": [0.5]}, self._file("out/summary.json"))
        with open(self._file("out/summary.json")) as jsonfile:
            self.assertEqual(jsonfile.read(), '{\n  "a": [\n    0.5\n  ],\n  "b": 1\n}\n')


if __name__ == "__main__":
    unittest.main()
