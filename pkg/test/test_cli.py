import contextlib
import io
import json
import os
import tempfile
import unittest

import numpy as np

from cwfr import cli, frames
from cwfr.grid import build_grids


class CliTestCase(unittest.TestCase):
    def setUp(self):
        self.folder = tempfile.TemporaryDirectory()
        self.addCleanup(self.folder.cleanup)

    def _file(self, name):
        return os.path.join(self.folder.name, name)

    def _config(self, **overrides):
        document = {
            "domain": {"kind": "interval", "n_cells": 8},
            "time": {"n_steps": 8},
            "delta": 1.0,
            "rho0": {"preset": "uniform", "params": {"mass": 1.0}},
            "rho1": {"preset": "uniform", "params": {"mass": 1.0}},
        }
        document.update(overrides)
        with open(self._file("run.json"), "w") as output:
            json.dump(document, output)
        return self._file("run.json")

    def _main(self, *argv):
        stdout = io.StringIO()
        with contextlib.redirect_stdout(stdout), contextlib.redirect_stderr(io.StringIO()):
            code = cli.main(list(argv) + ["--quiet", "--out", self._file("out")])
        return code, stdout.getvalue()

    def testTeleportPath(self):
        code, output = self._main("path", self._config(), "--constructor", "teleport")
        self.assertEqual(code, cli.EXIT_OK)
        summary = json.loads(output)
        self.assertAlmostEqual(summary["sqrt_midpoint_energy"], 8.0, places=10, msg="4 delta^2 (m0 + m1)")
        self.assertLess(summary["continuity_residual"], 1e-10)
        self.assertTrue(os.path.isfile(self._file("out/path.npz")))
        self.assertTrue(os.path.isfile(self._file("out/frames.csv")))

    def testInfeasibleEndpoints(self):
        config = self._config(rho1={"preset": "uniform", "params": {"mass": 3.0}},
                              constraint={"preset": "total_mass", "params": {"F": {"poly": [1.0, 1.0]}}})
        code, output = self._main("solve", config)
        self.assertEqual(code, cli.EXIT_INFEASIBLE)
        report = json.loads(output)
        self.assertFalse(report["feasible"])
        self.assertAlmostEqual(report["residual_1"][0], 1.0, places=10)

    def testUnknownKey(self):
        code, _ = self._main("solve", self._config(deltas=2.0))
        self.assertEqual(code, cli.EXIT_CONFIG)

    def testNonNumericTarget(self):
        constraint = {"preset": "total_mass", "params": {"F": "abc"}}
        code, _ = self._main("solve", self._config(constraint=constraint))
        self.assertEqual(code, cli.EXIT_CONFIG)

    def testBalancedPathOnCircle(self):
        code, _ = self._main("path", self._config(domain={"kind": "circle", "n_cells": 8}),
                             "--constructor", "balanced_quantile")
        self.assertEqual(code, cli.EXIT_INFEASIBLE)

    def testCertify(self):
        config = self._config(rho1={"preset": "uniform", "params": {"mass": 2.0}},
                              constraint={"preset": "total_mass", "params": {"F": {"poly": [1.0, 1.0]}}},
                              time={"n_steps": 64})
        code, _ = self._main("path", config, "--constructor", "scaling")
        self.assertEqual(code, cli.EXIT_OK)
        spatial, temporal = build_grids("interval", 8, 64)
        phi = 1.0 / (1.0 + temporal.nodes[:, None]) * np.ones((1, 8))
        frames.write_potential_csv(temporal.nodes, spatial.cell_centers, phi, self._file("phi.csv"))
        frames.write_potential_csv(temporal.nodes, spatial.cell_centers, phi + 0.1, self._file("shifted.csv"))
        frames.write_potential_csv(temporal.nodes[:-1], spatial.cell_centers, phi[:-1], self._file("short.csv"))
        archive = self._file("out/path.npz")

        code, output = self._main("certify", config, "--path", archive, "--phi", self._file("phi.csv"))
        self.assertEqual(code, cli.EXIT_OK, msg=output)
        with open(self._file("out/certificate.json")) as report:
            self.assertTrue(json.load(report)["certified"])
        code, _ = self._main("certify", config, "--path", archive, "--phi", self._file("shifted.csv"))
        self.assertEqual(code, cli.EXIT_NOT_CERTIFIED)
        code, _ = self._main("certify", config, "--path", archive, "--phi", self._file("short.csv"))
        self.assertEqual(code, cli.EXIT_CONFIG)

    def testSolveWritesOutputs(self):
        config = self._config(domain={"kind": "circle", "n_cells": 4}, time={"n_steps": 4},
                              rho1={"preset": "uniform", "params": {"mass": 4.0}},
                              solver={"max_iters": 50, "log_every": 10},
                              outputs={"formats": ["csv", "json", "xlsx"], "frame_stride": 2})
        code, output = self._main("solve", config, "--seed", "7")
        self.assertEqual(code, cli.EXIT_OK)
        summary = json.loads(output)
        self.assertEqual(summary["seed"], 7)
        self.assertLessEqual(summary["iterations"], 50)
        for name in ("path.npz", "phi.csv", "frames.csv", "convergence.csv", "summary.json", "report.xlsx"):
            self.assertTrue(os.path.isfile(self._file(os.path.join("out", name))), msg=name)
        table = frames.FrameTable.from_csv(self._file("out/frames.csv"))
        self.assertEqual(table.times.size, 2)
        self.assertEqual(frames.read_potential_csv(self._file("out/phi.csv")).shape, (5, 4))

    def testDistance(self):
        config = self._config(solver={"max_iters": 5})
        code, output = self._main("distance", config)
        self.assertEqual(code, cli.EXIT_OK)
        self.assertGreaterEqual(float(output), 0.0)


if __name__ == "__main__":
    unittest.main()
