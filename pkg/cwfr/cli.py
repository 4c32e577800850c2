# -*- coding: utf-8 -*-
# MIT License
#
# Copyright (c) 2019 Konrad Pagacz
#
# Permission is hereby granted, free of charge, to any person obtaining a copy
# of this software and associated documentation files (the "Software"), to deal
# in the Software without restriction, including without limitation the rights
# to use, copy, modify, merge, publish, distribute, sublicense, and/or sell
# copies of the Software, and to permit persons to whom the Software is
# furnished to do so, subject to the following conditions:
#
# The above copyright notice and this permission notice shall be included in all
# copies or substantial portions of the Software.
#
# THE SOFTWARE IS PROVIDED "AS IS", WITHOUT WARRANTY OF ANY KIND, EXPRESS OR
# IMPLIED, INCLUDING BUT NOT LIMITED TO THE WARRANTIES OF MERCHANTABILITY,
# FITNESS FOR A PARTICULAR PURPOSE AND NONINFRINGEMENT. IN NO EVENT SHALL THE
# AUTHORS OR COPYRIGHT HOLDERS BE LIABLE FOR ANY CLAIM, DAMAGES OR OTHER
# LIABILITY, WHETHER IN AN ACTION OF CONTRACT, TORT OR OTHERWISE, ARISING FROM,
# OUT OF OR IN CONNECTION WITH THE SOFTWARE OR THE USE OR OTHER DEALINGS IN THE
# SOFTWARE.
"""Command-line front end.

Commands:
    solve <config>                          minimize the energy, write frames and logs
    path <config> --constructor <name>      build an explicit path and report its energy
    certify <config> --path <npz> --phi <csv>
    distance <config>                       solve and print the distance only

Exit codes: 0 success, 1 not certified, 2 configuration or shape error,
3 infeasible endpoints or failed path preconditions, 4 solver failure.
"""
import argparse
import json
import logging
import os
import sys
from typing import List, Optional

import numpy as np

from cwfr import frames
from cwfr.certify import certify
from cwfr.config import RunConfig
from cwfr.errors import (ConfigError, ConstraintError, GridSizeError, InfeasibleProblemError, MeasureError,
                         PathConstructionError, ShapeMismatchError, SolverError)
from cwfr.measures import check_feasibility
from cwfr.paths import (PATH_CONSTRUCTORS, balanced_quantile_path, constant_path, linear_fr_path,
                        scaled_balanced_path, scaling_path, teleport_path)
from cwfr.solver import solve

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_NOT_CERTIFIED = 1
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_SOLVER = 4


def _load_config(args: argparse.Namespace) -> RunConfig:
    config = RunConfig.from_file(args.config)
    if args.seed is not None:
        config.seed = args.seed
    return config


def _output_dir(args: argparse.Namespace, config: RunConfig) -> str:
    return os.path.normpath(args.out or config.outputs.directory)


def _print_document(document: dict):
    print(json.dumps(document, indent=2, sort_keys=True))


def _write_path_outputs(out: str, config: RunConfig, path, summary: dict, log=None, phi_nodes=None):
    options = config.outputs
    table = frames.FrameTable.from_path(path, options.frame_stride)
    frames.save_path(path, os.path.join(out, "path.npz"))
    if phi_nodes is not None:
        frames.write_potential_csv(path.temporal.nodes, path.spatial.cell_centers, phi_nodes,
                                   os.path.join(out, "phi.csv"))
    if "csv" in options.formats:
        table.to_csv(os.path.join(out, "frames.csv"))
        if log is not None:
            frames.write_convergence_csv(log, os.path.join(out, "convergence.csv"))
    if "xlsx" in options.formats:
        frames.write_report_excel(os.path.join(out, "report.xlsx"), table, log, summary)
    if "json" in options.formats:
        frames.write_json(summary, os.path.join(out, "summary.json"))
    logger.info("outputs written to %s", out)


def cmd_solve(args: argparse.Namespace) -> int:
    """Runs the solver on a configuration and writes its outputs."""
    config = _load_config(args)
    solution = solve(config.problem(), config.solver_params(progress=not args.quiet))
    summary = solution.summary()
    summary["seed"] = config.seed
    _write_path_outputs(_output_dir(args, config), config, solution.path, summary, solution.log,
                        solution.phi_nodes)
    _print_document(summary)
    return EXIT_OK


def cmd_distance(args: argparse.Namespace) -> int:
    config = _load_config(args)
    solution = solve(config.problem(), config.solver_params(progress=not args.quiet))
    print(repr(solution.distance))
    return EXIT_OK


def _mass_targets(config: RunConfig, constructor: str) -> np.ndarray:
    spec = config.constraint()
    if spec.d != 1 or not np.all(spec.h_values == 1.0):
        raise PathConstructionError("the {} path needs a total-mass constraint (H = 1)".format(constructor))
    return spec.f_values[:, 0]


def build_path(config: RunConfig, constructor: str):
    """Builds the named path for the endpoints and constraint of ``config``."""
    grids = config.grids()
    rho0, rho1, delta = config.measure("rho0"), config.measure("rho1"), config.delta
    if constructor == "teleport":
        spec = config.constraint()
        if spec.d:
            if np.any(spec.f_values != 0):
                raise PathConstructionError("the teleport path needs a constraint with F = 0")
            report = check_feasibility(spec, rho0, rho1)
            if not report.feasible:
                raise InfeasibleProblemError("endpoints violate the constraint: {}".format(report), report)
        return teleport_path(rho0, rho1, grids, delta)
    if constructor == "linear_fr":
        return linear_fr_path(rho0, rho1, grids, delta)
    if constructor == "scaling":
        return scaling_path(rho0, _mass_targets(config, constructor), grids, delta)
    if constructor == "balanced_quantile":
        return balanced_quantile_path(rho0, rho1, grids, delta)
    if constructor == "scaled_balanced":
        return scaled_balanced_path(rho0, rho1, _mass_targets(config, constructor), grids, delta)
    if constructor == "constant":
        return constant_path(rho0, grids, delta)
    raise PathConstructionError("Unknown constructor {!r}. Available are: {}".format(constructor, PATH_CONSTRUCTORS))


def cmd_path(args: argparse.Namespace) -> int:
    """Builds an explicit path, writes its frames and prints its energy."""
    config = _load_config(args)
    path = build_path(config, args.constructor)
    summary = {"constructor": args.constructor,
               "energy": path.energy(),
               "sqrt_midpoint_energy": path.sqrt_energy(),
               "continuity_residual": path.max_continuity_residual()}
    _write_path_outputs(_output_dir(args, config), config, path, summary)
    _print_document(summary)
    return EXIT_OK


def cmd_certify(args: argparse.Namespace) -> int:
    """Checks a potential against a stored path; exit 1 when not certified."""
    config = _load_config(args)
    spatial, _ = config.grids()
    path = frames.load_path(args.path, spatial, config.delta)
    phi = frames.read_potential_csv(args.phi)
    report = certify(path, phi, config.constraint(), config.delta, tol=config.certify_tol)
    frames.write_json(report.to_dict(), os.path.join(_output_dir(args, config), "certificate.json"))
    print(report)
    return EXIT_OK if report.certified else EXIT_NOT_CERTIFIED


def _run(func, args: argparse.Namespace) -> int:
    try:
        return int(func(args))
    except (ConfigError, ShapeMismatchError, GridSizeError, MeasureError, ConstraintError) as error:
        print("configuration error: {}".format(error), file=sys.stderr)
        return EXIT_CONFIG
    except InfeasibleProblemError as error:
        print("infeasible problem: {}".format(error), file=sys.stderr)
        if error.report is not None:
            _print_document(error.report.to_dict())
        return EXIT_INFEASIBLE
    except PathConstructionError as error:
        print("cannot build path: {}".format(error), file=sys.stderr)
        return EXIT_INFEASIBLE
    except SolverError as error:
        print("solver failed: {}".format(error), file=sys.stderr)
        return EXIT_SOLVER


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("config", help="path to the JSON run configuration")
    common.add_argument("--out", default=None, help="output folder, overrides outputs.directory")
    common.add_argument("--seed", type=int, default=None, help="seed for random measure presets")
    common.add_argument("--quiet", action="store_true", help="only warnings on the log, no progress bar")

    parser = argparse.ArgumentParser(prog="cwfr",
                                     description="Constrained Wasserstein-Fisher-Rao transport solver.")
    subparsers = parser.add_subparsers(dest="cmd", required=True)

    sp = subparsers.add_parser("solve", parents=[common], help="minimize the energy")
    sp.set_defaults(func=cmd_solve)

    sp = subparsers.add_parser("path", parents=[common], help="build an explicit path")
    sp.add_argument("--constructor", required=True, choices=PATH_CONSTRUCTORS)
    sp.set_defaults(func=cmd_path)

    sp = subparsers.add_parser("certify", parents=[common], help="check an optimality certificate")
    sp.add_argument("--path", required=True, help="path archive (.npz) written by solve or path")
    sp.add_argument("--phi", required=True, help="potential table (t,x,phi) at time nodes")
    sp.set_defaults(func=cmd_certify)

    sp = subparsers.add_parser("distance", parents=[common], help="solve and print the distance only")
    sp.set_defaults(func=cmd_distance)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", force=True)
    return _run(args.func, args)


if __name__ == "__main__":
    sys.exit(main())
