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
"""Run configuration documents.

A run configuration is a JSON document validated against
``RUN_CONFIG_SCHEMA`` before anything is computed. ``RunConfig`` turns it
into grids, measures, constraints, a Problem and SolverParams.
"""
import json
import logging
import os
from dataclasses import dataclass, fields
from typing import Tuple

import jsonschema

from cwfr.errors import ConfigError, ShapeMismatchError
from cwfr.frames import FrameTable
from cwfr.grid import SpatialGrid, TimeGrid, build_grids
from cwfr.measures import (CONSTRAINT_PRESETS, MEASURE_PRESETS, ConstraintSpec, DiscreteMeasure,
                           constraint_preset, make_measure)
from cwfr.solver import Problem, SolverParams

logger = logging.getLogger(__name__)

OUTPUT_FORMATS = ["csv", "json", "xlsx"]

_MEASURE_SCHEMA = {
    "oneOf": [
        {"type": "object", "additionalProperties": False, "required": ["preset"],
         "properties": {"preset": {"enum": sorted(MEASURE_PRESETS)},
                        "params": {"type": "object"}}},
        {"type": "object", "additionalProperties": False, "required": ["density"],
         "properties": {"density": {"type": "array", "items": {"type": "number", "minimum": 0}}}},
        {"type": "object", "additionalProperties": False, "required": ["frames", "t"],
         "properties": {"frames": {"type": "string"}, "t": {"type": "number"}}},
    ]
}

RUN_CONFIG_SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "title": "cwfr run configuration",
    "type": "object",
    "additionalProperties": False,
    "required": ["domain", "time", "delta", "rho0", "rho1"],
    "definitions": {"measure": _MEASURE_SCHEMA},
    "properties": {
        "domain": {"type": "object", "additionalProperties": False, "required": ["kind", "n_cells"],
                   "properties": {"kind": {"enum": ["interval", "circle"]},
                                  "n_cells": {"type": "integer", "minimum": 2}}},
        "time": {"type": "object", "additionalProperties": False, "required": ["n_steps"],
                 "properties": {"n_steps": {"type": "integer", "minimum": 1}}},
        "delta": {"type": "number", "exclusiveMinimum": 0},
        "rho0": {"$ref": "#/definitions/measure"},
        "rho1": {"$ref": "#/definitions/measure"},
        "constraint": {"type": "object", "additionalProperties": False, "required": ["preset"],
                       "properties": {"preset": {"enum": CONSTRAINT_PRESETS},
                                      "params": {"type": "object"}}},
        "balanced": {"type": "boolean"},
        "solver": {"type": "object", "additionalProperties": False,
                   "properties": {"max_iters": {"type": "integer", "minimum": 1},
                                  "dr_step": {"type": "number", "exclusiveMinimum": 0},
                                  "relaxation": {"type": "number", "exclusiveMinimum": 0, "maximum": 2},
                                  "cg_tol": {"type": "number", "exclusiveMinimum": 0},
                                  "cg_max_iters": {"type": "integer", "minimum": 1},
                                  "fixed_point_tol": {"type": "number", "exclusiveMinimum": 0},
                                  "log_every": {"type": "integer", "minimum": 1}}},
        "certify": {"type": "object", "additionalProperties": False,
                    "properties": {"tol": {"type": "number", "exclusiveMinimum": 0}}},
        "outputs": {"type": "object", "additionalProperties": False,
                    "properties": {"directory": {"type": "string"},
                                   "frame_stride": {"type": "integer", "minimum": 1},
                                   "formats": {"type": "array", "uniqueItems": True,
                                               "items": {"enum": OUTPUT_FORMATS}}}},
        "seed": {"type": "integer", "minimum": 0},
    },
}


@dataclass(frozen=True)
class OutputOptions:
    directory: str = "wfr_output"
    frame_stride: int = 1
    formats: Tuple[str, ...] = ("csv", "json")


def _describe(error: jsonschema.ValidationError) -> str:
    location = "/".join(str(part) for part in error.absolute_path) or "<root>"
    return "{}: {}".format(location, error.message)


class RunConfig:
    """A validated run configuration.

    Methods:
        from_file
        grids
        measure
        constraint
        problem
        solver_params

    Attributes:
        document: the validated JSON document
        base_dir: folder relative frame files are resolved against
    """

    def __init__(self, document: dict, base_dir: str = "."):
        validator = jsonschema.Draft7Validator(RUN_CONFIG_SCHEMA)
        error = jsonschema.exceptions.best_match(validator.iter_errors(document))
        if error is not None:
            raise ConfigError("invalid configuration at {}".format(_describe(error)))
        self._document = document
        self.base_dir = base_dir

    @classmethod
    def from_file(cls, file_name: str):
        """Reads and validates a JSON configuration file.

        Args:
            file_name (str): path to the .json file

        Returns:
            config.RunConfig
        """
        if not os.path.isfile(file_name):
            raise ConfigError("{} is not a valid path to a file".format(file_name))
        with open(file_name, "rt", encoding="utf-8-sig") as file:
            try:
                document = json.load(file)
            except json.JSONDecodeError as error:
                raise ConfigError("{} line {} column {}: {}".format(
                    file_name, error.lineno, error.colno, error.msg)) from error
        return cls(document, base_dir=os.path.dirname(os.path.abspath(file_name)))

    @property
    def document(self) -> dict:
        return self._document

    @property
    def delta(self) -> float:
        return float(self._document["delta"])

    @property
    def balanced(self) -> bool:
        return bool(self._document.get("balanced", False))

    @property
    def seed(self) -> int:
        return int(self._document.get("seed", 0))

    @seed.setter
    def seed(self, value: int):
        assert isinstance(value, int) and value >= 0, "seed must be a nonnegative int"
        self._document = dict(self._document, seed=value)

    @property
    def certify_tol(self) -> float:
        return float(self._document.get("certify", {}).get("tol", 1e-2))

    @property
    def outputs(self) -> OutputOptions:
        options = self._document.get("outputs", {})
        defaults = OutputOptions()
        return OutputOptions(directory=options.get("directory", defaults.directory),
                             frame_stride=options.get("frame_stride", defaults.frame_stride),
                             formats=tuple(options.get("formats", defaults.formats)))

    def grids(self) -> Tuple[SpatialGrid, TimeGrid]:
        return build_grids(self._document["domain"]["kind"], self._document["domain"]["n_cells"],
                           self._document["time"]["n_steps"])

    def _preset(self, descriptor: dict, seed: int):
        name = descriptor["preset"]
        params = dict(descriptor.get("params", {}))
        if name == "mixture":
            components = params.pop("components", [])
            params["components"] = tuple(self._preset(component, seed + index)
                                         for index, component in enumerate(components))
        if name == "explicit" and "density" in params:
            params["density"] = tuple(params["density"])
        if name == "random":
            params.setdefault("seed", seed)
        try:
            return MEASURE_PRESETS[name](**params)
        except (TypeError, KeyError) as error:
            raise ConfigError("bad parameters for measure preset {!r}: {}".format(name, error)) from error

    def measure(self, which: str) -> DiscreteMeasure:
        """Builds ``rho0`` or ``rho1``."""
        assert which in ("rho0", "rho1"), "which must be 'rho0' or 'rho1'"
        spatial, _ = self.grids()
        descriptor = self._document[which]
        if "density" in descriptor:
            return DiscreteMeasure(spatial, descriptor["density"])
        if "frames" in descriptor:
            file_name = descriptor["frames"]
            if not os.path.isabs(file_name):
                file_name = os.path.join(self.base_dir, file_name)
            table = FrameTable.from_csv(file_name)
            if table.positions.size != spatial.n_cells:
                raise ShapeMismatchError("{} has {} cells, configuration has {}".format(
                    file_name, table.positions.size, spatial.n_cells))
            return DiscreteMeasure(spatial, table.density_at(descriptor["t"]))
        offset = 0 if which == "rho0" else 1000
        return make_measure(self._preset(descriptor, self.seed + offset), spatial)

    def constraint(self) -> ConstraintSpec:
        descriptor = self._document.get("constraint", {"preset": "none"})
        return constraint_preset(descriptor["preset"], descriptor.get("params", {}), self.grids())

    def problem(self) -> Problem:
        _, temporal = self.grids()
        return Problem(self.measure("rho0"), self.measure("rho1"), self.constraint(), self.delta,
                       temporal, self.balanced)

    def solver_params(self, progress: bool = False) -> SolverParams:
        names = {item.name for item in fields(SolverParams)}
        overrides = {key: value for key, value in self._document.get("solver", {}).items() if key in names}
        return SolverParams(progress=progress, **overrides)
