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
"""Discrete measures, measure presets, affine constraint specifications and
endpoint feasibility checks.

A ``DiscreteMeasure`` stores densities: the mass of cell ``j`` is
``density[j] * dx``. A ``ConstraintSpec`` samples the constraint functions
H (d components) at time nodes and cell centers together with the targets F
at time nodes; ``d = 0`` is the unconstrained problem.
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence, Tuple, Union

import numpy as np

from cwfr.errors import ConstraintError, MeasureError, ShapeMismatchError
from cwfr.grid import DomainKind, SpatialGrid, TimeGrid

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Nonnegative density samples on the cells of a spatial grid.

    Attributes:
        grid: the SpatialGrid the density lives on
        density: array of n_cells nonnegative densities
    """
    grid: SpatialGrid
    density: np.ndarray

    def __post_init__(self):
        density = np.array(self.density, dtype=float, copy=True)
        if density.shape != (self.grid.n_cells,):
            raise ShapeMismatchError("density has shape {}, grid has {} cells".format(
                density.shape, self.grid.n_cells))
        if not np.all(np.isfinite(density)):
            raise MeasureError("density contains non-finite values")
        if np.any(density < 0):
            raise MeasureError("density must be nonnegative, min is {}".format(density.min()))
        density.flags.writeable = False
        object.__setattr__(self, "density", density)

    @property
    def total_mass(self) -> float:
        return float(np.sum(self.density) * self.grid.cell_width)

    @property
    def cell_masses(self) -> np.ndarray:
        return self.density * self.grid.cell_width

    def scaled(self, factor: float) -> "DiscreteMeasure":
        return DiscreteMeasure(self.grid, factor * self.density)

    def normalized(self) -> "DiscreteMeasure":
        """Returns the probability measure with the same shape."""
        mass = self.total_mass
        if mass <= 0:
            raise MeasureError("cannot normalize a measure of zero mass")
        return self.scaled(1.0 / mass)


def _check_mass(mass: float):
    if not np.isfinite(mass) or mass < 0:
        raise MeasureError("mass must be a finite nonnegative number, got {}".format(mass))


def _with_mass(profile: np.ndarray, mass: float, grid: SpatialGrid) -> np.ndarray:
    total = np.sum(profile) * grid.cell_width
    if mass == 0:
        return np.zeros(grid.n_cells)
    return profile * (mass / total)


@dataclass(frozen=True)
class Uniform:
    mass: float = 1.0

    def sample(self, grid: SpatialGrid) -> np.ndarray:
        _check_mass(self.mass)
        return np.full(grid.n_cells, float(self.mass))


@dataclass(frozen=True)
class Bump:
    """Gaussian profile, periodic distance on the circle, renormalized to ``mass``."""
    center: float
    width: float
    mass: float = 1.0

    def sample(self, grid: SpatialGrid) -> np.ndarray:
        _check_mass(self.mass)
        if not self.width > 0:
            raise MeasureError("bump width must be positive, got {}".format(self.width))
        distance = np.abs(grid.cell_centers - self.center)
        if grid.periodic:
            distance = np.minimum(distance, 1.0 - distance)
        profile = np.exp(-0.5 * (distance / self.width) ** 2)
        if not np.any(profile > 0):
            # narrower than a cell: everything lands in the nearest cell
            profile = (distance == distance.min()).astype(float)
        return _with_mass(profile, self.mass, grid)


@dataclass(frozen=True)
class DiracCell:
    """All the mass in one cell, so the density there is ``mass / dx``."""
    index: int
    mass: float = 1.0

    def sample(self, grid: SpatialGrid) -> np.ndarray:
        _check_mass(self.mass)
        if int(self.index) != self.index or not 0 <= self.index < grid.n_cells:
            raise MeasureError("cell index {} out of range 0..{}".format(self.index, grid.n_cells - 1))
        density = np.zeros(grid.n_cells)
        density[int(self.index)] = self.mass / grid.cell_width
        return density


@dataclass(frozen=True)
class Block:
    """Uniform density on [lo, hi]; partially covered cells get their share."""
    lo: float
    hi: float
    mass: float = 1.0

    def sample(self, grid: SpatialGrid) -> np.ndarray:
        _check_mass(self.mass)
        if not 0.0 <= self.lo < self.hi <= 1.0:
            raise MeasureError("block needs 0 <= lo < hi <= 1, got [{}, {}]".format(self.lo, self.hi))
        left = np.arange(grid.n_cells) * grid.cell_width
        overlap = np.clip(np.minimum(self.hi, left + grid.cell_width) - np.maximum(self.lo, left), 0.0, None)
        return self.mass * overlap / ((self.hi - self.lo) * grid.cell_width)


@dataclass(frozen=True)
class RandomDensity:
    """Density drawn uniformly from [low, high] per cell, renormalized to ``mass``."""
    low: float = 0.5
    high: float = 1.5
    mass: float = 1.0
    seed: int = 0

    def sample(self, grid: SpatialGrid) -> np.ndarray:
        _check_mass(self.mass)
        if not 0.0 <= self.low <= self.high or self.high <= 0:
            raise MeasureError("random density needs 0 <= low <= high and high > 0")
        rng = np.random.default_rng(self.seed)
        profile = rng.uniform(self.low, self.high, size=grid.n_cells)
        return _with_mass(profile, self.mass, grid)


@dataclass(frozen=True)
class Explicit:
    density: Tuple[float, ...]

    def sample(self, grid: SpatialGrid) -> np.ndarray:
        density = np.asarray(self.density, dtype=float)
        if density.shape != (grid.n_cells,):
            raise ShapeMismatchError("explicit density has shape {}, grid has {} cells".format(
                density.shape, grid.n_cells))
        return density


@dataclass(frozen=True)
class Mixture:
    """Sum of other presets."""
    components: Tuple = field(default_factory=tuple)

    def sample(self, grid: SpatialGrid) -> np.ndarray:
        density = np.zeros(grid.n_cells)
        for component in self.components:
            density = density + component.sample(grid)
        return density


MeasurePreset = Union[Uniform, Bump, DiracCell, Block, RandomDensity, Explicit, Mixture]

MEASURE_PRESETS = {
    "uniform": Uniform,
    "bump": Bump,
    "dirac_cell": DiracCell,
    "block": Block,
    "random": RandomDensity,
    "explicit": Explicit,
    "mixture": Mixture,
}


def make_measure(preset: MeasurePreset, grid: SpatialGrid) -> DiscreteMeasure:
    """Samples a measure preset on a grid.

    Args:
        preset: one of Uniform, Bump, DiracCell, Block, RandomDensity, Explicit, Mixture
        grid: target SpatialGrid

    Returns:
        DiscreteMeasure

    Examples:
        >>> spatial = SpatialGrid(DomainKind.INTERVAL, 4)
        >>> make_measure(DiracCell(2, 3.0), spatial).density
        array([ 0.,  0., 12.,  0.])
    """
    if not hasattr(preset, "sample"):
        raise MeasureError("unknown measure preset {!r}".format(preset))
    return DiscreteMeasure(grid, preset.sample(grid))


TimeFunction = Union[Callable, float, int, dict, Sequence[float]]


def _time_samples(value: TimeFunction, nodes: np.ndarray) -> np.ndarray:
    if callable(value):
        return np.asarray([value(t) for t in nodes], dtype=float)
    if isinstance(value, dict):
        if "poly" in value:
            return np.polynomial.polynomial.polyval(nodes, np.asarray(value["poly"], dtype=float))
        if "samples" in value:
            return np.asarray(value["samples"], dtype=float)
        raise ConstraintError("time function needs a 'poly' or 'samples' key, got {}".format(sorted(value)))
    if np.ndim(value) == 0:
        return np.full(nodes.shape, float(value))
    return np.asarray(value, dtype=float)


def sample_time_function(value: TimeFunction, temporal: TimeGrid) -> np.ndarray:
    """Samples a scalar function of time at the time nodes.

    Accepted forms are a callable of t, a constant, ``{"poly": [c0, c1, ...]}``
    for c0 + c1 t + ... and ``{"samples": [...]}`` with one value per node.
    Anything that does not convert to floats raises ConstraintError.
    """
    nodes = temporal.nodes
    try:
        samples = _time_samples(value, nodes)
    except (TypeError, ValueError) as error:
        raise ConstraintError("time function {!r} is not numeric: {}".format(value, error)) from error
    if samples.shape != nodes.shape:
        raise ConstraintError("time function gives {} samples, expected {}".format(
            samples.shape[0] if samples.ndim else 1, nodes.shape[0]))
    if not np.all(np.isfinite(samples)):
        raise ConstraintError("time function has non-finite samples")
    return samples


@dataclass(frozen=True, eq=False)
class ConstraintSpec:
    """Sampled affine constraint ``sum_j H_i(t_k, x_j) rho^k_j dx = F_i(t_k)``.

    Attributes:
        h_values: d x (n_steps + 1) x n_cells
        f_values: (n_steps + 1) x d
        time_independent: True if neither H nor F changes with time
        name: the preset the spec was built from
    """
    h_values: np.ndarray
    f_values: np.ndarray
    time_independent: bool = False
    name: str = "explicit"

    def __post_init__(self):
        h_values = np.array(self.h_values, dtype=float, copy=True)
        f_values = np.array(self.f_values, dtype=float, copy=True)
        if h_values.ndim != 3 or f_values.ndim != 2:
            raise ShapeMismatchError("h_values must be 3-d and f_values 2-d, got {} and {}".format(
                h_values.shape, f_values.shape))
        if h_values.shape[0] != f_values.shape[1] or h_values.shape[1] != f_values.shape[0]:
            raise ShapeMismatchError("h_values {} does not match f_values {}".format(
                h_values.shape, f_values.shape))
        if not (np.all(np.isfinite(h_values)) and np.all(np.isfinite(f_values))):
            raise ConstraintError("constraint samples must be finite")
        if self.time_independent and not (np.all(h_values == h_values[:, :1]) and np.all(f_values == f_values[:1])):
            raise ConstraintError("time_independent spec has samples that change with time")
        h_values.flags.writeable = False
        f_values.flags.writeable = False
        object.__setattr__(self, "h_values", h_values)
        object.__setattr__(self, "f_values", f_values)

    @property
    def d(self) -> int:
        return self.h_values.shape[0]

    @property
    def n_steps(self) -> int:
        return self.h_values.shape[1] - 1

    @property
    def n_cells(self) -> int:
        return self.h_values.shape[2]

    def check(self, spatial: SpatialGrid, temporal: TimeGrid):
        if self.h_values.shape[1:] != (temporal.n_steps + 1, spatial.n_cells):
            raise ShapeMismatchError("constraint sampled on {} nodes x cells, grids are {}".format(
                self.h_values.shape[1:], (temporal.n_steps + 1, spatial.n_cells)))

    @property
    def h_mid(self) -> np.ndarray:
        """H averaged to time midpoints, d x n_steps x n_cells."""
        return 0.5 * (self.h_values[:, :-1] + self.h_values[:, 1:])

    @property
    def f_mid(self) -> np.ndarray:
        return 0.5 * (self.f_values[:-1] + self.f_values[1:])

    def f_rate(self) -> np.ndarray:
        """Forward differences of F, n_steps x d."""
        return np.diff(self.f_values, axis=0) * self.n_steps

    def h_rate(self) -> np.ndarray:
        """Forward differences of H, d x n_steps x n_cells."""
        return np.diff(self.h_values, axis=1) * self.n_steps

    def time_reversed(self) -> "ConstraintSpec":
        return ConstraintSpec(self.h_values[:, ::-1], self.f_values[::-1],
                              self.time_independent, self.name)

    @classmethod
    def unconstrained(cls, spatial: SpatialGrid, temporal: TimeGrid) -> "ConstraintSpec":
        return cls(np.zeros((0, temporal.n_steps + 1, spatial.n_cells)),
                   np.zeros((temporal.n_steps + 1, 0)), True, "none")


def _constant_in_time(profiles: np.ndarray, targets: np.ndarray, temporal: TimeGrid,
                      name: str) -> ConstraintSpec:
    """Builds a spec from spatial profiles (d x N) and node targets ((n+1) x d)."""
    h_values = np.repeat(profiles[:, None, :], temporal.n_steps + 1, axis=1)
    time_independent = bool(np.all(targets == targets[:1]))
    return ConstraintSpec(h_values, targets, time_independent, name)


def _region_sweep(params: dict, temporal: TimeGrid) -> Tuple[np.ndarray, np.ndarray]:
    try:
        start = np.asarray(params["start"], dtype=float)
        end = np.asarray(params.get("end", params["start"]), dtype=float)
    except KeyError as error:
        raise ConstraintError("barrier needs a 'start' region [a, b]") from error
    if start.shape != (2,) or end.shape != (2,):
        raise ConstraintError("barrier regions must be pairs [a, b]")
    t = temporal.nodes[:, None]
    region = (1.0 - t) * start[None, :] + t * end[None, :]
    return region[:, 0], region[:, 1]


def _barrier_profiles(params: dict, spatial: SpatialGrid, temporal: TimeGrid) -> np.ndarray:
    lower, upper = _region_sweep(params, temporal)
    if np.any(upper <= lower):
        raise ConstraintError("barrier region is empty at some time")
    middle = 0.5 * (lower + upper)[:, None]
    half_width = 0.5 * (upper - lower)[:, None]
    distance = np.abs(spatial.cell_centers[None, :] - middle)
    if spatial.periodic:
        distance = np.minimum(distance, 1.0 - distance)
    hat = np.clip(1.0 - distance / half_width, 0.0, None)
    empty = ~np.any(hat > 0, axis=1)
    if np.any(empty):
        raise ConstraintError("barrier region contains no cell center at t = {}".format(
            temporal.nodes[np.argmax(empty)]))
    return hat


def constraint_preset(name: str, params: dict, grids: Tuple[SpatialGrid, TimeGrid]) -> ConstraintSpec:
    """Samples a named constraint family.

    Args:
        name: one of "none", "total_mass", "spherical_hk", "moment", "barrier",
            "closure", "explicit"
        params: family parameters; time functions follow ``sample_time_function``
        grids: (SpatialGrid, TimeGrid)

    Returns:
        ConstraintSpec

    Examples:
        >>> grids = build_grids("interval", 4, 2)
        >>> constraint_preset("total_mass", {"F": {"poly": [1, 1]}}, grids).f_values[:, 0]
        array([1. , 1.5, 2. ])
    """
    spatial, temporal = grids
    params = dict(params or {})
    x = spatial.cell_centers
    n_nodes = temporal.n_steps + 1

    if name == "none":
        return ConstraintSpec.unconstrained(spatial, temporal)
    if name == "total_mass":
        targets = sample_time_function(params.get("F", 1.0), temporal)
        return _constant_in_time(np.ones((1, spatial.n_cells)), targets[:, None], temporal, name)
    if name == "spherical_hk":
        return _constant_in_time(np.ones((1, spatial.n_cells)), np.ones((n_nodes, 1)), temporal, name)
    if name == "moment":
        centers = np.atleast_1d(np.asarray(params.get("centers", [0.5]), dtype=float))
        if centers.size == 0:
            raise ConstraintError("moment constraint needs at least one center")
        profile = np.prod(x[None, :] - centers[:, None], axis=0)
        targets = sample_time_function(params.get("F", 0.0), temporal)
        return _constant_in_time(profile[None, :], targets[:, None], temporal, name)
    if name == "barrier":
        hat = _barrier_profiles(params, spatial, temporal)
        return ConstraintSpec(hat[None, :, :], np.zeros((n_nodes, 1)), bool(np.all(hat == hat[:1])), name)
    if name == "closure":
        if spatial.kind is not DomainKind.CIRCLE:
            raise ConstraintError("the closure constraint is only defined on the circle")
        profiles = np.stack([np.cos(2 * np.pi * x), np.sin(2 * np.pi * x)])
        return _constant_in_time(profiles, np.zeros((n_nodes, 2)), temporal, name)
    if name == "explicit":
        return _explicit_spec(params, spatial, temporal)
    raise ConstraintError("Unknown constraint preset {!r}. Available are: {}".format(name, CONSTRAINT_PRESETS))


CONSTRAINT_PRESETS = ["none", "total_mass", "spherical_hk", "moment", "barrier", "closure", "explicit"]


def _explicit_spec(params: dict, spatial: SpatialGrid, temporal: TimeGrid) -> ConstraintSpec:
    try:
        h_values = np.asarray(params["h"], dtype=float)
        f_values = np.asarray(params["f"], dtype=float)
    except KeyError as error:
        raise ConstraintError("explicit constraint needs 'h' and 'f' arrays") from error
    n_nodes = temporal.n_steps + 1
    if h_values.ndim == 2:
        h_values = np.repeat(h_values[:, None, :], n_nodes, axis=1)
    if f_values.ndim == 1:
        f_values = np.repeat(f_values[None, :], n_nodes, axis=0)
    spec = ConstraintSpec(h_values, f_values,
                          bool(np.all(h_values == h_values[:, :1]) and np.all(f_values == f_values[:1])),
                          "explicit")
    spec.check(spatial, temporal)
    return spec


def constraint_values(spec: ConstraintSpec, rho_nodes: np.ndarray) -> np.ndarray:
    """The F-free part of ``constraint_eval``: ``sum_j H_i(t_k, x_j) rho^k_j dx``."""
    rho_nodes = np.asarray(getattr(rho_nodes, "rho_nodes", rho_nodes), dtype=float)
    if rho_nodes.shape != spec.h_values.shape[1:]:
        raise ShapeMismatchError("density path has shape {}, constraint expects {}".format(
            rho_nodes.shape, spec.h_values.shape[1:]))
    return np.einsum("ikj,kj->ki", spec.h_values, rho_nodes) / rho_nodes.shape[1]


def constraint_eval(spec: ConstraintSpec, rho_nodes: np.ndarray) -> np.ndarray:
    """Constraint residual at every time node, (n_steps + 1) x d.

    Args:
        spec: ConstraintSpec
        rho_nodes: density path, (n_steps + 1) x n_cells (or StaggeredFields)
    """
    return constraint_values(spec, rho_nodes) - spec.f_values


@dataclass(frozen=True)
class FeasibilityReport:
    """Endpoint residuals of the affine constraint."""
    residual_0: np.ndarray
    residual_1: np.ndarray
    feasible: bool
    tol: float

    def to_dict(self) -> dict:
        return {"residual_0": [float(value) for value in self.residual_0],
                "residual_1": [float(value) for value in self.residual_1],
                "feasible": bool(self.feasible),
                "tol": float(self.tol)}

    def __str__(self):
        return "feasible={} residual_0={} residual_1={} (tol {:g})".format(
            self.feasible, np.array2string(self.residual_0), np.array2string(self.residual_1), self.tol)


def check_feasibility(spec: ConstraintSpec, rho0: DiscreteMeasure, rho1: DiscreteMeasure,
                      tol: float = 1e-8) -> FeasibilityReport:
    """Evaluates the constraint at both endpoints. Never raises for infeasibility."""
    if rho0.grid != rho1.grid:
        raise ShapeMismatchError("rho0 and rho1 live on different grids")
    if spec.n_cells != rho0.grid.n_cells:
        raise ShapeMismatchError("constraint has {} cells, measures have {}".format(
            spec.n_cells, rho0.grid.n_cells))
    dx = rho0.grid.cell_width
    residual_0 = spec.h_values[:, 0, :] @ rho0.density * dx - spec.f_values[0]
    residual_1 = spec.h_values[:, -1, :] @ rho1.density * dx - spec.f_values[-1]
    worst = max(np.max(np.abs(residual_0), initial=0.0), np.max(np.abs(residual_1), initial=0.0))
    report = FeasibilityReport(residual_0, residual_1, bool(worst <= tol), tol)
    if not report.feasible:
        logger.debug("endpoints infeasible: %s", report)
    return report
