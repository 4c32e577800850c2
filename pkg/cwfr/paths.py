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
"""Explicit finite-energy paths.

Every constructor returns a PathTriple whose staggered fields satisfy the
discrete continuity equation exactly: the source (and for the displacement
paths the momentum) is derived from the sampled densities, never sampled
from a continuum formula.
"""
import logging
from dataclasses import dataclass, field
from typing import Tuple

import numpy as np

from cwfr.energy import path_energy, sqrt_midpoint_energy
from cwfr.errors import PathConstructionError, ShapeMismatchError
from cwfr.grid import (CenteredFields, DomainKind, SpatialGrid, StaggeredFields, TimeGrid,
                       continuity_residual, divergence, interp_to_centered)
from cwfr.measures import DiscreteMeasure, TimeFunction, sample_time_function

logger = logging.getLogger(__name__)

MASS_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class PathTriple:
    """A space-time path (rho, omega, zeta) with its centered interpolant.

    Attributes:
        staggered: StaggeredFields of the path
        spatial: SpatialGrid the path lives on
        delta: length scale used for energies
        centered: CenteredFields, always ``interp_to_centered(staggered)``
    """
    staggered: StaggeredFields
    spatial: SpatialGrid
    delta: float
    centered: CenteredFields = field(init=False)

    def __post_init__(self):
        if not self.delta > 0:
            raise PathConstructionError("delta must be positive, got {}".format(self.delta))
        object.__setattr__(self, "centered", interp_to_centered(self.staggered, self.spatial))

    @classmethod
    def from_arrays(cls, rho_nodes, omega_faces, zeta_mid, spatial: SpatialGrid, delta: float):
        return cls(StaggeredFields(rho_nodes, omega_faces, zeta_mid), spatial, delta)

    @property
    def temporal(self) -> TimeGrid:
        return self.staggered.time_grid

    @property
    def rho_nodes(self) -> np.ndarray:
        return self.staggered.rho_nodes

    @property
    def omega_faces(self) -> np.ndarray:
        return self.staggered.omega_faces

    @property
    def zeta_mid(self) -> np.ndarray:
        return self.staggered.zeta_mid

    @property
    def start(self) -> DiscreteMeasure:
        return DiscreteMeasure(self.spatial, np.clip(self.rho_nodes[0], 0.0, None))

    @property
    def end(self) -> DiscreteMeasure:
        return DiscreteMeasure(self.spatial, np.clip(self.rho_nodes[-1], 0.0, None))

    def energy(self) -> float:
        return path_energy(self.centered, self.spatial, self.temporal, self.delta)

    def sqrt_energy(self) -> float:
        return sqrt_midpoint_energy(self.staggered, self.spatial, self.delta)

    def max_continuity_residual(self, rho0: DiscreteMeasure = None, rho1: DiscreteMeasure = None) -> float:
        """Largest continuity or endpoint residual against the given (default: own) endpoints."""
        interior, (first, last) = continuity_residual(self.staggered, rho0 or self.start, rho1 or self.end)
        return float(max(np.max(np.abs(interior)), np.max(np.abs(first)), np.max(np.abs(last))))


def _unpack(grids, rho0: DiscreteMeasure, rho1: DiscreteMeasure = None) -> Tuple[SpatialGrid, TimeGrid]:
    spatial, temporal = grids
    for measure in (rho0, rho1):
        if measure is not None and measure.grid != spatial:
            raise ShapeMismatchError("measure lives on {}, path grid is {}".format(measure.grid, spatial))
    return spatial, temporal


def _close(a: float, b: float) -> bool:
    return abs(a - b) <= MASS_TOL * max(1.0, abs(a), abs(b))


def _from_densities(rho_nodes: np.ndarray, omega_faces: np.ndarray, spatial: SpatialGrid,
                    temporal: TimeGrid, delta: float) -> PathTriple:
    """Completes a path with the source that makes the continuity equation exact."""
    zeta = np.diff(rho_nodes, axis=0) / temporal.dt + divergence(omega_faces, spatial)
    return PathTriple.from_arrays(rho_nodes, omega_faces, zeta, spatial, delta)


def constant_path(rho: DiscreteMeasure, grids, delta: float) -> PathTriple:
    """The path that stays at ``rho``; it has zero energy."""
    spatial, temporal = _unpack(grids, rho)
    rho_nodes = np.repeat(rho.density[None, :], temporal.n_steps + 1, axis=0)
    return PathTriple.from_arrays(rho_nodes, np.zeros((temporal.n_steps, spatial.n_faces)),
                                  np.zeros((temporal.n_steps, spatial.n_cells)), spatial, delta)


def teleport_path(rho0: DiscreteMeasure, rho1: DiscreteMeasure, grids, delta: float) -> PathTriple:
    """Shrinks ``rho0`` to zero along a pure growth path, then grows ``rho1`` back.

    ``rho_t = (1 - 2t)**2 rho0`` up to t = 1/2 and ``(2t - 1)**2 rho1`` after.
    Needs an even number of steps so t = 1/2 is a node.
    """
    spatial, temporal = _unpack(grids, rho0, rho1)
    if temporal.n_steps % 2:
        raise PathConstructionError("teleport path needs an even number of time steps, got {}".format(
            temporal.n_steps))
    t = temporal.nodes[:, None]
    half = temporal.n_steps // 2
    rho_nodes = np.where(np.arange(temporal.n_steps + 1)[:, None] <= half,
                         (1.0 - 2.0 * t) ** 2 * rho0.density[None, :],
                         (2.0 * t - 1.0) ** 2 * rho1.density[None, :])
    rho_nodes[half] = 0.0
    rho_nodes[0] = rho0.density
    rho_nodes[-1] = rho1.density
    return _from_densities(rho_nodes, np.zeros((temporal.n_steps, spatial.n_faces)), spatial, temporal, delta)


def linear_fr_path(rho0: DiscreteMeasure, rho1: DiscreteMeasure, grids, delta: float) -> PathTriple:
    """Linear interpolation of the densities with no transport."""
    spatial, temporal = _unpack(grids, rho0, rho1)
    t = temporal.nodes[:, None]
    rho_nodes = (1.0 - t) * rho0.density[None, :] + t * rho1.density[None, :]
    rho_nodes[0] = rho0.density
    rho_nodes[-1] = rho1.density
    return _from_densities(rho_nodes, np.zeros((temporal.n_steps, spatial.n_faces)), spatial, temporal, delta)


def _positive_samples(f_samples, temporal: TimeGrid) -> np.ndarray:
    f_samples = sample_time_function(f_samples, temporal)
    if np.any(f_samples <= 0):
        raise PathConstructionError("F must be positive at every node, min is {}".format(f_samples.min()))
    return f_samples


def scaling_path(rho0: DiscreteMeasure, f_samples: TimeFunction, grids, delta: float) -> PathTriple:
    """Rescales ``rho0`` in place so its mass follows F: ``rho_t = F(t) / F(0) rho0``.

    Args:
        rho0: starting measure, its mass must equal F(0)
        f_samples: F as node samples or any form ``sample_time_function`` takes
        grids: (SpatialGrid, TimeGrid)
        delta: length scale
    """
    spatial, temporal = _unpack(grids, rho0)
    f_samples = _positive_samples(f_samples, temporal)
    if not _close(rho0.total_mass, f_samples[0]):
        raise PathConstructionError("rho0 has mass {}, F(0) = {}".format(rho0.total_mass, f_samples[0]))
    rho_nodes = (f_samples / f_samples[0])[:, None] * rho0.density[None, :]
    rho_nodes[0] = rho0.density
    return _from_densities(rho_nodes, np.zeros((temporal.n_steps, spatial.n_faces)), spatial, temporal, delta)


def _quantile_segments(p0: np.ndarray, p1: np.ndarray, dx: float):
    """Pieces on which both quantile functions are linear.

    Returns the probability weight of every piece and the positions of its
    two ends under each quantile function.
    """
    cdf0 = np.concatenate([[0.0], np.cumsum(p0)])
    cdf1 = np.concatenate([[0.0], np.cumsum(p1)])
    cdf0 /= cdf0[-1]
    cdf1 /= cdf1[-1]
    knots = np.unique(np.concatenate([cdf0, cdf1]))
    weights = np.diff(knots)
    keep = weights > 0
    lower, upper, weights = knots[:-1][keep], knots[1:][keep], weights[keep]
    middle = 0.5 * (lower + upper)

    def quantile(cdf, s):
        cell = np.clip(np.searchsorted(cdf, middle, side="right") - 1, 0, cdf.size - 2)
        return (cell + (s - cdf[cell]) / (cdf[cell + 1] - cdf[cell])) * dx

    return (weights,
            (quantile(cdf0, lower), quantile(cdf0, upper)),
            (quantile(cdf1, lower), quantile(cdf1, upper)))


def balanced_quantile_path(rho0: DiscreteMeasure, rho1: DiscreteMeasure, grids, delta: float) -> PathTriple:
    """Displacement interpolation on the interval, source identically zero.

    Both cumulative distributions are piecewise linear, so between the union
    of their breakpoints the interpolated quantile ``(1 - t) Q0 + t Q1`` is
    linear as well; each such piece spreads its mass uniformly over the cells
    it covers. The momentum is then integrated from the continuity equation
    starting at the left wall.
    """
    spatial, temporal = _unpack(grids, rho0, rho1)
    if spatial.kind is not DomainKind.INTERVAL:
        raise PathConstructionError("balanced quantile path is only available on the interval")
    mass = rho0.total_mass
    if mass <= 0 or not _close(mass, rho1.total_mass):
        raise PathConstructionError("balanced path needs equal positive masses, got {} and {}".format(
            mass, rho1.total_mass))
    dx = spatial.cell_width
    weights, (start_lo, start_hi), (end_lo, end_hi) = _quantile_segments(
        rho0.cell_masses / mass, rho1.cell_masses / rho1.total_mass, dx)
    edges = np.arange(spatial.n_cells + 1) * dx
    rho_nodes = np.empty((temporal.n_steps + 1, spatial.n_cells))
    for k, t in enumerate(temporal.nodes):
        lo = (1.0 - t) * start_lo + t * end_lo
        hi = (1.0 - t) * start_hi + t * end_hi
        covered = np.clip((edges[None, :] - lo[:, None]) / (hi - lo)[:, None], 0.0, 1.0)
        cumulative = weights @ covered
        rho_nodes[k] = mass * np.diff(cumulative) / dx
    rho_nodes[0] = rho0.density
    rho_nodes[-1] = rho1.density
    omega = np.zeros((temporal.n_steps, spatial.n_faces))
    omega[:, 1:-1] = -np.cumsum(np.diff(rho_nodes, axis=0), axis=1)[:, :-1] * dx / temporal.dt
    return PathTriple.from_arrays(rho_nodes, omega, np.zeros((temporal.n_steps, spatial.n_cells)),
                                  spatial, delta)


def scaled_balanced_path(rho0: DiscreteMeasure, rho1: DiscreteMeasure, f_samples: TimeFunction,
                         grids, delta: float) -> PathTriple:
    """Balanced path between the normalized endpoints, rescaled to total mass F(t)."""
    spatial, temporal = _unpack(grids, rho0, rho1)
    f_samples = _positive_samples(f_samples, temporal)
    if not (_close(rho0.total_mass, f_samples[0]) and _close(rho1.total_mass, f_samples[-1])):
        raise PathConstructionError("endpoint masses {} and {} do not match F(0) = {} and F(1) = {}".format(
            rho0.total_mass, rho1.total_mass, f_samples[0], f_samples[-1]))
    base = balanced_quantile_path(rho0.normalized(), rho1.normalized(), grids, delta)
    rho_nodes = f_samples[:, None] * base.rho_nodes
    rho_nodes[0] = rho0.density
    rho_nodes[-1] = rho1.density
    f_mid = 0.5 * (f_samples[:-1] + f_samples[1:])
    return _from_densities(rho_nodes, f_mid[:, None] * base.omega_faces, spatial, temporal, delta)


def time_reverse(p: PathTriple) -> PathTriple:
    """Runs the path backwards; momentum and source change sign."""
    return PathTriple.from_arrays(p.rho_nodes[::-1], -p.omega_faces[::-1], -p.zeta_mid[::-1],
                                  p.spatial, p.delta)


def concatenate(p1: PathTriple, p2: PathTriple, tol: float = 1e-12) -> PathTriple:
    """Runs ``p1`` then ``p2``, each in half the time, so momentum and source double.

    The result has ``2 * n_steps`` steps and energy ``2 (E1 + E2)``.
    """
    if p1.spatial != p2.spatial or p1.temporal != p2.temporal:
        raise PathConstructionError("concatenated paths must share their grids")
    if p1.delta != p2.delta:
        raise PathConstructionError("concatenated paths must share delta")
    gap = np.max(np.abs(p1.rho_nodes[-1] - p2.rho_nodes[0]))
    if gap > tol * max(1.0, np.max(np.abs(p1.rho_nodes[-1]))):
        raise PathConstructionError("first path ends {:g} away from where the second starts".format(gap))
    rho_nodes = np.concatenate([p1.rho_nodes, p2.rho_nodes[1:]])
    rho_nodes[p1.temporal.n_steps] = p1.rho_nodes[-1]
    omega = 2.0 * np.concatenate([p1.omega_faces, p2.omega_faces])
    zeta = 2.0 * np.concatenate([p1.zeta_mid, p2.zeta_mid])
    return PathTriple.from_arrays(rho_nodes, omega, zeta, p1.spatial, p1.delta)


def teleport_energy_bound(rho0: DiscreteMeasure, rho1: DiscreteMeasure, delta: float) -> float:
    """``4 delta**2 (m0 + m1)``, the energy of the teleport path."""
    return 4.0 * delta ** 2 * (rho0.total_mass + rho1.total_mass)


def _fine_samples(f: TimeFunction, n_samples: int) -> Tuple[np.ndarray, float]:
    fine = TimeGrid(n_samples)
    return sample_time_function(f, fine), fine.dt


def scaling_energy(f: TimeFunction, delta: float, n_samples: int = 20000) -> float:
    """Energy of the continuum scaling path, ``delta**2 / 2 * int F'**2 / F dt``.

    F must be given as a callable, a constant or ``{"poly": [...]}``; it is
    resampled on a fine grid and integrated with the midpoint rule.

    Examples:
        >>> round(scaling_energy({"poly": [1.0, 1.0]}, 1.0), 6)
        0.346574
    """
    samples, dt = _fine_samples(f, n_samples)
    rate = np.diff(samples) / dt
    return float(0.5 * delta ** 2 * np.sum(rate ** 2 / (0.5 * (samples[:-1] + samples[1:]))) * dt)


def scaled_balanced_energy_bound(balanced_energy: float, f: TimeFunction, delta: float,
                                 n_samples: int = 20000) -> float:
    """``max F * E_balanced + delta**2 / (2 min F) * int F'**2 dt``."""
    samples, dt = _fine_samples(f, n_samples)
    if np.any(samples <= 0):
        raise PathConstructionError("F must be positive")
    rate = np.diff(samples) / dt
    return float(samples.max() * balanced_energy
                 + 0.5 * delta ** 2 / samples.min() * np.sum(rate ** 2) * dt)


PATH_CONSTRUCTORS = ["teleport", "linear_fr", "scaling", "balanced_quantile", "scaled_balanced", "constant"]
