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
"""The Wasserstein-Fisher-Rao infinitesimal cost, its conjugate set and its
proximal operator.

The cost of a point (a, b, c) = (density, momentum, source) is

    f(a, b, c) = (b**2 + delta**2 * c**2) / (2 a)   if a > 0,
                 0                                  if (a, b, c) = 0,
                 +inf                               otherwise,

and it is the support function of the paraboloid

    B = {(a, b, c) : a + (b**2 + c**2 / delta**2) / 2 <= 0}.

All functions here work elementwise, so the components of a CostPoint can be
scalars or whole arrays of grid cells.
"""
from dataclasses import dataclass
from typing import Union

import numpy as np

from cwfr.errors import ShapeMismatchError
from cwfr.grid import CenteredFields, SpatialGrid, StaggeredFields, TimeGrid, faces_to_cells

ZERO_SNAP = 1e-12
NEWTON_TOL = 1e-12
NEWTON_MAX_ITERS = 100

ArrayLike = Union[float, np.ndarray]


@dataclass(frozen=True)
class CostPoint:
    """Arguments of the cost: density ``a``, momentum ``b`` and source ``c``."""
    a: ArrayLike
    b: ArrayLike
    c: ArrayLike = 0.0

    def arrays(self):
        return np.broadcast_arrays(np.asarray(self.a, dtype=float),
                                   np.asarray(self.b, dtype=float),
                                   np.asarray(self.c, dtype=float))

    def __iter__(self):
        return iter((self.a, self.b, self.c))


def _point(a, b, c) -> CostPoint:
    if np.ndim(a) == 0:
        return CostPoint(float(a), float(b), float(c))
    return CostPoint(a, b, c)


@dataclass(frozen=True)
class Paraboloid:
    """The convex set whose support function is the cost."""
    delta: float

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError("delta must be positive, got {}".format(self.delta))

    def level(self, p: CostPoint) -> np.ndarray:
        """``a + (b**2 + c**2 / delta**2) / 2``, nonpositive exactly on the set."""
        a, b, c = p.arrays()
        return a + 0.5 * (b ** 2 + c ** 2 / self.delta ** 2)

    def contains(self, p: CostPoint, tol: float = 0.0):
        return self.level(p) <= tol

    def project(self, p: CostPoint) -> CostPoint:
        return project_paraboloid(p, self.delta)


def f_delta(p: CostPoint, delta: float) -> ArrayLike:
    """Evaluates the cost; +inf outside its domain, never raises.

    Examples:
        >>> f_delta(CostPoint(2.0, 2.0, 1.0), 1.0)
        1.25
        >>> f_delta(CostPoint(0.0, 1.0, 0.0), 1.0)
        inf
    """
    a, b, c = p.arrays()
    value = np.full(a.shape, np.inf)
    positive = a > 0
    value[positive] = (b[positive] ** 2 + delta ** 2 * c[positive] ** 2) / (2.0 * a[positive])
    value[(a == 0) & (b == 0) & (c == 0)] = 0.0
    return float(value) if value.ndim == 0 else value


def paraboloid_multiplier(a: np.ndarray, b: np.ndarray, c: np.ndarray, delta: float) -> np.ndarray:
    """Root ``lam >= 0`` of the projection equation, 0 for points inside the set.

    The function g(lam) = a - lam + (b**2 / (1 + lam)**2 + c**2 d / (d + lam)**2) / 2,
    with d = delta**2, is convex and decreasing, so Newton started at 0 moves
    monotonically toward the root. A bracket is kept anyway and bisection
    takes over whenever a step leaves it.
    """
    a, b, c = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(b, dtype=float),
                                  np.asarray(c, dtype=float))
    d2 = delta ** 2
    lam = np.zeros(a.shape)
    outside = a + 0.5 * (b ** 2 + c ** 2 / d2) > 0
    if not np.any(outside):
        return lam
    a0, b2, c2 = a[outside], b[outside] ** 2, c[outside] ** 2

    def g(x):
        return a0 - x + 0.5 * (b2 / (1.0 + x) ** 2 + c2 * d2 / (d2 + x) ** 2)

    def g_prime(x):
        return -1.0 - b2 / (1.0 + x) ** 3 - c2 * d2 / (d2 + x) ** 3

    scale = np.maximum.reduce([np.ones_like(a0), np.abs(a0), b2, c2 / d2])
    lo = np.zeros_like(a0)
    hi = np.maximum(1.0, a0 + np.sqrt(b2 + c2))
    for _ in range(200):
        short = g(hi) > 0
        if not np.any(short):
            break
        lo = np.where(short, hi, lo)
        hi = np.where(short, 2.0 * hi, hi)
    x = lo.copy()
    for _ in range(NEWTON_MAX_ITERS):
        value = g(x)
        if np.all(np.abs(value) <= NEWTON_TOL * scale):
            break
        lo = np.where(value > 0, x, lo)
        hi = np.where(value < 0, x, hi)
        step = x - value / g_prime(x)
        step = np.where((step >= lo) & (step <= hi), step, 0.5 * (lo + hi))
        x = np.where(value == 0, x, step)
    lam[outside] = x
    return lam


def project_paraboloid(p: CostPoint, delta: float) -> CostPoint:
    """Euclidean projection onto the paraboloid.

    Args:
        p: the point(s) to project
        delta: length scale, positive

    Returns:
        CostPoint ``(a - lam, b / (1 + lam), c / (1 + lam / delta**2))``

    Examples:
        >>> project_paraboloid(CostPoint(1.0, 0.0, 0.0), 1.0)
        CostPoint(a=0.0, b=0.0, c=0.0)
    """
    a, b, c = p.arrays()
    lam = paraboloid_multiplier(a, b, c, delta)
    return _point(a - lam, b / (1.0 + lam), c * delta ** 2 / (delta ** 2 + lam))


def prox_f_delta(p: CostPoint, tau: float, delta: float) -> CostPoint:
    """Proximal map of ``tau * f`` through the Moreau decomposition.

    ``prox(p) = p - tau * project(p / tau)``, written out in terms of the
    projection multiplier so the density slot is exactly ``tau * lam >= 0``.
    """
    if not tau > 0:
        raise ValueError("tau must be positive, got {}".format(tau))
    a, b, c = p.arrays()
    lam = paraboloid_multiplier(a / tau, b / tau, c / tau, delta)
    return _point(tau * lam, b * lam / (1.0 + lam), c * lam / (delta ** 2 + lam))


def _snapped_cost(rho: np.ndarray, omega: np.ndarray, zeta: np.ndarray, delta: float) -> np.ndarray:
    rho = np.array(rho, dtype=float, copy=True)
    omega = np.array(omega, dtype=float, copy=True)
    zeta = np.array(zeta, dtype=float, copy=True)
    tiny = (rho > -ZERO_SNAP) & (rho <= 0) & (np.abs(omega) <= ZERO_SNAP) & (np.abs(zeta) <= ZERO_SNAP)
    rho[tiny] = 0.0
    omega[tiny] = 0.0
    zeta[tiny] = 0.0
    return f_delta(CostPoint(rho, omega, zeta), delta)


def speed_profile(v: CenteredFields, grid: SpatialGrid, tgrid: TimeGrid, delta: float) -> np.ndarray:
    """Energy of each time step, ``sum_j dx f(v[k, j])``."""
    if (v.n_steps, v.n_cells) != (tgrid.n_steps, grid.n_cells):
        raise ShapeMismatchError("centered fields {} do not match grids {}".format(
            (v.n_steps, v.n_cells), (tgrid.n_steps, grid.n_cells)))
    cost = _snapped_cost(v.rho_mid, v.omega_mid, v.zeta_mid, delta)
    return np.sum(cost, axis=1) * grid.cell_width


def path_energy(v: CenteredFields, grid: SpatialGrid, tgrid: TimeGrid, delta: float) -> float:
    """Discrete energy ``sum_{k,j} dt dx f(v[k, j])``; +inf if any cell is infinite."""
    return float(np.sum(speed_profile(v, grid, tgrid, delta)) * tgrid.dt)


def path_length(v: CenteredFields, grid: SpatialGrid, tgrid: TimeGrid, delta: float) -> float:
    """``sum_k dt sqrt(e_k)``; never above ``sqrt(path_energy)``, equal at constant speed."""
    return float(np.sum(np.sqrt(speed_profile(v, grid, tgrid, delta))) * tgrid.dt)


def sqrt_midpoint_energy(u: StaggeredFields, grid: SpatialGrid, delta: float) -> float:
    """Energy with the density slot averaged as ``((sqrt r0 + sqrt r1) / 2)**2``.

    On pure growth segments this is the exact discrete Fisher-Rao energy, so
    the teleport path hits its closed form at every resolution.
    """
    u.check(grid)
    root = np.sqrt(np.clip(u.rho_nodes, 0.0, None))
    rho_mid = (0.5 * (root[:-1] + root[1:])) ** 2
    rho_mid = np.where(np.minimum(u.rho_nodes[:-1], u.rho_nodes[1:]) < 0,
                       np.minimum(u.rho_nodes[:-1], u.rho_nodes[1:]), rho_mid)
    cost = _snapped_cost(rho_mid, faces_to_cells(u.omega_faces, grid), u.zeta_mid, delta)
    return float(np.sum(cost) * grid.cell_width * u.time_grid.dt)
