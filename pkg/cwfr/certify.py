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
"""Optimality certificates and geodesic equation residuals.

A potential ``phi`` certifies a path when, with ``alpha = d_t phi - sum_i g_i H_i``,
``beta = grad phi`` and ``gamma = phi``:

    alpha + (beta**2 + gamma**2 / delta**2) / 2 = 0   on the support of rho,
    alpha + (beta**2 + gamma**2 / delta**2) / 2 <= 0  everywhere,
    beta * rho = omega,   gamma * rho = delta**2 * zeta.

The geodesic residuals use the potential ``Phi`` of the coupled
Hamilton-Jacobi / continuity system instead, whose sign is opposite:
on the support ``phi = Phi_bar - Phi``.
"""
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from cwfr.errors import GramMatrixError, ShapeMismatchError
from cwfr.grid import SpatialGrid, cells_to_faces, divergence, faces_to_cells, gradient
from cwfr.measures import ConstraintSpec, DiscreteMeasure
from cwfr.paths import PathTriple

logger = logging.getLogger(__name__)

SUPPORT_TOL = 1e-10
MAX_CONDITION = 1e12


@dataclass(frozen=True)
class CertificateReport:
    """Residuals of the optimality conditions.

    Attributes:
        g: multipliers at time midpoints, n_steps x d
        r_hj: Hamilton-Jacobi equality on the support
        r_membership: positive part of the Hamilton-Jacobi inequality, all cells
        r_momentum: max |beta rho - omega|
        r_source: max |gamma rho - delta**2 zeta|
        certified: all four residuals within ``tol``
    """
    g: np.ndarray
    r_hj: float
    r_membership: float
    r_momentum: float
    r_source: float
    certified: bool
    tol: float

    def to_dict(self) -> dict:
        return {"certified": self.certified,
                "tol": self.tol,
                "r_hj": self.r_hj,
                "r_membership": self.r_membership,
                "r_momentum": self.r_momentum,
                "r_source": self.r_source,
                "g": self.g.tolist()}

    def __str__(self):
        verdict = "certified" if self.certified else "not certified"
        return "{} (tol {:g}): r_hj={:.3e} r_membership={:.3e} r_momentum={:.3e} r_source={:.3e}".format(
            verdict, self.tol, self.r_hj, self.r_membership, self.r_momentum, self.r_source)


@dataclass(frozen=True)
class GeodesicResiduals:
    r_hamilton_jacobi: float
    r_continuity: float
    gamma: np.ndarray

    def to_dict(self) -> dict:
        return {"r_hamilton_jacobi": self.r_hamilton_jacobi,
                "r_continuity": self.r_continuity,
                "gamma": self.gamma.tolist()}


def _cell_gradient(values: np.ndarray, grid: SpatialGrid) -> np.ndarray:
    return faces_to_cells(gradient(values, grid), grid)


def gram_system(rho_t: DiscreteMeasure, phi_t: np.ndarray, h_t: np.ndarray, delta: float,
                rhs_shift: Optional[np.ndarray] = None) -> np.ndarray:
    """Solves ``G gamma = b + rhs_shift`` for the projection coefficients of ``phi_t``.

    ``G_ij = <H_i, H_j>`` and ``b_i = <phi_t, H_i>`` in the inner product
    ``<u, v> = sum_j (u v / delta**2 + grad u grad v) rho dx``.

    Args:
        rho_t: density at one time
        phi_t: potential at the same time, n_cells
        h_t: constraint functions at the same time, d x n_cells
        delta: length scale
        rhs_shift: extra right-hand side, ``F'(t) - int d_t H rho_t`` for
            time-varying constraints; zero when omitted

    Returns:
        gamma, a vector of length d

    Raises:
        GramMatrixError: for zero mass or a condition number above 1e12
    """
    grid = rho_t.grid
    h_t = np.atleast_2d(np.asarray(h_t, dtype=float))
    phi_t = np.asarray(phi_t, dtype=float)
    if h_t.shape[1] != grid.n_cells or phi_t.shape != (grid.n_cells,):
        raise ShapeMismatchError("gram system fields do not match {} cells".format(grid.n_cells))
    d = h_t.shape[0]
    if d == 0:
        return np.zeros(0)
    if rho_t.total_mass <= 0:
        raise GramMatrixError("gram matrix of a zero measure is singular")
    weight = rho_t.density * grid.cell_width
    h_grad = _cell_gradient(h_t, grid)
    gram = (h_t * weight) @ h_t.T / delta ** 2 + (h_grad * weight) @ h_grad.T
    rhs = (h_t * weight) @ phi_t / delta ** 2 + (h_grad * weight) @ _cell_gradient(phi_t, grid)
    if rhs_shift is not None:
        rhs = rhs + np.asarray(rhs_shift, dtype=float)
    condition = np.linalg.cond(gram)
    if not np.isfinite(condition) or condition > MAX_CONDITION:
        raise GramMatrixError("gram matrix condition number {:.3e}; are the constraint functions "
                              "linearly independent on the support?".format(condition))
    return np.linalg.solve(gram, rhs)


def _check_potential(phi: np.ndarray, path: PathTriple) -> np.ndarray:
    phi = np.asarray(phi, dtype=float)
    expected = (path.temporal.n_steps + 1, path.spatial.n_cells)
    if phi.shape != expected:
        raise ShapeMismatchError("potential has shape {}, expected {} (time nodes x cells)".format(
            phi.shape, expected))
    return phi


def certify(path: PathTriple, phi: np.ndarray, spec: ConstraintSpec, delta: float,
            tol: float = 1e-2) -> CertificateReport:
    """Checks whether ``phi`` (given at time nodes) certifies ``path``.

    The multipliers g are fitted per midpoint by least squares weighted with
    the density over the support. The report never raises for failed conditions.
    """
    phi = _check_potential(phi, path)
    spec.check(path.spatial, path.temporal)
    grid = path.spatial
    centered = path.centered
    rho, omega, zeta = centered.rho_mid, centered.omega_mid, centered.zeta_mid
    phi_rate = np.diff(phi, axis=0) / path.temporal.dt
    gam = 0.5 * (phi[:-1] + phi[1:])
    beta = _cell_gradient(gam, grid)
    alpha_star = -0.5 * (beta ** 2 + gam ** 2 / delta ** 2)
    support = rho > SUPPORT_TOL * max(np.max(rho), 0.0)
    h_mid = spec.h_mid

    g = np.zeros((path.temporal.n_steps, spec.d))
    if spec.d:
        for k in range(path.temporal.n_steps):
            cells = support[k]
            if not np.any(cells):
                continue
            root = np.sqrt(rho[k, cells])
            design = h_mid[:, k, cells].T * root[:, None]
            target = (phi_rate[k, cells] - alpha_star[k, cells]) * root
            g[k] = np.linalg.lstsq(design, target, rcond=None)[0]
    alpha = phi_rate - np.einsum("ki,ikj->kj", g, h_mid)
    hamilton_jacobi = alpha - alpha_star
    residuals = dict(
        r_hj=float(np.max(np.abs(hamilton_jacobi[support]), initial=0.0)),
        r_membership=float(np.max(np.clip(hamilton_jacobi, 0.0, None), initial=0.0)),
        r_momentum=float(np.max(np.abs(beta * rho - omega))),
        r_source=float(np.max(np.abs(gam * rho - delta ** 2 * zeta))),
    )
    report = CertificateReport(g=g, certified=bool(max(residuals.values()) <= tol), tol=tol, **residuals)
    logger.debug("certificate: %s", report)
    return report


def geodesic_residuals(path: PathTriple, phi: np.ndarray, spec: ConstraintSpec,
                       delta: float) -> GeodesicResiduals:
    """Residuals of the geodesic Hamilton-Jacobi and continuity equations.

    ``phi`` is the potential of the coupled system at time nodes. At every
    midpoint its projection onto the span of the constraint functions is
    taken from ``gram_system``; with ``d = 0`` the projection is zero. Both
    residuals are max-norms over the support of the density.
    """
    phi = _check_potential(phi, path)
    spec.check(path.spatial, path.temporal)
    grid = path.spatial
    dt = path.temporal.dt
    rho = path.centered.rho_mid
    phi_mid = 0.5 * (phi[:-1] + phi[1:])
    phi_rate = np.diff(phi, axis=0) / dt
    h_mid, h_rate, f_rate = spec.h_mid, spec.h_rate(), spec.f_rate()
    support = rho > SUPPORT_TOL * np.max(rho)

    gamma = np.zeros((path.temporal.n_steps, spec.d))
    for k in range(path.temporal.n_steps):
        if spec.d == 0:
            break
        density = DiscreteMeasure(grid, np.clip(rho[k], 0.0, None))
        shift = f_rate[k] - h_rate[:, k] @ density.density * grid.cell_width
        gamma[k] = gram_system(density, phi_mid[k], h_mid[:, k], delta, rhs_shift=shift)

    psi = phi_mid - np.einsum("ki,ikj->kj", gamma, h_mid)
    psi_grad = gradient(psi, grid)
    hamilton_jacobi = (phi_rate - 0.5 * faces_to_cells(psi_grad, grid) ** 2 - psi ** 2 / (2 * delta ** 2)
                       - np.einsum("ki,ikj->kj", gamma, h_rate))
    flux = cells_to_faces(rho, grid) * psi_grad
    continuity = (np.diff(path.rho_nodes, axis=0) / dt - divergence(flux, grid) + psi * rho / delta ** 2)
    return GeodesicResiduals(r_hamilton_jacobi=float(np.max(np.abs(hamilton_jacobi[support]), initial=0.0)),
                             r_continuity=float(np.max(np.abs(continuity[support]), initial=0.0)),
                             gamma=gamma)
