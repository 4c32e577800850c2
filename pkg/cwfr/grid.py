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
"""Space-time discretization of the unit interval and the unit circle.

Densities live at time nodes and cell centers, momenta at time midpoints and
cell faces, sources at time midpoints and cell centers. A centered copy of
all three fields, co-located at time midpoints and cell centers, is tied to
the staggered fields by midpoint averaging.

Face ``j`` is the left face of cell ``j``. On the interval the two boundary
faces carry no flux; on the circle face 0 sits between cells ``n - 1`` and 0.
"""
import enum
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np
from scipy import sparse

from cwfr.errors import GridSizeError, ShapeMismatchError


class DomainKind(enum.Enum):
    """Kind of the one-dimensional spatial domain."""
    INTERVAL = "interval"
    CIRCLE = "circle"

    @classmethod
    def parse(cls, value: Union[str, "DomainKind"]) -> "DomainKind":
        """Accepts a DomainKind or its (case-insensitive) name."""
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError as error:
            raise GridSizeError("Unknown domain kind {!r}. Available are: {}".format(
                value, [kind.value for kind in cls])) from error


@dataclass(frozen=True)
class SpatialGrid:
    """Uniform grid of ``n_cells`` cells on a domain of length 1.

    Attributes:
        kind: DomainKind.INTERVAL or DomainKind.CIRCLE
        n_cells: number of cells
    """
    kind: DomainKind
    n_cells: int

    @property
    def cell_width(self) -> float:
        return 1.0 / self.n_cells

    @property
    def cell_centers(self) -> np.ndarray:
        return (np.arange(self.n_cells) + 0.5) * self.cell_width

    @property
    def periodic(self) -> bool:
        return self.kind is DomainKind.CIRCLE

    @property
    def n_faces(self) -> int:
        return self.n_cells if self.periodic else self.n_cells + 1

    @property
    def flux_faces(self) -> np.ndarray:
        """Indices of the faces whose flux is an unknown (no boundary faces)."""
        if self.periodic:
            return np.arange(self.n_cells)
        return np.arange(1, self.n_cells)

    def face_cells(self, face: int) -> Tuple[Union[int, None], Union[int, None]]:
        """Returns the (left, right) cells of a face, None outside the interval.

        Examples:
            >>> SpatialGrid(DomainKind.CIRCLE, 3).face_cells(0)
            (2, 0)
        """
        if not 0 <= face < self.n_faces:
            raise ShapeMismatchError("Face {} out of range 0..{}".format(face, self.n_faces - 1))
        if self.periodic:
            return (face - 1) % self.n_cells, face
        left = face - 1 if face > 0 else None
        right = face if face < self.n_cells else None
        return left, right


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid of ``n_steps`` steps on [0, 1]."""
    n_steps: int

    @property
    def dt(self) -> float:
        return 1.0 / self.n_steps

    @property
    def nodes(self) -> np.ndarray:
        nodes = np.arange(self.n_steps + 1) * self.dt
        nodes[-1] = 1.0
        return nodes

    @property
    def midpoints(self) -> np.ndarray:
        return (np.arange(self.n_steps) + 0.5) * self.dt


def build_grids(kind: Union[str, DomainKind],
                n_cells: int,
                n_steps: int) -> Tuple[SpatialGrid, TimeGrid]:
    """Builds the spatial and temporal grids.

    Args:
        kind: "interval" or "circle" (or a DomainKind)
        n_cells: number of spatial cells, at least 2
        n_steps: number of time steps, at least 1

    Returns:
        (SpatialGrid, TimeGrid)

    Examples:
        >>> spatial, temporal = build_grids("interval", 4, 8)
        >>> spatial.cell_centers
        array([0.125, 0.375, 0.625, 0.875])
    """
    kind = DomainKind.parse(kind)
    if int(n_cells) != n_cells or n_cells < 2:
        raise GridSizeError("n_cells must be an integer >= 2, got {}".format(n_cells))
    if int(n_steps) != n_steps or n_steps < 1:
        raise GridSizeError("n_steps must be an integer >= 1, got {}".format(n_steps))
    return SpatialGrid(kind, int(n_cells)), TimeGrid(int(n_steps))


def _frozen_array(values, name: str) -> np.ndarray:
    array = np.array(values, dtype=float, copy=True)
    if array.ndim != 2:
        raise ShapeMismatchError("{} must be a 2-d array, got shape {}".format(name, array.shape))
    array.flags.writeable = False
    return array


def check_shape(array: np.ndarray, shape: tuple, name: str):
    """Raises ShapeMismatchError unless ``array.shape == shape``."""
    if tuple(np.shape(array)) != tuple(shape):
        raise ShapeMismatchError("{} has shape {}, expected {}".format(
            name, tuple(np.shape(array)), tuple(shape)))


@dataclass(frozen=True, eq=False)
class StaggeredFields:
    """Density at time nodes, momentum at faces and source at midpoints.

    Attributes:
        rho_nodes: (n_steps + 1) x n_cells
        omega_faces: n_steps x n_faces, boundary faces of the interval are 0
        zeta_mid: n_steps x n_cells
    """
    rho_nodes: np.ndarray
    omega_faces: np.ndarray
    zeta_mid: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rho_nodes", _frozen_array(self.rho_nodes, "rho_nodes"))
        object.__setattr__(self, "omega_faces", _frozen_array(self.omega_faces, "omega_faces"))
        object.__setattr__(self, "zeta_mid", _frozen_array(self.zeta_mid, "zeta_mid"))
        n_steps = self.rho_nodes.shape[0] - 1
        if n_steps < 1:
            raise ShapeMismatchError("rho_nodes needs at least two time nodes")
        check_shape(self.zeta_mid, (n_steps, self.rho_nodes.shape[1]), "zeta_mid")
        if self.omega_faces.shape[0] != n_steps:
            raise ShapeMismatchError("omega_faces has {} time rows, expected {}".format(
                self.omega_faces.shape[0], n_steps))

    @property
    def n_steps(self) -> int:
        return self.rho_nodes.shape[0] - 1

    @property
    def n_cells(self) -> int:
        return self.rho_nodes.shape[1]

    @property
    def time_grid(self) -> TimeGrid:
        return TimeGrid(self.n_steps)

    def check(self, spatial: SpatialGrid):
        """Raises ShapeMismatchError if the fields do not fit ``spatial``."""
        check_shape(self.rho_nodes, (self.n_steps + 1, spatial.n_cells), "rho_nodes")
        check_shape(self.omega_faces, (self.n_steps, spatial.n_faces), "omega_faces")
        if not spatial.periodic and np.any(self.omega_faces[:, [0, -1]] != 0):
            raise ShapeMismatchError("interval boundary faces must carry zero flux")

    @classmethod
    def zeros(cls, spatial: SpatialGrid, temporal: TimeGrid) -> "StaggeredFields":
        return cls(np.zeros((temporal.n_steps + 1, spatial.n_cells)),
                   np.zeros((temporal.n_steps, spatial.n_faces)),
                   np.zeros((temporal.n_steps, spatial.n_cells)))


@dataclass(frozen=True, eq=False)
class CenteredFields:
    """All three fields at time midpoints and cell centers (n_steps x n_cells)."""
    rho_mid: np.ndarray
    omega_mid: np.ndarray
    zeta_mid: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rho_mid", _frozen_array(self.rho_mid, "rho_mid"))
        object.__setattr__(self, "omega_mid", _frozen_array(self.omega_mid, "omega_mid"))
        object.__setattr__(self, "zeta_mid", _frozen_array(self.zeta_mid, "zeta_mid"))
        check_shape(self.omega_mid, self.rho_mid.shape, "omega_mid")
        check_shape(self.zeta_mid, self.rho_mid.shape, "zeta_mid")

    @property
    def n_steps(self) -> int:
        return self.rho_mid.shape[0]

    @property
    def n_cells(self) -> int:
        return self.rho_mid.shape[1]


def divergence(omega: np.ndarray, grid: SpatialGrid) -> np.ndarray:
    """Two-point divergence of a face field, ``(w[j+1] - w[j]) / dx``.

    Works on the last axis, so a whole n_steps x n_faces array can be passed.
    Boundary faces of the interval are treated as carrying zero flux.
    """
    omega = np.asarray(omega, dtype=float)
    if omega.shape[-1] != grid.n_faces:
        raise ShapeMismatchError("face field has {} faces, grid has {}".format(
            omega.shape[-1], grid.n_faces))
    if grid.periodic:
        return (np.roll(omega, -1, axis=-1) - omega) / grid.cell_width
    flux = omega.copy()
    flux[..., 0] = 0.0
    flux[..., -1] = 0.0
    return (flux[..., 1:] - flux[..., :-1]) / grid.cell_width


def gradient(phi: np.ndarray, grid: SpatialGrid) -> np.ndarray:
    """Two-point gradient of a cell field, living on faces.

    It is minus the adjoint of ``divergence``; interval boundary faces get 0.
    """
    phi = np.asarray(phi, dtype=float)
    if phi.shape[-1] != grid.n_cells:
        raise ShapeMismatchError("cell field has {} cells, grid has {}".format(
            phi.shape[-1], grid.n_cells))
    if grid.periodic:
        return (phi - np.roll(phi, 1, axis=-1)) / grid.cell_width
    grad = np.zeros(phi.shape[:-1] + (grid.n_faces,))
    grad[..., 1:-1] = (phi[..., 1:] - phi[..., :-1]) / grid.cell_width
    return grad


def faces_to_cells(values: np.ndarray, grid: SpatialGrid) -> np.ndarray:
    """Averages the two faces of every cell."""
    values = np.asarray(values, dtype=float)
    if grid.periodic:
        return 0.5 * (values + np.roll(values, -1, axis=-1))
    inner = values.copy()
    inner[..., 0] = 0.0
    inner[..., -1] = 0.0
    return 0.5 * (inner[..., :-1] + inner[..., 1:])


def cells_to_faces(values: np.ndarray, grid: SpatialGrid) -> np.ndarray:
    """Adjoint of ``faces_to_cells``."""
    values = np.asarray(values, dtype=float)
    if grid.periodic:
        return 0.5 * (values + np.roll(values, 1, axis=-1))
    faces = np.zeros(values.shape[:-1] + (grid.n_faces,))
    faces[..., 1:-1] = 0.5 * (values[..., :-1] + values[..., 1:])
    return faces


def interp_to_centered(u: StaggeredFields, grid: SpatialGrid) -> CenteredFields:
    """Midpoint averaging of the staggered fields (time for rho, space for omega)."""
    u.check(grid)
    rho_mid = 0.5 * (u.rho_nodes[:-1] + u.rho_nodes[1:])
    return CenteredFields(rho_mid, faces_to_cells(u.omega_faces, grid), u.zeta_mid)


def adjoint_interp(v: CenteredFields, grid: SpatialGrid) -> StaggeredFields:
    """Adjoint of ``interp_to_centered`` for the plain Euclidean inner product."""
    check_shape(v.rho_mid, (v.n_steps, grid.n_cells), "rho_mid")
    rho_nodes = np.zeros((v.n_steps + 1, grid.n_cells))
    rho_nodes[:-1] += 0.5 * v.rho_mid
    rho_nodes[1:] += 0.5 * v.rho_mid
    return StaggeredFields(rho_nodes, cells_to_faces(v.omega_mid, grid), v.zeta_mid)


def continuity_residual(u: StaggeredFields, rho0, rho1) -> Tuple[np.ndarray, Tuple[np.ndarray, np.ndarray]]:
    """Residuals of the discrete continuity equation and endpoint conditions.

    Args:
        u: staggered path
        rho0: DiscreteMeasure at t = 0
        rho1: DiscreteMeasure at t = 1, on the same spatial grid

    Returns:
        (interior, (start, end)) where interior is n_steps x n_cells with
        ``(rho[k+1] - rho[k]) / dt + div(omega[k]) - zeta[k]`` and the endpoint
        arrays are ``rho[0] - rho0`` and ``rho[-1] - rho1``.
    """
    grid = rho0.grid
    if rho1.grid != grid:
        raise ShapeMismatchError("rho0 and rho1 live on different grids")
    u.check(grid)
    dt = u.time_grid.dt
    interior = ((u.rho_nodes[1:] - u.rho_nodes[:-1]) / dt
                + divergence(u.omega_faces, grid) - u.zeta_mid)
    return interior, (u.rho_nodes[0] - rho0.density, u.rho_nodes[-1] - rho1.density)


def divergence_matrix(grid: SpatialGrid) -> sparse.csr_matrix:
    """Sparse divergence acting on the flux unknowns ``omega[grid.flux_faces]``."""
    n_cells = grid.n_cells
    rows, cols, vals = [], [], []
    for column, face in enumerate(grid.flux_faces):
        left, right = grid.face_cells(int(face))
        if left is not None:
            rows.append(left)
            cols.append(column)
            vals.append(1.0)
        if right is not None:
            rows.append(right)
            cols.append(column)
            vals.append(-1.0)
    matrix = sparse.coo_matrix((vals, (rows, cols)), shape=(n_cells, len(grid.flux_faces)))
    return (matrix / grid.cell_width).tocsr()
