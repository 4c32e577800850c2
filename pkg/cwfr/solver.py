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
"""Douglas-Rachford solver for the discrete constrained energy.

The unknowns come in two copies: the staggered fields ``u`` and the
centered fields ``v``. The first splitting block is the indicator of the
affine set (continuity equation, endpoints, affine constraint) on ``u`` plus
the energy on ``v``; the second is the indicator of the interpolation graph
``v = I(u)``. Both inner products carry the weight ``dt * dx``, which makes
the energy prox a pointwise prox with step ``gamma``. A third copy of the
node densities, clipped at zero in the first block, ties the staggered
density to the nonnegative cone.

The last affine iterate is only close to feasible for the energy, so
``repair_path`` turns it into a nonnegative path with finite energy before
it is returned.
"""
import logging
import time
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional, Tuple

import numpy as np
import tqdm
from scipy import linalg, sparse
from scipy.sparse import linalg as sparse_linalg

from cwfr.energy import CostPoint, path_energy, prox_f_delta
from cwfr.errors import (ConfigError, ConjugateGradientError, InfeasibleProblemError,
                         RankDeficientConstraintError, ShapeMismatchError, SolverError)
from cwfr.grid import (CenteredFields, DomainKind, SpatialGrid, StaggeredFields, TimeGrid, check_shape,
                       cells_to_faces, divergence, divergence_matrix, faces_to_cells)
from cwfr.measures import (ConstraintSpec, DiscreteMeasure, FeasibilityReport, check_feasibility,
                           constraint_eval)
from cwfr.paths import PathTriple, balanced_quantile_path, linear_fr_path

logger = logging.getLogger(__name__)

PIVOT_TOL = 1e-12
NEAR_EMPTY = 1e-9
BALANCED_FLOOR = 1e-6
CORRECTION_STEPS = 5
CORRECTION_TOL = 1e-14


@dataclass(frozen=True, eq=False)
class Problem:
    """Endpoints, constraint and length scale of one transport problem.

    Attributes:
        rho0, rho1: endpoint measures on the same spatial grid
        spec: ConstraintSpec sampled on (rho0.grid, temporal)
        delta: length scale, positive
        temporal: TimeGrid
        balanced: freeze the source at zero (pure transport)
        feasibility_tol: tolerance of the endpoint feasibility check
    """
    rho0: DiscreteMeasure
    rho1: DiscreteMeasure
    spec: ConstraintSpec
    delta: float
    temporal: TimeGrid
    balanced: bool = False
    feasibility_tol: float = 1e-8

    def __post_init__(self):
        if not self.delta > 0:
            raise ConfigError("delta must be positive, got {}".format(self.delta))
        if self.rho0.grid != self.rho1.grid:
            raise ShapeMismatchError("rho0 and rho1 live on different grids")
        self.spec.check(self.spatial, self.temporal)

    @property
    def spatial(self) -> SpatialGrid:
        return self.rho0.grid

    @property
    def grids(self) -> Tuple[SpatialGrid, TimeGrid]:
        return self.spatial, self.temporal

    def feasibility(self) -> FeasibilityReport:
        return check_feasibility(self.spec, self.rho0, self.rho1, self.feasibility_tol)

    def time_reversed(self) -> "Problem":
        """The same problem run from rho1 to rho0."""
        return Problem(self.rho1, self.rho0, self.spec.time_reversed(), self.delta, self.temporal,
                       self.balanced, self.feasibility_tol)

    def check(self):
        """Raises InfeasibleProblemError if the endpoints cannot be joined."""
        report = self.feasibility()
        if not report.feasible:
            raise InfeasibleProblemError("endpoints violate the affine constraint: {}".format(report), report)
        if self.balanced and abs(self.rho0.total_mass - self.rho1.total_mass) > self.feasibility_tol:
            raise InfeasibleProblemError("balanced mode needs equal masses, got {} and {}".format(
                self.rho0.total_mass, self.rho1.total_mass), report)


@dataclass(frozen=True)
class SolverParams:
    """Douglas-Rachford parameters. ``dr_step`` defaults to ``1 / delta``.

    The iteration stops once the fixed-point residual drops below
    ``fixed_point_tol * max(1, |x|)``, the norm taken over the current iterate.
    """
    max_iters: int = 20000
    dr_step: Optional[float] = None
    relaxation: float = 1.8
    cg_tol: float = 1e-10
    cg_max_iters: int = 200
    fixed_point_tol: float = 1e-5
    log_every: int = 100
    progress: bool = False

    def __post_init__(self):
        if self.max_iters < 1 or self.cg_max_iters < 1 or self.log_every < 1:
            raise ConfigError("iteration counts must be positive")
        if self.dr_step is not None and not self.dr_step > 0:
            raise ConfigError("dr_step must be positive, got {}".format(self.dr_step))
        if not 0 < self.relaxation <= 2:
            raise ConfigError("relaxation must lie in (0, 2], got {}".format(self.relaxation))
        if not (self.cg_tol > 0 and self.fixed_point_tol > 0):
            raise ConfigError("tolerances must be positive")

    def step(self, delta: float) -> float:
        return self.dr_step if self.dr_step is not None else 1.0 / delta


class ConvergenceRecord(NamedTuple):
    iteration: int
    dr_residual: float
    energy: float
    ce_residual: float
    constraint_residual: float


class ConvergenceLog:
    """Rows of ConvergenceRecord collected every ``log_every`` iterations."""
    columns = ConvergenceRecord._fields

    def __init__(self, records: List[ConvergenceRecord] = None):
        self._records = list(records or [])

    def append(self, record: ConvergenceRecord):
        self._records.append(record)

    @property
    def records(self) -> List[ConvergenceRecord]:
        return list(self._records)

    @property
    def last(self) -> Optional[ConvergenceRecord]:
        return self._records[-1] if self._records else None

    def column(self, name: str) -> np.ndarray:
        return np.asarray([getattr(record, name) for record in self._records], dtype=float)

    def __len__(self):
        return len(self._records)

    def __iter__(self):
        return iter(self._records)


@dataclass(frozen=True, eq=False)
class Solution:
    """Result of ``solve``.

    Attributes:
        path: affine-feasible, nonnegative staggered path with its centered interpolant
        energy: energy of ``path``, evaluated on its centered interpolant
        distance: square root of the energy
        phi: potential at time midpoints, n_steps x n_cells
        psi: constraint multipliers at time nodes, (n_steps + 1) x d
        log: ConvergenceLog
        prox_energy: energy of the last prox iterate, a diagnostic
    """
    path: PathTriple
    energy: float
    distance: float
    phi: np.ndarray
    psi: np.ndarray
    log: ConvergenceLog
    converged: bool
    iterations: int
    wall_time: float
    dr_step: float
    ce_multipliers: np.ndarray = field(repr=False)
    constraint_multipliers: np.ndarray = field(repr=False)
    ce_residual: float = 0.0
    constraint_residual: float = 0.0
    prox_energy: float = float("nan")

    @property
    def phi_nodes(self) -> np.ndarray:
        return phi_at_nodes(self.phi)

    def summary(self) -> dict:
        return {"energy": self.energy,
                "prox_energy": self.prox_energy,
                "distance": self.distance,
                "iterations": self.iterations,
                "converged": self.converged,
                "dr_residual": self.log.last.dr_residual if self.log.last else None,
                "ce_residual": self.ce_residual,
                "constraint_residual": self.constraint_residual,
                "wall_time": self.wall_time}


class AffineProjector:
    """Euclidean projection onto ``{B u = b}``.

    Rows of B: the continuity equation at every midpoint multiplied by dt,
    the two endpoint conditions and the constraint at the interior nodes.
    The constraint at t = 0 and t = 1 duplicates the endpoint rows and is
    checked up front instead. In balanced mode the source unknowns are gone,
    one endpoint row follows from mass conservation and is dropped, and so
    are constraint rows with a spatially constant H.

    ``(B B^T) y = B u - b`` is solved by conjugate gradient preconditioned
    with a sparse LU factorization, warm-started from the last multiplier.
    """

    def __init__(self, problem: Problem, cg_tol: float = 1e-10, cg_max_iters: int = 200):
        self.problem = problem
        self.cg_tol = cg_tol
        self.cg_max_iters = cg_max_iters
        spatial, temporal = problem.grids
        self._n_cells, self._n_steps = spatial.n_cells, temporal.n_steps
        self._n_flux = len(spatial.flux_faces)
        self._flux_faces = spatial.flux_faces
        self._n_faces = spatial.n_faces
        self._n_rho = (self._n_steps + 1) * self._n_cells
        self._n_omega = self._n_steps * self._n_flux
        self._n_zeta = 0 if problem.balanced else self._n_steps * self._n_cells
        self.size = self._n_rho + self._n_omega + self._n_zeta
        self.matrix, self.rhs, self.constraint_rows = self._assemble()
        self._factorize()
        self._multiplier = np.zeros(self.matrix.shape[0])

    def _assemble(self):
        problem = self.problem
        spatial, temporal = problem.grids
        n_cells, n_steps, dt = self._n_cells, self._n_steps, temporal.dt
        time_difference = sparse.diags([-np.ones(n_steps), np.ones(n_steps)], [0, 1], shape=(n_steps, n_steps + 1))
        blocks = [sparse.kron(time_difference, sparse.identity(n_cells)),
                  sparse.kron(sparse.identity(n_steps), dt * divergence_matrix(spatial))]
        if not problem.balanced:
            blocks.append(-dt * sparse.identity(n_steps * n_cells))
        rows = [sparse.hstack(blocks)]
        rhs = [np.zeros(n_steps * n_cells)]

        kept_cells = np.arange(n_cells - 1 if problem.balanced else n_cells)
        rows.append(self._select(np.arange(n_cells)))
        rhs.append(problem.rho0.density)
        rows.append(self._select(n_steps * n_cells + kept_cells))
        rhs.append(problem.rho1.density[kept_cells])

        constraint_rows = []
        spec = problem.spec
        dx = spatial.cell_width
        mass = problem.rho0.total_mass
        for k in range(1, n_steps):
            for i in range(spec.d):
                profile = spec.h_values[i, k]
                if problem.balanced and np.ptp(profile) <= 1e-14 * max(1.0, np.max(np.abs(profile))):
                    defect = profile[0] * mass - spec.f_values[k, i]
                    if abs(defect) > problem.feasibility_tol:
                        raise InfeasibleProblemError(
                            "constraint {} at t = {} asks for mass {} but balanced transport keeps {}".format(
                                i, temporal.nodes[k], spec.f_values[k, i], profile[0] * mass))
                    continue
                constraint_rows.append((k, i))
                columns = k * n_cells + np.arange(n_cells)
                rows.append(sparse.csr_matrix((profile * dx, (np.zeros(n_cells, dtype=int), columns)),
                                              shape=(1, self.size)))
                rhs.append(np.array([spec.f_values[k, i]]))
        matrix = sparse.vstack(rows).tocsr()
        return matrix, np.concatenate(rhs), constraint_rows

    def _select(self, columns: np.ndarray) -> sparse.csr_matrix:
        return sparse.csr_matrix((np.ones(columns.size), (np.arange(columns.size), columns)),
                                 shape=(columns.size, self.size))

    def _factorize(self):
        self.gram = (self.matrix @ self.matrix.T).tocsc()
        try:
            self._lu = sparse_linalg.splu(self.gram)
        except RuntimeError as error:
            raise RankDeficientConstraintError(
                "the affine rows are linearly dependent ({}); remove dependent constraints".format(error)) from error
        pivots = np.abs(self._lu.U.diagonal())
        if pivots.min() <= PIVOT_TOL * pivots.max():
            raise RankDeficientConstraintError(
                "the affine rows are linearly dependent (pivot ratio {:.1e}); remove dependent constraints".format(
                    pivots.min() / pivots.max()))
        self._preconditioner = sparse_linalg.LinearOperator(self.gram.shape, matvec=self._lu.solve)

    def pack(self, rho_nodes: np.ndarray, omega_faces: np.ndarray, zeta_mid: np.ndarray) -> np.ndarray:
        parts = [np.ravel(rho_nodes), np.ravel(omega_faces[:, self._flux_faces])]
        if not self.problem.balanced:
            parts.append(np.ravel(zeta_mid))
        return np.concatenate(parts)

    def unpack(self, vector: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        rho = vector[:self._n_rho].reshape(self._n_steps + 1, self._n_cells)
        omega = np.zeros((self._n_steps, self._n_faces))
        omega[:, self._flux_faces] = vector[self._n_rho:self._n_rho + self._n_omega].reshape(
            self._n_steps, self._n_flux)
        if self.problem.balanced:
            zeta = np.zeros((self._n_steps, self._n_cells))
        else:
            zeta = vector[self._n_rho + self._n_omega:].reshape(self._n_steps, self._n_cells)
        return rho, omega, zeta

    def project_vector(self, vector: np.ndarray) -> np.ndarray:
        residual = self.matrix @ vector - self.rhs
        multiplier, info = sparse_linalg.cg(self.gram, residual, x0=self._multiplier, rtol=0.0,
                                            atol=self.cg_tol, maxiter=self.cg_max_iters,
                                            M=self._preconditioner)
        if info > 0:
            reached = float(np.linalg.norm(self.gram @ multiplier - residual))
            raise ConjugateGradientError("conjugate gradient stopped after {} iterations at residual {:.3e}".format(
                info, reached), reached)
        if info < 0:
            raise SolverError("conjugate gradient got an illegal input")
        self._multiplier = multiplier
        return vector - self.matrix.T @ multiplier

    def project(self, fields: Tuple[np.ndarray, np.ndarray, np.ndarray]) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.unpack(self.project_vector(self.pack(*fields)))

    @property
    def multiplier(self) -> np.ndarray:
        return self._multiplier.copy()

    def ce_multipliers(self) -> np.ndarray:
        """Multipliers of the continuity rows, n_steps x n_cells."""
        return self._multiplier[:self._n_steps * self._n_cells].reshape(self._n_steps, self._n_cells)

    def constraint_multipliers(self) -> np.ndarray:
        """Multipliers of the constraint rows at interior nodes, (n_steps + 1) x d, zero elsewhere."""
        values = np.zeros((self._n_steps + 1, self.problem.spec.d))
        offset = self.matrix.shape[0] - len(self.constraint_rows)
        for row, (k, i) in enumerate(self.constraint_rows):
            values[k, i] = self._multiplier[offset + row]
        return values

    def residuals(self, fields: Tuple[np.ndarray, np.ndarray, np.ndarray]) -> Tuple[float, float]:
        """Largest continuity (or endpoint) residual and largest constraint residual."""
        rho, omega, zeta = fields
        dt = self.problem.temporal.dt
        spatial = self.problem.spatial
        interior = np.diff(rho, axis=0) / dt + divergence(omega, spatial) - zeta
        ce = max(np.max(np.abs(interior)),
                 np.max(np.abs(rho[0] - self.problem.rho0.density)),
                 np.max(np.abs(rho[-1] - self.problem.rho1.density)))
        constraint = constraint_eval(self.problem.spec, rho)
        return float(ce), float(np.max(np.abs(constraint), initial=0.0))


class InterpolationGraphProjector:
    """Projection onto ``{(u, v) : v = I(u)}``.

    Solves ``(Id + I^T I) u = u0 + I^T v0`` line by line: a tridiagonal
    system in time for the density, a tridiagonal (interval) or circulant
    (circle) system in space for the momentum, a plain average for the source.
    With a node copy ``r`` of the density the graph also asks ``r = rho_nodes``
    and the density system gets one more identity.
    """

    def __init__(self, spatial: SpatialGrid, temporal: TimeGrid, balanced: bool = False):
        self.spatial = spatial
        self.temporal = temporal
        self.balanced = balanced
        n_nodes = temporal.n_steps + 1
        self._rho_bands = np.zeros((3, n_nodes))
        self._rho_bands[0, 1:] = 0.25
        self._rho_bands[1, :] = 1.5
        self._rho_bands[1, [0, -1]] = 1.25
        self._rho_bands[2, :-1] = 0.25
        self._rho_bands_with_nodes = self._rho_bands.copy()
        self._rho_bands_with_nodes[1] += 1.0
        if spatial.periodic:
            unit = np.zeros(spatial.n_faces)
            unit[0] = 1.0
            self._circulant = unit + cells_to_faces(faces_to_cells(unit, spatial), spatial)
        else:
            n_flux = spatial.n_cells - 1
            self._omega_bands = np.zeros((3, n_flux))
            self._omega_bands[0, 1:] = 0.25
            self._omega_bands[1, :] = 1.5
            self._omega_bands[2, :-1] = 0.25

    def project(self, u, v):
        """Projects array triples ``u = (rho_nodes, omega_faces, zeta_mid)`` and
        ``v = (rho_mid, omega_mid, zeta_mid)``; returns the projected pair."""
        return self._project(u, v)

    def project_with_nodes(self, u, v, nodes: np.ndarray):
        """Like ``project`` with a node copy of the density; returns ``(u, v, r)``."""
        staggered, centered = self._project(u, v, np.asarray(nodes, dtype=float))
        return staggered, centered, staggered[0].copy()

    def _project(self, u, v, nodes=None):
        rho0, omega0, zeta0 = u
        rho_v, omega_v, zeta_v = v
        rho_rhs = np.array(rho0, dtype=float, copy=True)
        rho_rhs[:-1] += 0.5 * rho_v
        rho_rhs[1:] += 0.5 * rho_v
        if nodes is None:
            rho = linalg.solve_banded((1, 1), self._rho_bands, rho_rhs)
        else:
            rho = linalg.solve_banded((1, 1), self._rho_bands_with_nodes, rho_rhs + nodes)

        omega_rhs = omega0 + cells_to_faces(omega_v, self.spatial)
        if self.spatial.periodic:
            omega = linalg.solve_circulant(self._circulant, omega_rhs.T).T
        else:
            omega = np.zeros_like(omega_rhs)
            omega[:, 1:-1] = linalg.solve_banded((1, 1), self._omega_bands, omega_rhs[:, 1:-1].T).T
        if self.balanced:
            zeta = np.zeros_like(zeta0)
        else:
            zeta = 0.5 * (zeta0 + zeta_v)
        centered = (0.5 * (rho[:-1] + rho[1:]), faces_to_cells(omega, self.spatial), zeta)
        return (rho, omega, zeta), centered


def _fields(u: StaggeredFields):
    return np.array(u.rho_nodes), np.array(u.omega_faces), np.array(u.zeta_mid)


def project_affine(u: StaggeredFields, problem: Problem, cg_tol: float = 1e-10,
                   cg_max_iters: int = 200) -> StaggeredFields:
    """Projects staggered fields onto the affine set of ``problem``.

    Raises InfeasibleProblemError when the endpoints are infeasible.
    """
    problem.check()
    u.check(problem.spatial)
    projector = AffineProjector(problem, cg_tol, cg_max_iters)
    return StaggeredFields(*projector.project(_fields(u)))


def project_interp_graph(u: StaggeredFields, v: CenteredFields,
                         grid: SpatialGrid = None) -> Tuple[StaggeredFields, CenteredFields]:
    """Nearest pair ``(u, I(u))`` to ``(u, v)``.

    The grid kind is read off the face count when ``grid`` is not given.
    """
    if grid is None:
        kind = DomainKind.INTERVAL if u.omega_faces.shape[1] == u.n_cells + 1 else DomainKind.CIRCLE
        grid = SpatialGrid(kind, u.n_cells)
    u.check(grid)
    if (v.n_steps, v.n_cells) != (u.n_steps, u.n_cells):
        raise ShapeMismatchError("centered fields {} do not match staggered fields {}".format(
            (v.n_steps, v.n_cells), (u.n_steps, u.n_cells)))
    projector = InterpolationGraphProjector(grid, u.time_grid)
    staggered, centered = projector.project(_fields(u), (v.rho_mid, v.omega_mid, v.zeta_mid))
    return StaggeredFields(*staggered), CenteredFields(*centered)


def phi_at_nodes(phi_mid: np.ndarray) -> np.ndarray:
    """Maps a midpoint potential to time nodes.

    Interior nodes average their two midpoints; the end nodes extrapolate linearly.
    """
    phi_mid = np.asarray(phi_mid, dtype=float)
    n_steps = phi_mid.shape[0]
    nodes = np.empty((n_steps + 1,) + phi_mid.shape[1:])
    if n_steps == 1:
        nodes[:] = phi_mid[0]
        return nodes
    nodes[1:-1] = 0.5 * (phi_mid[:-1] + phi_mid[1:])
    nodes[0] = 1.5 * phi_mid[0] - 0.5 * phi_mid[1]
    nodes[-1] = 1.5 * phi_mid[-1] - 0.5 * phi_mid[-2]
    return nodes


def _fill_end_nodes(values: np.ndarray) -> np.ndarray:
    if values.shape[0] > 3:
        values[0] = 2.0 * values[1] - values[2]
        values[-1] = 2.0 * values[-2] - values[-3]
    elif values.shape[0] == 3:
        values[0] = values[-1] = values[1]
    return values


def _potentials(ce_multipliers: np.ndarray, constraint_multipliers: np.ndarray, gamma: float,
                spatial: SpatialGrid, temporal: TimeGrid) -> Tuple[np.ndarray, np.ndarray]:
    phi = temporal.dt / gamma * np.asarray(ce_multipliers, dtype=float)
    psi = spatial.cell_width / gamma * np.array(constraint_multipliers, dtype=float)
    return phi, _fill_end_nodes(psi)


def recover_potential(solution: Solution) -> Tuple[np.ndarray, np.ndarray]:
    """Potential and constraint multipliers from the last affine projection.

    Returns:
        phi at midpoints (n_steps x n_cells), with ``phi rho = delta**2 zeta``
        on the support, and psi at nodes ((n_steps + 1) x d); psi at the two
        end nodes is extrapolated since the endpoint rows absorb it there.
    """
    return _potentials(solution.ce_multipliers, solution.constraint_multipliers, solution.dr_step,
                       solution.path.spatial, solution.path.temporal)


def initial_path(problem: Problem) -> PathTriple:
    """Feasible-ish starting point: the linear Fisher-Rao path, or the
    displacement path for balanced problems on the interval."""
    spatial, temporal = problem.grids
    if problem.balanced and spatial.kind is DomainKind.INTERVAL and problem.rho0.total_mass > 0:
        return balanced_quantile_path(problem.rho0, problem.rho1, problem.grids, problem.delta)
    start = linear_fr_path(problem.rho0, problem.rho1, problem.grids, problem.delta)
    if problem.balanced:
        return PathTriple.from_arrays(start.rho_nodes, start.omega_faces, np.zeros_like(start.zeta_mid),
                                      spatial, problem.delta)
    return start


def _forced_empty(spec: ConstraintSpec, k: int) -> np.ndarray:
    """Cells where a sign-definite profile with zero target leaves no room for mass."""
    empty = np.zeros(spec.n_cells, dtype=bool)
    for i in range(spec.d):
        profile = spec.h_values[i, k]
        if spec.f_values[k, i] == 0 and (np.all(profile >= 0) or np.all(profile <= 0)):
            empty |= profile != 0
    return empty


def _match_targets(rho: np.ndarray, profiles: np.ndarray, targets: np.ndarray, dx: float) -> np.ndarray:
    """Rescales ``rho`` by ``1 + sum_i a_i H_i`` until ``sum H_i rho dx = F_i``.

    One step is exact while the factor stays nonnegative; it is clipped at zero
    otherwise and the step repeated.
    """
    scale = max(1.0, float(np.max(np.abs(targets), initial=0.0)))
    for _ in range(CORRECTION_STEPS):
        defect = targets - profiles @ rho * dx
        if np.max(np.abs(defect), initial=0.0) <= CORRECTION_TOL * scale:
            break
        gram = (profiles * (rho * dx)) @ profiles.T
        coefficients = np.linalg.lstsq(gram, defect, rcond=None)[0]
        rho = rho * np.clip(1.0 + coefficients @ profiles, 0.0, None)
    return rho


def _free_fluxes(omega: np.ndarray, rho: np.ndarray, spatial: SpatialGrid) -> np.ndarray:
    """Zeroes the momentum on every face of a cell whose midpoint density is negligible."""
    rho_mid = 0.5 * (rho[:-1] + rho[1:])
    empty = rho_mid <= NEAR_EMPTY * max(float(np.max(rho)), np.finfo(float).tiny)
    blocked = np.zeros(omega.shape, dtype=bool)
    blocked[:, :spatial.n_cells] |= empty
    if spatial.periodic:
        blocked |= np.roll(empty, 1, axis=1)
    else:
        blocked[:, 1:] |= empty
    omega = np.where(blocked, 0.0, omega)
    if not spatial.periodic:
        omega[:, [0, -1]] = 0.0
    return omega


def _balanced_fluxes(omega: np.ndarray, rho: np.ndarray, spatial: SpatialGrid, dt: float) -> np.ndarray:
    """The momentum carrying ``rho`` without any source; on the circle the free
    constant per step is taken from ``omega``."""
    flux = -spatial.cell_width * np.cumsum(np.diff(rho, axis=0) / dt, axis=1)
    result = np.zeros(omega.shape)
    if spatial.periodic:
        result[:, 1:] = flux[:, :-1]
        result += np.mean(omega - result, axis=1, keepdims=True)
    else:
        result[:, 1:-1] = flux[:, :-1]
    return result


def repair_path(u: StaggeredFields, problem: Problem) -> PathTriple:
    """Turns an approximately feasible iterate into a path the problem accepts.

    Densities are clipped at zero and emptied where a zero-target constraint
    with a sign-definite profile forbids mass, then rescaled node by node to
    hit the constraint targets (and the mass, in balanced mode, after mixing
    in a faint uniform floor). Momentum is kept off negligible cells, or
    rebuilt from the densities in balanced mode, and the source closes the
    continuity equation. The result has nonnegative densities, satisfies the
    affine rows up to rounding and has finite energy whenever ``u`` is close
    to such a path.
    """
    spatial, temporal = problem.grids
    check_shape(u.rho_nodes, (temporal.n_steps + 1, spatial.n_cells), "rho_nodes")
    check_shape(u.omega_faces, (temporal.n_steps, spatial.n_faces), "omega_faces")
    spec = problem.spec
    dx, dt = spatial.cell_width, temporal.dt
    rho = np.clip(np.array(u.rho_nodes, dtype=float), 0.0, None)
    rho[0] = problem.rho0.density
    rho[-1] = problem.rho1.density

    mass = problem.rho0.total_mass
    for k in range(1, temporal.n_steps):
        allowed = ~_forced_empty(spec, k)
        rho[k, ~allowed] = 0.0
        profiles, targets = spec.h_values[:, k], spec.f_values[k]
        if problem.balanced:
            if mass > 0 and np.any(allowed):
                floor = allowed * mass / (np.count_nonzero(allowed) * dx)
                rho[k] = (1.0 - BALANCED_FLOOR) * rho[k] + BALANCED_FLOOR * floor
            profiles = np.vstack([profiles, np.ones((1, spatial.n_cells))])
            targets = np.append(targets, mass)
        if profiles.shape[0]:
            rho[k] = _match_targets(rho[k], profiles, targets, dx)

    if problem.balanced:
        omega = _balanced_fluxes(u.omega_faces, rho, spatial, dt)
        zeta = np.zeros((temporal.n_steps, spatial.n_cells))
    else:
        omega = _free_fluxes(np.array(u.omega_faces, dtype=float), rho, spatial)
        zeta = np.diff(rho, axis=0) / dt + divergence(omega, spatial)
    return PathTriple.from_arrays(rho, omega, zeta, spatial, problem.delta)


def _prox(v, gamma: float, delta: float):
    result = prox_f_delta(CostPoint(*v), gamma, delta)
    return result.a, result.b, result.c


def _weighted_norm(pairs, weight: float) -> float:
    return float(np.sqrt(weight * sum(np.sum((a - b) ** 2) for a, b in pairs)))


def solve(problem: Problem, params: SolverParams = None) -> Solution:
    """Minimizes the discrete energy over the affine set of ``problem``.

    Besides the two field copies the splitting carries a node copy of the
    density kept nonnegative in the first block. The returned path is the
    affine projection of the final iterate passed through ``repair_path``,
    and the reported energy is the energy of that path.

    Args:
        problem: Problem, endpoints must be feasible
        params: SolverParams, defaults when None

    Returns:
        Solution

    Raises:
        InfeasibleProblemError: before any iteration, for infeasible endpoints
        ConjugateGradientError, RankDeficientConstraintError: from the affine projection
        SolverError: when the energy of the returned path is not finite
    """
    params = params or SolverParams()
    problem.check()
    spatial, temporal = problem.grids
    gamma = params.step(problem.delta)
    weight = temporal.dt * spatial.cell_width
    affine = AffineProjector(problem, params.cg_tol, params.cg_max_iters)
    graph = InterpolationGraphProjector(spatial, temporal, problem.balanced)

    start = initial_path(problem)
    z_u = _fields(start.staggered)
    z_v = (np.array(start.centered.rho_mid), np.array(start.centered.omega_mid),
           np.array(start.centered.zeta_mid))
    z_r = np.array(start.rho_nodes)
    log = ConvergenceLog()
    converged = False
    started = time.perf_counter()
    iteration = 0
    logger.info("solving %s problem on %d cells x %d steps, delta=%g, d=%d",
                "balanced" if problem.balanced else "unbalanced", spatial.n_cells, temporal.n_steps,
                problem.delta, problem.spec.d)

    for iteration in tqdm.tqdm(range(1, params.max_iters + 1), desc="Douglas-Rachford", unit="it",
                               disable=not params.progress):
        x_u = affine.project(z_u)
        x_v = _prox(z_v, gamma, problem.delta)
        x_r = np.clip(z_r, 0.0, None)
        y_u, y_v, y_r = graph.project_with_nodes(tuple(2.0 * x - z for x, z in zip(x_u, z_u)),
                                                 tuple(2.0 * x - z for x, z in zip(x_v, z_v)),
                                                 2.0 * x_r - z_r)
        dr_residual = _weighted_norm(list(zip(y_u, x_u)) + list(zip(y_v, x_v)) + [(y_r, x_r)], weight)
        scale = _weighted_norm([(x, 0.0) for x in x_u + x_v + (x_r,)], weight)
        z_u = tuple(z + params.relaxation * (y - x) for z, y, x in zip(z_u, y_u, x_u))
        z_v = tuple(z + params.relaxation * (y - x) for z, y, x in zip(z_v, y_v, x_v))
        z_r = z_r + params.relaxation * (y_r - x_r)
        converged = dr_residual <= params.fixed_point_tol * max(1.0, scale)
        if converged or iteration % params.log_every == 0 or iteration == params.max_iters:
            energy = path_energy(CenteredFields(*x_v), spatial, temporal, problem.delta)
            record = ConvergenceRecord(iteration, dr_residual, energy, *affine.residuals(x_u))
            log.append(record)
            logger.info("iter %d dr_residual=%.3e energy=%.8g ce_residual=%.2e constraint_residual=%.2e",
                        *record)
        if converged:
            break

    if not converged:
        logger.warning("no convergence after %d iterations, last residual %.3e",
                       iteration, log.last.dr_residual if log.last else float("nan"))

    x_u = affine.project(z_u)
    x_v = _prox(z_v, gamma, problem.delta)
    ce_multipliers = affine.ce_multipliers().copy()
    constraint_multipliers = affine.constraint_multipliers()
    path = repair_path(StaggeredFields(*x_u), problem)
    energy = path.energy()
    if not np.isfinite(energy):
        raise SolverError("energy of the returned path is not finite; mass crosses cells the iterate left empty")
    prox_energy = path_energy(CenteredFields(*x_v), spatial, temporal, problem.delta)
    ce_residual, constraint_residual = affine.residuals((path.rho_nodes, path.omega_faces, path.zeta_mid))
    phi, psi = _potentials(ce_multipliers, constraint_multipliers, gamma, spatial, temporal)
    solution = Solution(path=path, energy=energy, distance=float(np.sqrt(energy)), phi=phi, psi=psi,
                        log=log, converged=converged, iterations=iteration,
                        wall_time=time.perf_counter() - started, dr_step=gamma,
                        ce_multipliers=ce_multipliers, constraint_multipliers=constraint_multipliers,
                        ce_residual=ce_residual, constraint_residual=constraint_residual,
                        prox_energy=prox_energy)
    logger.info("energy %.8g (prox copy %.8g) after %d iterations (%s)", energy, prox_energy, iteration,
                "converged" if converged else "iteration cap")
    return solution
