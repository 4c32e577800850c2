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
"""Constrained Wasserstein-Fisher-Rao transport on the interval and the circle.

The package discretizes paths of nonnegative measures on a staggered
space-time grid, minimizes the Wasserstein-Fisher-Rao energy under an
affine constraint ``int H(t, x) d rho_t = F(t)`` and checks optimality
certificates.
"""
from cwfr.certify import CertificateReport, GeodesicResiduals, certify, geodesic_residuals, gram_system
from cwfr.energy import (CostPoint, Paraboloid, f_delta, path_energy, path_length, project_paraboloid,
                         prox_f_delta, speed_profile, sqrt_midpoint_energy)
from cwfr.grid import (CenteredFields, DomainKind, SpatialGrid, StaggeredFields, TimeGrid, adjoint_interp,
                       build_grids, continuity_residual, divergence, gradient, interp_to_centered)
from cwfr.measures import (Block, Bump, ConstraintSpec, DiracCell, DiscreteMeasure, Explicit,
                           FeasibilityReport, Mixture, RandomDensity, Uniform, check_feasibility,
                           constraint_eval, constraint_preset, make_measure)
from cwfr.paths import (PathTriple, balanced_quantile_path, concatenate, constant_path, linear_fr_path,
                        scaled_balanced_path, scaling_path, teleport_path, time_reverse)
from cwfr.solver import (Problem, Solution, SolverParams, phi_at_nodes, project_affine, project_interp_graph,
                         recover_potential, repair_path, solve)

__version__ = "0.1.0"
