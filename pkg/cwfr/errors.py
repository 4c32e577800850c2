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
"""Exceptions raised by the cwfr package.

Every error derives from ``WfrError``. Errors about bad values also derive
from ``ValueError``, so callers that only know about the builtin hierarchy
can still catch them.
"""


class WfrError(Exception):
    """Base class of all cwfr errors."""


class GridSizeError(WfrError, ValueError):
    """Raised for degenerate grid sizes."""


class ShapeMismatchError(WfrError, ValueError):
    """Raised when an array does not match the grid it is used with."""


class MeasureError(WfrError, ValueError):
    """Raised for invalid measure presets (negative mass, bad index...)."""


class ConstraintError(WfrError, ValueError):
    """Raised for invalid constraint presets or parameters."""


class PathConstructionError(WfrError, ValueError):
    """Raised when a path constructor's preconditions do not hold."""


class InfeasibleProblemError(WfrError):
    """Raised when the endpoints violate the affine constraint.

    Attributes:
        report: the FeasibilityReport that failed
    """
    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


class SolverError(WfrError):
    """Raised when the solver cannot produce a usable result."""


class ConjugateGradientError(SolverError):
    """Raised when conjugate gradient does not reach its tolerance.

    Attributes:
        residual: the residual norm reached when the solver gave up
    """
    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(message)
        self.residual = residual


class RankDeficientConstraintError(SolverError):
    """Raised when the stacked affine rows are linearly dependent."""


class GramMatrixError(WfrError, ValueError):
    """Raised when the constraint Gram matrix is singular or ill-conditioned."""


class ConfigError(WfrError, ValueError):
    """Raised for unreadable or schema-invalid run configurations."""
