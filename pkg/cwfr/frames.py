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
"""Tabular import and export of path frames and convergence logs.

Frames are the centered fields of a path at every ``stride``-th time
midpoint, one row per (time, cell) in time-outer order with the header
``t,x,rho,omega,zeta``. Reals are printed with 17 significant digits so a
table read back and written again is byte-identical.
"""
import csv
import json
import logging
import os
from typing import Iterable, Sequence

import numpy as np
import openpyxl

from cwfr.errors import ShapeMismatchError
from cwfr.paths import PathTriple

logger = logging.getLogger(__name__)

FRAME_COLUMNS = ("t", "x", "rho", "omega", "zeta")
REAL_FORMAT = "%.17g"


def _real(value: float) -> str:
    return REAL_FORMAT % value


def _make_parent(file_name: str):
    folder = os.path.dirname(os.path.normpath(file_name))
    if folder:
        os.makedirs(folder, exist_ok=True)


class FrameTable:
    """Frames of a path: densities, momenta and sources at selected times.

    Methods:
        from_path
        from_csv
        from_excel
        to_csv
        to_excel
        density_at

    Attributes:
        times: frame times, length T
        positions: cell centers, length N
        rho, omega, zeta: T x N arrays
    """

    def __init__(self, times: Sequence[float], positions: Sequence[float],
                 rho: np.ndarray, omega: np.ndarray, zeta: np.ndarray):
        self.times = np.asarray(times, dtype=float)
        self.positions = np.asarray(positions, dtype=float)
        shape = (self.times.size, self.positions.size)
        self.rho, self.omega, self.zeta = (np.asarray(values, dtype=float).reshape(shape)
                                           for values in (rho, omega, zeta))

    @classmethod
    def from_path(cls, path, stride: int = 1):
        """Takes every ``stride``-th midpoint of a PathTriple.

        Negative densities are clamped at zero; the clamp magnitude is logged.
        """
        assert stride >= 1, "stride must be a positive integer"
        centered = path.centered
        rows = np.arange(0, path.temporal.n_steps, stride)
        rho = centered.rho_mid[rows]
        clamp = float(np.max(-rho, initial=0.0))
        if clamp > 0:
            logger.warning("density frames clamped at zero, largest clamp %.3e", clamp)
        return cls(path.temporal.midpoints[rows], path.spatial.cell_centers,
                   np.clip(rho, 0.0, None), centered.omega_mid[rows], centered.zeta_mid[rows])

    @classmethod
    def _from_rows(cls, rows: Iterable[Sequence[float]]):
        table = np.asarray([[float(value) for value in row] for row in rows], dtype=float)
        if table.ndim != 2 or table.shape[1] != len(FRAME_COLUMNS) or table.shape[0] == 0:
            raise ShapeMismatchError("frame table needs rows of {} values".format(len(FRAME_COLUMNS)))
        times = np.unique(table[:, 0])
        if table.shape[0] % times.size:
            raise ShapeMismatchError("frame table is not rectangular: {} rows for {} times".format(
                table.shape[0], times.size))
        n_cells = table.shape[0] // times.size
        table = table.reshape(times.size, n_cells, len(FRAME_COLUMNS))
        if not np.all(table[:, :, 1] == table[:1, :, 1]) or not np.all(table[:, :, 0] == table[:, :1, 0]):
            raise ShapeMismatchError("frame table rows are not in time-outer order on a fixed grid")
        return cls(table[:, 0, 0], table[0, :, 1], table[:, :, 2], table[:, :, 3], table[:, :, 4])

    @classmethod
    def from_csv(cls, file_name: str):
        """Imports frames from a .csv file with the ``t,x,rho,omega,zeta`` header.

        Args:
            file_name (str): path to the .csv file

        Returns:
            frames.FrameTable
        """
        with open(file_name, newline="") as csvfile:
            reader = csv.reader(csvfile)
            header = next(reader, None)
            if header is None or tuple(name.strip() for name in header) != FRAME_COLUMNS:
                raise ShapeMismatchError("{} does not start with the header {}".format(
                    file_name, ",".join(FRAME_COLUMNS)))
            return cls._from_rows(row for row in reader if row)

    @classmethod
    def from_excel(cls, file_name: str):
        """Imports frames from the active sheet of an .xlsx file written by ``to_excel``."""
        book = openpyxl.load_workbook(filename=file_name, read_only=True)
        sheet = book.active
        rows = sheet.iter_rows(values_only=True)
        header = next(rows, None)
        if header is None or tuple(header[:len(FRAME_COLUMNS)]) != FRAME_COLUMNS:
            raise ShapeMismatchError("{} does not start with the header {}".format(
                file_name, ",".join(FRAME_COLUMNS)))
        table = cls._from_rows(row[:len(FRAME_COLUMNS)] for row in rows if row and row[0] is not None)
        book.close()
        return table

    def rows(self):
        for k, t in enumerate(self.times):
            for j, x in enumerate(self.positions):
                yield t, x, self.rho[k, j], self.omega[k, j], self.zeta[k, j]

    def to_csv(self, file_name: str):
        _make_parent(file_name)
        with open(file_name, "wt", newline="", encoding="utf-8") as output_file:
            writer = csv.writer(output_file, lineterminator="\n")
            writer.writerow(FRAME_COLUMNS)
            for row in self.rows():
                writer.writerow([_real(value) for value in row])

    def to_excel(self, file_name: str, sheet_name: str = "frames"):
        _make_parent(file_name)
        book = openpyxl.Workbook()
        sheet = book.active
        sheet.title = sheet_name
        sheet.append(FRAME_COLUMNS)
        for row in self.rows():
            sheet.append([float(value) for value in row])
        book.save(file_name)

    def density_at(self, t: float, tol: float = 1e-9) -> np.ndarray:
        """Density of the frame at time ``t``.

        Examples::
            >>> table.density_at(0.5)
            array([...])
        """
        index = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[index] - t) > tol:
            raise ShapeMismatchError("no frame at t = {}; frame times are {}".format(t, self.times.tolist()))
        return self.rho[index].copy()


def write_convergence_csv(log, file_name: str):
    """Writes the convergence log with one header row and one row per record."""
    _make_parent(file_name)
    with open(file_name, "wt", newline="", encoding="utf-8") as output_file:
        writer = csv.writer(output_file, lineterminator="\n")
        writer.writerow(log.columns)
        for record in log:
            writer.writerow([str(record.iteration)] + [_real(value) for value in record[1:]])


def write_report_excel(file_name: str, frames: FrameTable = None, log=None, summary: dict = None):
    """Writes frames, convergence log and summary as sheets of one workbook."""
    _make_parent(file_name)
    book = openpyxl.Workbook()
    book.remove(book.active)
    if summary is not None:
        sheet = book.create_sheet("summary")
        for key, value in summary.items():
            sheet.append([key, value if isinstance(value, (int, float, str, bool)) or value is None
                          else json.dumps(value)])
    if frames is not None:
        sheet = book.create_sheet("frames")
        sheet.append(FRAME_COLUMNS)
        for row in frames.rows():
            sheet.append([float(value) for value in row])
    if log is not None:
        sheet = book.create_sheet("convergence")
        sheet.append(list(log.columns))
        for record in log:
            sheet.append(list(record))
    if not book.sheetnames:
        book.create_sheet("summary")
    book.save(file_name)


def write_json(document: dict, file_name: str):
    """Dumps a JSON document, creating the folder if needed."""
    _make_parent(file_name)
    with open(file_name, "wt", encoding="utf-8") as output_file:
        json.dump(obj=document, fp=output_file, indent=2, sort_keys=True)
        output_file.write("\n")


def write_potential_csv(times: np.ndarray, positions: np.ndarray, phi: np.ndarray, file_name: str):
    """Writes a potential at time nodes as ``t,x,phi`` rows in time-outer order."""
    _make_parent(file_name)
    with open(file_name, "wt", newline="", encoding="utf-8") as output_file:
        writer = csv.writer(output_file, lineterminator="\n")
        writer.writerow(("t", "x", "phi"))
        for k, t in enumerate(times):
            for j, x in enumerate(positions):
                writer.writerow((_real(t), _real(x), _real(phi[k, j])))


def read_potential_csv(file_name: str) -> np.ndarray:
    """Reads a ``t,x,phi`` table back as a (times x cells) array."""
    with open(file_name, newline="") as csvfile:
        reader = csv.reader(csvfile)
        header = next(reader, None)
        if header is None or tuple(name.strip() for name in header) != ("t", "x", "phi"):
            raise ShapeMismatchError("{} does not start with the header t,x,phi".format(file_name))
        table = np.asarray([[float(value) for value in row] for row in reader if row], dtype=float)
    if table.ndim != 2 or table.shape[0] == 0:
        raise ShapeMismatchError("{} holds no potential values".format(file_name))
    n_times = np.unique(table[:, 0]).size
    if table.shape[0] % n_times:
        raise ShapeMismatchError("potential table is not rectangular")
    return table[:, 2].reshape(n_times, -1)


def save_path(path, file_name: str):
    """Stores the staggered fields of a PathTriple in an .npz archive."""
    _make_parent(file_name)
    np.savez(file_name, rho_nodes=path.rho_nodes, omega_faces=path.omega_faces, zeta_mid=path.zeta_mid,
             delta=np.array(path.delta), kind=np.array(path.spatial.kind.value))


def load_path(file_name: str, spatial, delta: float = None):
    """Loads a PathTriple stored by ``save_path`` onto ``spatial``.

    Raises ShapeMismatchError when the archive does not fit the grid.
    """
    with np.load(file_name) as archive:
        missing = {"rho_nodes", "omega_faces", "zeta_mid"} - set(archive.files)
        if missing:
            raise ShapeMismatchError("{} lacks the arrays {}".format(file_name, sorted(missing)))
        if "kind" in archive.files and str(archive["kind"]) != spatial.kind.value:
            raise ShapeMismatchError("{} holds a path on the {}, configuration is on the {}".format(
                file_name, archive["kind"], spatial.kind.value))
        if delta is None:
            delta = float(archive["delta"])
        rho_nodes, omega_faces, zeta_mid = archive["rho_nodes"], archive["omega_faces"], archive["zeta_mid"]
    if rho_nodes.ndim != 2 or rho_nodes.shape[1] != spatial.n_cells:
        raise ShapeMismatchError("{} has densities of shape {}, grid has {} cells".format(
            file_name, rho_nodes.shape, spatial.n_cells))
    return PathTriple.from_arrays(rho_nodes, omega_faces, zeta_mid, spatial, delta)
