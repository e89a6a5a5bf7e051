"""Uniform one-dimensional finite-volume grid.

Cells are indexed ``0 .. n_cells - 1``.  Face ``i`` sits between cells
``i - 1`` and ``i``, so faces ``0`` (left, ``L``) and ``n_cells`` (right,
``R``) are the two boundary faces.  Ghost cells live in their own index
space (``LEFT`` / ``RIGHT``) and never appear in interior arrays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LEFT = "left"
RIGHT = "right"
SIDES = (LEFT, RIGHT)

#: outward unit normal of the domain on each boundary face
NORMAL = {LEFT: -1.0, RIGHT: 1.0}


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class Grid:
    x_min: float
    x_max: float
    n_cells: int

    def __post_init__(self):
        if self.n_cells < 3:
            raise GridError(f"need at least 3 cells for the centered stencil, got {self.n_cells}")
        if not self.x_max > self.x_min:
            raise GridError(f"non-increasing domain ({self.x_min}, {self.x_max})")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.n_cells

    @property
    def cell_measures(self) -> np.ndarray:
        return np.full(self.n_cells, self.dx)

    @property
    def centers(self) -> np.ndarray:
        return self.x_min + (np.arange(self.n_cells) + 0.5) * self.dx

    @property
    def faces(self) -> np.ndarray:
        return self.x_min + np.arange(self.n_cells + 1) * self.dx

    # faces have unit measure in 1D
    face_measure = 1.0

    def boundary_position(self, side: str) -> float:
        return self.x_min if side == LEFT else self.x_max

    def interior_cell(self, side: str) -> int:
        """Interior cell adjacent to a boundary face."""
        return 0 if side == LEFT else self.n_cells - 1

    def neighbor(self, k: int, side: str) -> int | str:
        """Cell across the face of ``k`` on ``side``; a side name for ghost cells."""
        self._check(k)
        j = k - 1 if side == LEFT else k + 1
        if j < 0:
            return LEFT
        if j >= self.n_cells:
            return RIGHT
        return j

    def faces_of(self, k: int) -> tuple[int, int]:
        self._check(k)
        return k, k + 1

    def _check(self, k: int) -> None:
        if not 0 <= k < self.n_cells:
            raise IndexError(f"cell {k} outside 0..{self.n_cells - 1}")


def build_uniform_grid(x_min: float, x_max: float, n_cells: int) -> Grid:
    return Grid(float(x_min), float(x_max), int(n_cells))


def cell_characteristic_length(grid: Grid, k: int) -> float:
    """Cell measure divided by the total measure of its faces (CFL length)."""
    grid._check(k)
    n_faces = len(grid.faces_of(k))
    return grid.cell_measures[k] / (n_faces * grid.face_measure)
