"""Closed-form reference states: the solitary wave and the lake at rest."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import Grid
from .state import SQRT3, Bathymetry, State

#: beyond this |chi| the sech^2 profile is exactly zero in double precision
CHI_CLAMP = 350.0


@dataclass(frozen=True)
class SolitonParams:
    """Solitary wave over a flat bottom.

    Parameters
    ----------
    H : far-field depth
    A : relative amplitude
    X : crest position at t = 0
    g : gravity
    """

    H: float
    A: float
    X: float = 0.0
    g: float = 9.81

    def __post_init__(self):
        if not (self.H > 0 and self.A > 0 and self.g > 0):
            raise ValueError("soliton needs H, A and g > 0")

    @property
    def c(self) -> float:
        return float(np.sqrt((1.0 + self.A) * self.g * self.H))

    def chi(self, t, x):
        k = np.sqrt(3.0 * self.A / (4.0 * (1.0 + self.A))) / self.H
        return k * (np.asarray(x, dtype=float) - self.X - self.c * t)

    def crossing_time(self, length: float = 1.0) -> float:
        """Time for the crest to travel ``length``."""
        return length / self.c


def solitary_wave(t, x, p: SolitonParams):
    """Fields ``(h, u, w, sigma, q_bar, q_B)`` of the solitary wave at time ``t``."""
    chi = p.chi(t, x)
    far = np.abs(chi) > CHI_CLAMP
    chi_c = np.where(far, 0.0, chi)
    sech2 = np.where(far, 0.0, 1.0 / np.cosh(chi_c) ** 2)
    tanh = np.tanh(chi_c)
    H, A, g, c = p.H, p.A, p.g, p.c
    h = H * (1.0 + A * sech2)
    u = (1.0 - H / h) * c
    w = np.sqrt(0.75 * g) * (A * H) ** 1.5 * sech2 * tanh / h
    sigma = w / SQRT3
    q_bar = g * (0.5 * (3.0 + A) * H - h) - 0.5 * ((u - c) ** 2 + w * w + sigma * sigma)
    q_B = 1.5 * q_bar
    return h, u, w, sigma, q_bar, q_B


def soliton_state(t, grid: Grid, p: SolitonParams) -> State:
    h, u, w, s, _, _ = solitary_wave(t, grid.centers, p)
    return State(h, u, w, s)


def lake_at_rest(level: float, bathy: Bathymetry, grid: Grid) -> State:
    """Still water up to ``level``; cells whose bottom pokes out are dry."""
    h = np.maximum(0.0, level - bathy.B)
    z = np.zeros(grid.n_cells)
    return State(h, z.copy(), z.copy(), z.copy())
