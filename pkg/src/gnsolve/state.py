"""State containers, the mechanical energy and the discrete admissible set.

The centered operators follow the face-sum definition

    grad_k(phi) = 1/m_k * sum_f (phi_k + phi_kf)/2 * nu_f * m_f,

which on a uniform 1D grid is ``(phi[k+1] - phi[k-1]) / (2 dx)`` with the
ghost values standing in for the missing neighbours at both ends.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .mesh import LEFT, NORMAL, RIGHT, Grid

SQRT3 = np.sqrt(3.0)

#: a cell is dry when h <= DRY_EPS
DRY_EPS = 1e-12


class StateError(ValueError):
    pass


def wet_mask(h: np.ndarray, eps: float = DRY_EPS) -> np.ndarray:
    return np.asarray(h) > eps


@dataclass
class State:
    h: np.ndarray
    u: np.ndarray
    w: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        self.h = np.asarray(self.h, dtype=float)
        n = self.h.shape[0]
        for name in ("u", "w", "sigma"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (n,):
                raise StateError(f"{name} has shape {arr.shape}, expected ({n},)")
            setattr(self, name, arr)

    @property
    def n_cells(self) -> int:
        return self.h.shape[0]

    def validate(self) -> None:
        for name in ("h", "u", "w", "sigma"):
            arr = getattr(self, name)
            bad = np.flatnonzero(~np.isfinite(arr))
            if bad.size:
                raise StateError(f"non-finite {name} in cell {bad[0]}")
        if np.any(self.h < 0):
            raise StateError(f"negative depth in cell {int(np.argmin(self.h))}")

    def copy(self) -> "State":
        return State(self.h.copy(), self.u.copy(), self.w.copy(), self.sigma.copy())

    def velocities(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.u, self.w, self.sigma


@dataclass
class PressureField:
    q_bar: np.ndarray
    q_B: np.ndarray

    @classmethod
    def zeros(cls, n: int) -> "PressureField":
        return cls(np.zeros(n), np.zeros(n))


@dataclass
class Bathymetry:
    """Cell bottom elevations plus one ghost value per boundary face.

    ``outer`` holds a second ghost layer, only needed to evaluate the
    bathymetry gradient *at* a ghost cell.
    """

    B: np.ndarray
    ghost: dict = field(default_factory=dict)
    outer: dict = field(default_factory=dict)

    @classmethod
    def from_cells(cls, B, ghost: str | dict = "reflect") -> "Bathymetry":
        B = np.asarray(B, dtype=float)
        if not np.all(np.isfinite(B)):
            raise StateError("bathymetry must be finite")
        rules = ghost if isinstance(ghost, dict) else {LEFT: ghost, RIGHT: ghost}
        g, o = {}, {}
        for side in (LEFT, RIGHT):
            rule = rules.get(side, "reflect")
            first, second = (B[0], B[1]) if side == LEFT else (B[-1], B[-2])
            far, far2 = (B[-1], B[-2]) if side == LEFT else (B[0], B[1])
            if rule == "reflect":
                g[side], o[side] = first, second
            elif rule == "extrapolate":
                g[side] = 2 * first - second
                o[side] = 3 * first - 2 * second
            elif rule == "periodic":
                g[side], o[side] = far, far2
            else:
                raise StateError(f"unknown bathymetry ghost rule {rule!r}")
        return cls(B, g, o)

    @classmethod
    def flat(cls, n: int, level: float = 0.0) -> "Bathymetry":
        return cls.from_cells(np.full(n, float(level)))

    def gradient(self, grid: Grid) -> np.ndarray:
        return discrete_gradient(grid, self.B, (self.ghost[LEFT], self.ghost[RIGHT]))

    def ghost_gradient(self, grid: Grid, side: str) -> float:
        if side == LEFT:
            return (self.B[0] - self.outer[LEFT]) / (2 * grid.dx)
        return (self.outer[RIGHT] - self.B[-1]) / (2 * grid.dx)


@dataclass
class FaceGhost:
    """Ghost-cell values on one boundary face.

    ``un`` is the normal velocity u_g * nu, ``ut`` the tangential one (always
    unused in 1D) and ``hq`` the product h_g * q_bar_g kept as one number.
    """

    h: float = 0.0
    un: float = 0.0
    ut: float = 0.0
    w: float = 0.0
    sigma: float = 0.0
    hq: float = 0.0

    def u(self, side: str) -> float:
        """Ghost velocity as an x-component."""
        return self.un * NORMAL[side]


@dataclass
class GhostTrace:
    left: FaceGhost = field(default_factory=FaceGhost)
    right: FaceGhost = field(default_factory=FaceGhost)

    def __getitem__(self, side: str) -> FaceGhost:
        return self.left if side == LEFT else self.right

    def velocity_pair(self) -> tuple[float, float]:
        return self.left.u(LEFT), self.right.u(RIGHT)

    def with_face(self, side: str, ghost: FaceGhost) -> "GhostTrace":
        return replace(self, **{side: ghost})


def _ghost_pair(ghosts) -> tuple[float, float]:
    if isinstance(ghosts, GhostTrace):
        return ghosts.velocity_pair()
    gl, gr = ghosts
    return float(gl), float(gr)


def discrete_gradient(grid: Grid, phi, ghosts) -> np.ndarray:
    """Centered gradient of a cell field; ``ghosts`` is ``(left, right)``."""
    phi = np.asarray(phi, dtype=float)
    if phi.shape != (grid.n_cells,):
        raise StateError(f"field has shape {phi.shape}, grid has {grid.n_cells} cells")
    gl, gr = _ghost_pair(ghosts)
    ext = np.empty(grid.n_cells + 2)
    ext[0], ext[-1] = gl, gr
    ext[1:-1] = phi
    return (ext[2:] - ext[:-2]) / (2.0 * grid.dx)


def discrete_divergence(grid: Grid, u, ghosts) -> np.ndarray:
    # scalar velocity in 1D: the divergence is the same face sum
    return discrete_gradient(grid, u, ghosts)


def mechanical_energy(state: State, bathy: Bathymetry, g: float, grid: Grid | None = None):
    """Per-cell energy density and its total weighted by the cell measures."""
    h = state.h
    density = g * h * (bathy.B + 0.5 * h) + 0.5 * h * (state.u**2 + state.w**2 + state.sigma**2)
    m = grid.cell_measures if grid is not None else 1.0
    return density, float(np.sum(density * m))


def admissible_vertical_velocities(h, u, bx, div_u):
    """(w, sigma) tied to u through the two linear constraints."""
    w = u * bx - 0.5 * h * div_u
    sigma = -h / (2.0 * SQRT3) * div_u
    return w, sigma


def constraint_residual(state: State, bathy: Bathymetry, grid: Grid, ghosts) -> tuple[np.ndarray, np.ndarray]:
    div_u = discrete_divergence(grid, state.u, ghosts)
    bx = bathy.gradient(grid)
    w, sigma = admissible_vertical_velocities(state.h, state.u, bx, div_u)
    wet = wet_mask(state.h)
    res_w = np.where(wet, state.w - w, 0.0)
    res_s = np.where(wet, state.sigma - sigma, 0.0)
    return res_w, res_s


def init_vertical_velocities(h, u, bathy: Bathymetry, grid: Grid, ghosts) -> tuple[np.ndarray, np.ndarray]:
    h = np.asarray(h, dtype=float)
    div_u = discrete_divergence(grid, u, ghosts)
    w, sigma = admissible_vertical_velocities(h, np.asarray(u, dtype=float), bathy.gradient(grid), div_u)
    wet = wet_mask(h)
    return np.where(wet, w, 0.0), np.where(wet, sigma, 0.0)


def weighted_inner_product(h, U, V, grid: Grid) -> float:
    """Sum over wet cells of h_k m_k (U_k . V_k), U and V being velocity triples."""
    h = np.asarray(h, dtype=float)
    weight = np.where(wet_mask(h), h, 0.0) * grid.cell_measures
    total = 0.0
    for a, b in zip(U, V):
        total += float(np.sum(weight * np.asarray(a) * np.asarray(b)))
    return total


def weighted_norm(h, U, grid: Grid) -> float:
    return float(np.sqrt(max(weighted_inner_product(h, U, U, grid), 0.0)))
