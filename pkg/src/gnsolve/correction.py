"""Implicit correction step: h-weighted orthogonal projection onto the admissible set.

Only the horizontal velocity is solved for.  Writing ``X = -dt * h q_bar``
and eliminating w, sigma and the complement component phi_1, each wet cell
carries the row

    h u - grad(X) + h Bx (Bx u - h/2 div u) = h u* + h Bx w*
    X = h^2/2 (w* + sigma*/sqrt3 - Bx u + 2h/3 div u)

where the centered div/grad close at the edges of the wet set through the
affine ghost relations of :mod:`gnsolve.boundary`.  The time step only
enters through inhomogeneous pressure data, so the projected velocity does
not depend on it.  The matrix is pentadiagonal unless a periodic face wraps
the stencil around.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.linalg import LinAlgError, solve_banded
from scipy.sparse.linalg import spsolve

from .boundary import DRY_FRONT, GhostClosure
from .mesh import LEFT, NORMAL, RIGHT, Grid
from .state import (SQRT3, Bathymetry, FaceGhost, GhostTrace, PressureField, admissible_vertical_velocities,
                    wet_mask, weighted_inner_product)


class CorrectionError(RuntimeError):
    def __init__(self, message, residual=float("nan")):
        super().__init__(f"{message} (residual norm {residual:.3e})")
        self.residual = residual


def wet_domain(h, periodic: bool = False):
    """Wet cell indices and the interior faces between a wet and a dry cell.

    Faces are reported as ``(left_cell, right_cell)`` pairs.
    """
    wet = wet_mask(h)
    cells = np.flatnonzero(wet)
    fronts = [(k, k + 1) for k in np.flatnonzero(wet[:-1] != wet[1:])]
    if periodic and wet[-1] != wet[0]:
        fronts.append((len(wet) - 1, 0))
    return cells, fronts


@dataclass
class _Side:
    """How one side of every unknown closes: a neighbouring unknown or an affine ghost."""

    nb: np.ndarray      # neighbouring unknown, -1 when closed by a ghost relation
    u_self: np.ndarray  # u_ghost = u_self * u_i + u_const   (x-components)
    u_const: np.ndarray
    x_self: np.ndarray  # X_ghost = x_self * X_i + x_const
    x_const: np.ndarray


@dataclass
class CorrectionSystem:
    """Assembled projection system over the wet-cell velocities."""

    wet: np.ndarray
    rhs: np.ndarray
    diagonals: np.ndarray | None  # (5, N) rows for offsets +2..-2, LAPACK band layout
    matrix: sp.csr_matrix | None
    left: _Side
    right: _Side
    dx: float
    face_closures: dict = field(default_factory=dict)

    @property
    def size(self) -> int:
        return self.wet.size

    @property
    def banded(self) -> bool:
        return self.diagonals is not None

    def dense(self) -> np.ndarray:
        if self.matrix is not None:
            return self.matrix.toarray()
        n = self.size
        A = np.zeros((n, n))
        for s in range(-2, 3):
            band = self.diagonals[2 - s]
            for i in range(n):
                j = i + s
                if 0 <= j < n:
                    A[i, j] = band[j]
        return A

    def to_sparse(self) -> sp.csr_matrix:
        if self.matrix is not None:
            return self.matrix
        return sp.csr_matrix(self.dense())

    def triplets(self):
        coo = self.to_sparse().tocoo()
        return list(zip(coo.row.tolist(), coo.col.tolist(), coo.data.tolist()))

    def div_operator(self):
        """Sparse (D, d) with div u = D u + d on the unknowns."""
        return _sparse_from_sides(self.left, self.right, "u", self.dx)


def _closure_sides(h, grid: Grid, closures: dict, dt: float, periodic: bool):
    wet = wet_mask(h)
    cells = np.flatnonzero(wet)
    n = grid.n_cells
    pos = -np.ones(n, dtype=int)
    pos[cells] = np.arange(cells.size)
    sides = {}
    for side in (LEFT, RIGHT):
        nb = -np.ones(cells.size, dtype=int)
        u_self = np.zeros(cells.size)
        u_const = np.zeros(cells.size)
        x_self = np.zeros(cells.size)
        x_const = np.zeros(cells.size)
        nbr = cells - 1 if side == LEFT else cells + 1
        at_edge = (nbr < 0) | (nbr >= n)
        if periodic:
            nbr = nbr % n
            at_edge[:] = False
        inside = ~at_edge
        nb_cell = np.where(inside, nbr, 0)
        coupled = inside & wet[nb_cell]
        nb[coupled] = pos[nb_cell[coupled]]
        # interior neighbours that are dry use the dry-front closure, which is all zeros
        if at_edge.any():
            closure = closures.get(side)
            if closure is None:
                raise CorrectionError(f"missing closure on the {side} boundary face")
            nu = NORMAL[side]
            u_self[at_edge] = closure.a
            u_const[at_edge] = closure.b * nu
            x_self[at_edge] = closure.c
            # X = -dt hq, so hq_g = c hq_i + d becomes X_g = c X_i - dt d
            x_const[at_edge] = -dt * closure.d
        sides[side] = _Side(nb, u_self, u_const, x_self, x_const)
    return cells, sides


def _tridiagonal(left: _Side, right: _Side, which: str, dx: float):
    """Diagonals (lower, main, upper) and constant of a centered difference."""
    inv = 1.0 / (2.0 * dx)
    self_r, const_r = (right.u_self, right.u_const) if which == "u" else (right.x_self, right.x_const)
    self_l, const_l = (left.u_self, left.u_const) if which == "u" else (left.x_self, left.x_const)
    lower = np.where(left.nb >= 0, -inv, 0.0)
    upper = np.where(right.nb >= 0, inv, 0.0)
    main = (self_r - self_l) * inv
    const = (const_r - const_l) * inv
    return lower, main, upper, const


def _sparse_from_sides(left: _Side, right: _Side, which: str, dx: float):
    n = left.nb.size
    lower, main, upper, const = _tridiagonal(left, right, which, dx)
    rows = [np.arange(n)]
    cols = [np.arange(n)]
    vals = [main]
    for side, coef in ((left, lower), (right, upper)):
        mask = side.nb >= 0
        rows.append(np.flatnonzero(mask))
        cols.append(side.nb[mask])
        vals.append(coef[mask])
    M = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))
    return M, const


def _is_banded(left: _Side, right: _Side) -> bool:
    idx = np.arange(left.nb.size)
    return bool(np.all((left.nb < 0) | (left.nb == idx - 1)) and np.all((right.nb < 0) | (right.nb == idx + 1)))


def _shift(a, s):
    """``out[j] = a[j + s]`` with zeros outside."""
    out = np.zeros_like(a)
    if s > 0:
        out[:-s] = a[s:]
    elif s < 0:
        out[-s:] = a[:s]
    else:
        out[:] = a
    return out


def assemble_projection_system(h, U_star, bathy: Bathymetry, grid: Grid, closures: dict, dt: float,
                               periodic: bool = False, force_sparse: bool = False) -> CorrectionSystem:
    """Assemble the reduced velocity system on the wet cells.

    ``closures`` maps each non-periodic boundary side to a
    :class:`~gnsolve.boundary.GhostClosure`; dry-front faces are closed
    automatically.
    """
    h = np.asarray(h, dtype=float)
    u_s, w_s, s_s = (np.asarray(a, dtype=float) for a in U_star)
    cells, sides = _closure_sides(h, grid, closures, dt, periodic)
    if cells.size == 0:
        raise CorrectionError("empty wet domain", 0.0)
    left, right = sides[LEFT], sides[RIGHT]

    hw = h[cells]
    bx = bathy.gradient(grid)[cells]
    p = -0.5 * hw * hw * bx
    q = hw**3 / 3.0
    star = w_s[cells] + s_s[cells] / SQRT3

    dl, dd, du, dvec = _tridiagonal(left, right, "u", grid.dx)
    gl, gd, gu, gvec = _tridiagonal(left, right, "x", grid.dx)
    xvec = 0.5 * hw * hw * star + q * dvec

    if force_sparse or not _is_banded(left, right):
        D, _ = _sparse_from_sides(left, right, "u", grid.dx)
        G, _ = _sparse_from_sides(left, right, "x", grid.dx)
        X = sp.diags(p) + sp.diags(q) @ D
        A = sp.diags(hw * (1.0 + bx * bx)) - sp.diags(0.5 * hw * hw * bx) @ D - G @ X
        Gx = G @ xvec
        rhs = hw * u_s[cells] + Gx + gvec + hw * bx * w_s[cells] + 0.5 * hw * hw * bx * dvec
        return CorrectionSystem(cells, rhs, None, sp.csr_matrix(A), left, right, grid.dx, dict(closures))

    # X = diag(p) + diag(q) D is tridiagonal; G X is pentadiagonal
    xl, xd, xu = q * dl, p + q * dd, q * du
    r_m2 = gl * _shift(xl, -1)
    r_m1 = gl * _shift(xd, -1) + gd * xl
    r_0 = gl * _shift(xu, -1) + gd * xd + gu * _shift(xl, 1)
    r_p1 = gd * xu + gu * _shift(xd, 1)
    r_p2 = gu * _shift(xu, 1)
    c = 0.5 * hw * hw * bx
    rows = {
        -2: -r_m2,
        -1: -c * dl - r_m1,
        0: hw * (1.0 + bx * bx) - c * dd - r_0,
        1: -c * du - r_p1,
        2: -r_p2,
    }
    n = cells.size
    ab = np.zeros((5, n))
    for s, vals in rows.items():
        # row i, column i + s lives at ab[2 - s, i + s]
        if s >= 0:
            ab[2 - s, s:] = vals[: n - s]
        else:
            ab[2 - s, : n + s] = vals[-s:]
    Gx = gl * _shift(xvec, -1) + gd * xvec + gu * _shift(xvec, 1)
    rhs = hw * u_s[cells] + Gx + gvec + hw * bx * w_s[cells] + c * dvec
    return CorrectionSystem(cells, rhs, ab, None, left, right, grid.dx, dict(closures))


def psi_inverse(Phi, h) -> PressureField:
    """Pressures from a complement element: ``-h (1/2 (phi2 + phi3/sqrt3), phi2)``."""
    _, phi2, phi3 = (np.asarray(a, dtype=float) for a in Phi)
    h = np.asarray(h, dtype=float)
    wet = wet_mask(h)
    q_bar = np.where(wet, -0.5 * h * (phi2 + phi3 / SQRT3), 0.0)
    q_B = np.where(wet, -h * phi2, 0.0)
    return PressureField(q_bar, q_B)


def psi(pressures: PressureField, h, bx, grid: Grid, hq_ghosts) -> tuple:
    """Complement element generated by a pressure pair; ``hq_ghosts`` is ``(left, right)``."""
    from .state import discrete_gradient

    h = np.asarray(h, dtype=float)
    hq = h * pressures.q_bar
    phi1 = (discrete_gradient(grid, hq, hq_ghosts) + pressures.q_B * bx) / h
    phi2 = -pressures.q_B / h
    phi3 = -SQRT3 * (2.0 * pressures.q_bar - pressures.q_B) / h
    return phi1, phi2, phi3


@dataclass
class OrthoDecomposition:
    U: tuple
    Phi: tuple
    pressures: PressureField
    ghosts: GhostTrace
    system: CorrectionSystem | None = None


def _solve(system: CorrectionSystem) -> np.ndarray:
    try:
        if system.banded:
            u = solve_banded((2, 2), system.diagonals, system.rhs)
        else:
            u = spsolve(system.matrix.tocsc(), system.rhs)
    except (LinAlgError, ValueError, RuntimeError) as exc:
        raise CorrectionError(f"linear solve failed: {exc}") from exc
    A = system.to_sparse() if not system.banded else None
    res = _residual(system, u, A)
    scale = np.linalg.norm(system.rhs) + 1e-300
    if not np.all(np.isfinite(u)) or not res <= 1e-8 * scale:
        raise CorrectionError("projection system solve is inaccurate", res)
    return u


def _residual(system: CorrectionSystem, u, A=None) -> float:
    if A is None:
        ab = system.diagonals
        Au = ab[2] * u
        Au[:-1] += ab[1, 1:] * u[1:]
        Au[:-2] += ab[0, 2:] * u[2:]
        Au[1:] += ab[3, :-1] * u[:-1]
        Au[2:] += ab[4, :-2] * u[:-2]
    else:
        Au = A @ u
    return float(np.linalg.norm(Au - system.rhs))


def _divergence(system: CorrectionSystem, u):
    dl, dd, du, dvec = _tridiagonal(system.left, system.right, "u", system.dx)
    div = dd * u + dvec
    for side, coef in ((system.left, dl), (system.right, du)):
        mask = side.nb >= 0
        div[mask] += coef[mask] * u[side.nb[mask]]
    return div


def solve_correction(h, U_star, bathy: Bathymetry, grid: Grid, closures: dict, dt: float,
                     periodic: bool = False, force_sparse: bool = False) -> OrthoDecomposition:
    h = np.asarray(h, dtype=float)
    n = grid.n_cells
    U_star = tuple(np.asarray(a, dtype=float) for a in U_star)
    wet = wet_mask(h)
    u = np.zeros(n)
    w = np.zeros(n)
    s = np.zeros(n)
    if not wet.any():
        zeros = (np.zeros(n), np.zeros(n), np.zeros(n))
        return OrthoDecomposition((u, w, s), zeros, PressureField.zeros(n), GhostTrace())

    system = assemble_projection_system(h, U_star, bathy, grid, closures, dt, periodic, force_sparse)
    cells = system.wet
    uw = _solve(system)
    div = _divergence(system, uw)
    bx = bathy.gradient(grid)[cells]
    ww, sw = admissible_vertical_velocities(h[cells], uw, bx, div)
    u[cells], w[cells], s[cells] = uw, ww, sw

    Phi = []
    for new, old in zip((u, w, s), U_star):
        phi = np.zeros(n)
        phi[cells] = (old[cells] - new[cells]) / dt
        Phi.append(phi)
    Phi = tuple(Phi)
    pressures = psi_inverse(Phi, h)
    ghosts = _correction_ghosts(h, u, pressures, closures, wet, periodic)
    return OrthoDecomposition((u, w, s), Phi, pressures, ghosts, system)


def _correction_ghosts(h, u, pressures, closures, wet, periodic) -> GhostTrace:
    """Ghost u.nu and hq on the two domain faces after the correction."""
    if periodic:
        return GhostTrace()
    hq = h * pressures.q_bar
    faces = {}
    for side in (LEFT, RIGHT):
        k = 0 if side == LEFT else -1
        closure = closures[side] if wet[k] else DRY_FRONT
        un_i = u[k] * NORMAL[side]
        faces[side] = FaceGhost(un=closure.velocity(un_i), hq=closure.pressure(hq[k]))
    return GhostTrace(faces[LEFT], faces[RIGHT])


def boundary_face_sum(u, hq, ghosts: GhostTrace | None) -> float:
    """Face-sum form of <U, Phi>_h: only boundary faces of the wet set survive.

    Dry-front faces contribute nothing (both ghost values vanish); periodic
    faces (``ghosts is None``) behave as interior faces.
    """
    if ghosts is None:
        return 0.0
    total = 0.0
    for side, k in ((LEFT, 0), (RIGHT, -1)):
        g = ghosts[side]
        un_i = u[k] * NORMAL[side]
        total += 0.5 * (g.hq * un_i + hq[k] * g.un)
    return total


def orthogonality_residual(U, Phi, h, grid: Grid, ghost_traces: GhostTrace | None = None,
                           form: str = "direct") -> float:
    """``<U, Phi>_h``, either summed directly or through its boundary-face form.

    The face form assumes Phi is generated by pressures through the ghost
    closures, which holds for the output of :func:`solve_correction`.
    """
    if form == "direct":
        return weighted_inner_product(h, U, Phi, grid)
    if form == "faces":
        pressures = psi_inverse(Phi, h)
        hq = np.asarray(h) * pressures.q_bar
        return boundary_face_sum(np.asarray(U[0]), hq, ghost_traces) * grid.face_measure
    raise ValueError(f"unknown form {form!r}")


def closures_with_dry_fronts(closures: dict, h, periodic: bool = False) -> dict:
    """Replace the closure of a boundary face whose interior cell is dry."""
    wet = wet_mask(h)
    out = dict(closures)
    if not periodic:
        if not wet[0]:
            out[LEFT] = DRY_FRONT
        if not wet[-1]:
            out[RIGHT] = DRY_FRONT
    return out
