"""Explicit advection step: HLL shallow-water update plus upwind transport.

The bathymetry source uses the hydrostatic reconstruction of Audusse et al.:
on every face the depths are rebuilt against ``B* = max(B_L, B_R)``,

    h*_L = max(0, h_L + B_L - B*),   h*_R = max(0, h_R + B_R - B*),

the HLL flux is evaluated on the rebuilt states, and each adjacent cell
adds its own pressure correction ``g/2 (h_side^2 - h*_side^2)`` to the
momentum flux it sees.  A lake at rest is then an exact fixed point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import LEFT, RIGHT, Grid, cell_characteristic_length
from .state import Bathymetry, GhostTrace, State, wet_mask


class CFLError(RuntimeError):
    pass


def physical_flux(h, u, g):
    hu = h * u
    return hu, hu * u + 0.5 * g * h * h


def hll_flux(left, right, g: float):
    """Two-wave HLL flux for (h, hu); ``left``/``right`` are (h, u) pairs (scalars or arrays)."""
    hL, uL = (np.asarray(v, dtype=float) for v in left)
    hR, uR = (np.asarray(v, dtype=float) for v in right)
    if np.any(hL < 0) or np.any(hR < 0):
        raise ValueError("negative depth passed to the HLL flux")
    cL, cR = np.sqrt(g * hL), np.sqrt(g * hR)
    sL = np.minimum(np.minimum(uL - cL, uR - cR), 0.0)
    sR = np.maximum(np.maximum(uL + cL, uR + cR), 0.0)
    fhL, fmL = physical_flux(hL, uL, g)
    fhR, fmR = physical_flux(hR, uR, g)

    denom = sR - sL
    safe = np.where(denom > 0, denom, 1.0)
    Fh = (sR * fhL - sL * fhR + sL * sR * (hR - hL)) / safe
    Fm = (sR * fmL - sL * fmR + sL * sR * (hR * uR - hL * uL)) / safe
    # supersonic faces take the upwind physical flux outright
    Fh = np.where(sL >= 0, fhL, np.where(sR <= 0, fhR, Fh))
    Fm = np.where(sL >= 0, fmL, np.where(sR <= 0, fmR, Fm))
    both_dry = (hL <= 0) & (hR <= 0)
    Fh = np.where(both_dry, 0.0, Fh)
    Fm = np.where(both_dry, 0.0, Fm)
    if Fh.ndim == 0:
        return float(Fh), float(Fm)
    return Fh, Fm


def hydrostatic_reconstruction(h_L, h_R, B_L, B_R, g: float = 9.81):
    """Rebuilt face depths and the per-side momentum corrections ``g/2 (h^2 - h*^2)``."""
    h_L, h_R, B_L, B_R = (np.asarray(v, dtype=float) for v in (h_L, h_R, B_L, B_R))
    B_star = np.maximum(B_L, B_R)
    # the higher side keeps its depth bit for bit
    hs_L = np.where(B_L >= B_star, h_L, np.maximum(0.0, h_L + B_L - B_star))
    hs_R = np.where(B_R >= B_star, h_R, np.maximum(0.0, h_R + B_R - B_star))
    src_L = 0.5 * g * (h_L * h_L - hs_L * hs_L)
    src_R = 0.5 * g * (h_R * h_R - hs_R * hs_R)
    return hs_L, hs_R, src_L, src_R


@dataclass
class FacePair:
    """Face fluxes oriented along +x; face ``i`` separates cells ``i-1`` and ``i``.

    ``mom_left`` is the momentum flux seen by the cell on the left of the
    face, ``mom_right`` the one seen by the cell on its right; they differ
    only by the hydrostatic corrections.
    """

    mass: np.ndarray
    mom_left: np.ndarray
    mom_right: np.ndarray
    h_left: np.ndarray
    h_right: np.ndarray
    u_left: np.ndarray
    u_right: np.ndarray


def _extend(values, ghosts_pair):
    ext = np.empty(values.shape[0] + 2)
    ext[0], ext[-1] = ghosts_pair
    ext[1:-1] = values
    return ext


def face_fluxes(state: State, bathy: Bathymetry, grid: Grid, ghosts: GhostTrace, g: float) -> FacePair:
    h = _extend(state.h, (ghosts.left.h, ghosts.right.h))
    u = _extend(state.u, ghosts.velocity_pair())
    B = _extend(bathy.B, (bathy.ghost[LEFT], bathy.ghost[RIGHT]))
    hs_L, hs_R, src_L, src_R = hydrostatic_reconstruction(h[:-1], h[1:], B[:-1], B[1:], g)
    u_L = np.where(hs_L > 0, u[:-1], 0.0)
    u_R = np.where(hs_R > 0, u[1:], 0.0)
    Fh, Fm = hll_flux((hs_L, u_L), (hs_R, u_R), g)
    return FacePair(Fh, Fm + src_L, Fm + src_R, hs_L, hs_R, u_L, u_R)


def compute_time_step(state: State, grid: Grid, c_cfl: float = 1.0, g: float = 9.81) -> float:
    if not 0.0 < c_cfl <= 1.0:
        raise ValueError(f"CFL number must lie in (0, 1], got {c_cfl}")
    wet = wet_mask(state.h)
    if not wet.any():
        raise CFLError("all cells are dry: no wave speed to build a time step from")
    lam = np.max(np.abs(state.u[wet]) + np.sqrt(g * state.h[wet]))
    # uniform grid: every cell has the same characteristic length
    delta = cell_characteristic_length(grid, 0)
    return c_cfl * delta / lam


def shallow_water_step(state: State, bathy: Bathymetry, grid: Grid, ghosts: GhostTrace, dt: float,
                       g: float = 9.81, faces: FacePair | None = None):
    """Conservative (h, hu) update; returns ``(h*, u*, faces)``."""
    if faces is None:
        faces = face_fluxes(state, bathy, grid, ghosts, g)
    lam = dt / grid.dx
    h_new = state.h - lam * (faces.mass[1:] - faces.mass[:-1])
    hu_new = state.h * state.u - lam * (faces.mom_left[1:] - faces.mom_right[:-1])
    tol = 1e-13 * max(float(np.max(state.h)), 1.0)
    bad = np.flatnonzero(h_new < -tol)
    if bad.size:
        raise CFLError(f"negative depth {h_new[bad[0]]:.3e} in cell {bad[0]}: time step violates the CFL bound")
    h_new = np.maximum(h_new, 0.0)
    wet = wet_mask(h_new)
    u_new = np.zeros_like(h_new)
    u_new[wet] = hu_new[wet] / h_new[wet]
    return h_new, u_new, faces


def upwind_fluxes(a, mass, ghost_pair):
    a_ext = _extend(np.asarray(a, dtype=float), ghost_pair)
    return np.where(mass > 0, mass * a_ext[:-1], mass * a_ext[1:])


def transport_step(w, sigma, h, h_star, faces: FacePair, ghosts: GhostTrace, grid: Grid, dt: float):
    """Upwind transport of (w, sigma) by the mass fluxes of the shallow-water update."""
    lam = dt / grid.dx
    wet = wet_mask(h_star)
    out = []
    for a, pair in ((w, (ghosts.left.w, ghosts.right.w)), (sigma, (ghosts.left.sigma, ghosts.right.sigma))):
        G = upwind_fluxes(a, faces.mass, pair)
        ha = h * np.asarray(a) - lam * (G[1:] - G[:-1])
        a_new = np.zeros_like(ha)
        a_new[wet] = ha[wet] / h_star[wet]
        out.append(a_new)
    return out[0], out[1]


def incoming_faces(faces: FacePair) -> dict:
    """Boundary faces whose mass flux enters the domain."""
    return {LEFT: bool(faces.mass[0] > 0), RIGHT: bool(faces.mass[-1] < 0)}

