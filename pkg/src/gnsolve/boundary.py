"""Boundary-condition families and their ghost-cell closures.

Two kinds of ghost data are produced for every boundary face:

* ghost values (h, u.nu, w, sigma) for the explicit advection step, and
* an affine closure ``u_g.nu = a u_i.nu + b``, ``hq_g = c hq_i + d`` for the
  correction step.

All closures satisfy ``hq_g (u_i.nu) + hq_i (u_g.nu) = 0`` for homogeneous
data, which keeps the correction step an orthogonal projection.

Velocity data (``velocity``, ``vertical_velocity``) and the ``discharge``
are given as x-components; they are turned into normal components with the
outward normal of the face.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass
from typing import Callable

from .mesh import LEFT, NORMAL, RIGHT
from .state import SQRT3, FaceGhost

Profile = Callable[[float], float]


class BoundaryError(ValueError):
    pass


class Family(enum.Enum):
    FIXED_DEPTH_VELOCITY = "fixed-depth-velocity"
    WALL = "wall"
    TRANSPARENT = "transparent"
    DISCHARGE_PRESSURE = "discharge-pressure"
    PERIODIC = "periodic"

    @classmethod
    def parse(cls, name: str) -> "Family":
        key = name.strip().lower().replace("_", "-")
        for fam in cls:
            if fam.value == key:
                return fam
        raise BoundaryError(f"unknown boundary family {name!r}")


# which data each family reads; anything else is ignored with a warning
_USED = {
    Family.FIXED_DEPTH_VELOCITY: {"depth", "velocity", "vertical_velocity"},
    Family.WALL: set(),
    Family.TRANSPARENT: {"vertical_velocity"},
    Family.DISCHARGE_PRESSURE: {"discharge", "pressure", "vertical_velocity"},
    Family.PERIODIC: set(),
}
_REQUIRED = {
    Family.FIXED_DEPTH_VELOCITY: {"depth", "velocity"},
    Family.DISCHARGE_PRESSURE: {"discharge"},
}


class constant:
    """Time-independent boundary datum."""

    def __init__(self, value: float):
        self.value = float(value)

    def __call__(self, t: float) -> float:
        return self.value

    def __repr__(self):
        return f"constant({self.value!r})"


@dataclass(frozen=True)
class FaceBC:
    family: Family
    depth: Profile | None = None
    velocity: Profile | None = None
    vertical_velocity: Profile | None = None
    discharge: Profile | None = None
    pressure: Profile | None = None
    # transparent faces: extrapolation order of the Neumann closure (only 1 is implemented)
    order: int = 1

    def __post_init__(self):
        supplied = {k for k in ("depth", "velocity", "vertical_velocity", "discharge", "pressure")
                    if getattr(self, k) is not None}
        missing = _REQUIRED.get(self.family, set()) - supplied
        if missing:
            raise BoundaryError(f"{self.family.value} face needs {sorted(missing)}")
        extra = supplied - _USED[self.family]
        if extra:
            warnings.warn(f"{self.family.value} face ignores supplied data {sorted(extra)}", stacklevel=3)
        if self.order != 1:
            raise BoundaryError("only first-order transparent extrapolation is available")

    @property
    def kind(self) -> str:
        """Correction-step face set: 'u' (velocity imposed) or 'hq' (pressure imposed)."""
        if self.family is Family.DISCHARGE_PRESSURE:
            return "hq"
        if self.family is Family.PERIODIC:
            return "periodic"
        return "u"


def wall() -> FaceBC:
    return FaceBC(Family.WALL)


def transparent(vertical_velocity: Profile | None = None) -> FaceBC:
    return FaceBC(Family.TRANSPARENT, vertical_velocity=vertical_velocity)


def periodic() -> FaceBC:
    return FaceBC(Family.PERIODIC)


def fixed_depth_velocity(depth, velocity, vertical_velocity=None) -> FaceBC:
    return FaceBC(Family.FIXED_DEPTH_VELOCITY, depth=_as_profile(depth), velocity=_as_profile(velocity),
                  vertical_velocity=_as_profile(vertical_velocity))


def discharge_pressure(discharge, pressure=0.0, vertical_velocity=None) -> FaceBC:
    return FaceBC(Family.DISCHARGE_PRESSURE, discharge=_as_profile(discharge), pressure=_as_profile(pressure),
                  vertical_velocity=_as_profile(vertical_velocity))


def _as_profile(v):
    if v is None or callable(v):
        return v
    return constant(v)


@dataclass(frozen=True)
class BoundarySpec:
    left: FaceBC
    right: FaceBC

    def __post_init__(self):
        per = (self.left.family is Family.PERIODIC, self.right.family is Family.PERIODIC)
        if per[0] != per[1]:
            raise BoundaryError("periodic must be set on both faces or on neither")

    def __getitem__(self, side: str) -> FaceBC:
        return self.left if side == LEFT else self.right

    @property
    def periodic(self) -> bool:
        return self.left.family is Family.PERIODIC

    @classmethod
    def walls(cls) -> "BoundarySpec":
        return cls(wall(), wall())

    @classmethod
    def periodic_both(cls) -> "BoundarySpec":
        return cls(periodic(), periodic())


def _value(profile: Profile | None, t: float, default: float = 0.0) -> float:
    return default if profile is None else float(profile(t))


def ghost_values_advection(bc: FaceBC, side: str, interior, incoming: bool, t: float,
                           ghost_bx: float = 0.0, opposite=None) -> FaceGhost:
    """Ghost (h, u.nu, w, sigma) for the advection step.

    ``interior`` is the (h, u, w, sigma) tuple of the adjacent interior cell,
    ``incoming`` tells whether the face mass flux enters the domain.  Only on
    incoming faces are w and sigma taken from boundary data; sigma then
    follows from the constraint relation evaluated on the ghost cell, with
    ``ghost_bx`` the bathymetry gradient there.  ``opposite`` is the interior
    tuple at the other end, used by periodic faces.
    """
    nu = NORMAL[side]
    h_i, u_i, w_i, s_i = (float(v) for v in interior)
    un_i = u_i * nu
    fam = bc.family

    if fam is Family.PERIODIC:
        if opposite is None:
            raise BoundaryError("periodic ghost values need the opposite interior cell")
        h_o, u_o, w_o, s_o = (float(v) for v in opposite)
        return FaceGhost(h=h_o, un=u_o * nu, w=w_o, sigma=s_o)

    if fam is Family.WALL:
        # mirrored state: the mass flux vanishes, w/sigma are never upwinded in
        return FaceGhost(h=h_i, un=-un_i, w=w_i, sigma=s_i)

    if fam is Family.FIXED_DEPTH_VELOCITY:
        h_g = 2.0 * _value(bc.depth, t) - h_i
        un_g = 2.0 * _value(bc.velocity, t) * nu - un_i
        if h_g < 0:
            raise BoundaryError(f"{side} ghost depth {h_g:.3e} < 0: prescribed depth below half the interior depth")
    elif fam is Family.TRANSPARENT:
        h_g, un_g = h_i, un_i
    elif fam is Family.DISCHARGE_PRESSURE:
        if un_i == 0.0:
            raise BoundaryError(f"{side} discharge face needs a nonzero interior normal velocity")
        qn = _value(bc.discharge, t) * nu
        h_g = 2.0 * qn / un_i - h_i
        if h_g < 0:
            raise BoundaryError(
                f"{side} ghost depth {h_g:.3e} < 0: the discharge must share the sign of u.nu and "
                f"exceed half the interior discharge in magnitude")
        un_g = un_i
    else:  # pragma: no cover
        raise BoundaryError(f"unhandled family {fam}")

    if not incoming:
        return FaceGhost(h=h_g, un=un_g, w=w_i, sigma=s_i)

    w_g = 2.0 * _value(bc.vertical_velocity, t) - w_i
    u_g = un_g * nu
    sigma_g = (w_g - u_g * ghost_bx) / SQRT3
    return FaceGhost(h=h_g, un=un_g, w=w_g, sigma=sigma_g)


@dataclass(frozen=True)
class GhostClosure:
    """Affine ghost relations ``u_g.nu = a u_i.nu + b`` and ``hq_g = c hq_i + d``."""

    a: float
    b: float
    c: float
    d: float
    kind: str = "u"

    def velocity(self, un_i: float) -> float:
        return self.a * un_i + self.b

    def pressure(self, hq_i: float) -> float:
        return self.c * hq_i + self.d

    def as_tuple(self) -> tuple[float, float, float, float]:
        return self.a, self.b, self.c, self.d


def weighted_closure(kind: str, alpha: float, datum: float = 0.0) -> GhostClosure:
    """Reference-function-free closure for face weight ``alpha`` in [0, 1).

    ``kind='u'`` imposes ``alpha u_i.nu + (1 - alpha) u_g.nu = datum``,
    ``kind='hq'`` imposes ``alpha hq_i + (1 - alpha) hq_g = datum``; the other
    ghost value is fixed so that the projection condition holds.
    """
    if not 0.0 <= alpha < 1.0:
        raise BoundaryError(f"face weight must lie in [0, 1), got {alpha}")
    r = alpha / (1.0 - alpha)
    s = datum / (1.0 - alpha)
    if kind == "u":
        return GhostClosure(-r, s, r, 0.0, "u")
    if kind == "hq":
        return GhostClosure(r, 0.0, -r, s, "hq")
    raise BoundaryError(f"unknown closure kind {kind!r}")


#: closure of a dry-front face: no velocity through it, no pressure on the dry side
DRY_FRONT = GhostClosure(0.0, 0.0, 0.0, 0.0, "h")


def ghost_closure_correction(bc: FaceBC, side: str, t: float, un_star: float | None = None) -> GhostClosure | None:
    """Correction-step closure of a boundary face (``None`` for periodic faces).

    ``un_star`` is the predicted interior normal velocity, needed by the
    transparent family which imposes it back as the face velocity.
    """
    nu = NORMAL[side]
    fam = bc.family
    if fam is Family.PERIODIC:
        return None
    if fam is Family.WALL:
        return weighted_closure("u", 0.5, 0.0)
    if fam is Family.FIXED_DEPTH_VELOCITY:
        return weighted_closure("u", 0.5, _value(bc.velocity, t) * nu)
    if fam is Family.TRANSPARENT:
        if un_star is None:
            raise BoundaryError("transparent closure needs the predicted interior velocity")
        return weighted_closure("u", 0.5, un_star)
    if fam is Family.DISCHARGE_PRESSURE:
        return weighted_closure("hq", 0.5, _value(bc.pressure, t))
    raise BoundaryError(f"unhandled family {fam}")  # pragma: no cover


def projection_compat_residual(closure: GhostClosure, hq_i: float, un_i: float) -> float:
    """``hq_g (u_i.nu) + hq_i (u_g.nu)`` with the ghost values from ``closure``.

    Zero for homogeneous data; otherwise twice the boundary work of the face.
    """
    return closure.pressure(hq_i) * un_i + hq_i * closure.velocity(un_i)


def boundary_closures(spec: BoundarySpec, t: float, un_star: dict | None = None) -> dict:
    un_star = un_star or {}
    return {side: ghost_closure_correction(spec[side], side, t, un_star.get(side)) for side in (LEFT, RIGHT)}
