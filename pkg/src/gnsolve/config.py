"""INI run configuration.

Example::

    [grid]
    x_min = 0
    x_max = 1
    n_cells = 200

    [physics]
    g = 9.81

    [time]
    t_end = soliton-crossing   ; or a number
    c_cfl = 1

    [initial]
    profile = soliton          ; soliton | lake-at-rest | constant-flow | dam-break
    H = 0.1
    A = 0.5
    X = -0.5

    [bathymetry]
    profile = flat             ; flat | bump | slope, plus their parameters
    ghost = reflect            ; reflect | extrapolate

    [boundary.left]
    family = fixed-depth-velocity
    depth = soliton-trace      ; a number or soliton-trace
    velocity = soliton-trace
    vertical_velocity = soliton-trace

    [boundary.right]
    family = wall

    [output]
    dir = out
    every = 100                ; steps between snapshots (or dt = ...)
    ledger = yes
    dump_matrix = no
    errors = no
"""

from __future__ import annotations

import configparser

from .analytic import SolitonParams
from .boundary import BoundarySpec, FaceBC, Family, constant
from .driver import SolitonTrace, RunConfig

_DATA_KEYS = {"depth": "h", "velocity": "u", "vertical_velocity": "w", "discharge": None, "pressure": None}


class ConfigError(ValueError):
    pass


def _profile(value: str, key: str, soliton: SolitonParams | None, x_face: float):
    value = value.strip()
    if value == "soliton-trace":
        if soliton is None:
            raise ConfigError(f"{key} = soliton-trace needs a soliton initial profile")
        field = _DATA_KEYS.get(key)
        if field is None:
            if key == "discharge":
                return _DischargeTrace(soliton, x_face)
            raise ConfigError(f"no soliton trace for {key}")
        return SolitonTrace(soliton, x_face, field)
    try:
        return constant(float(value))
    except ValueError as exc:
        raise ConfigError(f"cannot read {key} = {value!r}") from exc


class _DischargeTrace:
    def __init__(self, params, x):
        self.h = SolitonTrace(params, x, "h")
        self.u = SolitonTrace(params, x, "u")

    def __call__(self, t):
        return self.h(t) * self.u(t)


def _face(section, soliton, x_face) -> FaceBC:
    if "family" not in section:
        raise ConfigError(f"[{section.name}] needs a family")
    family = Family.parse(section["family"])
    data = {}
    for key in _DATA_KEYS:
        if key in section:
            data[key] = _profile(section[key], key, soliton, x_face)
    order = section.getint("order", fallback=1)
    return FaceBC(family, order=order, **data)


def _number_dict(section, skip=("profile",)) -> dict:
    out = {}
    for key, value in section.items():
        if key in skip:
            continue
        try:
            out[key] = float(value)
        except ValueError:
            out[key] = value
    return out


def parse_config(text: str) -> RunConfig:
    # keys such as H and A are case sensitive
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    cp.optionxform = str
    cp.read_string(text)
    for name in ("grid", "time", "initial", "boundary.left", "boundary.right"):
        if name not in cp:
            raise ConfigError(f"missing section [{name}]")
    grid = cp["grid"]
    g = cp.getfloat("physics", "g", fallback=9.81)
    initial = cp["initial"].get("profile", "lake-at-rest")
    initial_params = _number_dict(cp["initial"])
    soliton = None
    if initial == "soliton":
        try:
            soliton = SolitonParams(float(initial_params["H"]), float(initial_params["A"]),
                                    float(initial_params.get("X", 0.0)), g)
        except KeyError as exc:
            raise ConfigError(f"soliton profile needs {exc.args[0]}") from exc

    x_min, x_max = float(grid["x_min"]), float(grid["x_max"])
    spec = BoundarySpec(_face(cp["boundary.left"], soliton, x_min), _face(cp["boundary.right"], soliton, x_max))

    t_raw = cp["time"]["t_end"].strip()
    if t_raw == "soliton-crossing":
        if soliton is None:
            raise ConfigError("t_end = soliton-crossing needs a soliton initial profile")
        t_end = soliton.crossing_time(x_max - x_min)
    else:
        t_end = float(t_raw)
    max_steps = cp["time"].get("max_steps")

    bathy = cp["bathymetry"] if "bathymetry" in cp else {}
    out = cp["output"] if "output" in cp else None
    try:
        return RunConfig(
            x_min=x_min, x_max=x_max, n_cells=int(grid["n_cells"]), t_end=t_end, boundary=spec,
            initial=initial, initial_params=initial_params,
            bathymetry=bathy.get("profile", "flat"),
            bathymetry_params=_number_dict(bathy) if bathy else {},
            g=g, c_cfl=cp.getfloat("time", "c_cfl", fallback=1.0),
            max_steps=int(max_steps) if max_steps else None,
            output_every=out.getint("every", fallback=None) if out else None,
            output_dt=out.getfloat("dt", fallback=None) if out else None,
            out_dir=out.get("dir") if out else None,
            ledger=out.getboolean("ledger", fallback=True) if out else True,
            dump_matrix=out.getboolean("dump_matrix", fallback=False) if out else False,
            errors=out.getboolean("errors", fallback=False) if out else False,
        )
    except (ValueError, KeyError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> RunConfig:
    with open(path) as fh:
        return parse_config(fh.read())

