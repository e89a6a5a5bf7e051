"""Time loop, energy bookkeeping, error measurement and CSV output."""

from __future__ import annotations

import dataclasses
import math
import os
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .analytic import SolitonParams, lake_at_rest, solitary_wave
from .boundary import BoundarySpec, boundary_closures, ghost_values_advection
from .correction import (CorrectionError, OrthoDecomposition, boundary_face_sum, closures_with_dry_fronts,
                         solve_correction)
from .hyperbolic import CFLError, FacePair, compute_time_step, face_fluxes, incoming_faces, shallow_water_step, \
    transport_step
from .mesh import LEFT, NORMAL, RIGHT, Grid, build_uniform_grid
from .state import (Bathymetry, GhostTrace, PressureField, State, init_vertical_velocities, mechanical_energy,
                    weighted_inner_product, wet_mask)

FIELDS = ("h", "u", "w", "sigma", "q_bar", "q_B")


class SimulationError(RuntimeError):
    def __init__(self, message, step=None):
        prefix = "" if step is None else f"step {step}: "
        super().__init__(prefix + message)
        self.step = step


class SolitonTrace:
    """Boundary datum read off the solitary wave at a fixed position."""

    _index = {name: i for i, name in enumerate(FIELDS)}

    def __init__(self, params: SolitonParams, x: float, field: str):
        if field not in self._index:
            raise ValueError(f"unknown soliton field {field!r}")
        self.params, self.x, self.field = params, float(x), field

    def __call__(self, t: float) -> float:
        return float(solitary_wave(t, self.x, self.params)[self._index[self.field]])

    def __repr__(self):
        return f"SolitonTrace({self.field} at x={self.x})"


@dataclass
class RunConfig:
    """Everything needed to reproduce one run.

    ``initial`` and ``bathymetry`` name profiles (see :func:`initial_state`
    and :func:`build_bathymetry`); their parameters live in the matching
    ``*_params`` dicts.  ``output_every`` counts steps, ``output_dt`` time;
    with neither set only the first and last states are kept.
    """

    x_min: float
    x_max: float
    n_cells: int
    t_end: float
    boundary: BoundarySpec
    initial: str = "lake-at-rest"
    initial_params: dict = field(default_factory=dict)
    bathymetry: str = "flat"
    bathymetry_params: dict = field(default_factory=dict)
    g: float = 9.81
    c_cfl: float = 1.0
    max_steps: int | None = None
    output_every: int | None = None
    output_dt: float | None = None
    out_dir: str | None = None
    ledger: bool = True
    dump_matrix: bool = False
    errors: bool = False

    def __post_init__(self):
        if not self.t_end > 0:
            raise ValueError("t_end must be positive")
        if self.output_every is not None and self.output_every <= 0:
            raise ValueError("output cadence must be positive")
        if self.output_dt is not None and self.output_dt <= 0:
            raise ValueError("output interval must be positive")
        if self.initial not in INITIAL_PROFILES:
            raise ValueError(f"unknown initial profile {self.initial!r}")
        if self.bathymetry not in BATHYMETRY_PROFILES:
            raise ValueError(f"unknown bathymetry profile {self.bathymetry!r}")

    def grid(self) -> Grid:
        return build_uniform_grid(self.x_min, self.x_max, self.n_cells)

    @property
    def soliton(self) -> SolitonParams | None:
        if self.initial != "soliton":
            return None
        p = self.initial_params
        return SolitonParams(float(p["H"]), float(p["A"]), float(p.get("X", 0.0)), self.g)

    def with_cells(self, n_cells: int) -> "RunConfig":
        return dataclasses.replace(self, n_cells=int(n_cells))


def _bump(x, height=0.5, center=0.5, width=0.1, level=0.0):
    return level + height * np.exp(-(((x - center) / width) ** 2))


def _slope(x, slope=0.1, offset=0.0, origin=0.0):
    return offset + slope * (x - origin)


BATHYMETRY_PROFILES = {
    "flat": lambda x, level=0.0: np.full_like(x, float(level)),
    "bump": _bump,
    "slope": _slope,
}


def build_bathymetry(config: RunConfig, grid: Grid) -> Bathymetry:
    params = {k: float(v) for k, v in config.bathymetry_params.items() if k != "ghost"}
    B = BATHYMETRY_PROFILES[config.bathymetry](grid.centers, **params)
    rule = "periodic" if config.boundary.periodic else config.bathymetry_params.get("ghost", "reflect")
    return Bathymetry.from_cells(B, rule)


def _soliton_initial(grid, bathy, p, g):
    params = SolitonParams(float(p["H"]), float(p["A"]), float(p.get("X", 0.0)), g)
    h, u, *_ = solitary_wave(0.0, grid.centers, params)
    return h, u


def _lake_initial(grid, bathy, p, g):
    s = lake_at_rest(float(p.get("level", 1.0)), bathy, grid)
    return s.h, s.u


def _constant_initial(grid, bathy, p, g):
    return np.full(grid.n_cells, float(p.get("h", 1.0))), np.full(grid.n_cells, float(p.get("u", 0.0)))


def _dam_initial(grid, bathy, p, g):
    x0 = float(p.get("x0", 0.5 * (grid.x_min + grid.x_max)))
    h = np.where(grid.centers < x0, float(p.get("h_left", 1.0)), float(p.get("h_right", 0.0)))
    return h, np.zeros(grid.n_cells)


INITIAL_PROFILES = {
    "soliton": _soliton_initial,
    "lake-at-rest": _lake_initial,
    "constant-flow": _constant_initial,
    "dam-break": _dam_initial,
}


def _interior(state: State, side: str):
    k = 0 if side == LEFT else -1
    return state.h[k], state.u[k], state.w[k], state.sigma[k]


def advection_ghosts(spec: BoundarySpec, state: State, bathy: Bathymetry, grid: Grid, t: float, g: float,
                     ) -> tuple[GhostTrace, FacePair]:
    """Ghost values for the advection step and the face fluxes they produce.

    w and sigma on incoming faces come from boundary data, so the mass flux
    has to be known first; it does not depend on them.
    """
    other = {LEFT: RIGHT, RIGHT: LEFT}
    faces_ghost = {}
    for side in (LEFT, RIGHT):
        faces_ghost[side] = ghost_values_advection(
            spec[side], side, _interior(state, side), False, t,
            bathy.ghost_gradient(grid, side), _interior(state, other[side]))
    ghosts = GhostTrace(faces_ghost[LEFT], faces_ghost[RIGHT])
    faces = face_fluxes(state, bathy, grid, ghosts, g)
    if not spec.periodic:
        for side, inc in incoming_faces(faces).items():
            if inc:
                ghosts = ghosts.with_face(side, ghost_values_advection(
                    spec[side], side, _interior(state, side), True, t, bathy.ghost_gradient(grid, side)))
    return ghosts, faces


def initial_state(config: RunConfig, grid: Grid, bathy: Bathymetry) -> State:
    """Initial (h, u) from the profile; w and sigma from the discrete constraints."""
    h, u = INITIAL_PROFILES[config.initial](grid, bathy, config.initial_params, config.g)
    h = np.asarray(h, dtype=float)
    u = np.where(wet_mask(h), u, 0.0)
    z = np.zeros(grid.n_cells)
    ghosts, _ = advection_ghosts(config.boundary, State(h, u, z, z.copy()), bathy, grid, 0.0, config.g)
    w, sigma = init_vertical_velocities(h, u, bathy, grid, ghosts)
    return State(h, u, w, sigma)


def boundary_energy_flux(faces: FacePair, state: State, bathy: Bathymetry, ghosts: GhostTrace, g: float) -> float:
    """Outward energy flux through the two domain faces, upwinded with the mass flux."""
    total = 0.0
    for side, k, f in ((LEFT, 0, 0), (RIGHT, -1, -1)):
        mass = faces.mass[f] * NORMAL[side]  # outward
        gh = ghosts[side]
        if mass >= 0:
            u, w, s, h, B = state.u[k], state.w[k], state.sigma[k], state.h[k], bathy.B[k]
        else:
            u, w, s, h, B = gh.u(side), gh.w, gh.sigma, gh.h, bathy.ghost[side]
        total += mass * (0.5 * (u * u + w * w + s * s) + g * (h + B))
    return float(total)


@dataclass
class LedgerRow:
    step: int
    t: float
    dt: float
    E_n: float
    E_star: float
    E_next: float
    adv_residual: float       # E* - E^n + dt * outward energy flux
    cor_residual: float       # E^{n+1} - E*
    adv_boundary_work: float  # -dt * outward energy flux
    cor_boundary_work: float  # -dt <U, Phi>_h from the boundary faces
    cor_dissipation: float    # -dt^2 |Phi|_h^2 / 2
    norm_star2: float
    norm2: float
    phi_term: float           # dt^2 |Phi|_h^2
    mass: float


class EnergyLedger:
    columns = tuple(f.name for f in dataclasses.fields(LedgerRow))

    def __init__(self):
        self.rows: list[LedgerRow] = []

    def append(self, row: LedgerRow) -> None:
        if self.rows and row.step <= self.rows[-1].step:
            raise ValueError("ledger rows must be appended in step order")
        self.rows.append(row)

    def __len__(self):
        return len(self.rows)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows])

    def write_csv(self, path) -> None:
        data = np.array([[getattr(r, c) for c in self.columns] for r in self.rows]).reshape(-1, len(self.columns))
        np.savetxt(path, data, delimiter=",", header=",".join(self.columns), comments="", fmt="%.17g")


@dataclass
class StepInfo:
    """What a monitor callback sees after each step."""

    step: int
    t: float
    dt: float
    state: State
    pressures: PressureField
    predicted: State
    decomposition: OrthoDecomposition


@dataclass
class RunResult:
    config: RunConfig
    grid: Grid
    bathy: Bathymetry
    state: State
    pressures: PressureField
    t: float
    steps: int
    ledger: EnergyLedger
    snapshots: list = field(default_factory=list)  # (t, State, PressureField)


def write_snapshot(path, t: float, grid: Grid, state: State, pressures: PressureField, bathy: Bathymetry,
                   g: float) -> None:
    density, _ = mechanical_energy(state, bathy, g, grid)
    cols = np.column_stack([grid.centers, state.h, state.u, state.w, state.sigma, pressures.q_bar,
                            pressures.q_B, density])
    with open(path, "w") as fh:
        fh.write(f"# t = {t!r}\n")
        np.savetxt(fh, cols, delimiter=",", header="x,h,u,w,sigma,q_bar,q_B,E", comments="", fmt="%.17g")


def dump_system(path, decomposition: OrthoDecomposition) -> None:
    """Plain-text (row, col, value) triplets of the projection matrix, then the right-hand side."""
    system = decomposition.system
    with open(path, "w") as fh:
        fh.write(f"# projection system on {system.size} wet cells: row col value\n")
        for i, j, v in system.triplets():
            fh.write(f"{i} {j} {v!r}\n")
        fh.write("# rhs: row value\n")
        for i, v in enumerate(system.rhs):
            fh.write(f"{i} {v!r}\n")


def run_simulation(config: RunConfig, monitor: Callable[[StepInfo], None] | None = None) -> RunResult:
    """Advance the configured problem to ``t_end`` (or ``max_steps``)."""
    g = config.g
    grid = config.grid()
    bathy = build_bathymetry(config, grid)
    spec = config.boundary
    state = initial_state(config, grid, bathy)
    pressures = PressureField.zeros(grid.n_cells)
    ledger = EnergyLedger()
    out = config.out_dir
    if out:
        os.makedirs(out, exist_ok=True)

    snapshots = []
    n_out = 0

    def record(t):
        nonlocal n_out
        snapshots.append((t, state.copy(), PressureField(pressures.q_bar.copy(), pressures.q_B.copy())))
        if out:
            write_snapshot(os.path.join(out, f"snapshot_{n_out:05d}.csv"), t, grid, state, pressures, bathy, g)
        n_out += 1

    t = 0.0
    step = 0
    record(t)
    next_out = config.output_dt
    while t < config.t_end and (config.max_steps is None or step < config.max_steps):
        try:
            dt = compute_time_step(state, grid, config.c_cfl, g)
        except CFLError as exc:
            raise SimulationError(str(exc), step) from exc
        dt = float(dt)
        last = t + dt >= config.t_end
        if last:
            dt = config.t_end - t
        t_next = float(config.t_end) if last else t + dt

        _, E_n = mechanical_energy(state, bathy, g, grid)
        try:
            ghosts, faces = advection_ghosts(spec, state, bathy, grid, t, g)
            h_s, u_s, faces = shallow_water_step(state, bathy, grid, ghosts, dt, g, faces)
        except (CFLError, ValueError) as exc:
            raise SimulationError(str(exc), step) from exc
        w_s, s_s = transport_step(state.w, state.sigma, state.h, h_s, faces, ghosts, grid, dt)
        predicted = State(h_s, u_s, w_s, s_s)
        _, E_star = mechanical_energy(predicted, bathy, g, grid)
        flux_out = boundary_energy_flux(faces, state, bathy, ghosts, g)

        un_star = {LEFT: u_s[0] * NORMAL[LEFT], RIGHT: u_s[-1] * NORMAL[RIGHT]}
        closures = None if spec.periodic else closures_with_dry_fronts(
            boundary_closures(spec, t_next, un_star), h_s)
        try:
            dec = solve_correction(h_s, (u_s, w_s, s_s), bathy, grid, closures or {}, dt, spec.periodic)
        except CorrectionError as exc:
            raise SimulationError(str(exc), step) from exc
        state = State(h_s, *dec.U)
        pressures = dec.pressures
        if not all(np.all(np.isfinite(a)) for a in (state.h, state.u, state.w, state.sigma)):
            raise SimulationError("non-finite values in the state", step)
        _, E_next = mechanical_energy(state, bathy, g, grid)

        if config.dump_matrix and out and step == 0 and dec.system is not None:
            dump_system(os.path.join(out, "matrix_step0.txt"), dec)

        n2s = weighted_inner_product(h_s, predicted.velocities(), predicted.velocities(), grid)
        n2 = weighted_inner_product(h_s, dec.U, dec.U, grid)
        phi2 = dt * dt * weighted_inner_product(h_s, dec.Phi, dec.Phi, grid)
        face = 0.0 if spec.periodic else boundary_face_sum(dec.U[0], h_s * pressures.q_bar, dec.ghosts)
        step += 1
        t = t_next
        ledger.append(LedgerRow(
            step, t, dt, E_n, E_star, E_next,
            E_star - E_n + dt * flux_out, E_next - E_star,
            -dt * flux_out, -dt * face, -0.5 * phi2,
            n2s, n2, float(phi2), float(np.sum(h_s * grid.cell_measures))))
        if monitor is not None:
            monitor(StepInfo(step, t, dt, state, pressures, predicted, dec))

        if config.output_every and step % config.output_every == 0 and t < config.t_end:
            record(t)
        elif next_out is not None and t >= next_out - 1e-12 * config.t_end and t < config.t_end:
            record(t)
            while next_out <= t + 1e-12 * config.t_end:
                next_out += config.output_dt
    if not snapshots or snapshots[-1][0] != t:
        record(t)
    if out and config.ledger:
        ledger.write_csv(os.path.join(out, "ledger.csv"))
    return RunResult(config, grid, bathy, state, pressures, t, step, ledger, snapshots)


def l2_error(state: State, pressures: PressureField, t: float, params: SolitonParams, grid: Grid) -> dict:
    """Per-field discrete L2 distance to the solitary wave at time ``t``."""
    ref = solitary_wave(t, grid.centers, params)
    num = (state.h, state.u, state.w, state.sigma, pressures.q_bar, pressures.q_B)
    return {name: float(np.sqrt(grid.dx * np.sum((a - b) ** 2))) for name, a, b in zip(FIELDS, num, ref)}


@dataclass
class ErrorReport:
    dx: list
    times: list
    errors: dict  # field -> list over meshes
    rates: dict = field(default_factory=dict)
    degenerate: dict = field(default_factory=dict)

    def fit_rates(self) -> None:
        if len(self.dx) < 3:
            raise ValueError("a convergence rate needs at least three meshes")
        x = np.log(np.asarray(self.dx, dtype=float))
        for name, errs in self.errors.items():
            e = np.asarray(errs, dtype=float)
            if np.any(e <= 0) or not np.all(np.isfinite(e)):
                self.rates[name] = math.nan
                self.degenerate[name] = True
                continue
            self.rates[name] = float(np.polyfit(x, np.log(e), 1)[0])
            self.degenerate[name] = False

    def monotone(self, name: str) -> bool:
        e = np.asarray(self.errors[name])
        return bool(np.all(np.diff(e) < 0))


def convergence_study(base: RunConfig, meshes, runner: Callable[[RunConfig], RunResult] = run_simulation,
                      ) -> ErrorReport:
    """Run ``base`` on each mesh and fit log-log error rates against dx."""
    meshes = list(meshes)
    if len(meshes) < 3:
        raise ValueError("a convergence study needs at least three meshes")
    params = base.soliton
    if params is None:
        raise ValueError("convergence studies compare against the solitary wave")
    report = ErrorReport([], [], {name: [] for name in FIELDS})
    for n in meshes:
        cfg = dataclasses.replace(base.with_cells(n), out_dir=None, dump_matrix=False)
        res = runner(cfg)
        report.dx.append(res.grid.dx)
        report.times.append(res.t)
        for name, e in l2_error(res.state, res.pressures, res.t, params, res.grid).items():
            report.errors[name].append(e)
    report.fit_rates()
    return report


def wave_exit_time(params: SolitonParams, x_max: float, fraction: float = 0.01) -> float:
    """First time the exact wave's excess depth on the domain drops below ``fraction * A * H``."""
    # sech^2(chi) <= fraction  <=>  |chi| >= arccosh(1/sqrt(fraction))
    chi = math.acosh(1.0 / math.sqrt(fraction))
    k = math.sqrt(3.0 * params.A / (4.0 * (1.0 + params.A))) / params.H
    return (x_max + chi / k - params.X) / params.c


@dataclass
class ExitReport:
    exit_time: float
    error_at_exit: float
    max_after_exit: float
    max_final_window: float
    min_depth: float
    finite: bool
    times: np.ndarray
    errors: np.ndarray

    @property
    def grows(self) -> bool:
        return self.max_final_window > 1.1 * self.error_at_exit


def transparent_exit_check(config: RunConfig, final_fraction: float = 0.1) -> ExitReport:
    """Track max|h - H| after the solitary wave has left the domain."""
    params = config.soliton
    if params is None:
        raise ValueError("the exit check needs a solitary-wave initial state")
    t_exit = wave_exit_time(params, config.x_max)
    times, errs = [], []
    min_depth = [math.inf]

    def monitor(info: StepInfo):
        times.append(info.t)
        errs.append(float(np.max(np.abs(info.state.h - params.H))))
        min_depth[0] = min(min_depth[0], float(np.min(info.state.h)))

    finite = True
    try:
        run_simulation(dataclasses.replace(config, out_dir=None), monitor)
    except SimulationError:
        finite = False
    times, errs = np.asarray(times), np.asarray(errs)
    after = times >= t_exit
    if not after.any():
        raise ValueError(f"run ends at t = {times[-1] if times.size else 0.0} before the wave exits at {t_exit}")
    i_exit = int(np.argmax(after))
    n_tail = max(1, int(math.ceil(final_fraction * times.size)))
    return ExitReport(t_exit, float(errs[i_exit]), float(errs[after].max()), float(errs[-n_tail:].max()),
                      min_depth[0], finite, times, errs)


def surface_diagnostics(state: State, bathy: Bathymetry, grid: Grid, plateau_tol: float = 1e-5) -> dict:
    """Qualitative descriptors of a free surface with no reference solution.

    ``periodicity`` is the largest normalized autocorrelation of the surface
    anomaly beyond its first zero crossing; ``plateau`` is the longest run of
    cells (as a length) whose slope stays below ``plateau_tol``.
    """
    eta = state.h + bathy.B
    anomaly = eta - eta.mean()
    std = float(anomaly.std())
    periodicity = 0.0
    if std > 0:
        ac = np.correlate(anomaly, anomaly, mode="full")[anomaly.size - 1:]
        ac = ac / ac[0]
        neg = np.flatnonzero(ac < 0)
        if neg.size:
            periodicity = float(ac[neg[0]:].max())
    flat = np.abs(np.diff(eta)) / grid.dx < plateau_tol
    longest = run = 0
    for f in flat:
        run = run + 1 if f else 0
        longest = max(longest, run)
    return {"std": std, "periodicity": periodicity, "plateau": longest * grid.dx}

