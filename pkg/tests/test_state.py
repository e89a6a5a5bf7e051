import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gnsolve.analytic import SolitonParams, solitary_wave
from gnsolve.mesh import build_uniform_grid
from gnsolve.state import (SQRT3, Bathymetry, GhostTrace, FaceGhost, State, StateError, constraint_residual,
                           discrete_divergence, discrete_gradient, init_vertical_velocities, mechanical_energy,
                           weighted_inner_product, weighted_norm)

from oracles import face_sum_gradient, naive_inner

seeds = st.integers(0, 2**32 - 1)


def test_gradient_of_constant_vanishes():
    g = build_uniform_grid(0, 1, 10)
    np.testing.assert_array_equal(discrete_gradient(g, np.full(10, 3.0), (3.0, 3.0)), 0.0)


def test_gradient_exact_on_linear_field():
    g = build_uniform_grid(0, 1, 10)
    x = g.centers
    np.testing.assert_allclose(discrete_gradient(g, x, (x[0] - g.dx, x[-1] + g.dx)), 1.0, rtol=1e-12)


def test_gradient_matches_face_sum_oracle():
    rng = np.random.default_rng(3)
    g = build_uniform_grid(0, 2, 8)
    phi = rng.normal(size=8)
    gl, gr = rng.normal(size=2)
    np.testing.assert_allclose(discrete_gradient(g, phi, (gl, gr)), face_sum_gradient(g.dx, phi, gl, gr),
                               rtol=1e-13, atol=1e-13)


def test_gradient_rejects_length_mismatch():
    with pytest.raises(StateError):
        discrete_gradient(build_uniform_grid(0, 1, 5), np.zeros(4), (0.0, 0.0))


def test_divergence_constant_and_linear():
    g = build_uniform_grid(0, 1, 6)
    assert np.all(discrete_divergence(g, np.ones(6), (1.0, 1.0)) == 0)
    x = g.centers
    np.testing.assert_allclose(discrete_divergence(g, x, (x[0] - g.dx, x[-1] + g.dx)), 1.0)


def test_divergence_reads_ghost_trace_in_x_components():
    g = build_uniform_grid(0, 1, 4)
    u = np.ones(4)
    # a wall mirrors the normal component: x-velocity -1 on both ghost cells
    ghosts = GhostTrace(FaceGhost(un=1.0), FaceGhost(un=-1.0))
    div = discrete_divergence(g, u, ghosts)
    np.testing.assert_allclose(div, [2 / (2 * g.dx), 0, 0, -2 / (2 * g.dx)])


def _duality_gap(seed, n):
    rng = np.random.default_rng(seed)
    g = build_uniform_grid(0, 1, n)
    psi, chi = rng.normal(size=(2, n))
    lhs = np.sum(discrete_divergence(g, psi, (psi[-1], psi[0])) * chi * g.dx)
    rhs = np.sum(psi * discrete_gradient(g, chi, (chi[-1], chi[0])) * g.dx)
    return abs(lhs + rhs), np.linalg.norm(psi) * np.linalg.norm(chi)


def test_duality_example():
    gap, scale = _duality_gap(11, 16)
    assert gap <= 1e-12 * scale


@settings(max_examples=100, deadline=None)
@given(seeds, st.integers(3, 64))
def test_grad_div_duality_with_periodic_ghosts(seed, n):
    gap, scale = _duality_gap(seed, n)
    assert gap <= 1e-12 * max(scale, 1.0)


def test_energy_of_still_water():
    g = build_uniform_grid(0, 1, 4)
    s = State(np.ones(4), np.zeros(4), np.zeros(4), np.zeros(4))
    dens, total = mechanical_energy(s, Bathymetry.flat(4), 9.81, g)
    np.testing.assert_allclose(dens, 4.905)
    assert total == pytest.approx(4.905)


def test_energy_vanishes_on_dry_cells():
    s = State(np.array([1.0, 0.0, 2.0]), np.array([1.0, 0.0, 1.0]), np.zeros(3), np.zeros(3))
    dens, _ = mechanical_energy(s, Bathymetry.from_cells([0.3, 0.5, 0.1]), 9.81)
    assert dens[1] == 0.0


def test_soliton_energy_matches_quadrature():
    p = SolitonParams(0.1, 0.5, 0.3)
    g = build_uniform_grid(0, 1, 500)
    h, u, w, s, _, _ = solitary_wave(0.0, g.centers, p)
    _, total = mechanical_energy(State(h, u, w, s), Bathymetry.flat(500), 9.81, g)
    quad = 0.0
    for k, x in enumerate(g.centers):
        hk, uk, wk, sk, _, _ = (float(v) for v in solitary_wave(0.0, x, p))
        quad += (9.81 * hk * hk / 2 + hk * (uk * uk + wk * wk + sk * sk) / 2) * g.dx
    assert total == pytest.approx(quad, rel=1e-12)


@given(seeds)
def test_energy_invariant_under_velocity_flip(seed):
    rng = np.random.default_rng(seed)
    h, B = rng.uniform(0, 2, 7), rng.normal(size=7)
    u, w, s = rng.normal(size=(3, 7))
    bathy = Bathymetry.from_cells(B)
    e1 = mechanical_energy(State(h, u, w, s), bathy, 9.81)[0]
    e2 = mechanical_energy(State(h, -u, -w, -s), bathy, 9.81)[0]
    np.testing.assert_array_equal(e1, e2)


def test_constraint_residual_zero_state():
    g = build_uniform_grid(0, 1, 5)
    z = np.zeros(5)
    rw, rs = constraint_residual(State(np.ones(5), z, z, z), Bathymetry.flat(5), g, (0.0, 0.0))
    assert np.all(rw == 0) and np.all(rs == 0)


def test_constraint_residual_wall_boundary_cells_only():
    g = build_uniform_grid(0, 1, 6)
    z = np.zeros(6)
    # wall ghosts mirror u = 1 into x-velocity -1
    rw, rs = constraint_residual(State(np.ones(6), np.ones(6), z, z), Bathymetry.flat(6), g, (-1.0, -1.0))
    assert rw[0] != 0 and rw[-1] != 0
    np.testing.assert_array_equal(rw[1:-1], 0.0)
    np.testing.assert_array_equal(rs[1:-1], 0.0)


def test_constraint_residual_dry_cells_are_zero():
    g = build_uniform_grid(0, 1, 4)
    h = np.array([1.0, 0.0, 1.0, 1.0])
    rw, rs = constraint_residual(State(h, np.array([1.0, 0, 2, 3]), np.ones(4), np.ones(4)),
                                 Bathymetry.flat(4), g, (0.0, 0.0))
    assert rw[1] == 0 and rs[1] == 0


def test_init_vertical_velocities_zero_flow():
    g = build_uniform_grid(0, 1, 5)
    w, s = init_vertical_velocities(np.ones(5), np.zeros(5), Bathymetry.flat(5), g, (0.0, 0.0))
    assert np.all(w == 0) and np.all(s == 0)


def test_init_vertical_velocities_linear_flow():
    g = build_uniform_grid(0, 1, 8)
    x = g.centers
    w, s = init_vertical_velocities(np.ones(8), x, Bathymetry.flat(8), g, (x[0] - g.dx, x[-1] + g.dx))
    np.testing.assert_allclose(w, -0.5)
    np.testing.assert_allclose(s, -0.5 / SQRT3)


@given(seeds)
def test_init_vertical_velocities_are_admissible_exactly(seed):
    rng = np.random.default_rng(seed)
    g = build_uniform_grid(0, 1, 9)
    h, u, B = rng.uniform(0.1, 2, 9), rng.normal(size=9), rng.normal(size=9)
    bathy = Bathymetry.from_cells(B)
    ghosts = tuple(rng.normal(size=2))
    w, s = init_vertical_velocities(h, u, bathy, g, ghosts)
    rw, rs = constraint_residual(State(h, u, w, s), bathy, g, ghosts)
    assert np.all(rw == 0) and np.all(rs == 0)


def test_init_vertical_velocities_approximate_soliton_to_second_order():
    p = SolitonParams(0.1, 0.5, 0.5)
    errs = []
    for n in (500, 1000):
        g = build_uniform_grid(0, 1, n)
        x = g.centers
        h, u, w_sol, _, _, _ = solitary_wave(0.0, x, p)
        ug = solitary_wave(0.0, np.array([x[0] - g.dx, x[-1] + g.dx]), p)[1]
        w, _ = init_vertical_velocities(h, u, Bathymetry.flat(n), g, tuple(ug))
        errs.append(np.max(np.abs(w - w_sol)))
    assert errs[1] < 1e-4
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.05)


def test_inner_product_examples():
    g = build_uniform_grid(0, 3, 3)
    one = np.ones(3)
    z = np.zeros(3)
    psi = np.array([1.0, 1.0, 0.0])
    assert weighted_inner_product(one, (z, z, z), (z, z, z), g) == 0
    assert weighted_inner_product(one, (psi, z, z), (psi, z, z), g) == 2.0


@given(seeds)
def test_inner_product_matches_naive_loop(seed):
    rng = np.random.default_rng(seed)
    n = 11
    g = build_uniform_grid(0, 3, n)
    h = np.where(rng.random(n) < 0.2, 0.0, rng.uniform(0.1, 2, n))
    U, V = rng.normal(size=(2, 3, n))
    ref = naive_inner(h, U, V, g.dx)
    assert weighted_inner_product(h, U, V, g) == pytest.approx(ref, rel=1e-14, abs=1e-14)
    assert weighted_inner_product(h, U, V, g) == pytest.approx(weighted_inner_product(h, V, U, g), rel=1e-14)
    assert weighted_norm(h, U, g) >= 0


def test_state_validation():
    with pytest.raises(StateError):
        State(np.array([1.0, -1.0]), np.zeros(2), np.zeros(2), np.zeros(2)).validate()
    with pytest.raises(StateError):
        State(np.ones(2), np.array([0.0, np.nan]), np.zeros(2), np.zeros(2)).validate()
    with pytest.raises(StateError):
        State(np.ones(2), np.zeros(3), np.zeros(2), np.zeros(2))


def test_bathymetry_ghost_rules():
    B = np.array([0.0, 1.0, 3.0])
    g = build_uniform_grid(0, 3, 3)
    refl = Bathymetry.from_cells(B)
    assert refl.ghost == {"left": 0.0, "right": 3.0}
    ext = Bathymetry.from_cells(B, "extrapolate")
    assert ext.ghost == {"left": -1.0, "right": 5.0}
    per = Bathymetry.from_cells(B, "periodic")
    assert per.ghost == {"left": 3.0, "right": 0.0}
    # reflected gradient at the ghost uses the second layer
    assert refl.ghost_gradient(g, "left") == pytest.approx((0.0 - 1.0) / 2)
    with pytest.raises(StateError):
        Bathymetry.from_cells(B, "mirror")
