import numpy as np
import pytest

from freelbm.dynamics import equilibrium_f
from freelbm.errors import ConfigError, PositivityError
from freelbm.grid import BULK, EXTERIOR, WALL, Grid, allocate_state, compute_moments
from freelbm.lattice import make_stencil

D2Q9 = make_stencil("D2Q9")
D3Q19 = make_stencil("D3Q19")


def test_allocate_sizes():
    st = allocate_state(Grid((64, 64), (True, True)), D2Q9)
    assert st.f.size == st.g.size == 64 * 64 * 9
    assert not st.f.any() and not st.g.any()
    st3 = allocate_state(Grid((32, 32, 32), (True,) * 3), D3Q19)
    assert st3.f.size == st3.g.size == 32 ** 3 * 19


def test_domain_too_small():
    with pytest.raises(ConfigError, match="domain too small"):
        Grid((2, 2), (True, True))


def test_stencil_dimension_mismatch():
    with pytest.raises(ConfigError):
        allocate_state(Grid((8, 8), (True, True)), D3Q19)


def test_wall_velocity_stored_in_u():
    g = Grid((8, 8), (True, False))
    g.close_nonperiodic_axes()
    top = np.zeros(g.dims, dtype=bool)
    top[:, -1] = True
    g.set_solid(top, WALL, velocity=(0.02, 0.0))
    st = allocate_state(g, D2Q9)
    assert np.all(st.u[0][:, -1] == 0.02)
    assert np.all(st.u[0][:, 0] == 0.0)


def test_validate_open_boundary():
    g = Grid((8, 8), (True, False))
    with pytest.raises(ConfigError):
        g.validate()
    g.close_nonperiodic_axes()
    g.validate()


def test_classify_exterior():
    g = Grid((8, 8), (False, False))
    g.mask[:2, :] = WALL
    g.close_nonperiodic_axes()
    g.classify(D2Q9)
    assert np.all(g.mask[0, :] == EXTERIOR)
    assert np.all(g.mask[1, 1:-1] == WALL)


def test_ghost_sources_planar_wall():
    g = Grid((6, 6), (True, False))
    g.close_nonperiodic_axes()
    ghosts, src = g.ghost_sources(D2Q9)
    gx, gy = np.unravel_index(ghosts, g.dims)
    sx, sy = np.unravel_index(src, g.dims)
    assert np.all(sx == gx)
    assert np.all(np.abs(sy - gy) == 1)
    f = np.arange(36, dtype=float).reshape(6, 6)
    g.fill_ghosts(f, D2Q9)
    assert np.array_equal(f[:, 0], f[:, 1]) and np.array_equal(f[:, -1], f[:, -2])


def test_moments_examples():
    g = Grid((6, 6), (True, True))
    st = allocate_state(g, D2Q9)
    st.f[...] = D2Q9.weights[:, None, None]
    compute_moments(st, D2Q9)
    assert np.allclose(st.rho, 1.0) and np.allclose(st.u, 0.0)
    st.force[0] = 0.01
    compute_moments(st, D2Q9)
    assert np.allclose(st.u[0], 0.005, atol=1e-16) and np.allclose(st.u[1], 0.0)
    st.g[...] = 0.3 * D2Q9.weights[:, None, None]
    compute_moments(st, D2Q9)
    assert np.allclose(st.phi, 0.3, atol=1e-15)


def test_moments_match_definition():
    rng = np.random.default_rng(1)
    st = allocate_state(Grid((5, 7), (True, True)), D2Q9)
    st.f[...] = rng.uniform(0.05, 0.2, st.f.shape)
    st.g[...] = rng.uniform(-0.1, 0.1, st.g.shape)
    st.force[...] = rng.normal(0, 1e-3, st.force.shape)
    compute_moments(st, D2Q9)
    assert np.allclose(st.rho, st.f.sum(0))
    assert np.allclose(st.phi, st.g.sum(0))
    j = np.einsum("ia,ixy->axy", D2Q9.velocities, st.f)
    assert np.allclose(st.u, (j + 0.5 * st.force) / st.rho)


def test_positivity_diagnostic():
    st = allocate_state(Grid((6, 6), (True, True)), D2Q9)
    st.f[...] = D2Q9.weights[:, None, None]
    st.f[:, 2, 3] = 0.0
    with pytest.raises(PositivityError) as err:
        compute_moments(st, D2Q9)
    assert err.value.node == (2, 3)
    assert "(2, 3)" in str(err.value)


def test_state_copy_independent():
    st = allocate_state(Grid((4, 4), (True, True)), D2Q9)
    cp = st.copy()
    cp.f[0] = 1.0
    assert not st.f.any()


def test_equilibrium_sum_used_in_state():
    st = allocate_state(Grid((4, 4), (True, True)), D2Q9)
    st.f[...] = equilibrium_f(1.2, [0.01, -0.02], D2Q9)[:, None, None]
    compute_moments(st, D2Q9)
    assert np.allclose(st.rho, 1.2)
    assert np.allclose(st.u[0], 0.01) and np.allclose(st.u[1], -0.02)
    assert st.rho.dtype == np.float64 and BULK == 0
