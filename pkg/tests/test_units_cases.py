import math

import numpy as np
import pytest

from freelbm.analysis import centroid
from freelbm.boundaries import moving_wall
from freelbm.cases import (CaseConfig, calibrate_extension_rate, calibrate_sigma_xi, droplet_profile,
                           init_fourroller_case, init_shear_case, roller_layout, stagnation_gradients,
                           with_ca)
from freelbm.dynamics import Simulation
from freelbm.errors import ConfigError
from freelbm.free_energy import FreeEnergyParams
from freelbm.grid import Grid
from freelbm.lattice import make_stencil
from freelbm.units import DimensionlessGroup, choose_rate, groups_from_params, solve_lattice_params

SHEAR_GROUPS = DimensionlessGroup(re=0.1, ca=0.1, pe=0.43, ch=0.0379)


def test_groups_validate():
    with pytest.raises(ConfigError):
        DimensionlessGroup(re=0.0, ca=0.1, pe=1.0, ch=0.1)
    with pytest.raises(ConfigError):
        DimensionlessGroup(re=1.0, ca=float("nan"), pe=1.0, ch=0.1)


def test_tau_window_guard():
    # nu = 1e-4 * 900 / 0.1 = 0.9 -> tau = 3.2
    with pytest.raises(ConfigError, match="tau"):
        solve_lattice_params(SHEAR_GROUPS, 30, 1e-4)


def test_interface_width_from_cahn():
    lat = solve_lattice_params(SHEAR_GROUPS, 30, 5e-5)
    assert lat.xi == pytest.approx(1.137, abs=1e-12)
    assert lat.params.alpha == pytest.approx(1.137 / math.sqrt(2))
    assert lat.sigma == pytest.approx(lat.params.alpha * lat.kappa / 3, rel=1e-14)


@pytest.mark.parametrize("groups,a,rate,tau_g", [
    (SHEAR_GROUPS, 30, 5e-5, 1.0),
    (DimensionlessGroup(re=1.0, ca=3.5, pe=0.2, ch=0.0379), 40, 1e-4, 1.0),
    (DimensionlessGroup(re=0.0625, ca=0.3, pe=0.1, ch=0.057), 20, 5e-5, 0.8),
])
def test_round_trip(groups, a, rate, tau_g):
    lat = solve_lattice_params(groups, a, rate, tau_g)
    back = groups_from_params(lat.params, a, rate)
    for k in ("re", "ca", "pe", "ch"):
        assert getattr(back, k) == pytest.approx(getattr(groups, k), rel=1e-12)
    assert lat.setup.nu == pytest.approx((lat.params.tau - 0.5) / 3, rel=1e-14)


def test_choose_rate_respects_both_limits():
    g = choose_rate(SHEAR_GROUPS, 30, 120)
    assert g * 120 <= 0.05 + 1e-15
    lat = solve_lattice_params(SHEAR_GROUPS, 30, g)
    assert lat.params.tau <= 2.0 + 1e-12


def shear_config(**kw):
    base = dict(kind="shear2d", a=30, groups=SHEAR_GROUPS)
    base.update(kw)
    return CaseConfig(**base)


def test_init_shear_geometry():
    cfg = shear_config(groups=DimensionlessGroup(re=0.5, ca=0.1, pe=0.43, ch=0.0379), rate=2e-4)
    case = init_shear_case(cfg)
    H = case.info["H"]
    assert H == 240 and case.sim.grid.dims == (240, 242)
    assert case.info["U"] == pytest.approx(0.024, rel=1e-14)
    wv = case.sim.grid.wall_velocity
    assert wv[0, 5, -1] == pytest.approx(0.024) and wv[0, 5, 0] == pytest.approx(-0.024)
    phi = case.state.phi
    c = centroid(phi, periodic=case.sim.grid.periodic)
    assert np.abs(c - np.asarray(case.center)).max() < 0.5
    x = np.arange(240) - case.center[0]
    on_ring = phi[:, int(case.center[1])][np.argmin(np.abs(np.abs(x) - 30))]
    assert abs(on_ring) < 0.5
    assert droplet_profile(case.sim.grid, (100.0, 100.0), 30, 1.0)[130, 100] == 0.0


def test_shear_droplet_touching_walls():
    with pytest.raises(ConfigError, match="walls"):
        init_shear_case(shear_config(domain_ratio=(8, 2)))


def test_config_validation():
    with pytest.raises(ConfigError):
        shear_config(kind="shear4d")
    with pytest.raises(ConfigError):
        shear_config(domain_ratio=(8, 8, 4))
    assert shear_config(kind="shear3d").domain_ratio == (8.0, 8.0, 4.0)
    assert with_ca(shear_config(), 0.3).groups.ca == 0.3


def test_couette_init_flow():
    cfg = shear_config(a=5, groups=DimensionlessGroup(re=0.1, ca=0.1, pe=0.5, ch=0.2),
                       init_flow="couette")
    case = init_shear_case(cfg, droplet=False)
    u = case.sim.refresh().u[0]
    H, U = case.info["H"], case.info["U"]
    y = np.arange(1, H + 1)
    assert np.allclose(u[3, 1:-1], U * (y - case.center[1]) / (H / 2), atol=1e-15)


def test_shear_case_without_droplet_reaches_couette():
    cfg = shear_config(a=4, domain_ratio=(1, 4), rate=1e-3,
                       groups=DimensionlessGroup(re=0.05, ca=0.1, pe=0.5, ch=0.2))
    case = init_shear_case(cfg, droplet=False)
    sim = case.sim
    nu = sim.params.tau - 0.5
    H, U = case.info["H"], case.info["U"]
    sim.step(int(40 * H * H / (math.pi ** 2 * nu / 3)))
    u = sim.refresh().u[0]
    y = np.arange(1, H + 1)
    assert np.abs(u[:, 1:H + 1] - (-U + 2 * U * (y - 0.5) / H)).max() < 1e-10


def test_shear_mirror_symmetry():
    # reflect y -> -y through the mid-plane and swap the wall velocities
    p = FreeEnergyParams(kappa1=0.05, kappa2=0.05, alpha=1.0, gamma_phi=1.0, tau=0.8)
    D2Q9 = make_stencil("D2Q9")
    sims = []
    for sign in (1, -1):
        grid = Grid((40, 32), (True, False))
        moving_wall(grid, 1, 0, (-sign * 0.01, 0.0))
        moving_wall(grid, 1, 1, (sign * 0.01, 0.0))
        phi = droplet_profile(grid, (17.0, 13.0), 7, p.xi)
        sim = Simulation(grid, D2Q9, p)
        sim.initialize_equilibrium(rho=np.ones(grid.dims), phi=phi if sign > 0 else phi[:, ::-1])
        sims.append(sim)
    for _ in range(4):
        for sim in sims:
            sim.step(100)
        a, b = (s.refresh() for s in sims)
        assert np.abs(a.phi - b.phi[:, ::-1]).max() < 1e-12
        assert np.abs(a.u[0] - b.u[0][:, ::-1]).max() < 1e-13
        assert np.abs(a.u[1] + b.u[1][:, ::-1]).max() < 1e-13


ROLLER_GROUPS = DimensionlessGroup(re=0.0625, ca=0.1, pe=0.1, ch=0.057)


def roller_config(**kw):
    base = dict(kind="fourroller2d", a=4, groups=ROLLER_GROUPS, domain_ratio=(10, 10))
    base.update(kw)
    return CaseConfig(**base)


def test_fourroller_default_size():
    cfg = CaseConfig(kind="fourroller2d", a=20, groups=ROLLER_GROUPS)
    assert round(cfg.domain_ratio[0] * cfg.a) == 800


def test_roller_layout_and_signs():
    c0, R, layout = roller_layout(800)
    assert R == 100 and c0 == 400.5
    for (cx, cy), sign in layout:
        assert abs(abs(cx - c0) - 200) < 1e-12 and abs(abs(cy - c0) - 200) < 1e-12
        assert sign == (1.0 if (cx - c0) * (cy - c0) > 0 else -1.0)


def test_fourroller_droplet_overlap():
    with pytest.raises(ConfigError, match="rollers"):
        init_fourroller_case(roller_config(a=8, domain_ratio=(5, 5)), gain=1.0)


def test_stagnation_gradients_of_linear_field():
    x, y = np.meshgrid(np.arange(12.0), np.arange(12.0), indexing="ij")
    u = np.stack([0.003 * (x - 5.5), -0.003 * (y - 5.5)])
    ex, ey, sp = stagnation_gradients(u, (5.5, 5.5))
    assert sp < 1e-15
    assert ex == pytest.approx(0.003) and ey == pytest.approx(-0.003) and sp < 0.003
    ex, ey, sp = stagnation_gradients(u, (5.0, 5.0))
    assert ex == pytest.approx(0.003) and ey == pytest.approx(-0.003)


def test_extension_calibration_small_mill():
    cfg = roller_config()
    assert calibrate_extension_rate(cfg, omega=0.0).eps == 0.0
    c1 = calibrate_extension_rate(cfg, omega=2e-4)
    c2 = calibrate_extension_rate(cfg, omega=4e-4)
    assert c1.eps > 0
    assert c1.eps_y == pytest.approx(c1.eps, rel=0.02)
    assert c2.eps == pytest.approx(2 * c1.eps, rel=0.02)
    assert c1.center_speed < 1e-6 * c1.eps * 40
    case = init_fourroller_case(cfg, gain=c1.gain)
    assert case.info["omega"] == pytest.approx(case.rate / c1.gain)
    assert case.info["roller_speed"] < 0.1


def test_analytic_extension_mode():
    case = init_fourroller_case(roller_config(mode="analytic-extension"))
    wv = case.sim.grid.wall_velocity
    W = case.info["W"]
    c0 = (W + 1) / 2
    assert wv[0, -1, 10] == pytest.approx(case.rate * (W + 1 - c0))
    assert wv[1, 10, 0] == pytest.approx(case.rate * c0)


@pytest.mark.slow
def test_calibrate_sigma_xi_small():
    p = FreeEnergyParams(kappa1=0.05, kappa2=0.05, alpha=1.0, gamma_phi=2.0)
    cal = calibrate_sigma_xi(p, planar_steps=20000, droplet_steps=6000, radius=12, size=80)
    assert cal.rms < 0.02
    assert cal.xi == pytest.approx(p.xi, rel=0.05)
    assert cal.sigma == pytest.approx(p.alpha * 0.05 / 3, rel=0.10)
