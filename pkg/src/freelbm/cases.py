"""Digital twins of the parallel-band shear cell and the four-roller mill, plus calibration runs."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import curve_fit

from .boundaries import BoundarySpec, moving_wall, rotating_obstacle
from .dynamics import Simulation
from .errors import ConfigError, NumericalError
from .free_energy import FreeEnergyParams, bulk_pressure
from .grid import WALL, Grid
from .lattice import make_stencil
from .units import (CS2, PE_A_FACTOR, TAU_MAX, U_MAX, DimensionlessGroup, LatticeParameters,
                    choose_rate, solve_lattice_params)

log = logging.getLogger(__name__)

CASE_KINDS = ("shear2d", "shear3d", "fourroller2d")
# extension rate per unit roller angular speed, first guess for the calibration run
GAIN_GUESS = 0.14


@dataclass
class CaseConfig:
    kind: str
    a: float
    groups: DimensionlessGroup
    domain_ratio: tuple = ()
    rate: float | None = None
    tau_g: float = 1.0
    pre_run_steps: int = 0
    mode: str = "roller"
    init_flow: str = "rest"
    a_factor: float = PE_A_FACTOR
    tau_max: float = TAU_MAX
    u_max: float = U_MAX
    extension_gain: float | None = None
    steps: int = 1000
    sample_every: int = 100
    dump_every: int = 0
    output_dir: str = "out"
    stop_when_steady: bool = False
    steady_tol: float = 1e-3
    steady_window: float = 1.0
    stop_at_fragments: int = 0
    workers: int = 1
    source: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in CASE_KINDS:
            raise ConfigError(f"unknown case {self.kind!r}; expected one of {CASE_KINDS}")
        if not self.a > 0:
            raise ConfigError("droplet radius a must be positive")
        if self.mode not in ("roller", "analytic-extension"):
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.init_flow not in ("rest", "couette", "calibrated"):
            raise ConfigError(f"unknown init_flow {self.init_flow!r}")
        roller = self.kind == "fourroller2d"
        if (self.init_flow == "couette" and roller) or (self.init_flow == "calibrated" and not roller):
            raise ConfigError(f"init_flow {self.init_flow!r} does not apply to {self.kind}")
        if not self.domain_ratio:
            self.domain_ratio = {"shear2d": (8.0, 8.0), "shear3d": (8.0, 8.0, 4.0),
                                 "fourroller2d": (40.0, 40.0)}[self.kind]
        self.domain_ratio = tuple(float(r) for r in self.domain_ratio)
        need = 3 if self.kind == "shear3d" else 2
        if len(self.domain_ratio) != need:
            raise ConfigError(f"{self.kind} needs {need} domain_ratio entries")
        if self.steps < 0 or self.sample_every <= 0:
            raise ConfigError("steps must be >= 0 and sample_every > 0")


@dataclass
class Case:
    config: CaseConfig
    lattice: LatticeParameters
    sim: Simulation
    specs: list
    center: tuple
    rate: float
    info: dict = field(default_factory=dict)

    @property
    def state(self):
        return self.sim.state

    def tbar(self, step: int | None = None) -> float:
        """Normalised time: shear rate (or extension rate) times lattice time."""
        return self.rate * (self.sim.state.time if step is None else step)


def droplet_profile(grid: Grid, center, a: float, xi: float) -> np.ndarray:
    """phi = -tanh((r - a)/(sqrt(2) xi)): +1 inside the C1 droplet, -1 outside."""
    x = grid.coordinates()
    c = np.asarray(center, dtype=float).reshape((grid.d,) + (1,) * grid.d)
    r = np.sqrt(((x - c) ** 2).sum(axis=0))
    return -np.tanh((r - a) / (math.sqrt(2.0) * xi))


def _shear_geometry(config: CaseConfig):
    a = config.a
    ratios = config.domain_ratio
    H = int(round(ratios[1] * a))
    Lx = int(round(ratios[0] * a))
    if config.kind == "shear2d":
        dims = (Lx, H + 2)
        periodic = (True, False)
    else:
        Lz = int(round(ratios[2] * a))
        dims = (Lx, H + 2, Lz)
        periodic = (True, False, True)
    center = tuple((n - 1) / 2.0 for n in dims)
    return dims, periodic, H, center


def init_shear_case(config: CaseConfig, workers: int | None = None, droplet: bool = True) -> Case:
    """Droplet between two walls moving at -U (bottom) and +U (top), U = rate*H/2."""
    if config.kind not in ("shear2d", "shear3d"):
        raise ConfigError(f"init_shear_case cannot build {config.kind}")
    dims, periodic, H, center = _shear_geometry(config)
    if config.a >= 0.45 * H:
        raise ConfigError(f"droplet radius {config.a} touches the walls (H={H})")
    rate = config.rate or choose_rate(config.groups, config.a, H / 2.0, config.u_max, config.tau_max)
    lat = solve_lattice_params(config.groups, config.a, rate, config.tau_g,
                               a_factor=config.a_factor, tau_max=config.tau_max)
    U = rate * H / 2.0
    grid = Grid(dims, periodic)
    vel = np.zeros(grid.d)
    vel[0] = U
    specs = [BoundarySpec("periodic", axis=0),
             moving_wall(grid, 1, 0, -vel),
             moving_wall(grid, 1, 1, vel)]
    if grid.d == 3:
        specs.append(BoundarySpec("periodic", axis=2))
    stencil = make_stencil("D2Q9" if grid.d == 2 else "D3Q19")
    sim = Simulation(grid, stencil, lat.params, workers=workers or config.workers)
    phi = droplet_profile(grid, center, config.a, lat.xi) if droplet else -np.ones(dims)
    u0 = np.zeros((grid.d,) + dims)
    if config.init_flow == "couette":
        y = grid.coordinates()[1]
        u0[0] = U * (y - center[1]) / (H / 2.0)
    sim.initialize_equilibrium(rho=np.ones(dims), phi=phi, u=u0)
    sim.align_moments(config.pre_run_steps)
    return Case(config=config, lattice=lat, sim=sim, specs=specs, center=center, rate=rate,
                info={"H": H, "U": U, "dims": dims})


def roller_layout(W: int):
    """Centers, radius and rotation signs of the four rollers in a (W+2)^2 grid."""
    c0 = (W + 1) / 2.0
    off = W / 4.0
    R = W / 8.0
    layout = []
    for sx, sy in ((1, 1), (-1, 1), (-1, -1), (1, -1)):
        sign = 1.0 if sx * sy > 0 else -1.0  # diagonal pairs co-rotate
        layout.append(((c0 + sx * off, c0 + sy * off), sign))
    return c0, R, layout


def _fourroller_grid(W: int, omega: float, mode: str, eps: float = 0.0):
    grid = Grid((W + 2, W + 2), (False, False))
    c0, R, layout = roller_layout(W)
    specs = []
    if mode == "roller":
        grid.close_nonperiodic_axes()
        for center, sign in layout:
            specs.append(rotating_obstacle(grid, center, R, sign * omega))
    else:
        x = grid.coordinates()
        vel = np.stack([eps * (x[0] - c0), -eps * (x[1] - c0)])
        edge = np.zeros(grid.dims, dtype=bool)
        edge[0, :] = edge[-1, :] = edge[:, 0] = edge[:, -1] = True
        speed = float(np.abs(vel[:, edge]).max()) if eps else 0.0
        specs.append(BoundarySpec("moving-wall", wall_velocity=(speed, 0.0)))
        grid.set_solid(edge, WALL, velocity=vel)
    return grid, (c0, c0), R, specs


def init_fourroller_case(config: CaseConfig, workers: int | None = None, droplet: bool = True,
                         gain: float | None = None,
                         calibration: ExtensionCalibration | None = None) -> Case:
    """Droplet at the stagnation point of the four-roller mill.

    The roller angular speed is the target extension rate divided by
    ``gain`` (extension rate per unit angular speed, from
    :func:`calibrate_extension_rate`); it is measured first when unknown.
    With init_flow = "calibrated" the run starts from the steady
    single-phase field of the calibration, rescaled to the roller speed.
    """
    if config.kind != "fourroller2d":
        raise ConfigError(f"init_fourroller_case cannot build {config.kind}")
    W = int(round(config.domain_ratio[0] * config.a))
    c0, R, _ = roller_layout(W)
    if config.a >= math.sqrt(2.0) * W / 4.0 - R - 2:
        raise ConfigError("droplet overlaps the rollers")
    rate = config.rate or choose_rate(config.groups, config.a, W / 2.0, config.u_max, config.tau_max)
    lat = solve_lattice_params(config.groups, config.a, rate, config.tau_g,
                               a_factor=config.a_factor, tau_max=config.tau_max)
    info = {"W": W, "roller_radius": R}
    omega = 0.0
    if config.mode == "roller":
        gain = gain or config.extension_gain
        cal = calibration
        if cal is None and (gain is None or config.init_flow == "calibrated"):
            cal = calibrate_extension_rate(config, workers=workers)
        if cal is not None:
            gain = gain or cal.gain
            info["calibration"] = cal
        omega = rate / gain
        info.update(omega=omega, extension_gain=gain, roller_speed=omega * R)
    grid, center, _, specs = _fourroller_grid(W, omega, config.mode, eps=rate)
    sim = Simulation(grid, make_stencil("D2Q9"), lat.params, workers=workers or config.workers)
    phi = droplet_profile(grid, center, config.a, lat.xi) if droplet else -np.ones(grid.dims)
    u0 = np.zeros((2,) + grid.dims)
    if config.init_flow == "calibrated" and config.mode == "roller":
        cal = info["calibration"]
        u0 = cal.u * (omega / cal.omega)
    sim.initialize_equilibrium(rho=np.ones(grid.dims), phi=phi, u=u0)
    sim.align_moments(config.pre_run_steps)
    return Case(config=config, lattice=lat, sim=sim, specs=specs, center=center, rate=rate,
                info=info)


def build_case(config: CaseConfig, workers: int | None = None) -> Case:
    if config.kind == "fourroller2d":
        return init_fourroller_case(config, workers)
    return init_shear_case(config, workers)


@dataclass
class ExtensionCalibration:
    eps: float  # du_x/dx at the stagnation point
    eps_y: float  # -du_y/dy at the stagnation point
    omega: float
    gain: float
    steps: int
    center_speed: float
    u: np.ndarray = field(default=None, repr=False)


def stagnation_gradients(u: np.ndarray, center) -> tuple[float, float, float]:
    """(du_x/dx, du_y/dy, |u|) at ``center``; gradients by central differences.

    A half-integer center coordinate uses the two straddling nodes and
    averages over the two straddling rows.
    """
    def straddle(c):
        lo = int(math.floor(c))
        if abs(c - lo) < 1e-12:
            return [lo - 1, lo + 1], [lo], 2.0
        return [lo, lo + 1], [lo, lo + 1], 1.0

    (x0, x1), xs, hx = straddle(center[0])
    (y0, y1), ys, hy = straddle(center[1])
    dudx = np.mean([(u[0, x1, y] - u[0, x0, y]) / hx for y in ys])
    dvdy = np.mean([(u[1, x, y1] - u[1, x, y0]) / hy for x in xs])
    # velocity interpolated to the center itself (mean over the straddling nodes)
    speed = float(np.hypot(u[0][np.ix_(xs, ys)].mean(), u[1][np.ix_(xs, ys)].mean()))
    return float(dudx), float(dvdy), speed


def calibrate_extension_rate(config: CaseConfig, omega: float | None = None,
                             workers: int | None = None, check_every: int = 2000,
                             tol: float = 1e-5, max_steps: int = 2_000_000) -> ExtensionCalibration:
    """Single-phase four-roller run to steady state; returns the stagnation-point extension rate."""
    W = int(round(config.domain_ratio[0] * config.a))
    _, R, _ = roller_layout(W)
    rate = config.rate or choose_rate(config.groups, config.a, W / 2.0, config.u_max, config.tau_max)
    lat = solve_lattice_params(config.groups, config.a, rate, config.tau_g,
                               a_factor=config.a_factor, tau_max=config.tau_max)
    if omega is None:
        omega = min(rate / GAIN_GUESS, 0.5 * config.u_max / R)
    grid, center, _, _ = _fourroller_grid(W, omega, "roller")
    sim = Simulation(grid, make_stencil("D2Q9"), lat.params, workers=workers or config.workers)
    sim.initialize_equilibrium(rho=np.ones(grid.dims), phi=-np.ones(grid.dims),
                               u=np.zeros((2,) + grid.dims))
    if omega == 0.0:
        sim.step(check_every)
        st = sim.refresh()
        ex, ey, sp = stagnation_gradients(st.u, center)
        return ExtensionCalibration(ex, -ey, 0.0, float("nan"), check_every, sp)
    prev = None
    steps = 0
    try:
        while steps < max_steps:
            sim.step(check_every)
            steps += check_every
            st = sim.refresh()
            ex, ey, sp = stagnation_gradients(st.u, center)
            log.debug("extension calibration: step %d eps=%.10g", steps, ex)
            if prev is not None and abs(ex - prev) <= tol * abs(ex):
                return ExtensionCalibration(ex, -ey, omega, ex / omega, steps, sp, st.u.copy())
            prev = ex
    finally:
        sim.close()
    raise NumericalError(f"four-roller flow not steady after {max_steps} steps")


@dataclass
class InterfaceCalibration:
    sigma: float
    xi: float
    rms: float
    delta_p: float
    radius: float
    spurious_u: float
    profile: np.ndarray = None
    fit: np.ndarray = None


def _double_tanh(x, x1, x2, xi):
    s = math.sqrt(2.0) * xi
    return np.tanh((x - x1) / s) - np.tanh((x - x2) / s) - 1.0


def relax_planar(params: FreeEnergyParams, length: int = 128, width: int = 4, steps: int = 20000,
                 workers: int = 1):
    """Relax a periodic strip with two planar interfaces; returns (x, phi profile, sim)."""
    grid = Grid((length, width), (True, True))
    sim = Simulation(grid, make_stencil("D2Q9"), params, workers=workers)
    x = grid.coordinates()[0]
    # start from a profile twice as sharp as the equilibrium one
    phi0 = _double_tanh(x, length / 4.0, 3 * length / 4.0, 0.5 * params.xi)
    sim.initialize_equilibrium(rho=np.ones(grid.dims), phi=phi0)
    sim.step(steps)
    st = sim.refresh()
    return np.arange(length, dtype=float), st.phi.mean(axis=1), sim


def fit_planar(xs, profile, xi_guess):
    n = len(xs)
    popt, _ = curve_fit(_double_tanh, xs, profile, p0=(n / 4.0, 3 * n / 4.0, xi_guess))
    fit = _double_tanh(xs, *popt)
    rms = float(np.sqrt(np.mean((profile - fit) ** 2)))
    return float(abs(popt[2])), rms, fit


def relax_droplet(params: FreeEnergyParams, radius: float = 20.0, size: int = 160,
                  steps: int = 20000, workers: int = 1) -> Simulation:
    grid = Grid((size, size), (True, True))
    sim = Simulation(grid, make_stencil("D2Q9"), params, workers=workers)
    center = ((size - 1) / 2.0, (size - 1) / 2.0)
    sim.initialize_equilibrium(rho=np.ones(grid.dims),
                               phi=droplet_profile(grid, center, radius, params.xi))
    sim.step(steps)
    sim.refresh()
    return sim


def laplace_pressure(sim: Simulation):
    """Bulk pressure jump between droplet center and far field, and the equivalent radius."""
    st, params = sim.state, sim.params
    p = bulk_pressure(st.rho, st.phi, st.mu_rho, st.mu_phi, params, CS2)
    nx, ny = st.phi.shape
    cx, cy = (nx - 1) / 2.0, (ny - 1) / 2.0
    ix = [int(math.floor(cx)), int(math.ceil(cx))]
    iy = [int(math.floor(cy)), int(math.ceil(cy))]
    p_in = float(p[np.ix_(ix, iy)].mean())
    p_out = float(np.mean([p[0, 0], p[0, -1], p[-1, 0], p[-1, -1]]))
    # equivalent radius from the area inside phi = 0, using the bulk values as plateaus
    phi_in = float(st.phi[np.ix_(ix, iy)].mean())
    phi_out = float(np.mean([st.phi[0, 0], st.phi[0, -1], st.phi[-1, 0], st.phi[-1, -1]]))
    frac = (st.phi - phi_out) / (phi_in - phi_out)
    radius = math.sqrt(float(frac.sum()) / math.pi)
    return p_in - p_out, radius


def calibrate_sigma_xi(params: FreeEnergyParams, planar_steps: int = 20000,
                       droplet_steps: int = 20000, radius: float = 20.0, size: int = 160,
                       workers: int = 1) -> InterfaceCalibration:
    """Measure the interface width (tanh fit of a planar interface) and the
    interface tension (2D Laplace law of a static droplet)."""
    xs, prof, sim = relax_planar(params, steps=planar_steps, workers=workers)
    sim.close()
    xi, rms, fit = fit_planar(xs, prof, params.xi)
    dsim = relax_droplet(params, radius, size, droplet_steps, workers)
    dp, r_eff = laplace_pressure(dsim)
    spurious = float(np.sqrt((dsim.state.u ** 2).sum(axis=0)).max())
    dsim.close()
    return InterfaceCalibration(sigma=dp * r_eff, xi=xi, rms=rms, delta_p=dp, radius=r_eff,
                                spurious_u=spurious, profile=prof, fit=fit)


def with_ca(config: CaseConfig, ca: float) -> CaseConfig:
    return replace(config, groups=replace(config.groups, ca=ca))
