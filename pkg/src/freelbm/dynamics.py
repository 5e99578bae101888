"""Lattice Boltzmann evolution of the mixture (f) and order-parameter (g) populations."""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import ConfigError, NumericalError, PositivityError
from .free_energy import FreeEnergyParams
from .boundaries import REFERENCE_DENSITY, build_links, reference_links
from .grid import BULK, Grid, SimulationState, allocate_state
from .lattice import Stencil

log = logging.getLogger(__name__)

# "gradient": -rho grad mu_rho - phi grad mu_phi; "potential": the same force
# rewritten as -grad(rho mu_rho + phi mu_phi) + mu_rho grad rho + mu_phi grad phi
FORCE_FORMS = ("gradient", "potential")


@dataclass(frozen=True)
class RelaxationSetup:
    tau: float
    tau_g: float
    nu: float
    m_phi: float

    @classmethod
    def from_params(cls, params: FreeEnergyParams, cs2: float = 1.0 / 3.0) -> "RelaxationSetup":
        return cls(tau=params.tau, tau_g=params.tau_g,
                   nu=cs2 * (params.tau - 0.5),
                   m_phi=params.gamma_phi * (params.tau_g - 0.5))


def equilibrium_f(rho: float, u, stencil: Stencil) -> np.ndarray:
    c = stencil.velocities.astype(float)
    u = np.asarray(u, dtype=float)
    cs2 = stencil.cs2
    cu = c @ u
    return stencil.weights * rho * (1.0 + cu / cs2 + (cu ** 2 - cs2 * (u @ u)) / (2.0 * cs2 ** 2))


def equilibrium_g(phi: float, mu_phi: float, u, gamma_phi: float, stencil: Stencil) -> np.ndarray:
    c = stencil.velocities.astype(float)
    u = np.asarray(u, dtype=float)
    cs2 = stencil.cs2
    cu = c @ u
    geq = stencil.weights * (gamma_phi * mu_phi / cs2 + phi * cu / cs2
                             + phi * (cu ** 2 - cs2 * (u @ u)) / (2.0 * cs2 ** 2))
    geq[0] = phi - geq[1:].sum()
    return geq


def guo_source(u, F, tau: float, stencil: Stencil) -> np.ndarray:
    c = stencil.velocities.astype(float)
    u = np.asarray(u, dtype=float)
    F = np.asarray(F, dtype=float)
    cs2 = stencil.cs2
    cu = c @ u
    bracket = (c - u) / cs2 + cu[:, None] * c / cs2 ** 2
    return (1.0 - 0.5 / tau) * stencil.weights * (bracket @ F)


def collide(state: SimulationState, node, params: FreeEnergyParams, stencil: Stencil):
    """Post-collision (f*, g*) at one node from the current moments, potentials and force.

    Mirrors the order of the bulk collision kernel: velocity from f and F,
    source term, both equilibria, then the two BGK relaxations.
    """
    node = tuple(node)
    fi = state.f[(slice(None),) + node]
    gi = state.g[(slice(None),) + node]
    rho = fi.sum()
    phi = gi.sum()
    F = state.force[(slice(None),) + node]
    u = (stencil.velocities.T.astype(float) @ fi + 0.5 * F) / rho
    S = guo_source(u, F, params.tau, stencil)
    feq = equilibrium_f(rho, u, stencil)
    geq = equilibrium_g(phi, state.mu_phi[node], u, params.gamma_phi, stencil)
    f_star = fi - (fi - feq) / params.tau + S
    g_star = gi - (gi - geq) / params.tau_g
    return f_star, g_star


def stream(pops: np.ndarray, stencil: Stencil) -> np.ndarray:
    """Periodic shift of every population by its lattice velocity."""
    out = np.empty_like(pops)
    axes = tuple(range(stencil.d))
    for i, c in enumerate(stencil.velocities):
        out[i] = np.roll(pops[i], shift=tuple(int(x) for x in c), axis=axes)
    return out


class Simulation:
    """Owns a grid, a state and the per-step pass pipeline.

    One step runs moments -> chemical potentials -> force -> collide -> stream
    -> bounce-back. ``workers`` splits every pass into that many row ranges
    executed by a thread pool; results are bitwise independent of it.
    """

    def __init__(self, grid: Grid, stencil: Stencil, params: FreeEnergyParams,
                 state: SimulationState | None = None, workers: int = 1,
                 force_form: str = "potential"):
        if stencil.d != grid.d:
            raise ConfigError(f"{stencil.name} does not match a {grid.d}D grid")
        grid.validate()
        grid.classify(stencil)
        self.grid = grid
        self.stencil = stencil
        self.params = params
        self.setup = RelaxationSetup.from_params(params, stencil.cs2)
        self.state = state if state is not None else allocate_state(grid, stencil)
        self.workers = max(1, int(workers))
        if force_form not in FORCE_FORMS:
            raise ConfigError(f"force_form must be one of {FORCE_FORMS}")
        self.force_form = force_form
        self._pool = ThreadPoolExecutor(self.workers) if self.workers > 1 else None
        self._bind()

    def _bind(self):
        g, s = self.grid, self.stencil
        N = g.size
        self._shape3 = (1,) + g.dims if g.d == 2 else g.dims
        shifts = np.zeros((s.q, 3), dtype=np.int64)
        shifts[:, 3 - s.d:] = s.velocities
        self._shifts = shifts
        self._ghosts, self._src = g.ghost_sources(s)
        fluid = g.mask == BULK
        self._fluid3 = np.ascontiguousarray(fluid.reshape(self._shape3))
        self._fluid = np.ascontiguousarray(fluid.reshape(-1))
        self._solid = np.ascontiguousarray(np.flatnonzero(~self._fluid))
        self._links = build_links(g, s)
        self._link_ref = reference_links(g, self._links)
        self._c = np.ascontiguousarray(s.velocities.astype(float))
        self._w = np.ascontiguousarray(s.weights)
        self._opp = np.ascontiguousarray(s.opposite)
        self._uw = np.ascontiguousarray(g.wall_velocity.reshape(g.d, N))
        self._fn = np.zeros_like(self.state.f)
        self._gn = np.zeros_like(self.state.g)
        rows = self._shape3[0] * self._shape3[1]
        bounds = np.linspace(0, rows, self.workers + 1).astype(np.int64)
        self._rows = rows
        self._chunks = [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]

    def close(self):
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _v(self, a, lead=None):
        """3D (or population/vector 4D) view of a state array."""
        return a.reshape(((lead,) if lead else ()) + self._shape3)

    def _flat(self, a, lead=None):
        return a.reshape((lead, -1) if lead else (-1,))

    def _run(self, kernel, *args):
        if self._pool is None:
            kernel(*args, 0, self._rows)
            return
        futures = [self._pool.submit(kernel, *args, a, b) for a, b in self._chunks]
        for fut in futures:
            fut.result()

    def _ghost(self, *arrays):
        for arr in arrays:
            flat = self._flat(arr)
            flat[self._ghosts] = flat[self._src]

    def _potentials(self):
        st, s, p = self.state, self.stencil, self.params
        self._run(_kernels.potentials, self._v(st.rho), self._v(st.phi),
                  self._v(st.mu_rho), self._v(st.mu_phi), self._shifts, self._w,
                  p.kappa1, p.kappa2, p.alpha, s.cs2)
        self._ghost(st.mu_rho, st.mu_phi)

    def update_fields(self):
        """Moments, chemical potentials and force from the current populations."""
        st, s = self.state, self.stencil
        q, d = s.q, s.d
        self._run(_kernels.moments, self._v(st.f, q), self._v(st.g, q),
                  self._v(st.rho), self._v(st.phi), self._fluid3)
        bad = _kernels.bad_node(self._flat(st.rho), self._fluid)
        if bad >= 0:
            node = tuple(int(x) for x in np.unravel_index(bad, self.grid.dims))
            val = self._flat(st.rho)[bad]
            cls = NumericalError if np.isnan(val) else PositivityError
            raise cls(f"invalid density {val!r} at node {node}, step {st.time}",
                      step=st.time, node=node)
        self._ghost(st.rho, st.phi)
        self._potentials()
        self._run(_kernels.force, self._v(st.rho), self._v(st.phi), self._v(st.mu_rho),
                  self._v(st.mu_phi), self._v(st.force, d), self._shifts, self._c, self._w, s.cs2,
                  FORCE_FORMS.index(self.force_form))

    def _collide_stream(self, freeze_u=False):
        st, s, p = self.state, self.stencil, self.params
        q, d = s.q, s.d
        self._run(_kernels.collide, self._v(st.f, q), self._v(st.g, q), self._v(st.rho),
                  self._v(st.phi), self._v(st.mu_phi), self._v(st.force, d), self._v(st.u, d),
                  self._c, self._w, p.tau, p.tau_g, p.gamma_phi, s.cs2, freeze_u)
        self._run(_kernels.stream, self._v(st.f, q), self._v(self._fn, q), self._shifts)
        self._run(_kernels.stream, self._v(st.g, q), self._v(self._gn, q), self._shifts)
        fn, gn = self._flat(self._fn, q), self._flat(self._gn, q)
        _kernels.bounce_back(self._flat(st.f, q), self._flat(st.g, q), fn, gn,
                             self._flat(st.rho), *self._links, self._link_ref, REFERENCE_DENSITY,
                             self._c, self._w, self._opp,
                             self._uw, s.cs2)
        _kernels.clear_nodes(fn, gn, self._solid)
        st.f, self._fn = self._fn, st.f
        st.g, self._gn = self._gn, st.g

    def step(self, n: int = 1):
        for _ in range(n):
            self.update_fields()
            self._collide_stream()
            self.state.time += 1
        return self.state

    def initialize_equilibrium(self, rho=None, phi=None, u=None):
        """Set both populations to their equilibria for the given macroscopic fields."""
        st, s, p = self.state, self.stencil, self.params
        fluid = self.grid.fluid
        if rho is not None:
            st.rho[...] = rho
        if phi is not None:
            st.phi[...] = phi
        if u is not None:
            st.u[:, fluid] = np.broadcast_to(np.asarray(u, dtype=float), st.u.shape)[:, fluid]
        st.force[...] = 0.0
        self._ghost(st.rho, st.phi)
        self._potentials()
        c = s.velocities.astype(float)
        cs2 = s.cs2
        cu = np.tensordot(c, st.u, axes=(1, 0))
        usq = (st.u ** 2).sum(axis=0)
        w = s.weights.reshape((-1,) + (1,) * s.d)
        feq = w * st.rho * (1.0 + cu / cs2 + (cu ** 2 - cs2 * usq) / (2 * cs2 ** 2))
        geq = w * (p.gamma_phi * st.mu_phi / cs2 + st.phi * cu / cs2
                   + st.phi * (cu ** 2 - cs2 * usq) / (2 * cs2 ** 2))
        geq[0] = st.phi - geq[1:].sum(axis=0)
        st.f[...] = 0.0
        st.g[...] = 0.0
        st.f[:, fluid] = feq[:, fluid]
        st.g[:, fluid] = geq[:, fluid]
        st.time = 0

    def align_moments(self, steps: int):
        """Consistent initialization: evolve f with velocity and order parameter held fixed.

        Density and non-equilibrium parts adapt to the imposed macroscopic
        fields before the actual run; the clock is not advanced.
        """
        if steps <= 0:
            return
        st = self.state
        g0 = st.g.copy()
        u0 = st.u.copy()
        for _ in range(steps):
            self.update_fields()
            st.u[...] = u0
            self._collide_stream(freeze_u=True)
            st.g[...] = g0
        st.u[...] = u0

    def check_finite(self):
        self.update_fields()

    def refresh(self):
        """Bring rho, phi, u, potentials and force in line with the current populations."""
        self.update_fields()
        st, s = self.state, self.stencil
        c = s.velocities.astype(float)
        mom = np.tensordot(c.T, st.f, axes=(1, 0)) + 0.5 * st.force
        fluid = self.grid.fluid
        for a in range(s.d):
            st.u[a][fluid] = mom[a][fluid] / st.rho[fluid]
            st.u[a][~fluid] = self.grid.wall_velocity[a][~fluid]
        return st
