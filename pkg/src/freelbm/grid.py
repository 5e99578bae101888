"""Structured grid, node classification and the simulation state container."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, PositivityError
from .lattice import Stencil

BULK = 0
WALL = 1  # planar wall, possibly moving
OBSTACLE = 2  # staircase cylinder / sphere, possibly rotating
EXTERIOR = 3  # solid node never touched by a fluid stencil


@dataclass
class Grid:
    """Node layout of a rectangular lattice with unit spacing.

    ``mask`` holds one of BULK, WALL, OBSTACLE, EXTERIOR per node and
    ``wall_velocity`` the imposed velocity at solid nodes (zero elsewhere).
    """

    dims: tuple[int, ...]
    periodic: tuple[bool, ...]
    mask: np.ndarray = None
    wall_velocity: np.ndarray = None

    def __post_init__(self):
        self.dims = tuple(int(n) for n in self.dims)
        self.periodic = tuple(bool(p) for p in self.periodic)
        if len(self.periodic) != len(self.dims):
            raise ConfigError("periodic flags must match the number of axes")
        if any(n < 4 for n in self.dims):
            raise ConfigError(f"domain too small: dims={self.dims} (need >= 4 nodes per axis)")
        if self.mask is None:
            self.mask = np.zeros(self.dims, dtype=np.int8)
        if self.wall_velocity is None:
            self.wall_velocity = np.zeros((len(self.dims),) + self.dims)
        self._cache = {}

    @property
    def d(self) -> int:
        return len(self.dims)

    @property
    def size(self) -> int:
        return int(np.prod(self.dims))

    @property
    def fluid(self) -> np.ndarray:
        return self.mask == BULK

    def coordinates(self) -> np.ndarray:
        """Node coordinates, shape (d, *dims)."""
        return np.indices(self.dims, dtype=float)

    def invalidate(self):
        self._cache.clear()

    def set_solid(self, where: np.ndarray, kind: int, velocity=None):
        where = np.asarray(where, dtype=bool)
        self.mask[where] = kind
        if velocity is not None:
            vel = np.asarray(velocity, dtype=float)
            if vel.ndim == 1:
                vel = vel.reshape((self.d,) + (1,) * self.d)
            vel = np.broadcast_to(vel, (self.d,) + self.dims)
            for a in range(self.d):
                self.wall_velocity[a][where] = vel[a][where]
        self.invalidate()

    def close_nonperiodic_axes(self):
        """Flag the first and last layer of every non-periodic axis as WALL."""
        for a, per in enumerate(self.periodic):
            if per:
                continue
            sl = [slice(None)] * self.d
            for idx in (0, -1):
                sl[a] = idx
                face = self.mask[tuple(sl)]
                face[face == BULK] = WALL
        self.invalidate()

    def validate(self):
        for a, per in enumerate(self.periodic):
            if per:
                continue
            sl = [slice(None)] * self.d
            for idx in (0, -1):
                sl[a] = idx
                if np.any(self.mask[tuple(sl)] == BULK):
                    raise ConfigError(f"non-periodic axis {a} has bulk nodes on its boundary")
        if not np.any(self.mask == BULK):
            raise ConfigError("grid has no fluid nodes")

    def neighbors(self, stencil: Stencil) -> np.ndarray:
        """Flat index of x + c_i for every node, wrapped periodically; shape (q, N)."""
        key = ("nbr", stencil.name)
        if key not in self._cache:
            idx = np.indices(self.dims).reshape(self.d, -1)
            nbr = np.empty((stencil.q, self.size), dtype=np.int64)
            for i, c in enumerate(stencil.velocities):
                shifted = idx + c[:, None]
                nbr[i] = np.ravel_multi_index(tuple(shifted), self.dims, mode="wrap")
            self._cache[key] = nbr
        return self._cache[key]

    def classify(self, stencil: Stencil):
        """Mark solid nodes unreachable from any fluid node as EXTERIOR."""
        nbr = self.neighbors(stencil)
        flat = self.mask.reshape(-1)
        fluid = flat == BULK
        touched = np.zeros(self.size, dtype=bool)
        for i in range(1, stencil.q):
            touched[nbr[i][fluid]] = True
        solid = ~fluid
        ext = solid & ~touched
        flat[ext] = EXTERIOR
        flat[solid & touched & (flat == EXTERIOR)] = WALL
        self._cache.pop(("ghost", stencil.name), None)

    def ghost_sources(self, stencil: Stencil) -> tuple[np.ndarray, np.ndarray]:
        """Mirror source for every solid node adjacent to fluid.

        The source is the fluid neighbour whose direction is best aligned with
        the lattice-weighted wall normal; for planar walls this is the node
        directly across the wall. Returns (ghost_nodes, source_nodes).
        """
        key = ("ghost", stencil.name)
        if key in self._cache:
            return self._cache[key]
        nbr = self.neighbors(stencil)
        fluid = (self.mask.reshape(-1) == BULK)
        solid_idx = np.flatnonzero(~fluid)
        c = stencil.velocities.astype(float)
        w = stencil.weights
        fl = fluid[nbr[:, solid_idx]]  # (q, M)
        normal = np.einsum("i,ia,im->am", w, c, fl.astype(float))
        has = fl[1:].any(axis=0)
        solid_idx, fl, normal = solid_idx[has], fl[:, has], normal[:, has]
        norms = np.linalg.norm(c, axis=1)
        norms[0] = 1.0
        align = (c @ normal) / norms[:, None]
        align[~fl] = -np.inf
        align[0] = -np.inf
        best = np.argmax(align, axis=0)
        src = nbr[best, solid_idx]
        self._cache[key] = (solid_idx.astype(np.int64), src.astype(np.int64))
        return self._cache[key]

    def fill_ghosts(self, field: np.ndarray, stencil: Stencil) -> np.ndarray:
        """Copy mirror values into solid nodes of a scalar field (in place)."""
        ghosts, src = self.ghost_sources(stencil)
        flat = field.reshape(-1)
        flat[ghosts] = flat[src]
        return field


@dataclass
class SimulationState:
    """Populations and macroscopic fields; arrays are C-ordered over ``dims``."""

    f: np.ndarray
    g: np.ndarray
    rho: np.ndarray
    phi: np.ndarray
    u: np.ndarray
    mu_rho: np.ndarray
    mu_phi: np.ndarray
    force: np.ndarray
    time: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def dims(self) -> tuple[int, ...]:
        return self.rho.shape

    def copy(self) -> "SimulationState":
        return SimulationState(**{k: (v.copy() if isinstance(v, np.ndarray) else v)
                                  for k, v in self.__dict__.items() if k != "extra"},
                               extra=dict(self.extra))


def allocate_state(grid: Grid, stencil: Stencil) -> SimulationState:
    if stencil.d != grid.d:
        raise ConfigError(f"{stencil.name} needs a {stencil.d}D grid, got dims={grid.dims}")
    if any(n < 4 for n in grid.dims):
        raise ConfigError(f"domain too small: dims={grid.dims}")
    dims = grid.dims
    z = lambda *lead: np.zeros(lead + dims)  # noqa: E731
    state = SimulationState(
        f=z(stencil.q), g=z(stencil.q), rho=z(), phi=z(), u=z(grid.d),
        mu_rho=z(), mu_phi=z(), force=z(grid.d),
    )
    solid = grid.mask != BULK
    for a in range(grid.d):
        state.u[a][solid] = grid.wall_velocity[a][solid]
    return state


def compute_moments(state: SimulationState, stencil: Stencil, fluid: np.ndarray | None = None):
    """Zeroth moments of f and g and the half-force corrected velocity.

    Only bulk nodes are updated when ``fluid`` is given.
    """
    c = stencil.velocities.astype(float)
    rho = state.f.sum(axis=0)
    phi = state.g.sum(axis=0)
    mom = np.tensordot(c.T, state.f, axes=(1, 0)) + 0.5 * state.force
    if fluid is None:
        fluid = np.ones(rho.shape, dtype=bool)
    bad = fluid & ~(rho > 0)
    if np.any(bad):
        node = tuple(int(x) for x in np.argwhere(bad)[0])
        raise PositivityError(f"non-positive density {rho[node]!r} at node {node}",
                              step=state.time, node=node)
    state.rho[fluid] = rho[fluid]
    state.phi[fluid] = phi[fluid]
    for a in range(stencil.d):
        state.u[a][fluid] = mom[a][fluid] / rho[fluid]
    return state.rho, state.phi, state.u
