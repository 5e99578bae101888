"""Velocity boundary conditions: periodic wrap, moving planar walls, rotating staircase cylinders.

Walls and obstacles are solid nodes carrying an imposed velocity in
``Grid.wall_velocity``. The boundary pass is halfway bounce-back applied to
every link from a fluid node to a solid node, with the usual momentum
correction for the f population and plain reflection for g.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import ConfigError
from .grid import BULK, OBSTACLE, WALL, Grid
from .lattice import Stencil

MACH_LIMIT = 0.15
# density in the momentum correction of curved (obstacle) links; with the
# local density the correction does not cancel around a staircase cylinder
# sitting in a pressure field and the boundary injects mass every step
REFERENCE_DENSITY = 1.0


@dataclass(frozen=True)
class BoundarySpec:
    kind: str
    wall_velocity: tuple | None = None
    axis: int | None = None
    side: int | None = None
    omega: float = 0.0
    center: tuple | None = None
    radius: float | None = None

    def __post_init__(self):
        if self.kind not in ("periodic", "moving-wall", "rotating-obstacle"):
            raise ConfigError(f"unknown boundary kind {self.kind!r}")
        if self.kind == "moving-wall":
            speed = float(np.linalg.norm(self.wall_velocity or 0.0))
        elif self.kind == "rotating-obstacle":
            speed = abs(self.omega) * float(self.radius)
        else:
            speed = 0.0
        if speed >= MACH_LIMIT:
            raise ConfigError(f"wall speed {speed:.4g} exceeds the Mach guard {MACH_LIMIT}")


def apply_periodic(grid: Grid, axis: int) -> Grid:
    """Declare ``axis`` periodic. Streaming wraps indices on every axis; walls stop it elsewhere."""
    flags = list(grid.periodic)
    flags[axis] = True
    grid.periodic = tuple(flags)
    return grid


def moving_wall(grid: Grid, axis: int, side: int, velocity) -> BoundarySpec:
    """Turn the first (side=0) or last (side=1) node layer along ``axis`` into a wall."""
    spec = BoundarySpec("moving-wall", wall_velocity=tuple(float(v) for v in velocity),
                        axis=axis, side=side)
    if grid.periodic[axis]:
        raise ConfigError(f"axis {axis} is periodic and cannot hold a wall")
    where = np.zeros(grid.dims, dtype=bool)
    sl = [slice(None)] * grid.d
    sl[axis] = 0 if side == 0 else -1
    where[tuple(sl)] = True
    grid.set_solid(where, WALL, velocity=np.asarray(spec.wall_velocity))
    return spec


def obstacle_mask(grid: Grid, center, radius: float) -> np.ndarray:
    """Nodes strictly inside the circle |x - c| < R."""
    x = grid.coordinates()
    c = np.asarray(center, dtype=float).reshape((grid.d,) + (1,) * grid.d)
    return ((x - c) ** 2).sum(axis=0) < radius ** 2


def rotating_obstacle(grid: Grid, center, radius: float, omega: float) -> BoundarySpec:
    """Staircase cylinder whose nodes move with the rigid rotation omega x (x - c)."""
    if grid.d != 2:
        raise ConfigError("rotating obstacles are implemented for 2D grids only")
    spec = BoundarySpec("rotating-obstacle", omega=float(omega),
                        center=tuple(float(c) for c in center), radius=float(radius))
    inside = obstacle_mask(grid, center, radius)
    if np.any(inside & (grid.mask != BULK)):
        raise ConfigError(f"obstacle at {spec.center} overlaps a wall or another obstacle")
    # keep at least one fluid layer between obstacle and any solid node
    grown = inside.copy()
    for a in range(grid.d):
        grown |= np.roll(inside, 1, axis=a) | np.roll(inside, -1, axis=a)
    if np.any(grown & (grid.mask != BULK)):
        raise ConfigError(f"obstacle at {spec.center} touches a wall or another obstacle")
    for a, per in enumerate(grid.periodic):
        if per:
            continue
        lo = center[a] - radius
        hi = center[a] + radius
        if lo < 1 or hi > grid.dims[a] - 2:
            raise ConfigError(f"obstacle at {spec.center} crosses the domain boundary")
    x = grid.coordinates()
    rx = x[0] - center[0]
    ry = x[1] - center[1]
    vel = np.stack([-omega * ry, omega * rx])
    grid.set_solid(inside, OBSTACLE, velocity=vel)
    return spec


def build_links(grid: Grid, stencil: Stencil, nodes: np.ndarray | None = None):
    """All (fluid node, outgoing direction, solid node) triples, optionally restricted
    to links whose solid end lies in ``nodes`` (boolean mask)."""
    nbr = grid.neighbors(stencil)
    fluid = grid.mask.reshape(-1) == BULK
    solid = ~fluid
    if nodes is not None:
        solid = solid & np.asarray(nodes, dtype=bool).reshape(-1)
    fl_idx = np.flatnonzero(fluid)
    link_node, link_dir, link_wall = [], [], []
    for i in range(1, stencil.q):
        t = nbr[i, fl_idx]
        hit = solid[t]
        link_node.append(fl_idx[hit])
        link_dir.append(np.full(int(hit.sum()), i, dtype=np.int64))
        link_wall.append(t[hit])
    cat = lambda xs: np.ascontiguousarray(np.concatenate(xs).astype(np.int64))  # noqa: E731
    return cat(link_node), cat(link_dir), cat(link_wall)


def reference_links(grid: Grid, links) -> np.ndarray:
    """Flags of the links whose correction uses REFERENCE_DENSITY (those ending in obstacles)."""
    return np.ascontiguousarray(grid.mask.reshape(-1)[links[2]] == OBSTACLE)


def bounce_back(f_new, g_new, f_star, g_star, rho, grid: Grid, stencil: Stencil, links=None):
    """Set the populations entering fluid nodes from solid neighbours.

    f_i(x, t+1) = f*_j(x, t) - 2 w_j rho (c_j . u_w) / cs2 with j = opposite(i)
    pointing into the wall; g_i(x, t+1) = g*_j(x, t). rho is the fluid
    node's density on planar walls and REFERENCE_DENSITY on obstacles.
    """
    if links is None:
        links = build_links(grid, stencil)
    q = stencil.q
    N = grid.size
    _kernels.bounce_back(f_star.reshape(q, N), g_star.reshape(q, N),
                         f_new.reshape(q, N), g_new.reshape(q, N), rho.reshape(N),
                         *links, reference_links(grid, links), REFERENCE_DENSITY,
                         np.ascontiguousarray(stencil.velocities.astype(float)),
                         np.ascontiguousarray(stencil.weights), np.ascontiguousarray(stencil.opposite),
                         np.ascontiguousarray(grid.wall_velocity.reshape(grid.d, N)), stencil.cs2)
    return f_new, g_new


def apply_moving_wall(f_new, g_new, f_star, g_star, rho, grid: Grid, stencil: Stencil,
                      wall_nodes=None):
    """Bounce-back with momentum correction on links ending in WALL nodes."""
    nodes = grid.mask == WALL if wall_nodes is None else wall_nodes
    return bounce_back(f_new, g_new, f_star, g_star, rho, grid, stencil,
                       build_links(grid, stencil, nodes))


def apply_rotating_obstacle(f_new, g_new, f_star, g_star, rho, grid: Grid, stencil: Stencil,
                            center, radius: float):
    """Bounce-back on links ending in the solid nodes of one cylinder."""
    nodes = obstacle_mask(grid, center, radius)
    return bounce_back(f_new, g_new, f_star, g_star, rho, grid, stencil,
                       build_links(grid, stencil, nodes))
