"""Binary-mixture thermodynamics on the lattice.

Field functions take arrays shaped like the grid and evaluate the isotropic
lattice stencils with periodic wrap-around. When a :class:`~freelbm.grid.Grid`
is passed, solid nodes are first filled with their mirror values so that the
operators see a zero normal gradient at walls.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .lattice import Stencil


@dataclass(frozen=True)
class FreeEnergyParams:
    kappa1: float
    kappa2: float
    alpha: float
    gamma_phi: float
    tau: float = 1.0
    tau_g: float = 1.0

    def __post_init__(self):
        for name in ("kappa1", "kappa2", "alpha", "gamma_phi"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        for name in ("tau", "tau_g"):
            if not getattr(self, name) > 0.5:
                raise ConfigError(f"{name} must exceed 0.5, got {getattr(self, name)}")

    @property
    def sigma(self) -> float:
        """Interface tension of the symmetric model, alpha*kappa/3."""
        return self.alpha * 0.5 * (self.kappa1 + self.kappa2) / 3.0

    @property
    def xi(self) -> float:
        """Interface width of the tanh profile."""
        return math.sqrt(2.0) * self.alpha


def _shift(field: np.ndarray, c) -> np.ndarray:
    """Values s(x + c) with periodic wrap."""
    return np.roll(field, shift=tuple(-int(x) for x in c), axis=tuple(range(len(c))))


def _prepared(field, grid, stencil):
    if grid is None:
        return field
    return grid.fill_ghosts(np.array(field, dtype=float, copy=True), stencil)


def fd_gradient(field: np.ndarray, node, stencil: Stencil) -> np.ndarray:
    """Lattice-weighted central difference at a single node."""
    dims = field.shape
    node = tuple(int(x) for x in node)
    out = np.zeros(stencil.d)
    for i in range(1, stencil.q):
        c = stencil.velocities[i]
        nb = tuple((node[a] + c[a]) % dims[a] for a in range(stencil.d))
        out += stencil.weights[i] * c * field[nb]
    return out / stencil.cs2


def fd_laplacian(field: np.ndarray, node, stencil: Stencil) -> float:
    dims = field.shape
    node = tuple(int(x) for x in node)
    centre = field[node]
    acc = 0.0
    for i in range(1, stencil.q):
        c = stencil.velocities[i]
        nb = tuple((node[a] + c[a]) % dims[a] for a in range(stencil.d))
        acc += stencil.weights[i] * (field[nb] - centre)
    return 2.0 * acc / stencil.cs2


def gradient_field(field: np.ndarray, stencil: Stencil, grid=None) -> np.ndarray:
    s = _prepared(field, grid, stencil)
    out = np.zeros((stencil.d,) + s.shape)
    for i in range(1, stencil.q):
        c = stencil.velocities[i]
        shifted = _shift(s, c)
        for a in range(stencil.d):
            if c[a]:
                out[a] += stencil.weights[i] * c[a] * shifted
    return out / stencil.cs2


def laplacian_field(field: np.ndarray, stencil: Stencil, grid=None) -> np.ndarray:
    s = _prepared(field, grid, stencil)
    acc = np.zeros(s.shape)
    for i in range(1, stencil.q):
        acc += stencil.weights[i] * (_shift(s, stencil.velocities[i]) - s)
    return 2.0 * acc / stencil.cs2


def bulk_potentials(rho, phi, params: FreeEnergyParams):
    """Local (gradient-free) parts of mu_rho and mu_phi."""
    k1, k2 = params.kappa1, params.kappa2
    p = rho + phi
    m = rho - phi
    t1 = k1 / 8.0 * p * (p - 2.0) * (p - 1.0)
    t2 = k2 / 8.0 * m * (m - 2.0) * (m - 1.0)
    return t1 + t2, t1 - t2


def chemical_potentials(rho, phi, params: FreeEnergyParams, stencil: Stencil, grid=None):
    """mu_rho and mu_phi as functional derivatives of the free energy."""
    lap_rho = laplacian_field(rho, stencil, grid)
    lap_phi = laplacian_field(phi, stencil, grid)
    k1, k2 = params.kappa1, params.kappa2
    a2 = params.alpha ** 2 / 4.0
    b_rho, b_phi = bulk_potentials(rho, phi, params)
    mu_rho = b_rho + a2 * (-(k1 + k2) * lap_rho + (k2 - k1) * lap_phi)
    mu_phi = b_phi + a2 * (-(k1 + k2) * lap_phi + (k2 - k1) * lap_rho)
    return mu_rho, mu_phi


def body_force(rho, phi, mu_rho, mu_phi, stencil: Stencil, grid=None,
               form: str = "gradient") -> np.ndarray:
    """F = -rho grad(mu_rho) - phi grad(mu_phi).

    ``form="potential"`` evaluates the same expression as
    -grad(rho mu_rho + phi mu_phi) + mu_rho grad(rho) + mu_phi grad(phi),
    which the solver uses because it does not pump the undamped
    checkerboard mode of the lattice at interfaces.
    """
    if form == "gradient":
        g_rho = gradient_field(mu_rho, stencil, grid)
        g_phi = gradient_field(mu_phi, stencil, grid)
        return -rho * g_rho - phi * g_phi
    if form == "potential":
        g_p = gradient_field(rho * mu_rho + phi * mu_phi, stencil, grid)
        return (-g_p + mu_rho * gradient_field(rho, stencil, grid)
                + mu_phi * gradient_field(phi, stencil, grid))
    raise ValueError(f"unknown force form {form!r}")


def free_energy_density(rho, phi, params: FreeEnergyParams, stencil: Stencil, grid=None):
    gr = gradient_field(rho, stencil, grid)
    gp = gradient_field(phi, stencil, grid)
    k1, k2, a2 = params.kappa1, params.kappa2, params.alpha ** 2
    p = rho + phi
    m = rho - phi
    dens = k1 / 32.0 * p ** 2 * (p - 2.0) ** 2 + k2 / 32.0 * m ** 2 * (m - 2.0) ** 2
    dens = dens + a2 * k1 / 8.0 * ((gr + gp) ** 2).sum(axis=0)
    dens = dens + a2 * k2 / 8.0 * ((gr - gp) ** 2).sum(axis=0)
    return dens


def total_free_energy(rho, phi, params: FreeEnergyParams, stencil: Stencil, grid=None) -> float:
    """Discrete free energy summed over bulk nodes (diagnostic)."""
    dens = free_energy_density(rho, phi, params, stencil, grid)
    if grid is not None:
        dens = dens[grid.fluid]
    return float(np.sum(dens.reshape(-1)))


def bulk_pressure(rho, phi, mu_rho, mu_phi, params: FreeEnergyParams, cs2: float = 1.0 / 3.0):
    """Isotropic thermodynamic pressure where gradients vanish."""
    k1, k2 = params.kappa1, params.kappa2
    p = rho + phi
    m = rho - phi
    psi = k1 / 32.0 * p ** 2 * (p - 2.0) ** 2 + k2 / 32.0 * m ** 2 * (m - 2.0) ** 2
    return cs2 * rho + rho * mu_rho + phi * mu_phi - psi


def planar_profile(x, xi: float):
    if not xi > 0:
        raise ValueError("interface width must be positive")
    return np.tanh(np.asarray(x) / (math.sqrt(2.0) * xi))
