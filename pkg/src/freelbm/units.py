"""Mapping between non-dimensional groups and lattice parameters."""
from __future__ import annotations

import math
from dataclasses import dataclass

from .dynamics import RelaxationSetup
from .errors import ConfigError
from .free_energy import FreeEnergyParams

CS2 = 1.0 / 3.0
TAU_MAX = 2.0
U_MAX = 0.05
# Pe mobility scale A as a multiple of kappa; kappa/4 is the bulk double-well coefficient at rho=1
PE_A_FACTOR = 0.25


@dataclass(frozen=True)
class DimensionlessGroup:
    """Reynolds, capillary, Peclet and Cahn numbers of a droplet of radius a.

    re = rate a^2 / nu, ca = a rate mu / sigma, pe = rate a xi / (M A), ch = xi / a
    """

    re: float
    ca: float
    pe: float
    ch: float

    def __post_init__(self):
        for name in ("re", "ca", "pe", "ch"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and v > 0 and math.isfinite(v)):
                raise ConfigError(f"{name} must be a positive number, got {v!r}")


@dataclass(frozen=True)
class LatticeParameters:
    params: FreeEnergyParams
    setup: RelaxationSetup
    rate: float
    radius: float
    nu: float
    xi: float
    sigma: float
    kappa: float
    mobility: float
    a_coeff: float

    def as_dict(self) -> dict:
        p = self.params
        return {
            "rate": self.rate, "radius": self.radius, "tau": p.tau, "tau_g": p.tau_g,
            "nu": self.nu, "kappa1": p.kappa1, "kappa2": p.kappa2, "alpha": p.alpha,
            "gamma_phi": p.gamma_phi, "xi": self.xi, "sigma": self.sigma,
            "mobility": self.mobility, "a_coeff": self.a_coeff,
        }


def solve_lattice_params(groups: DimensionlessGroup, a: float, gamma: float, tau_g: float = 1.0,
                         rho: float = 1.0, a_factor: float = PE_A_FACTOR,
                         tau_max: float = TAU_MAX) -> LatticeParameters:
    """Lattice parameters realising ``groups`` for radius ``a`` and rate ``gamma``.

    Symmetric interface parameters are used (kappa1 = kappa2 = kappa) so that
    sigma = alpha kappa / 3 and xi = sqrt(2) alpha.
    """
    if not (a > 0 and gamma > 0):
        raise ConfigError("radius and rate must be positive")
    nu = gamma * a * a / groups.re
    tau = 0.5 + nu / CS2
    if not (0.5 < tau <= tau_max):
        raise ConfigError(f"relaxation time tau={tau:.6g} (nu={nu:.6g}) outside (0.5, {tau_max}]; "
                          "adjust the rate")
    if not (0.5 < tau_g <= tau_max):
        raise ConfigError(f"tau_g={tau_g} outside (0.5, {tau_max}]")
    xi = groups.ch * a
    alpha = xi / math.sqrt(2.0)
    mu_c = rho * nu
    sigma = a * gamma * mu_c / groups.ca
    if not sigma > 0:
        raise ConfigError("non-positive interface tension")
    kappa = 3.0 * sigma / alpha
    a_coeff = a_factor * kappa
    mobility = gamma * a * xi / (groups.pe * a_coeff)
    gamma_phi = mobility / (tau_g - 0.5)
    params = FreeEnergyParams(kappa1=kappa, kappa2=kappa, alpha=alpha, gamma_phi=gamma_phi,
                              tau=tau, tau_g=tau_g)
    setup = RelaxationSetup(tau=tau, tau_g=tau_g, nu=nu, m_phi=mobility)
    return LatticeParameters(params=params, setup=setup, rate=gamma, radius=a, nu=nu, xi=xi,
                             sigma=sigma, kappa=kappa, mobility=mobility, a_coeff=a_coeff)


def groups_from_params(params: FreeEnergyParams, a: float, gamma: float, rho: float = 1.0,
                       a_factor: float = PE_A_FACTOR) -> DimensionlessGroup:
    """Inverse of :func:`solve_lattice_params` for symmetric parameters."""
    nu = CS2 * (params.tau - 0.5)
    kappa = 0.5 * (params.kappa1 + params.kappa2)
    xi = math.sqrt(2.0) * params.alpha
    sigma = params.alpha * kappa / 3.0
    mobility = params.gamma_phi * (params.tau_g - 0.5)
    return DimensionlessGroup(re=gamma * a * a / nu, ca=a * gamma * rho * nu / sigma,
                              pe=gamma * a * xi / (mobility * a_factor * kappa), ch=xi / a)


def choose_rate(groups: DimensionlessGroup, a: float, velocity_length: float,
                u_max: float = U_MAX, tau_max: float = TAU_MAX) -> float:
    """Largest rate keeping rate*velocity_length <= u_max and tau <= tau_max.

    ``velocity_length`` converts the rate into the largest expected speed,
    e.g. H/2 for a shear cell.
    """
    nu_max = CS2 * (tau_max - 0.5)
    return min(u_max / velocity_length, groups.re * nu_max / (a * a))
