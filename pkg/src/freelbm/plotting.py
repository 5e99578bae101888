"""Report figures written next to the CSV output (non-interactive backend)."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

TAYLOR_SLOPE = 35.0 / 32.0  # D = Ca (19 lam + 16)/(16 lam + 16) at lam = 1


def _save(fig, path):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    return str(path)


def plot_deformation(data: dict, path, title: str = ""):
    """D and theta against normalised time."""
    fig, ax = plt.subplots(2, 1, sharex=True, figsize=(6, 5))
    ax[0].plot(data["tbar"], data["D"], "k-")
    ax[0].set_ylabel("D")
    ax[1].plot(data["tbar"], data["theta_deg"], "b-")
    ax[1].set_ylabel(r"$\theta$ [deg]")
    ax[1].set_xlabel(r"$\bar t$")
    if title:
        ax[0].set_title(title)
    return _save(fig, path)


def plot_mass(data: dict, path):
    fig, ax = plt.subplots(figsize=(6, 3.5))
    m = np.asarray(data["mass_c1"])
    ax.plot(data["tbar"], (m - m[0]) / m[0], "k-")
    ax.set_xlabel(r"$\bar t$")
    ax.set_ylabel("relative C1 mass change")
    return _save(fig, path)


def plot_field(phi: np.ndarray, path, fluid: np.ndarray | None = None, title: str = ""):
    """Order parameter image (2D field or the mid-plane of a 3D one), x to the right."""
    phi = np.asarray(phi, dtype=float)
    if phi.ndim == 3:
        phi = phi[:, :, phi.shape[2] // 2]
        fluid = None if fluid is None else fluid[:, :, fluid.shape[2] // 2]
    img = np.ma.masked_where(~fluid, phi) if fluid is not None else phi
    fig, ax = plt.subplots(figsize=(6, 6 * phi.shape[1] / phi.shape[0] + 0.5))
    im = ax.imshow(img.T, origin="lower", cmap="RdBu_r", vmin=-1, vmax=1)
    fig.colorbar(im, ax=ax, shrink=0.8, label=r"$\phi$")
    if title:
        ax.set_title(title)
    return _save(fig, path)


def plot_sweep(ca, D, path, theta=None):
    """Steady D against Ca with the small-deformation line for unit viscosity ratio."""
    ca = np.asarray(ca, dtype=float)
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.plot(ca, D, "ko", label="simulation")
    xs = np.linspace(0, ca.max() * 1.1, 50)
    ax.plot(xs, TAYLOR_SLOPE * xs, "r--", label="(35/32) Ca")
    ax.set_xlabel("Ca")
    ax.set_ylabel("D")
    ax.legend()
    if theta is not None:
        ax2 = ax.twinx()
        ax2.plot(ca, theta, "bs", mfc="none")
        ax2.set_ylabel(r"$\theta$ [deg]", color="b")
    return _save(fig, path)
