"""Droplet geometry: interface points, deformation, inclination, fragments, mass bookkeeping."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import ndimage

from .free_energy import total_free_energy

MIN_POINTS = 8
D_UNDEFINED = 0.005


class DegenerateInterface(ValueError):
    pass


class UndefinedInclination(ValueError):
    """Raised when the droplet is too close to a circle to carry an orientation."""


def interface_points(phi: np.ndarray, mask: np.ndarray | None = None, periodic=None) -> np.ndarray:
    """Linear-interpolation roots of phi on every grid edge that straddles phi = 0.

    ``mask`` (bool, True where valid) excludes edges touching masked-out nodes.
    Edges across a periodic face are included and reported at the wrapped
    coordinate. Returns an (n, d) array.
    """
    phi = np.asarray(phi, dtype=float)
    d = phi.ndim
    periodic = tuple(periodic) if periodic is not None else (False,) * d
    valid = np.ones(phi.shape, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
    pos = phi > 0
    idx = np.indices(phi.shape)
    out = []
    for a in range(d):
        nxt = np.roll(phi, -1, axis=a)
        ok = (pos != np.roll(pos, -1, axis=a)) & valid & np.roll(valid, -1, axis=a)
        if not periodic[a]:
            sl = [slice(None)] * d
            sl[a] = -1
            ok[tuple(sl)] = False
        p0, p1 = phi[ok], nxt[ok]
        t = p0 / (p0 - p1)
        pts = np.stack([idx[b][ok].astype(float) for b in range(d)], axis=1)
        pts[:, a] += t
        if periodic[a]:
            pts[:, a] = np.mod(pts[:, a], phi.shape[a])
        out.append(pts)
    if not out:
        return np.zeros((0, d))
    return np.concatenate(out, axis=0)


def _unwrap(coords: np.ndarray, ref, dims, periodic) -> np.ndarray:
    """Minimum-image coordinates of ``coords`` (n, d) relative to ``ref``."""
    out = np.array(coords, dtype=float, copy=True)
    for a, per in enumerate(periodic):
        if per:
            L = dims[a]
            out[:, a] = ref[a] + (out[:, a] - ref[a] + 0.5 * L) % L - 0.5 * L
    return out


def centroid(phi: np.ndarray, region: np.ndarray | None = None, periodic=None) -> np.ndarray:
    """Centroid of the C1 mass (1+phi)/2 over ``region`` (default phi > 0).

    Periodic axes use the circular mean so that a droplet straddling a face
    is located correctly.
    """
    phi = np.asarray(phi, dtype=float)
    region = phi > 0 if region is None else region
    if not np.any(region):
        raise DegenerateInterface("no phi > 0 nodes")
    d = phi.ndim
    periodic = tuple(periodic) if periodic is not None else (False,) * d
    wts = 0.5 * (1.0 + phi[region])
    idx = np.nonzero(region)
    c = np.empty(d)
    for a in range(d):
        x = idx[a].astype(float)
        if periodic[a]:
            L = phi.shape[a]
            ang = 2.0 * math.pi * x / L
            m = math.atan2(float(np.sum(wts * np.sin(ang))), float(np.sum(wts * np.cos(ang))))
            ref = (m % (2.0 * math.pi)) * L / (2.0 * math.pi)
            # refine with a minimum-image mean around the circular estimate
            xs = ref + (x - ref + 0.5 * L) % L - 0.5 * L
            c[a] = float(np.sum(wts * xs) / np.sum(wts)) % L
        else:
            c[a] = float(np.sum(wts * x) / np.sum(wts))
    return c


def measure_deformation(points: np.ndarray, center, mode: str = "inclined"):
    """(L, B, D) of an interface point set around ``center``.

    mode "axis": half extents along the coordinate axes (droplet aligned with them).
    mode "inclined": concentric circles, L = max and B = min distance to the center.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or len(pts) < MIN_POINTS:
        raise DegenerateInterface(f"need at least {MIN_POINTS} interface points, got {len(pts)}")
    rel = pts - np.asarray(center, dtype=float)
    if mode == "axis":
        half = 0.5 * (rel.max(axis=0) - rel.min(axis=0))
        L, B = float(half.max()), float(half.min())
    elif mode == "inclined":
        r = np.sqrt((rel ** 2).sum(axis=1))
        L, B = float(r.max()), float(r.min())
    else:
        raise ValueError(f"unknown mode {mode!r}")
    if not B > 0:
        raise DegenerateInterface("interface passes through the center")
    return L, B, (L - B) / (L + B)


def orientation(points: np.ndarray, center, plane=(0, 1)) -> float:
    """Direction (degrees, in (-90, 90]) of the long axis in ``plane``.

    Least-squares fit of r(psi) = r0 + first + second harmonics; the long axis
    is where the second harmonic peaks. Equivalent to the farthest-point
    direction for an ellipse, but insensitive to single-point staircase noise.
    """
    rel = np.asarray(points, dtype=float) - np.asarray(center, dtype=float)
    x, y = rel[:, plane[0]], rel[:, plane[1]]
    psi = np.arctan2(y, x)
    r = np.hypot(x, y)
    A = np.stack([np.ones_like(psi), np.cos(psi), np.sin(psi), np.cos(2 * psi), np.sin(2 * psi)],
                 axis=1)
    coef, *_ = np.linalg.lstsq(A, r, rcond=None)
    ang = 0.5 * math.degrees(math.atan2(coef[4], coef[3]))
    return ang if ang > -90.0 else ang + 180.0


def fold_angle(deg: float) -> float:
    """Angle between a line and the flow axis, in [0, 90]."""
    a = abs(((deg + 90.0) % 180.0) - 90.0)
    return min(a, 90.0)


def measure_inclination(points: np.ndarray, center, D: float | None = None, plane=(0, 1)) -> float:
    """Inclination of the long axis against the flow (first) axis, folded into [0, 90] degrees."""
    if D is None:
        D = measure_deformation(points, center, "inclined")[2]
    if D < D_UNDEFINED:
        raise UndefinedInclination(f"D={D:.4g} below {D_UNDEFINED}: droplet is circular")
    return fold_angle(orientation(points, center, plane))


@dataclass
class Fragments:
    count: int
    masses: list
    labels: np.ndarray = field(repr=False, default=None)


def detect_fragments(phi: np.ndarray, periodic=None, mask: np.ndarray | None = None) -> Fragments:
    """Face-connected components of phi > 0, merged across periodic faces.

    Labels are numbered in order of their first node in C order, so the
    result does not depend on how the labeling library enumerates them.
    """
    phi = np.asarray(phi, dtype=float)
    d = phi.ndim
    periodic = tuple(periodic) if periodic is not None else (False,) * d
    region = phi > 0
    if mask is not None:
        region &= np.asarray(mask, dtype=bool)
    labels, n = ndimage.label(region, structure=ndimage.generate_binary_structure(d, 1))
    parent = list(range(n + 1))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for a, per in enumerate(periodic):
        if not per:
            continue
        lo = np.take(labels, 0, axis=a)
        hi = np.take(labels, -1, axis=a)
        both = (lo > 0) & (hi > 0)
        for i, j in zip(lo[both], hi[both]):
            ri, rj = find(int(i)), find(int(j))
            if ri != rj:
                parent[max(ri, rj)] = min(ri, rj)
    roots = np.array([find(i) for i in range(n + 1)])
    merged = roots[labels]
    flat = merged.reshape(-1)
    nz = np.flatnonzero(flat)
    uniq, first = np.unique(flat[nz], return_index=True)
    order = [int(r) for r in uniq[np.argsort(first)]]
    remap = np.zeros(n + 1, dtype=np.int64)
    for k, r in enumerate(order, start=1):
        remap[r] = k
    final = remap[merged]
    c1 = 0.5 * (1.0 + phi)
    masses = [float(np.sum(c1[final == k])) for k in range(1, len(order) + 1)]
    return Fragments(count=len(order), masses=masses, labels=final)


@dataclass
class DropletMetrics:
    step: int
    tbar: float
    D: float = float("nan")
    theta_deg: float = float("nan")
    fragments: int = 0
    mass_c1: float = float("nan")
    sum_rho: float = float("nan")
    sum_phi: float = float("nan")
    free_energy: float = float("nan")
    L: float = float("nan")
    B: float = float("nan")
    centroid: tuple = ()

    def as_dict(self) -> dict:
        return asdict(self)


def droplet_shape(phi: np.ndarray, periodic=None, mask=None, mode: str = "inclined"):
    """Shape of the largest C1 fragment: (fragments, centroid, L, B, D, theta_deg)."""
    phi = np.asarray(phi, dtype=float)
    d = phi.ndim
    periodic = tuple(periodic) if periodic is not None else (False,) * d
    frags = detect_fragments(phi, periodic, mask)
    if frags.count == 0:
        return frags, None, float("nan"), float("nan"), float("nan"), float("nan")
    main = 1 + int(np.argmax(frags.masses))
    region = frags.labels == main
    c = centroid(phi, region, periodic)
    # edges touching the main fragment only
    near = region.copy()
    for a in range(d):
        near |= np.roll(region, 1, axis=a) | np.roll(region, -1, axis=a)
    valid = near if mask is None else near & mask
    pts = interface_points(phi, valid, periodic)
    pts = _unwrap(pts, c, phi.shape, periodic)
    try:
        L, B, D = measure_deformation(pts, c, mode)
    except DegenerateInterface:
        return frags, c, float("nan"), float("nan"), float("nan"), float("nan")
    plane_pts = pts
    if d == 3:
        # inclination in the shear plane through the centroid
        plane_pts = pts[np.abs(pts[:, 2] - c[2]) < 1.0]
    try:
        theta = measure_inclination(plane_pts, c, D)
    except (UndefinedInclination, DegenerateInterface):
        theta = float("nan")
    return frags, c, L, B, D, theta


def measure(state, grid, params, stencil, step: int, tbar: float, mode: str = "inclined",
            energy: bool = True) -> DropletMetrics:
    """All per-sample metrics of a simulation state (read-only)."""
    fluid = grid.fluid
    phi = state.phi
    frags, c, L, B, D, theta = droplet_shape(phi, grid.periodic, fluid, mode)
    m = DropletMetrics(step=step, tbar=tbar, D=D, theta_deg=theta, fragments=frags.count, L=L, B=B,
                       centroid=tuple(float(x) for x in c) if c is not None else ())
    m.mass_c1, m.sum_rho, m.sum_phi = mass_sums(state, grid)
    if energy:
        m.free_energy = total_free_energy(state.rho, phi, params, stencil, grid)
    return m


def mass_sums(state, grid):
    """(sum (1+phi)/2, sum rho, sum phi) over bulk nodes, in fixed C order."""
    fluid = grid.fluid
    phi = state.phi[fluid]
    return (float(np.sum(0.5 * (1.0 + phi))), float(np.sum(state.rho[fluid])), float(np.sum(phi)))


@dataclass
class MassSeries:
    """Time series of C1 mass, total density, total order parameter and free energy."""

    steps: list = field(default_factory=list)
    mass_c1: list = field(default_factory=list)
    sum_rho: list = field(default_factory=list)
    sum_phi: list = field(default_factory=list)
    free_energy: list = field(default_factory=list)

    def record(self, sim, energy: bool = True):
        st = sim.state
        m, r, p = mass_sums(st, sim.grid)
        self.steps.append(int(st.time))
        self.mass_c1.append(m)
        self.sum_rho.append(r)
        self.sum_phi.append(p)
        self.free_energy.append(total_free_energy(st.rho, st.phi, sim.params, sim.stencil, sim.grid)
                                if energy else float("nan"))

    def relative_drift(self, name: str = "mass_c1") -> float:
        vals = np.asarray(getattr(self, name))
        return float(abs(vals[-1] - vals[0]) / abs(vals[0])) if len(vals) > 1 else 0.0


def mass_series(sim, schedule, energy: bool = True) -> MassSeries:
    """Advance ``sim`` and record one sample at each step count in ``schedule`` (ascending)."""
    series = MassSeries()
    for target in schedule:
        n = int(target) - int(sim.state.time)
        if n < 0:
            raise ValueError("schedule must be ascending and not behind the simulation clock")
        if n:
            sim.step(n)
        sim.update_fields()
        series.record(sim, energy)
    return series
