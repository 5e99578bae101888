"""Row kernels for the passes of one time step.

Arrays are viewed as 3D grids (n0, n1, n2); a 2D grid is (1, nx, ny).
Populations are (q, n0, n1, n2), vectors (d, n0, n1, n2). Every kernel
processes the rows r in [r0, r1) of the flattened (n0, n1) index, with the
contiguous n2 axis innermost so that the loops vectorize. A kernel only
writes entries of its own rows, except ``stream`` whose pushes each hit a
unique destination slot; chunked execution is therefore race-free and gives
the same bits for any chunking.
"""
import numpy as np
from numba import njit


@njit(nogil=True, cache=True, inline="always")
def _acc_shift(dst, src, wgt, s2):
    """dst[c] += wgt * src[(c + s2) mod n] for s2 in {-1, 0, 1}."""
    n = dst.shape[0]
    if s2 == 0:
        for c in range(n):
            dst[c] += wgt * src[c]
    elif s2 == 1:
        for c in range(n - 1):
            dst[c] += wgt * src[c + 1]
        dst[n - 1] += wgt * src[0]
    else:
        for c in range(1, n):
            dst[c] += wgt * src[c - 1]
        dst[0] += wgt * src[n - 1]


@njit(nogil=True, cache=True)
def moments(f, g, rho, phi, fluid, r0, r1):
    q, n0, n1, n2 = f.shape
    for r in range(r0, r1):
        a = r // n1
        b = r - a * n1
        R = rho[a, b]
        P = phi[a, b]
        fl = fluid[a, b]
        f0 = f[0, a, b]
        g0 = g[0, a, b]
        for c in range(n2):
            R[c] = f0[c]
            P[c] = g0[c]
        for i in range(1, q):
            fi = f[i, a, b]
            gi = g[i, a, b]
            for c in range(n2):
                R[c] += fi[c]
                P[c] += gi[c]
        # placeholders at solid nodes; boundary ones are overwritten by ghost filling
        for c in range(n2):
            if not fl[c]:
                R[c] = 1.0
                P[c] = 0.0


@njit(nogil=True, cache=True)
def potentials(rho, phi, mu_rho, mu_phi, shifts, w, k1, k2, alpha, cs2, r0, r1):
    q = shifts.shape[0]
    n0, n1, n2 = rho.shape
    a2 = alpha * alpha / 4.0
    lr = np.empty(n2)
    lp = np.empty(n2)
    wsum = 0.0
    for i in range(1, q):
        wsum += w[i]
    for r in range(r0, r1):
        a = r // n1
        b = r - a * n1
        R = rho[a, b]
        P = phi[a, b]
        for c in range(n2):
            lr[c] = 0.0
            lp[c] = 0.0
        for i in range(1, q):
            at = (a + shifts[i, 0]) % n0
            bt = (b + shifts[i, 1]) % n1
            _acc_shift(lr, rho[at, bt], w[i], shifts[i, 2])
            _acc_shift(lp, phi[at, bt], w[i], shifts[i, 2])
        MR = mu_rho[a, b]
        MP = mu_phi[a, b]
        for c in range(n2):
            lap_r = 2.0 * (lr[c] - wsum * R[c]) / cs2
            lap_p = 2.0 * (lp[c] - wsum * P[c]) / cs2
            s = R[c] + P[c]
            d = R[c] - P[c]
            t1 = k1 / 8.0 * s * (s - 2.0) * (s - 1.0)
            t2 = k2 / 8.0 * d * (d - 2.0) * (d - 1.0)
            MR[c] = t1 + t2 + a2 * (-(k1 + k2) * lap_r + (k2 - k1) * lap_p)
            MP[c] = t1 - t2 + a2 * (-(k1 + k2) * lap_p + (k2 - k1) * lap_r)


@njit(nogil=True, cache=True)
def force(rho, phi, mu_rho, mu_phi, F, shifts, cvec, w, cs2, form, r0, r1):
    """Body force from the chemical potentials.

    form 0: F = -rho grad(mu_rho) - phi grad(mu_phi)
    form 1: F = -grad(rho mu_rho + phi mu_phi) + mu_rho grad(rho) + mu_phi grad(phi)
    Both vanish for uniform potentials; form 1 does not feed the undamped
    k = pi lattice mode at interfaces.
    """
    q = shifts.shape[0]
    dim = cvec.shape[1]
    n0, n1, n2 = rho.shape
    gr = np.empty((dim, n2))
    gp = np.empty((dim, n2))
    gq = np.empty((dim, n2))
    prod = np.empty(n2)
    for r in range(r0, r1):
        a = r // n1
        b = r - a * n1
        gr[:, :] = 0.0
        gp[:, :] = 0.0
        gq[:, :] = 0.0
        for i in range(1, q):
            at = (a + shifts[i, 0]) % n0
            bt = (b + shifts[i, 1]) % n1
            if form == 0:
                for k in range(dim):
                    ck = cvec[i, k]
                    if ck != 0.0:
                        _acc_shift(gr[k], mu_rho[at, bt], w[i] * ck, shifts[i, 2])
                        _acc_shift(gp[k], mu_phi[at, bt], w[i] * ck, shifts[i, 2])
            else:
                Rn = rho[at, bt]
                Pn = phi[at, bt]
                MRn = mu_rho[at, bt]
                MPn = mu_phi[at, bt]
                for c in range(n2):
                    prod[c] = Rn[c] * MRn[c] + Pn[c] * MPn[c]
                for k in range(dim):
                    ck = cvec[i, k]
                    if ck != 0.0:
                        _acc_shift(gr[k], Rn, w[i] * ck, shifts[i, 2])
                        _acc_shift(gp[k], Pn, w[i] * ck, shifts[i, 2])
                        _acc_shift(gq[k], prod, w[i] * ck, shifts[i, 2])
        R = rho[a, b]
        P = phi[a, b]
        MR = mu_rho[a, b]
        MP = mu_phi[a, b]
        for k in range(dim):
            Fk = F[k, a, b]
            if form == 0:
                for c in range(n2):
                    Fk[c] = -(R[c] * gr[k, c] + P[c] * gp[k, c]) / cs2
            else:
                for c in range(n2):
                    Fk[c] = -(gq[k, c] - MR[c] * gr[k, c] - MP[c] * gp[k, c]) / cs2


@njit(nogil=True, cache=True)
def collide(f, g, rho, phi, mu_phi, F, u, cvec, w, tau, tau_g, gamma_phi, cs2,
            freeze_u, r0, r1):
    """In-place BGK collision of f (with Guo source) and g; stores the velocity in u."""
    q, n0, n1, n2 = f.shape
    dim = cvec.shape[1]
    inv_cs2 = 1.0 / cs2
    inv_2cs4 = 0.5 / (cs2 * cs2)
    pref = 1.0 - 0.5 / tau
    om = 1.0 / tau
    om_g = 1.0 / tau_g
    usq = np.empty(n2)
    uf = np.empty(n2)
    gsum = np.empty(n2)
    cu = np.empty(n2)
    cf = np.empty(n2)
    for r in range(r0, r1):
        a = r // n1
        b = r - a * n1
        R = rho[a, b]
        P = phi[a, b]
        M = mu_phi[a, b]
        for c in range(n2):
            usq[c] = 0.0
            uf[c] = 0.0
        for k in range(dim):
            U = u[k, a, b]
            Fk = F[k, a, b]
            if not freeze_u:
                for c in range(n2):
                    U[c] = 0.5 * Fk[c]
                for i in range(q):
                    ci = cvec[i, k]
                    if ci != 0.0:
                        fi = f[i, a, b]
                        for c in range(n2):
                            U[c] += ci * fi[c]
                for c in range(n2):
                    U[c] = U[c] / R[c]
            for c in range(n2):
                usq[c] += U[c] * U[c]
                uf[c] += U[c] * Fk[c]
        for c in range(n2):
            gsum[c] = 0.0
        for i in range(q):
            fi = f[i, a, b]
            gi = g[i, a, b]
            wi = w[i]
            for c in range(n2):
                cu[c] = 0.0
                cf[c] = 0.0
            for k in range(dim):
                ci = cvec[i, k]
                if ci != 0.0:
                    U = u[k, a, b]
                    Fk = F[k, a, b]
                    for c in range(n2):
                        cu[c] += ci * U[c]
                        cf[c] += ci * Fk[c]
            for c in range(n2):
                feq = wi * R[c] * (1.0 + cu[c] * inv_cs2 + (cu[c] * cu[c] - cs2 * usq[c]) * inv_2cs4)
                src = pref * wi * ((cf[c] - uf[c]) * inv_cs2 + cu[c] * cf[c] * inv_cs2 * inv_cs2)
                fi[c] = fi[c] - om * (fi[c] - feq) + src
            if i > 0:
                for c in range(n2):
                    geq = wi * (gamma_phi * M[c] * inv_cs2 + P[c] * cu[c] * inv_cs2
                                + P[c] * (cu[c] * cu[c] - cs2 * usq[c]) * inv_2cs4)
                    gsum[c] += geq
                    gi[c] = gi[c] - om_g * (gi[c] - geq)
        g0 = g[0, a, b]
        for c in range(n2):
            g0[c] = g0[c] - om_g * (g0[c] - (P[c] - gsum[c]))


@njit(nogil=True, cache=True)
def stream(f, fn, shifts, r0, r1):
    """Push every population of rows [r0, r1) one link along its velocity (periodic wrap)."""
    q, n0, n1, n2 = f.shape
    for r in range(r0, r1):
        a = r // n1
        b = r - a * n1
        for i in range(q):
            s2 = shifts[i, 2]
            at = (a + shifts[i, 0]) % n0
            bt = (b + shifts[i, 1]) % n1
            src = f[i, a, b]
            dst = fn[i, at, bt]
            if s2 == 0:
                for c in range(n2):
                    dst[c] = src[c]
            elif s2 == 1:
                for c in range(n2 - 1):
                    dst[c + 1] = src[c]
                dst[0] = src[n2 - 1]
            else:
                for c in range(1, n2):
                    dst[c - 1] = src[c]
                dst[n2 - 1] = src[0]


@njit(nogil=True, cache=True)
def bounce_back(fstar, gstar, fn, gn, rho, link_node, link_dir, link_wall, link_ref, rho_ref,
                cvec, w, opp, uw, cs2):
    """Halfway bounce-back on flat arrays for links (fluid node, outgoing dir, solid node).

    Links flagged in ``link_ref`` use ``rho_ref`` in the momentum correction
    instead of the fluid node's density.
    """
    dim = cvec.shape[1]
    for k in range(link_node.shape[0]):
        n = link_node[k]
        i = link_dir[k]
        t = link_wall[k]
        cuw = 0.0
        for a in range(dim):
            cuw += cvec[i, a] * uw[a, t]
        j = opp[i]
        r = rho_ref if link_ref[k] else rho[n]
        fn[j, n] = fstar[i, n] - 2.0 * w[i] * r * cuw / cs2
        gn[j, n] = gstar[i, n]


@njit(nogil=True, cache=True)
def clear_nodes(fn, gn, nodes):
    q = fn.shape[0]
    for k in range(nodes.shape[0]):
        n = nodes[k]
        for i in range(q):
            fn[i, n] = 0.0
            gn[i, n] = 0.0


@njit(nogil=True, cache=True)
def bad_node(rho, fluid):
    """Flat index of the first bulk node with NaN or non-positive density, else -1."""
    for n in range(rho.shape[0]):
        if fluid[n] and not (rho[n] > 0.0):
            return n
    return -1
