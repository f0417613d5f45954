"""Hot numeric kernels, each with a numba path and a pure-numpy path.

The public names at the bottom of the module pick one implementation based on
``subrad._accel.USE_NUMBA``. Both variants stay importable so tests and the
benchmark can compare them directly.

Conventions: internal level order is (+1, 0, -1); the flat index of site
``a`` and level slot ``s`` is ``3 * a + s``; gamma = hbar = 1.
"""

import math

import numpy as np

from ._accel import HAVE_NUMBA, USE_NUMBA, njit

SQRT2 = math.sqrt(2.0)
# Below this reduced distance the dissipative radial term is summed as a series.
KAPPA_SERIES = 0.1


# --------------------------------------------------------------------------
# radial functions
# --------------------------------------------------------------------------

def _radial_py(kappa):
    """Return (A, B, sin(k)/k, cos(k)/k) with A = sin/k^2 + cos/k^3, B = cos/k^2 - sin/k^3."""
    s = math.sin(kappa)
    c = math.cos(kappa)
    k2 = kappa * kappa
    a_term = s / k2 + c / (k2 * kappa)
    if kappa < KAPPA_SERIES:
        b_term = -1.0 / 3.0 + k2 / 30.0 - k2 * k2 / 840.0 + k2 * k2 * k2 / 45360.0
    else:
        b_term = c / k2 - s / (k2 * kappa)
    return a_term, b_term, s / kappa, c / kappa


def _coefficients_trig(kappa, ct, st, e1):
    """Eight complex coupling coefficients (V11, V10, V00, V+-, G11, G10, G00, G+-).

    Takes cos(theta), sin(theta) and exp(i phi) directly so that pairs lying
    exactly in the transverse plane give exactly vanishing m = 0 / m = +-1 terms.
    """
    a_term, b_term, sinc, cosc = _radial_py(kappa)
    st2 = st * st
    ct2 = ct * ct
    s2t = 2.0 * st * ct
    e2 = e1 * e1

    v11 = (2.0 - 3.0 * st2) * a_term - (2.0 - st2) * cosc
    v10 = s2t * e1 / SQRT2 * (cosc - 3.0 * a_term)
    v00 = 2.0 * ((1.0 - 3.0 * ct2) * a_term - st2 * cosc)
    vpm = st2 * e2 * (3.0 * a_term - cosc)

    g11 = (2.0 - st2) * sinc + (2.0 - 3.0 * st2) * b_term
    g10 = s2t * e1 / SQRT2 * (-sinc - 3.0 * b_term)
    g00 = 2.0 * (st2 * sinc + (1.0 - 3.0 * ct2) * b_term)
    gpm = st2 * e2 * (sinc + 3.0 * b_term)
    return (complex(v11), v10, complex(v00), vpm, complex(g11), g10, complex(g00), gpm)


def _pair_coefficients_py(kappa, theta, phi):
    return _coefficients_trig(kappa, math.cos(theta), math.sin(theta), complex(math.cos(phi), math.sin(phi)))


def _fill_block(out, r0, c0, scale, x11, x10, x00, xpm):
    # [[X11, -X10*, X+-*], [-X10, X00, X10*], [X+-, X10, X11]]
    out[r0, c0] = scale * x11
    out[r0, c0 + 1] = -scale * x10.conjugate()
    out[r0, c0 + 2] = scale * xpm.conjugate()
    out[r0 + 1, c0] = -scale * x10
    out[r0 + 1, c0 + 1] = scale * x00
    out[r0 + 1, c0 + 2] = scale * x10.conjugate()
    out[r0 + 2, c0] = scale * xpm
    out[r0 + 2, c0 + 1] = scale * x10
    out[r0 + 2, c0 + 2] = scale * x11


def _pair_trig(rx, ry, rz, e1, e2, e3):
    """(kappa, cos theta, sin theta, exp(i phi)) of a separation vector in the (e1, e2, e3) frame."""
    dist = math.sqrt(rx * rx + ry * ry + rz * rz)
    u1 = rx * e1[0] + ry * e1[1] + rz * e1[2]
    u2 = rx * e2[0] + ry * e2[1] + rz * e2[2]
    u3 = rx * e3[0] + ry * e3[1] + rz * e3[2]
    rho = math.sqrt(u1 * u1 + u2 * u2)
    ct = min(1.0, max(-1.0, u3 / dist))
    st = min(1.0, rho / dist)
    eiphi = complex(u1 / rho, u2 / rho) if rho > 0.0 else complex(1.0, 0.0)
    return 2.0 * math.pi * dist, ct, st, eiphi


def _assemble_vg_loop(positions, e1, e2, e3):
    n = positions.shape[0]
    v = np.zeros((3 * n, 3 * n), dtype=np.complex128)
    g = np.zeros((3 * n, 3 * n), dtype=np.complex128)
    for a in range(n):
        for s in range(3):
            g[3 * a + s, 3 * a + s] = 1.0
        for b in range(a + 1, n):
            rx = positions[a, 0] - positions[b, 0]
            ry = positions[a, 1] - positions[b, 1]
            rz = positions[a, 2] - positions[b, 2]
            kappa, ct, st, eiphi = _pair_trig(rx, ry, rz, e1, e2, e3)
            c = _coefficients_trig(kappa, ct, st, eiphi)
            # swapping a<->b maps (theta, phi) -> (pi - theta, phi + pi), which leaves every coefficient unchanged
            _fill_block(v, 3 * a, 3 * b, 0.375, c[0], c[1], c[2], c[3])
            _fill_block(v, 3 * b, 3 * a, 0.375, c[0], c[1], c[2], c[3])
            _fill_block(g, 3 * a, 3 * b, 0.75, c[4], c[5], c[6], c[7])
            _fill_block(g, 3 * b, 3 * a, 0.75, c[4], c[5], c[6], c[7])
    return v, g


# --------------------------------------------------------------------------
# vectorised numpy assembly
# --------------------------------------------------------------------------

def coefficients_trig_array(kappa, ct, st, e1):
    """Vectorised twin of the scalar coefficient kernel; arrays broadcast together."""
    kappa = np.asarray(kappa, dtype=float)
    s = np.sin(kappa)
    c = np.cos(kappa)
    k2 = kappa * kappa
    a_term = s / k2 + c / (k2 * kappa)
    with np.errstate(divide="ignore", invalid="ignore"):
        b_exact = c / k2 - s / (k2 * kappa)
    b_series = -1.0 / 3.0 + k2 / 30.0 - k2**2 / 840.0 + k2**3 / 45360.0
    b_term = np.where(kappa < KAPPA_SERIES, b_series, b_exact)
    sinc = s / kappa
    cosc = c / kappa
    st2 = st * st
    ct2 = ct * ct
    s2t = 2.0 * st * ct
    e2 = e1 * e1
    v11 = (2.0 - 3.0 * st2) * a_term - (2.0 - st2) * cosc
    v10 = s2t * e1 / SQRT2 * (cosc - 3.0 * a_term)
    v00 = 2.0 * ((1.0 - 3.0 * ct2) * a_term - st2 * cosc)
    vpm = st2 * e2 * (3.0 * a_term - cosc)
    g11 = (2.0 - st2) * sinc + (2.0 - 3.0 * st2) * b_term
    g10 = s2t * e1 / SQRT2 * (-sinc - 3.0 * b_term)
    g00 = 2.0 * (st2 * sinc + (1.0 - 3.0 * ct2) * b_term)
    gpm = st2 * e2 * (sinc + 3.0 * b_term)
    return v11, v10, v00, vpm, g11, g10, g00, gpm


def pair_coefficients_array(kappa, theta, phi):
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    return coefficients_trig_array(kappa, np.cos(theta), np.sin(theta), np.exp(1j * phi))


def block_from_coefficients(x11, x10, x00, xpm):
    """Stack coefficient arrays of shape S into blocks of shape S + (3, 3)."""
    x11, x10, x00, xpm = np.broadcast_arrays(
        np.asarray(x11, complex), np.asarray(x10, complex), np.asarray(x00, complex), np.asarray(xpm, complex)
    )
    rows = [
        [x11, -np.conj(x10), np.conj(xpm)],
        [-x10, x00, np.conj(x10)],
        [xpm, x10, x11],
    ]
    return np.stack([np.stack(r, axis=-1) for r in rows], axis=-2)


def assemble_vg_numpy(positions, e1, e2, e3):
    positions = np.asarray(positions, dtype=float)
    n = positions.shape[0]
    v = np.zeros((n, n, 3, 3), dtype=np.complex128)
    g = np.zeros((n, n, 3, 3), dtype=np.complex128)
    if n > 1:
        ia, ib = np.triu_indices(n, k=1)
        r = positions[ia] - positions[ib]
        dist = np.linalg.norm(r, axis=1)
        u1, u2, u3 = r @ e1, r @ e2, r @ e3
        rho = np.hypot(u1, u2)
        safe = np.where(rho > 0.0, rho, 1.0)
        eiphi = np.where(rho > 0.0, (u1 + 1j * u2) / safe, 1.0 + 0j)
        ct = np.clip(u3 / dist, -1.0, 1.0)
        st = np.minimum(1.0, rho / dist)
        coeffs = coefficients_trig_array(2.0 * np.pi * dist, ct, st, eiphi)
        vb = 0.375 * block_from_coefficients(*coeffs[:4])
        gb = 0.75 * block_from_coefficients(*coeffs[4:])
        v[ia, ib] = vb
        v[ib, ia] = vb
        g[ia, ib] = gb
        g[ib, ia] = gb
    g[np.arange(n), np.arange(n)] = np.eye(3)
    return (
        v.transpose(0, 2, 1, 3).reshape(3 * n, 3 * n),
        g.transpose(0, 2, 1, 3).reshape(3 * n, 3 * n),
    )


# --------------------------------------------------------------------------
# fixed-step RK4 for dc/dt = -i H c
# --------------------------------------------------------------------------

def _matvec(h, x, out):
    # compiled np.dot goes to BLAS zgemv; a hand loop loses to it beyond ~30 states
    out[:] = np.dot(h, x)


def _rk4_sampled_loop(h, c0, times, h_max):
    m = c0.shape[0]
    out = np.empty((times.shape[0], m), dtype=np.complex128)
    c = c0.copy()
    k1 = np.empty(m, dtype=np.complex128)
    k2 = np.empty(m, dtype=np.complex128)
    k3 = np.empty(m, dtype=np.complex128)
    k4 = np.empty(m, dtype=np.complex128)
    tmp = np.empty(m, dtype=np.complex128)
    t = times[0]
    out[0] = c
    for s in range(1, times.shape[0]):
        span = times[s] - t
        nsub = max(1, int(math.ceil(span / h_max - 1e-12)))
        dt = span / nsub
        for _ in range(nsub):
            _matvec(h, c, k1)
            for i in range(m):
                k1[i] *= -1j
                tmp[i] = c[i] + 0.5 * dt * k1[i]
            _matvec(h, tmp, k2)
            for i in range(m):
                k2[i] *= -1j
                tmp[i] = c[i] + 0.5 * dt * k2[i]
            _matvec(h, tmp, k3)
            for i in range(m):
                k3[i] *= -1j
                tmp[i] = c[i] + dt * k3[i]
            _matvec(h, tmp, k4)
            for i in range(m):
                k4[i] *= -1j
                c[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
        t = times[s]
        out[s] = c
    return out


def rk4_sampled_numpy(h, c0, times, h_max):
    h = np.ascontiguousarray(h, dtype=np.complex128)
    g = -1j * h
    c = np.array(c0, dtype=np.complex128)
    out = np.empty((len(times), c.size), dtype=np.complex128)
    out[0] = c
    t = times[0]
    for s in range(1, len(times)):
        span = times[s] - t
        nsub = max(1, int(math.ceil(span / h_max - 1e-12)))
        dt = span / nsub
        for _ in range(nsub):
            k1 = g @ c
            k2 = g @ (c + 0.5 * dt * k1)
            k3 = g @ (c + 0.5 * dt * k2)
            k4 = g @ (c + dt * k3)
            c = c + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        t = times[s]
        out[s] = c
    return out


# --------------------------------------------------------------------------
# truncated density matrix, written component by component
# --------------------------------------------------------------------------

def _density_rhs_loop(v, g, dz, rho_gg, rho_ge, rho_eg, rho_ee, d_gg, d_ge, d_eg, d_ee):
    # v, g: (3N, 3N) exchange and dissipative matrices; dz: (3, 3) on-site Zeeman block.
    m = rho_ge.shape[0]
    n = m // 3
    acc_gg = 0j
    for i in range(m):
        for j in range(m):
            acc_gg += g[i, j] * rho_ee[j, i]
    d_gg[0] = acc_gg
    for a in range(n):
        for ms in range(3):
            i = 3 * a + ms
            acc_l = 0j
            acc_r = 0j
            for c in range(n):
                for ns in range(3):
                    j = 3 * c + ns
                    z = v[i, j] - 0.5j * g[i, j]
                    if c == a:
                        z += dz[ms, ns]
                    acc_r += z * rho_eg[j]
                    # rho_Ge sees the adjoint generator: conj(Z_ij) pairs with rho_Ge(j)
                    acc_l += rho_ge[j] * z.conjugate()
            d_eg[i] = -1j * acc_r
            d_ge[i] = 1j * acc_l
    for i in range(m):
        a = i // 3
        ms = i % 3
        for k in range(m):
            b = k // 3
            ls = k % 3
            acc = 0j
            for j in range(m):
                c = j // 3
                ns = j % 3
                zl = v[i, j] - 0.5j * g[i, j]
                if c == a:
                    zl += dz[ms, ns]
                zr = v[k, j] - 0.5j * g[k, j]
                if c == b:
                    zr += dz[ls, ns]
                acc += zl * rho_ee[j, k] - rho_ee[i, j] * zr.conjugate()
            d_ee[i, k] = -1j * acc


def _density_rk4_loop(v, g, dz, rho_gg, rho_ge, rho_eg, rho_ee, times, h_max):
    m = rho_ge.shape[0]
    ns = times.shape[0]
    out_gg = np.empty(ns, dtype=np.complex128)
    out_ge = np.empty((ns, m), dtype=np.complex128)
    out_eg = np.empty((ns, m), dtype=np.complex128)
    out_ee = np.empty((ns, m, m), dtype=np.complex128)
    y_gg = np.array([rho_gg], dtype=np.complex128)
    y_ge = rho_ge.copy()
    y_eg = rho_eg.copy()
    y_ee = rho_ee.copy()
    kg = np.empty((4, 1), dtype=np.complex128)
    kge = np.empty((4, m), dtype=np.complex128)
    keg = np.empty((4, m), dtype=np.complex128)
    kee = np.empty((4, m, m), dtype=np.complex128)
    out_gg[0] = y_gg[0]
    out_ge[0] = y_ge
    out_eg[0] = y_eg
    out_ee[0] = y_ee
    t = times[0]
    weights = (0.0, 0.5, 0.5, 1.0)
    for s in range(1, ns):
        span = times[s] - t
        nsub = max(1, int(math.ceil(span / h_max - 1e-12)))
        dt = span / nsub
        for _ in range(nsub):
            for stage in range(4):
                w = weights[stage] * dt
                if stage == 0:
                    _density_rhs_loop(v, g, dz, y_gg[0], y_ge, y_eg, y_ee, kg[0], kge[0], keg[0], kee[0])
                else:
                    _density_rhs_loop(
                        v, g, dz,
                        y_gg[0] + w * kg[stage - 1, 0],
                        y_ge + w * kge[stage - 1],
                        y_eg + w * keg[stage - 1],
                        y_ee + w * kee[stage - 1],
                        kg[stage], kge[stage], keg[stage], kee[stage],
                    )
            y_gg[0] += dt / 6.0 * (kg[0, 0] + 2.0 * kg[1, 0] + 2.0 * kg[2, 0] + kg[3, 0])
            y_ge += dt / 6.0 * (kge[0] + 2.0 * kge[1] + 2.0 * kge[2] + kge[3])
            y_eg += dt / 6.0 * (keg[0] + 2.0 * keg[1] + 2.0 * keg[2] + keg[3])
            y_ee += dt / 6.0 * (kee[0] + 2.0 * kee[1] + 2.0 * kee[2] + kee[3])
        t = times[s]
        out_gg[s] = y_gg[0]
        out_ge[s] = y_ge
        out_eg[s] = y_eg
        out_ee[s] = y_ee
    return out_gg, out_ge, out_eg, out_ee


def density_rk4_numpy(v, g, dz, rho_gg, rho_ge, rho_eg, rho_ee, times, h_max):
    """Same component equations as the loop kernel, contracted with einsum on (site, level) axes."""
    m = rho_ge.shape[0]
    n = m // 3
    # Z[a, m, c, n] with the Zeeman block added on the site diagonal
    z = (v - 0.5j * g).reshape(n, 3, n, 3).copy()
    z[np.arange(n), :, np.arange(n), :] += dz
    zc = z.conj()
    g4 = g.reshape(n, 3, n, 3)

    def rhs(y):
        gg, ge, eg, ee = y
        ge4 = ge.reshape(n, 3)
        eg4 = eg.reshape(n, 3)
        ee4 = ee.reshape(n, 3, n, 3)
        d_gg = np.einsum("amcn,cnam->", g4, ee4)
        d_ge = 1j * np.einsum("cn,amcn->am", ge4, zc).reshape(m)
        d_eg = -1j * np.einsum("amcn,cn->am", z, eg4).reshape(m)
        d_ee = -1j * (
            np.einsum("amcn,cnbl->ambl", z, ee4) - np.einsum("amcn,blcn->ambl", ee4, zc)
        ).reshape(m, m)
        return [d_gg, d_ge, d_eg, d_ee]

    y = [complex(rho_gg), rho_ge.astype(complex), rho_eg.astype(complex), rho_ee.astype(complex)]
    ns = len(times)
    out = (
        np.empty(ns, complex),
        np.empty((ns, m), complex),
        np.empty((ns, m), complex),
        np.empty((ns, m, m), complex),
    )
    for arr, val in zip(out, y):
        arr[0] = val
    t = times[0]
    for s in range(1, ns):
        span = times[s] - t
        nsub = max(1, int(math.ceil(span / h_max - 1e-12)))
        dt = span / nsub
        for _ in range(nsub):
            k1 = rhs(y)
            k2 = rhs([a + 0.5 * dt * b for a, b in zip(y, k1)])
            k3 = rhs([a + 0.5 * dt * b for a, b in zip(y, k2)])
            k4 = rhs([a + dt * b for a, b in zip(y, k3)])
            y = [a + dt / 6.0 * (b1 + 2 * b2 + 2 * b3 + b4) for a, b1, b2, b3, b4 in zip(y, k1, k2, k3, k4)]
        t = times[s]
        for arr, val in zip(out, y):
            arr[s] = val
    return out


# --------------------------------------------------------------------------
# dispatch
# --------------------------------------------------------------------------

# The loop kernels above are only ever executed compiled; the numpy path uses
# the vectorised functions instead.
_pair_coefficients = _pair_coefficients_py

if HAVE_NUMBA:
    _radial_py = njit(_radial_py)
    _pair_coefficients = njit(_pair_coefficients_py)
    _coefficients_trig = njit(_coefficients_trig)
    _fill_block = njit(_fill_block)
    _pair_trig = njit(_pair_trig)
    assemble_vg_numba = njit(_assemble_vg_loop)
    _matvec = njit(_matvec)
    rk4_sampled_numba = njit(_rk4_sampled_loop)
    _density_rhs_loop = njit(_density_rhs_loop)
    density_rk4_numba = njit(_density_rk4_loop)
else:  # pragma: no cover
    assemble_vg_numba = None
    rk4_sampled_numba = None
    density_rk4_numba = None


def pair_coefficients(kappa: float, theta: float, phi: float):
    """Scalar coefficients (V11, V10, V00, V+-, G11, G10, G00, G+-) for one pair, kappa > 0."""
    if USE_NUMBA:
        return _pair_coefficients(float(kappa), float(theta), float(phi))
    return tuple(complex(x) for x in pair_coefficients_array(kappa, theta, phi))


def assemble_vg(positions, e1, e2, e3):
    positions = np.ascontiguousarray(positions, dtype=np.float64)
    e1, e2, e3 = (np.ascontiguousarray(e, dtype=np.float64) for e in (e1, e2, e3))
    if USE_NUMBA:
        return assemble_vg_numba(positions, e1, e2, e3)
    return assemble_vg_numpy(positions, e1, e2, e3)


def rk4_sampled(h, c0, times, h_max):
    h = np.ascontiguousarray(h, dtype=np.complex128)
    c0 = np.ascontiguousarray(c0, dtype=np.complex128)
    times = np.ascontiguousarray(times, dtype=np.float64)
    if USE_NUMBA:
        return rk4_sampled_numba(h, c0, times, float(h_max))
    return rk4_sampled_numpy(h, c0, times, float(h_max))


def density_rk4(v, g, dz, rho_gg, rho_ge, rho_eg, rho_ee, times, h_max):
    args = (
        np.ascontiguousarray(v, dtype=np.complex128),
        np.ascontiguousarray(g, dtype=np.complex128),
        np.ascontiguousarray(dz, dtype=np.complex128),
        complex(rho_gg),
        np.ascontiguousarray(rho_ge, dtype=np.complex128),
        np.ascontiguousarray(rho_eg, dtype=np.complex128),
        np.ascontiguousarray(rho_ee, dtype=np.complex128),
        np.ascontiguousarray(times, dtype=np.float64),
        float(h_max),
    )
    if USE_NUMBA:
        return density_rk4_numba(*args)
    return density_rk4_numpy(*args)
