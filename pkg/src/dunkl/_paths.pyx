# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled path engine; statement-for-statement mirror of _paths_py.

Same splitmix64 streams, same fixed draw layout per substep, same libm
calls, so skeletons agree with the pure-Python reference bit for bit.  The
GIL is released across the whole path loop: chunks scheduled from Python
threads genuinely overlap.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, cos, fabs, log, sin, sqrt

cnp.import_array()

cdef unsigned long long GOLDEN = 0x9E3779B97F4A7C15ULL
cdef double TWO53_INV = 1.0 / 9007199254740992.0
cdef double TWO_PI = 6.283185307179586
cdef double SQRT2 = 1.4142135623730951
cdef double INV_SQRT2 = 0.7071067811865476
cdef double MIN_STEP = 1e-12

BACKEND = "compiled"


cdef inline unsigned long long _mix64(unsigned long long z) nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


def mix64(z):
    """splitmix64 finalizer; the sole source of pseudo-randomness."""
    return int(_mix64(<unsigned long long> (z & 0xFFFFFFFFFFFFFFFF)))


def stream_init(seed, k):
    """Documented stream-splitting rule: path k starts at
    mix64(seed XOR (k+1)*GOLDEN); draws then advance the state by GOLDEN."""
    cdef unsigned long long s = <unsigned long long> (seed & 0xFFFFFFFFFFFFFFFF)
    cdef unsigned long long kk = <unsigned long long> k
    return int(_mix64(s ^ ((kk + 1) * GOLDEN)))


cdef inline double _u01(unsigned long long z) nogil:
    return <double> ((z >> 11) + 0.5) * TWO53_INV


cdef long _paths_core(double[::1] x0, double T, double dt, double p_cap,
                      unsigned long long mseed, long stream0, long n,
                      long n_base, double[:, ::1] roots, double[::1] kappas,
                      long[::1] axes, bint save_skeleton,
                      double[:, :, ::1] states, cnp.uint8_t[::1] flagged,
                      double[:, ::1] jumps, long[::1] substeps,
                      long[::1] capped, double[::1] minwall,
                      long[::1] njumps, double[::1] x,
                      double[::1] nrm, double[::1] dr) nogil:
    cdef long d = x0.shape[0]
    cdef long m = kappas.shape[0]
    cdef long pairs = (d + 1) // 2
    cdef long jcap = jumps.shape[0]
    cdef long jtot = 0

    cdef unsigned long long st
    cdef long p, k, r, j, q, root, flag, subs, caps, nj, ax, kk
    cdef double t_base, t_next, rem, lam, h, g, gg, w, minw, kap, b
    cdef double u_jump, u_root, u1, u2, rad, theta, c, target, cum
    cdef bint do_jump

    for p in range(n):
        st = _mix64(mseed ^ ((<unsigned long long> (stream0 + p) + 1) * GOLDEN))
        for j in range(d):
            x[j] = x0[j]
        flag = 0
        subs = 0
        caps = 0
        nj = 0
        minw = INFINITY
        for r in range(m):
            ax = axes[r]
            if ax >= 0:
                g = SQRT2 * x[ax]
            else:
                g = 0.0
                for j in range(d):
                    g += roots[r, j] * x[j]
            w = fabs(g) * INV_SQRT2
            if w < minw:
                minw = w
        if save_skeleton:
            for j in range(d):
                states[p, 0, j] = x[j]

        t_base = 0.0
        k = 0
        while k < n_base:
            t_next = T if k == n_base - 1 else (k + 1) * dt
            rem = t_next - t_base
            while rem > 0.0:
                lam = 0.0
                for j in range(d):
                    dr[j] = 0.0
                for r in range(m):
                    kap = kappas[r]
                    if kap == 0.0:
                        continue
                    ax = axes[r]
                    if ax >= 0:
                        g = SQRT2 * x[ax]
                    else:
                        g = 0.0
                        for j in range(d):
                            g += roots[r, j] * x[j]
                    gg = g * g
                    if gg > 0.0:
                        lam += 2.0 * kap / gg
                        b = 2.0 * kap / g
                        if ax >= 0:
                            dr[ax] += b * SQRT2
                        else:
                            for j in range(d):
                                dr[j] += b * roots[r, j]
                    else:
                        lam = INFINITY
                if lam * rem <= p_cap:
                    h = rem
                else:
                    h = p_cap / lam
                    caps += 1
                if h < MIN_STEP:
                    flag = 1
                    break

                st = st + GOLDEN
                u_jump = _u01(_mix64(st))
                st = st + GOLDEN
                u_root = _u01(_mix64(st))
                for q in range(pairs):
                    st = st + GOLDEN
                    u1 = _u01(_mix64(st))
                    st = st + GOLDEN
                    u2 = _u01(_mix64(st))
                    rad = sqrt(-2.0 * log(u1))
                    theta = TWO_PI * u2
                    nrm[2 * q] = rad * cos(theta)
                    if 2 * q + 1 < d:
                        nrm[2 * q + 1] = rad * sin(theta)

                do_jump = u_jump < lam * h
                root = m - 1
                if do_jump:
                    # root choice weighted by the pre-move rates, same state
                    # the thinning probability was computed from
                    target = u_root * lam
                    cum = 0.0
                    for r in range(m):
                        kap = kappas[r]
                        if kap == 0.0:
                            continue
                        ax = axes[r]
                        if ax >= 0:
                            g = SQRT2 * x[ax]
                        else:
                            g = 0.0
                            for j in range(d):
                                g += roots[r, j] * x[j]
                        gg = g * g
                        cum += (2.0 * kap / gg) if gg > 0.0 else INFINITY
                        if target < cum:
                            root = r
                            break

                c = sqrt(2.0 * h)
                for j in range(d):
                    x[j] += dr[j] * h + c * nrm[j]

                if do_jump:
                    if jtot >= jcap:
                        return -1
                    jumps[jtot, 0] = p
                    # the flip takes effect at the end of the substep
                    jumps[jtot, 1] = t_next - rem + h
                    jumps[jtot, 2] = root
                    for j in range(d):
                        jumps[jtot, 3 + j] = x[j]
                    ax = axes[root]
                    if ax >= 0:
                        x[ax] = -x[ax]
                    else:
                        g = 0.0
                        for j in range(d):
                            g += roots[root, j] * x[j]
                        for j in range(d):
                            x[j] -= g * roots[root, j]
                    for j in range(d):
                        jumps[jtot, 3 + d + j] = x[j]
                    jtot += 1
                    nj += 1

                for r in range(m):
                    ax = axes[r]
                    if ax >= 0:
                        g = SQRT2 * x[ax]
                    else:
                        g = 0.0
                        for j in range(d):
                            g += roots[r, j] * x[j]
                    w = fabs(g) * INV_SQRT2
                    if w < minw:
                        minw = w
                rem -= h
                subs += 1
            if flag:
                break
            t_base = t_next
            if save_skeleton:
                for j in range(d):
                    states[p, k + 1, j] = x[j]
            k += 1
        if save_skeleton:
            if flag:
                for kk in range(k + 1, n_base + 1):
                    for j in range(d):
                        states[p, kk, j] = x[j]
        else:
            for j in range(d):
                states[p, 0, j] = x[j]
        flagged[p] = flag
        substeps[p] = subs
        capped[p] = caps
        minwall[p] = minw
        njumps[p] = nj
    return jtot


def run_paths(x0_in, double T, double dt, double p_cap, seed, long stream0,
              long n, long n_base, roots_in, kappas_in, axes_in,
              bint save_skeleton,
              double[:, :, ::1] states, cnp.uint8_t[::1] flagged,
              double[:, ::1] jumps, long[::1] substeps, long[::1] capped,
              double[::1] minwall, long[::1] njumps):
    """Advance n jump-diffusion paths from x0; returns total jumps or -1
    when the jump buffer overflows (caller enlarges and reruns).

    states is (n, n_base+1, d) when save_skeleton else (n, 1, d); a jump
    record is [path, time, root, pre..., post...].
    """
    cdef double[::1] x0 = np.array(x0_in, dtype=np.float64, order="C")
    cdef double[:, ::1] roots = np.array(roots_in, dtype=np.float64, order="C")
    cdef double[::1] kappas = np.array(kappas_in, dtype=np.float64, order="C")
    cdef long[::1] axes = np.array(axes_in, dtype=np.int64, order="C")
    cdef unsigned long long mseed = <unsigned long long> (seed & 0xFFFFFFFFFFFFFFFF)
    cdef double[::1] x = np.empty(x0.shape[0])
    cdef double[::1] nrm = np.empty(x0.shape[0])
    cdef double[::1] dr = np.empty(x0.shape[0])
    cdef long out
    with nogil:
        out = _paths_core(x0, T, dt, p_cap, mseed, stream0, n, n_base,
                          roots, kappas, axes, save_skeleton, states,
                          flagged, jumps, substeps, capped, minwall,
                          njumps, x, nrm, dr)
    return out


def run_radial(x0_in, double T, double dt, seed, long stream0, long n,
               long n_base, kappas_in, bint save_skeleton,
               double[:, :, ::1] states, cnp.uint8_t[::1] flagged,
               long[::1] substeps, long[::1] halvings, double[::1] minwall):
    """Advance n radial paths in the positive chamber (axis systems only):
    drift 2 kappa_i / x_i per coordinate, proposals that leave the chamber
    are rejected and the step halved."""
    cdef double[::1] x0 = np.array(x0_in, dtype=np.float64, order="C")
    cdef double[::1] kappas = np.array(kappas_in, dtype=np.float64, order="C")
    cdef long d = x0.shape[0]
    cdef long pairs = (d + 1) // 2
    cdef unsigned long long mseed = <unsigned long long> (seed & 0xFFFFFFFFFFFFFFFF)

    cdef double[::1] x = np.empty(d)
    cdef double[::1] y = np.empty(d)
    cdef unsigned long long st
    cdef long p, k, j, q, flag, subs, halved, ok, kk
    cdef double t_base, t_next, rem, h, hmax, u1, u2, rad, theta, c, minw

    with nogil:
        for p in range(n):
            st = _mix64(mseed ^ ((<unsigned long long> (stream0 + p) + 1) * GOLDEN))
            for j in range(d):
                x[j] = x0[j]
            flag = 0
            subs = 0
            halved = 0
            minw = INFINITY
            for j in range(d):
                if x[j] < minw:
                    minw = x[j]
            if save_skeleton:
                for j in range(d):
                    states[p, 0, j] = x[j]

            t_base = 0.0
            k = 0
            while k < n_base:
                t_next = T if k == n_base - 1 else (k + 1) * dt
                rem = t_next - t_base
                while rem > 0.0:
                    h = rem
                    # keep the drift increment below half the wall distance:
                    # 2 kappa_j h / x_j <= x_j / 2, or the Euler
                    # linearization can hurl a near-wall path far into the
                    # chamber
                    for j in range(d):
                        if kappas[j] > 0.0:
                            hmax = x[j] * x[j] / (4.0 * kappas[j])
                            while h > hmax:
                                h *= 0.5
                                halved += 1
                    while True:
                        if h < MIN_STEP:
                            flag = 1
                            break
                        for q in range(pairs):
                            st = st + GOLDEN
                            u1 = _u01(_mix64(st))
                            st = st + GOLDEN
                            u2 = _u01(_mix64(st))
                            rad = sqrt(-2.0 * log(u1))
                            theta = TWO_PI * u2
                            y[2 * q] = rad * cos(theta)
                            if 2 * q + 1 < d:
                                y[2 * q + 1] = rad * sin(theta)
                        c = sqrt(2.0 * h)
                        ok = 1
                        for j in range(d):
                            y[j] = x[j] + (2.0 * kappas[j] / x[j]) * h + c * y[j]
                            if y[j] <= 0.0:
                                ok = 0
                        if ok:
                            break
                        h *= 0.5
                        halved += 1
                    if flag:
                        break
                    for j in range(d):
                        x[j] = y[j]
                        if x[j] < minw:
                            minw = x[j]
                    rem -= h
                    subs += 1
                if flag:
                    break
                t_base = t_next
                if save_skeleton:
                    for j in range(d):
                        states[p, k + 1, j] = x[j]
                k += 1
            if save_skeleton:
                if flag:
                    for kk in range(k + 1, n_base + 1):
                        for j in range(d):
                            states[p, kk, j] = x[j]
            else:
                for j in range(d):
                    states[p, 0, j] = x[j]
            flagged[p] = flag
            substeps[p] = subs
            halvings[p] = halved
            minwall[p] = minw
