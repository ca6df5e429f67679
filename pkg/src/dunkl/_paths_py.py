"""Pure-Python path engine: the bit-exact reference for the compiled core.

Each substep moves the state by the Euler increment drift * h + sqrt(2h) * Z
(drift sum_a 2 kappa_a alpha_a / <alpha_a, x>, matching the continuous part
of the generator), then applies a mirror flip with probability lambda(x) * h,
the rate and the root-selection weights both taken at the pre-move state.

Every floating-point statement here is mirrored line for line in _paths.pyx,
and both sides draw from the same per-path splitmix64 streams with a fixed
draw layout per substep (one jump uniform, one root-selection uniform, then
ceil(d/2) Box-Muller pairs, all consumed whether used or not).  Identical
seeds therefore give identical skeletons across backends, bit for bit.

This module is deliberately scalar: numpy's vectorized transcendentals can
differ from libm in the last ulp, which would break that contract.  The
compiled extension exists precisely because this reference is slow.
"""

import math

GOLDEN = 0x9E3779B97F4A7C15
MASK = 0xFFFFFFFFFFFFFFFF
TWO53_INV = 1.0 / 9007199254740992.0
TWO_PI = 6.283185307179586
SQRT2 = 1.4142135623730951
INV_SQRT2 = 0.7071067811865476
MIN_STEP = 1e-12

BACKEND = "python"


def mix64(z: int) -> int:
    """splitmix64 finalizer; the sole source of pseudo-randomness."""
    z &= MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
    return z ^ (z >> 31)


def stream_init(seed: int, k: int) -> int:
    """Documented stream-splitting rule: path k starts at
    mix64(seed XOR (k+1)*GOLDEN); draws then advance the state by GOLDEN."""
    return mix64((seed ^ ((k + 1) * GOLDEN)) & MASK)


def run_paths(x0, T, dt, p_cap, seed, stream0, n, n_base,
              roots, kappas, axes, save_skeleton,
              states, flagged, jumps, substeps, capped, minwall, njumps):
    """Advance n jump-diffusion paths from x0; returns total jumps or -1
    when the jump buffer overflows (caller enlarges and reruns).

    states is (n, n_base+1, d) when save_skeleton else (n, 1, d); a jump
    record is [path, time, root, pre..., post...].
    """
    d = len(x0)
    m = len(kappas)
    x0 = [float(v) for v in x0]
    roots = [[float(v) for v in row] for row in roots]
    kappas = [float(v) for v in kappas]
    axes = [int(a) for a in axes]
    pairs = (d + 1) // 2
    jcap = jumps.shape[0]
    jtot = 0

    for p in range(n):
        st = stream_init(seed, stream0 + p)
        x = list(x0)
        flag = 0
        subs = 0
        caps = 0
        nj = 0
        minw = math.inf
        for r in range(m):
            ax = axes[r]
            if ax >= 0:
                g = SQRT2 * x[ax]
            else:
                g = 0.0
                for j in range(d):
                    g += roots[r][j] * x[j]
            w = abs(g) * INV_SQRT2
            if w < minw:
                minw = w
        if save_skeleton:
            for j in range(d):
                states[p, 0, j] = x[j]

        t_base = 0.0
        for k in range(n_base):
            t_next = T if k == n_base - 1 else (k + 1) * dt
            rem = t_next - t_base
            while rem > 0.0:
                lam = 0.0
                dr = [0.0] * d
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
                            g += roots[r][j] * x[j]
                    gg = g * g
                    if gg > 0.0:
                        lam += 2.0 * kap / gg
                        b = 2.0 * kap / g
                        if ax >= 0:
                            dr[ax] += b * SQRT2
                        else:
                            for j in range(d):
                                dr[j] += b * roots[r][j]
                    else:
                        lam = math.inf
                if lam * rem <= p_cap:
                    h = rem
                else:
                    h = p_cap / lam
                    caps += 1
                if h < MIN_STEP:
                    flag = 1
                    break

                st = (st + GOLDEN) & MASK
                u_jump = ((mix64(st) >> 11) + 0.5) * TWO53_INV
                st = (st + GOLDEN) & MASK
                u_root = ((mix64(st) >> 11) + 0.5) * TWO53_INV
                nrm = [0.0] * d
                for q in range(pairs):
                    st = (st + GOLDEN) & MASK
                    u1 = ((mix64(st) >> 11) + 0.5) * TWO53_INV
                    st = (st + GOLDEN) & MASK
                    u2 = ((mix64(st) >> 11) + 0.5) * TWO53_INV
                    rad = math.sqrt(-2.0 * math.log(u1))
                    theta = TWO_PI * u2
                    nrm[2 * q] = rad * math.cos(theta)
                    if 2 * q + 1 < d:
                        nrm[2 * q + 1] = rad * math.sin(theta)

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
                                g += roots[r][j] * x[j]
                        gg = g * g
                        cum += (2.0 * kap / gg) if gg > 0.0 else math.inf
                        if target < cum:
                            root = r
                            break

                c = math.sqrt(2.0 * h)
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
                            g += roots[root][j] * x[j]
                        for j in range(d):
                            x[j] -= g * roots[root][j]
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
                            g += roots[r][j] * x[j]
                    w = abs(g) * INV_SQRT2
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
        if save_skeleton:
            if flag:
                # freeze the remaining rows at the stall state; the path is
                # excluded from statistics but must stay finite
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


def run_radial(x0, T, dt, seed, stream0, n, n_base, kappas, save_skeleton,
               states, flagged, substeps, halvings, minwall):
    """Advance n radial paths in the positive chamber (axis systems only):
    drift 2 kappa_i / x_i per coordinate, proposals that leave the chamber
    are rejected and the step halved."""
    d = len(x0)
    x0 = [float(v) for v in x0]
    kappas = [float(v) for v in kappas]
    pairs = (d + 1) // 2

    for p in range(n):
        st = stream_init(seed, stream0 + p)
        x = list(x0)
        flag = 0
        subs = 0
        halved = 0
        minw = math.inf
        for j in range(d):
            if x[j] < minw:
                minw = x[j]
        if save_skeleton:
            for j in range(d):
                states[p, 0, j] = x[j]

        t_base = 0.0
        for k in range(n_base):
            t_next = T if k == n_base - 1 else (k + 1) * dt
            rem = t_next - t_base
            while rem > 0.0:
                h = rem
                # keep the drift increment below half the wall distance:
                # 2 kappa_j h / x_j <= x_j / 2, or the Euler linearization
                # can hurl a near-wall path far into the chamber
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
                    nrm = [0.0] * d
                    for q in range(pairs):
                        st = (st + GOLDEN) & MASK
                        u1 = ((mix64(st) >> 11) + 0.5) * TWO53_INV
                        st = (st + GOLDEN) & MASK
                        u2 = ((mix64(st) >> 11) + 0.5) * TWO53_INV
                        rad = math.sqrt(-2.0 * math.log(u1))
                        theta = TWO_PI * u2
                        nrm[2 * q] = rad * math.cos(theta)
                        if 2 * q + 1 < d:
                            nrm[2 * q + 1] = rad * math.sin(theta)
                    c = math.sqrt(2.0 * h)
                    ok = 1
                    y = [0.0] * d
                    for j in range(d):
                        y[j] = x[j] + (2.0 * kappas[j] / x[j]) * h + c * nrm[j]
                        if y[j] <= 0.0:
                            ok = 0
                    if ok:
                        break
                    h *= 0.5
                    halved += 1
                if flag:
                    break
                x = y
                for j in range(d):
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
