"""Compiled inner loops for the three collision operators.

Every kernel fills rows ``i0 <= i < i1`` of thread-private buffers indexed by
the first interaction index, so a caller may hand disjoint row ranges to
different threads and still reduce the rows in a fixed order.

Accumulator row layout (length N + 3)::

    [0]        condensate node (omega = 0)
    [1 .. N]   grid cells
    [N + 1]    overflow mass
    [N + 2]    overflow energy

Deposit targets are located on the extended node list
``ext = [0, rep_0, ..., rep_{N-1}, omega_max]`` and split between two
neighbouring nodes so that mass and first moment are both preserved.
Targets above ``omega_max`` go to overflow with their exact energy.
"""

from numba import njit

BEYOND = -1


@njit(cache=True, nogil=True)
def locate(ext, t):
    """Return (lower node, weight on lower node) for target frequency ``t``."""
    top = ext.size - 1
    if t > ext[top]:
        return BEYOND, 0.0
    # largest k with ext[k] <= t, clipped to 0
    lo = 0
    hi = top
    while hi - lo > 1:
        mid = (lo + hi) >> 1
        if ext[mid] <= t:
            lo = mid
        else:
            hi = mid
    if ext[top] <= t:
        return top, 1.0
    return lo, (ext[lo + 1] - t) / (ext[lo + 1] - ext[lo])


@njit(cache=True, nogil=True)
def deposit(acc, ext, node, lam, t, amount):
    n_ext = ext.size
    ovf = n_ext - 1
    if node == BEYOND:
        acc[ovf] += amount
        acc[ovf + 1] += amount * t
        return
    a_lo = lam * amount
    acc[node] += a_lo
    if node == ovf:
        acc[ovf + 1] += a_lo * ext[ovf]
        return
    if lam < 1.0:
        a_hi = amount - a_lo
        acc[node + 1] += a_hi
        if node + 1 == ovf:
            acc[ovf + 1] += a_hi * ext[ovf]


@njit(cache=True, nogil=True)
def _pow0(x, coef, expo):
    if x <= 0.0:
        return 0.0
    return coef * x ** expo


@njit(cache=True, nogil=True)
def c12_rows(i0, i1, m, r, ext, bP, P_sum, P_dif, sum_node, sum_lam,
             dif_node, dif_lam, c12, acc, loss, gross):
    n = m.size
    for i in range(i0, i1):
        mi = m[i]
        if mi == 0.0:
            continue
        row = acc[i]
        lrow = loss[i]
        g = 0.0
        for j in range(n):
            mj = m[j]
            if mj == 0.0:
                continue
            base = mi * mj * bP[i] * bP[j]
            # merge: (i, j) -> i + j, every ordered pair
            rho = c12 * base * P_sum[i, j]
            if rho != 0.0:
                t = r[i] + r[j]
                row[1 + i] -= rho
                row[1 + j] -= rho
                lrow[i] += rho
                lrow[j] += rho
                deposit(row, ext, sum_node[i, j], sum_lam[i, j], t, rho)
                g += rho * t
            # split: i -> j + (i - j), rep_i > rep_j
            if j < i:
                rho = 2.0 * c12 * base * P_dif[i, j]
                if rho != 0.0:
                    t = r[i] - r[j]
                    row[1 + i] -= rho
                    lrow[i] += rho
                    row[1 + j] += rho
                    deposit(row, ext, dif_node[i, j], dif_lam[i, j], t, rho)
                    g += rho * r[i]
        gross[i] += g


@njit(cache=True, nogil=True)
def c22_rows(i0, i1, m, r, ext, bR, kk, R_coef, R_expo, c_omega, theta,
             gamma, use_ro, c22, acc, loss, gross):
    n = m.size
    rg = r ** gamma
    for i in range(i0, i1):
        mi = m[i]
        if mi == 0.0:
            continue
        row = acc[i]
        lrow = loss[i]
        g = 0.0
        for j in range(i, n):
            mj = m[j]
            if mj == 0.0:
                continue
            mult = 1.0 if j == i else 2.0
            rg_ij = max(rg[i], rg[j])
            s = r[i] + r[j]
            kij = min(kk[i], kk[j])
            rmin_ij = min(r[i], r[j])
            ro_ij = max(r[i], r[j])
            pref = mult * c22 * mi * mj * bR[i] * bR[j] / (kk[i] * kk[j])
            for l in range(n):
                if r[l] >= s:
                    break
                ml = m[l]
                if ml == 0.0:
                    continue
                t = s - r[l]
                if t <= 0.0:
                    continue
                # k and the max-frequency factor only need a fresh power
                # when t is the extreme of the four frequencies
                if t < min(rmin_ij, r[l]):
                    kmin = (t / c_omega) ** theta
                else:
                    kmin = min(kij, kk[l])
                w = pref * ml * bR[l] / kk[l] * (R_coef * t ** R_expo) * kmin
                if use_ro:
                    if t > max(ro_ij, r[l]):
                        w *= t ** gamma
                    else:
                        w *= max(rg_ij, rg[l])
                if w == 0.0:
                    continue
                row[1 + i] -= w
                row[1 + j] -= w
                lrow[i] += w
                lrow[j] += w
                row[1 + l] += w
                node, lam = locate(ext, t)
                deposit(row, ext, node, lam, t, w)
                g += w * s
        gross[i] += g


@njit(cache=True, nogil=True)
def c31_rows(i0, i1, m, r, ext, bQ, Q_coef, Q_expo, c31, acc, loss, gross):
    n = m.size
    for i in range(i0, i1):
        mi = m[i]
        if mi == 0.0:
            continue
        row = acc[i]
        lrow = loss[i]
        g = 0.0
        # merge: unordered i <= j <= l -> sum, multiplicity 1 / 3 / 6
        for j in range(i, n):
            mj = m[j]
            if mj == 0.0:
                continue
            for l in range(j, n):
                ml = m[l]
                if ml == 0.0:
                    continue
                if i == j and j == l:
                    mult = 1.0
                elif i == j or j == l:
                    mult = 3.0
                else:
                    mult = 6.0
                t = (r[i] + r[j]) + r[l]
                rho = mult * c31 * mi * mj * ml * bQ[i] * bQ[j] * bQ[l] * (Q_coef * t ** Q_expo)
                row[1 + i] -= rho
                row[1 + j] -= rho
                row[1 + l] -= rho
                lrow[i] += rho
                lrow[j] += rho
                lrow[l] += rho
                node, lam = locate(ext, t)
                deposit(row, ext, node, lam, t, rho)
                g += rho * t
        # split: i -> j + l + (i - j - l), unordered j <= l
        for j in range(n):
            if r[j] >= r[i]:
                break
            mj = m[j]
            if mj == 0.0:
                continue
            for l in range(j, n):
                t = (r[i] - r[j]) - r[l]
                if t <= 0.0:
                    break
                ml = m[l]
                if ml == 0.0:
                    continue
                mult = 1.0 if l == j else 2.0
                rho = (mult * 3.0 * c31 * mi * mj * ml * bQ[i] * bQ[j] * bQ[l]
                       * (Q_coef * t ** Q_expo))
                row[1 + i] -= rho
                lrow[i] += rho
                row[1 + j] += rho
                row[1 + l] += rho
                node, lam = locate(ext, t)
                deposit(row, ext, node, lam, t, rho)
                g += rho * r[i]
        gross[i] += g
