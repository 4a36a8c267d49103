"""Compiled event loop for the lattice simulation.

Everything here operates on plain numpy arrays so numba can compile it.
The event schedule is a complete binary partial-sum tree stored in one
float64 array ``tree`` of length 2*tsize: leaves live at tsize..tsize+K-1
(K = n entries: bonds 1..n-2 at offsets 0..n-3, then the left and right
boundary flips), internal node i holds tree[2i] + tree[2i+1], and tree[1]
is the total.  Parent nodes are always recomputed from their children, so
an incrementally maintained tree is bit-identical to a fresh rebuild.

Leaf values are the speeded-up rates: n^2 * ((c + n^(a-2)) * asum) for a
bond, n^2 * (m/n^theta) * I for a flip.  Uniform variates come from a
caller-supplied buffer (two per event: waiting time, selection), so the
random stream stays under the caller's counter-based generator.
"""

from __future__ import annotations

import numpy as np
from numba import njit

# return codes of advance()
STOP = 0
REFILL = 1
ABSORBED = 2
REBUILD = 3
MAXEVENTS = 4


@njit(cache=True, inline="always")
def site_val(occ, x, n, alpha, beta):
    if x < 0 or x > n:
        return 0.0
    if x == 0:
        return alpha
    if x == n:
        return beta
    return float(occ[x])


@njit(cache=True)
def bond_rate(occ, b, n, alpha, beta, big_m, s_ssep, n2):
    """Scheduled rate of the exchange across bond {b, b+1}."""
    if occ[b] == occ[b + 1]:
        return 0.0
    if big_m == 2:
        c = site_val(occ, b - 1, n, alpha, beta) + site_val(occ, b + 2, n, alpha, beta)
    else:
        vm2 = site_val(occ, b - 2, n, alpha, beta)
        vm1 = site_val(occ, b - 1, n, alpha, beta)
        vp2 = site_val(occ, b + 2, n, alpha, beta)
        vp3 = site_val(occ, b + 3, n, alpha, beta)
        c = vm2 * vm1 + vm1 * vp2 + vp2 * vp3
    return n2 * (c + s_ssep)


@njit(cache=True)
def flip_rate(occ, z, n, alpha, beta, res_rate, n2):
    """Scheduled rate of the reservoir flip at boundary site z."""
    b = alpha if z == 1 else beta
    if occ[z] == 0:
        return n2 * res_rate * b
    return n2 * res_rate * (1.0 - b)


@njit(cache=True)
def tau_of(occ, x, n, alpha, beta, s_ssep):
    """Local gradient function whose discrete gradient is the bulk current."""
    vm = site_val(occ, x - 1, n, alpha, beta)
    v0 = site_val(occ, x, n, alpha, beta)
    vp = site_val(occ, x + 1, n, alpha, beta)
    return vm * v0 + v0 * vp - vm * vp + s_ssep * v0


@njit(cache=True, inline="always")
def tree_set(tree, tsize, k, val):
    i = tsize + k
    tree[i] = val
    i >>= 1
    while i >= 1:
        tree[i] = tree[2 * i] + tree[2 * i + 1]
        i >>= 1


@njit(cache=True, inline="always")
def _tree_fix_range(tree, tsize, klo, khi):
    """Recompute ancestors of the (already written) leaves klo..khi."""
    lo = (tsize + klo) >> 1
    hi = (tsize + khi) >> 1
    while True:
        for i in range(lo, hi + 1):
            tree[i] = tree[2 * i] + tree[2 * i + 1]
        if lo <= 1:
            break
        lo >>= 1
        hi >>= 1


@njit(cache=True)
def tree_build(tree, tsize, K, occ, n, alpha, beta, big_m, s_ssep, res_rate, n2):
    """Recompute every leaf from the configuration and rebuild internals."""
    for i in range(2 * tsize):
        tree[i] = 0.0
    for k in range(K):
        if k < n - 2:
            tree[tsize + k] = bond_rate(occ, k + 1, n, alpha, beta, big_m, s_ssep, n2)
        elif k == n - 2:
            tree[tsize + k] = flip_rate(occ, 1, n, alpha, beta, res_rate, n2)
        else:
            tree[tsize + k] = flip_rate(occ, n - 1, n, alpha, beta, res_rate, n2)
    for i in range(tsize - 1, 0, -1):
        tree[i] = tree[2 * i] + tree[2 * i + 1]


@njit(cache=True, inline="always")
def tree_pick(tree, tsize, r):
    i = 1
    while i < tsize:
        i <<= 1
        if r >= tree[i]:
            r -= tree[i]
            i += 1
    return i - tsize


@njit(cache=True, inline="always")
def _bond_leaf(occ, j, n, alpha, beta, big_m, s_ssep, n2):
    if occ[j] == occ[j + 1]:
        return 0.0
    if big_m == 2:
        if 2 <= j <= n - 3:
            return n2 * (occ[j - 1] + occ[j + 2] + s_ssep)
        c = site_val(occ, j - 1, n, alpha, beta) + site_val(occ, j + 2, n, alpha, beta)
        return n2 * (c + s_ssep)
    if 3 <= j <= n - 4:
        c = float(
            occ[j - 2] * occ[j - 1] + occ[j - 1] * occ[j + 2] + occ[j + 2] * occ[j + 3]
        )
        return n2 * (c + s_ssep)
    vm2 = site_val(occ, j - 2, n, alpha, beta)
    vm1 = site_val(occ, j - 1, n, alpha, beta)
    vp2 = site_val(occ, j + 2, n, alpha, beta)
    vp3 = site_val(occ, j + 3, n, alpha, beta)
    return n2 * (vm2 * vm1 + vm1 * vp2 + vp2 * vp3 + s_ssep)


@njit(cache=True, inline="always")
def _refresh_bonds(tree, tsize, occ, blo, bhi, n, alpha, beta, big_m, s_ssep, n2):
    """Rewrite the leaves of bonds blo..bhi (clipped) and fix their ancestors."""
    if blo < 1:
        blo = 1
    if bhi > n - 2:
        bhi = n - 2
    if bhi < blo:
        return
    for j in range(blo, bhi + 1):
        tree[tsize + j - 1] = _bond_leaf(occ, j, n, alpha, beta, big_m, s_ssep, n2)
    _tree_fix_range(tree, tsize, blo - 1, bhi - 1)


@njit(cache=True, inline="always")
def _refresh_after_exchange(tree, tsize, occ, b, n, alpha, beta, big_m, s_ssep, n2):
    """Minimal leaf refresh after the swap at bond b.

    Bond b's own rate is invariant under its own exchange (the indicator
    and the neighbour pattern both survive the swap), and an outer bond
    whose exchange indicator is zero had rate zero before and after, so
    only the bonds that can actually change get rewritten.
    """
    jlo = b - big_m
    jhi = b + big_m
    if jlo < 1:
        jlo = 1
    if jhi > n - 2:
        jhi = n - 2
    lo = 1 << 60
    hi = -1
    for j in range(jlo, jhi + 1):
        if j == b:
            continue
        if (j < b - 1 or j > b + 1) and occ[j] == occ[j + 1]:
            continue
        tree[tsize + j - 1] = _bond_leaf(occ, j, n, alpha, beta, big_m, s_ssep, n2)
        if j - 1 < lo:
            lo = j - 1
        if j - 1 > hi:
            hi = j - 1
    if hi >= 0:
        _tree_fix_range(tree, tsize, lo, hi)


@njit(cache=True, inline="always")
def _touch_site(occ, occ_int, lazy_t, x, t):
    if occ[x] == 1:
        occ_int[x] += t - lazy_t[x]
    lazy_t[x] = t


@njit(cache=True)
def _dyn_site_change(
    occ, n, alpha, beta, s_ssep, tau, wb, gcoef, dyn, xlo, xhi, touched_boundary
):
    if xlo < 1:
        xlo = 1
    if xhi > n - 1:
        xhi = n - 1
    for x in range(xlo, xhi + 1):
        new = tau_of(occ, x, n, alpha, beta, s_ssep)
        d = new - tau[x]
        if d != 0.0:
            tau[x] = new
            dyn[0] += wb[x] * d
            if x == 1:
                dyn[1] += gcoef[0] * d
            if x == n - 1:
                dyn[1] -= gcoef[1] * d
    if touched_boundary:
        dyn[2] = gcoef[2] * (alpha - occ[1]) + gcoef[3] * (beta - occ[n - 1])


@njit(cache=True)
def advance(
    occ,
    tree,
    tsize,
    n,
    big_m,
    alpha,
    beta,
    s_ssep,
    res_rate,
    n2,
    t_state,       # float64[1]: current macroscopic time
    t_stop,
    u,             # uniform buffer
    ipos,          # int64[1]: next unread position in u
    occ_int,       # float64[n+1]: lazily accumulated occupation times
    lazy_t,        # float64[n+1]: per-site last-flush time
    flips,         # int64[4]: inserted-left, removed-left, inserted-right, removed-right
    counts,        # int64[K]: events executed per schedule entry
    dyn_on,
    tau,           # float64[n+1]
    wb,            # float64[n]: bulk weights per site (index by x)
    gcoef,         # float64[4]: grad-left, grad-right, reservoir-left, reservoir-right
    dyn,           # float64[6]: integrands (bulk, grad, res) then integrals
    ctrs,          # int64[2]: events until rebuild, total events done
    max_events,
):
    """Run events until t_stop / buffer exhaustion / absorption / rebuild due.

    Returns one of the module-level codes; scalar state is synced back to
    t_state, ipos and ctrs before every return.
    """
    t = t_state[0]
    pos = ipos[0]
    K = n
    nbuf = len(u)
    done = 0
    while True:
        total = tree[1]
        if total <= 0.0:
            t_state[0] = t
            ipos[0] = pos
            return ABSORBED
        if pos + 2 > nbuf:
            t_state[0] = t
            ipos[0] = pos
            return REFILL
        dt = -np.log(1.0 - u[pos]) / total
        if t + dt >= t_stop:
            if dyn_on:
                seg = t_stop - t
                dyn[3] += dyn[0] * seg
                dyn[4] += dyn[1] * seg
                dyn[5] += dyn[2] * seg
            t_state[0] = t_stop
            ipos[0] = pos + 1
            return STOP
        if dyn_on:
            dyn[3] += dyn[0] * dt
            dyn[4] += dyn[1] * dt
            dyn[5] += dyn[2] * dt
        t += dt
        r = u[pos + 1] * total
        pos += 2
        k = tree_pick(tree, tsize, r)
        if k >= K or tree[tsize + k] <= 0.0:
            for j in range(K):
                if tree[tsize + j] > 0.0:
                    k = j
                    break
        counts[k] += 1
        if k < n - 2:
            b = k + 1
            _touch_site(occ, occ_int, lazy_t, b, t)
            _touch_site(occ, occ_int, lazy_t, b + 1, t)
            tmp = occ[b]
            occ[b] = occ[b + 1]
            occ[b + 1] = tmp
            _refresh_after_exchange(
                tree, tsize, occ, b, n, alpha, beta, big_m, s_ssep, n2
            )
            touched = False
            if b == 1:
                tree_set(tree, tsize, n - 2, flip_rate(occ, 1, n, alpha, beta, res_rate, n2))
                touched = True
            if b + 1 == n - 1:
                tree_set(tree, tsize, n - 1, flip_rate(occ, n - 1, n, alpha, beta, res_rate, n2))
                touched = True
            if dyn_on:
                _dyn_site_change(
                    occ, n, alpha, beta, s_ssep, tau, wb, gcoef, dyn, b - 1, b + 2, touched
                )
        else:
            z = 1 if k == n - 2 else n - 1
            _touch_site(occ, occ_int, lazy_t, z, t)
            if occ[z] == 0:
                occ[z] = 1
                flips[0 if z == 1 else 2] += 1
            else:
                occ[z] = 0
                flips[1 if z == 1 else 3] += 1
            _refresh_bonds(
                tree, tsize, occ, z - big_m, z + big_m - 1, n, alpha, beta, big_m, s_ssep, n2
            )
            tree_set(
                tree,
                tsize,
                n - 2 if z == 1 else n - 1,
                flip_rate(occ, z, n, alpha, beta, res_rate, n2),
            )
            if dyn_on:
                _dyn_site_change(
                    occ, n, alpha, beta, s_ssep, tau, wb, gcoef, dyn, z - 1, z + 1, True
                )
        done += 1
        ctrs[0] -= 1
        ctrs[1] += 1
        if ctrs[0] <= 0:
            t_state[0] = t
            ipos[0] = pos
            return REBUILD
        if done >= max_events:
            t_state[0] = t
            ipos[0] = pos
            return MAXEVENTS
