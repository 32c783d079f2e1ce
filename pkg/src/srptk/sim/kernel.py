"""Event-exact M/G/k kernel (numba).

State lives in plain arrays so a run can be suspended whenever the kernel
needs the next chunk of arrivals or more job slots, and then resumed.

Jobs in service sit in ``srv`` (at most k slots).  Waiting jobs sit in a
binary min-heap ordered by (key, id).  A waiting job's key does not change,
so the heap never needs re-keying:

    SRPT remaining   PSJF size   RS size*remaining   FB quantized age   FCFS 0
"""

from __future__ import annotations

import numpy as np
from numba import njit

SRPT, PSJF, RS, FB, FCFS = 0, 1, 2, 3, 4
POLICY_CODES = {"SRPT": SRPT, "PSJF": PSJF, "RS": RS, "FB": FB, "FCFS": FCFS}

# kernel return codes
DONE, NEED_ARRIVALS, NEED_SLOTS = 0, 1, 2

# integer state
I_NSYS, I_NSRV, I_HEAPN, I_FREEN, I_NEXT_ID, I_CHUNK0, I_NDONE = 0, 1, 2, 3, 4, 5, 6
I_NTARGET_DONE, I_EVENTS, I_BAD_WORK, I_BAD_ORDER, I_MAXN, I_FINAL = 7, 8, 9, 10, 11, 12
N_ISTATE = 13
# float state
F_T, F_TQ, F_ARRWORK, F_SERVED, F_T0, F_T1, F_NSYS_INT, F_BUSY_INT = 0, 1, 2, 3, 4, 5, 6, 7
F_SPAN, F_DROPPED, F_C_ARR, F_C_SERVED = 8, 9, 10, 11
N_FSTATE = 12
# rows of the per-x integral table
X_RELWORK_LE, X_RELWORK_BAR, X_RELBUSY_LE, X_RELBUSY_ORIG = 0, 1, 2, 3
N_XROWS = 4

QUANT_BITS = 2.0**20


@njit(cache=True, inline="always")
def _before(k1, i1, k2, i2):
    return k1 < k2 or (k1 == k2 and i1 < i2)


@njit(cache=True)
def heap_push(heap, hn, keys, ids, slot):
    i = hn
    heap[i] = slot
    while i > 0:
        p = (i - 1) >> 1
        a, b = heap[i], heap[p]
        if _before(keys[a], ids[a], keys[b], ids[b]):
            heap[i], heap[p] = b, a
            i = p
        else:
            break
    return hn + 1


@njit(cache=True)
def heap_pop(heap, hn, keys, ids):
    top = heap[0]
    hn -= 1
    if hn > 0:
        heap[0] = heap[hn]
        i = 0
        while True:
            l = 2 * i + 1
            if l >= hn:
                break
            c = l
            r = l + 1
            if r < hn and _before(keys[heap[r]], ids[heap[r]], keys[heap[l]], ids[heap[l]]):
                c = r
            if _before(keys[heap[c]], ids[heap[c]], keys[heap[i]], ids[heap[i]]):
                heap[i], heap[c] = heap[c], heap[i]
                i = c
            else:
                break
    return top, hn


@njit(cache=True, inline="always")
def live_key(policy, rem, size, att, res):
    if policy == SRPT:
        return rem
    if policy == PSJF:
        return size
    if policy == RS:
        return size * rem
    if policy == FB:
        return np.floor(att / res + 0.5)
    return 0.0


@njit(cache=True, inline="always")
def _trunc_rem(rem, size, x):
    # time-to-complete-or-reach-age-x, in size units
    att = size - rem
    if att >= x:
        return 0.0
    return min(size, x) - att


@njit(cache=True)
def _unserved_add(sign, rem, size, x_grid, u_le, u_bar):
    for j in range(x_grid.shape[0]):
        x = x_grid[j]
        if rem <= x:
            u_le[j] += sign * rem
        u_bar[j] += sign * _trunc_rem(rem, size, x)


@njit(cache=True)
def _integrate(t, lo, hi, k, srv, nsrv, s_rem, s_size, x_grid, u_le, u_bar, xacc):
    L = hi - lo
    for j in range(x_grid.shape[0]):
        xacc[X_RELWORK_LE, j] += u_le[j] * L
        xacc[X_RELWORK_BAR, j] += u_bar[j] * L
    for q in range(nsrv):
        s = srv[q]
        size = s_size[s]
        ra = s_rem[s] - (lo - t) / k
        rb = s_rem[s] - (hi - t) / k
        if rb < 0.0:
            rb = 0.0
        aa = size - ra
        for j in range(x_grid.shape[0]):
            x = x_grid[j]
            if ra <= x:
                xacc[X_RELWORK_LE, j] += 0.5 * (ra + rb) * L
                xacc[X_RELBUSY_LE, j] += L
            elif rb < x:
                Lx = k * (x - rb)
                xacc[X_RELWORK_LE, j] += 0.5 * (x + rb) * Lx
                xacc[X_RELBUSY_LE, j] += Lx
            if size <= x:
                xacc[X_RELBUSY_ORIG, j] += L
            if aa < x:
                ab = size - rb
                m = min(size, x)
                if ab <= x:
                    xacc[X_RELWORK_BAR, j] += (m - 0.5 * (aa + ab)) * L
                else:
                    Lx = k * (x - aa)
                    xacc[X_RELWORK_BAR, j] += 0.5 * (x - aa) * Lx


@njit(cache=True)
def _fb_next_quantum(t, k, q, res, srv, nsrv, heap, hn, s_key, s_id, s_rem, s_size):
    """Earliest grid point t + m*k*q (m >= 1) at which the served set changes."""
    if hn == 0 or nsrv == 0:
        return np.inf
    u = heap[0]
    ku, iu = s_key[u], s_id[u]
    amax = -1.0
    for p in range(nsrv):
        a = s_size[srv[p]] - s_rem[srv[p]]
        if a > amax:
            amax = a
    m = np.floor((ku * res - amax) / q) - 1.0
    if m < 1.0:
        m = 1.0
    while True:
        for p in range(nsrv):
            s = srv[p]
            a = s_size[s] - s_rem[s] + m * q
            if _before(ku, iu, np.floor(a / res + 0.5), s_id[s]):
                return t + m * k * q
        m += 1.0


@njit(cache=True)
def _order_ok(policy, k, q, res, srv, nsrv, heap, hn, s_key, s_id, s_rem, s_size):
    if hn == 0:
        return True
    if nsrv < k:
        return False
    u = heap[0]
    if policy == FB:
        amin = s_key[u] * res
        for p in range(nsrv):
            s = srv[p]
            if s_size[s] - s_rem[s] > amin + q + 1e-9 * (1.0 + amin):
                return False
        return True
    for p in range(nsrv):
        s = srv[p]
        kk = live_key(policy, s_rem[s], s_size[s], 0.0, res)
        if _before(s_key[u], s_id[u], kk, s_id[s]):
            return False
    return True


@njit(cache=True)
def advance(
    policy, k, q, check,
    ist, fst,
    ch_t, ch_s, ch_len,
    s_rem, s_size, s_arr, s_first, s_key, s_id,
    srv, heap, free,
    x_grid, u_le, u_bar, xacc,
    n_target, n_warm, n_batches, bin_edges, bat_T, bat_W, bat_n,
    job_comp, job_first,
):
    """Run events until done or until more arrivals/slots are needed."""
    res = q / QUANT_BITS if q > 0.0 else 1.0
    t = fst[F_T]
    tq = fst[F_TQ]
    nsys = ist[I_NSYS]
    nsrv = ist[I_NSRV]
    hn = ist[I_HEAPN]
    freen = ist[I_FREEN]
    next_id = ist[I_NEXT_ID]
    chunk0 = ist[I_CHUNK0]
    n_meas = n_target - n_warm
    nbins = bin_edges.shape[0] - 1
    status = DONE
    kf = float(k)

    while True:
        if ist[I_NTARGET_DONE] >= n_target:
            status = DONE
            break
        ai = next_id - chunk0
        if ai < ch_len:
            ta = ch_t[ai]
        elif ist[I_FINAL] == 1:
            ta = np.inf
        else:
            status = NEED_ARRIVALS
            break

        tc = np.inf
        cmin = -1
        for p in range(nsrv):
            s = srv[p]
            tt = t + kf * s_rem[s]
            if tt < tc:
                tc = tt
                cmin = p
        if policy != FB:
            tq = np.inf
        tn = min(ta, min(tc, tq))
        if tn == np.inf:
            status = DONE
            break

        if check == 1 and not _order_ok(policy, k, q, res, srv, nsrv, heap, hn, s_key, s_id, s_rem, s_size):
            ist[I_BAD_ORDER] += 1

        # time integrals over the measurement window
        lo = max(t, fst[F_T0])
        hi = min(tn, fst[F_T1])
        if hi > lo:
            _integrate(t, lo, hi, kf, srv, nsrv, s_rem, s_size, x_grid, u_le, u_bar, xacc)
            fst[F_NSYS_INT] += nsys * (hi - lo)
            fst[F_BUSY_INT] += nsrv * (hi - lo) / kf
            fst[F_SPAN] += hi - lo

        dt = tn - t
        if dt > 0.0:
            for p in range(nsrv):
                s = srv[p]
                s_rem[s] -= dt / kf
            # cumulative work done, Kahan-summed
            y = nsrv * dt / kf - fst[F_C_SERVED]
            z = fst[F_SERVED] + y
            fst[F_C_SERVED] = (z - fst[F_SERVED]) - y
            fst[F_SERVED] = z
        t = tn
        ist[I_EVENTS] += 1

        # completions
        p = 0
        while p < nsrv:
            s = srv[p]
            if (tn == tc and p == cmin) or s_rem[s] <= 1e-12 * (1.0 + s_size[s]):
                if tn == tc and p == cmin:
                    cmin = -2
                fst[F_DROPPED] += s_rem[s]
                s_rem[s] = 0.0
                jid = s_id[s]
                ist[I_NDONE] += 1
                if jid < n_target:
                    ist[I_NTARGET_DONE] += 1
                if jid < job_comp.shape[0]:
                    job_comp[jid] = t
                    job_first[jid] = s_first[s]
                if jid >= n_warm and jid < n_target:
                    b = ((jid - n_warm) * n_batches) // n_meas
                    resp = t - s_arr[s]
                    wait = s_first[s] - s_arr[s]
                    bat_T[0, b] += resp
                    bat_W[0, b] += wait
                    bat_n[0, b] += 1
                    if nbins > 0:
                        bi = np.searchsorted(bin_edges, s_size[s]) - 1
                        if bi >= 0 and bi < nbins:
                            bat_T[bi + 1, b] += resp
                            bat_W[bi + 1, b] += wait
                            bat_n[bi + 1, b] += 1
                # free the slot and drop it from the served set
                free[freen] = s
                freen += 1
                nsys -= 1
                nsrv -= 1
                srv[p] = srv[nsrv]
                if cmin == nsrv:
                    cmin = p
            else:
                p += 1

        # arrivals at this instant
        ai = next_id - chunk0
        need_slots = False
        while ai < ch_len and ch_t[ai] <= t:
            if freen == 0:
                need_slots = True
                break
            freen -= 1
            s = free[freen]
            sz = ch_s[ai]
            s_rem[s] = sz
            s_size[s] = sz
            s_arr[s] = ch_t[ai]
            s_first[s] = -1.0
            s_id[s] = next_id
            s_key[s] = live_key(policy, sz, sz, 0.0, res)
            y = sz - fst[F_C_ARR]
            z = fst[F_ARRWORK] + y
            fst[F_C_ARR] = (z - fst[F_ARRWORK]) - y
            fst[F_ARRWORK] = z
            hn = heap_push(heap, hn, s_key, s_id, s)
            _unserved_add(1.0, sz, sz, x_grid, u_le, u_bar)
            nsys += 1
            next_id += 1
            ai += 1
        if nsys > ist[I_MAXN]:
            ist[I_MAXN] = nsys
        if need_slots:
            status = NEED_SLOTS
            break

        # rebalance: fill idle servers, then swap while a waiting job beats the worst served one
        while hn > 0 and nsrv < k:
            u, hn = heap_pop(heap, hn, s_key, s_id)
            _unserved_add(-1.0, s_rem[u], s_size[u], x_grid, u_le, u_bar)
            srv[nsrv] = u
            nsrv += 1
        while hn > 0:
            u = heap[0]
            worst = -1
            wk = 0.0
            wi = -1
            for p in range(nsrv):
                s = srv[p]
                kk = live_key(policy, s_rem[s], s_size[s], s_size[s] - s_rem[s], res)
                if worst < 0 or _before(wk, wi, kk, s_id[s]):
                    worst = p
                    wk = kk
                    wi = s_id[s]
            if not _before(s_key[u], s_id[u], wk, wi):
                break
            u, hn = heap_pop(heap, hn, s_key, s_id)
            _unserved_add(-1.0, s_rem[u], s_size[u], x_grid, u_le, u_bar)
            s = srv[worst]
            s_key[s] = wk
            hn = heap_push(heap, hn, s_key, s_id, s)
            _unserved_add(1.0, s_rem[s], s_size[s], x_grid, u_le, u_bar)
            srv[worst] = u
        for p in range(nsrv):
            s = srv[p]
            if s_first[s] < 0.0:
                s_first[s] = t

        if policy == FB:
            tq = _fb_next_quantum(t, kf, q, res, srv, nsrv, heap, hn, s_key, s_id, s_rem, s_size)

        if check == 1:
            if not _order_ok(policy, k, q, res, srv, nsrv, heap, hn, s_key, s_id, s_rem, s_size):
                ist[I_BAD_ORDER] += 1
            tot = 0.0
            for p in range(nsrv):
                tot += s_rem[srv[p]]
            for p in range(hn):
                tot += s_rem[heap[p]]
            # arrived = remaining + served (+ completion rounding residue)
            gap = fst[F_ARRWORK] - tot - fst[F_SERVED] - fst[F_DROPPED]
            if abs(gap) > 1e-9 + 1e-14 * fst[F_ARRWORK]:
                ist[I_BAD_WORK] += 1

    fst[F_T] = t
    fst[F_TQ] = tq
    ist[I_NSYS] = nsys
    ist[I_NSRV] = nsrv
    ist[I_HEAPN] = hn
    ist[I_FREEN] = freen
    ist[I_NEXT_ID] = next_id
    return status
