"""Compiled loops for coupled-system traces and tagged-job audits.

These use a dense per-job representation (arrays indexed by job id) and
re-select the served set from scratch at each scheduling point, which keeps
them independent of the heap-based simulation kernel.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from ..sim.kernel import FB, PSJF, QUANT_BITS, RS, SRPT

# relevance of a job to threshold x in a coupled trace
REL_REM, REL_ORIG, REL_PROD, REL_TRUNC = 0, 1, 2, 3
# relevance of job l to a tagged job j in the audit
AUD_REM, AUD_ORIG, AUD_PROD, AUD_PROD_SHRINK, AUD_AGE = 0, 1, 2, 3, 4

INF = np.inf


@njit(cache=True, inline="always")
def _key(policy, rem, size, res):
    if policy == SRPT:
        return rem
    if policy == PSJF:
        return size
    if policy == RS:
        return size * rem
    if policy == FB:
        return np.floor((size - rem) / res + 0.5)
    return 0.0


@njit(cache=True)
def _select(policy, k, res, pres, npres, rem, size, srv, mark):
    """Put the k best present jobs (by key, then id) into srv; return count."""
    m = min(k, npres)
    for i in range(npres):
        mark[pres[i]] = 0
    for c in range(m):
        best = -1
        bk = 0.0
        for i in range(npres):
            j = pres[i]
            if mark[j] == 1:
                continue
            kk = _key(policy, rem[j], size[j], res)
            if best < 0 or kk < bk or (kk == bk and j < best):
                best = j
                bk = kk
        mark[best] = 1
        srv[c] = best
    return m


@njit(cache=True)
def _step_system(policy, k, q, res, t, tn, tc, cfirst, is_arrival_time,
                 pres, npres, rem, size, srv, nsrv, done_at, mark, tq, t_arr, ia_from, ia_to):
    """Advance one system to tn and handle its events there.

    Returns (npres, nsrv, tq, n_arrived_or_completed_flag).
    """
    dt = tn - t
    kf = float(k)
    if dt > 0.0:
        for p in range(nsrv):
            rem[srv[p]] -= dt / kf
    own = False
    # completions
    i = 0
    while i < npres:
        j = pres[i]
        served = False
        for p in range(nsrv):
            if srv[p] == j:
                served = True
                break
        if served and ((tn == tc and j == cfirst) or rem[j] <= 1e-12 * (1.0 + size[j])):
            rem[j] = 0.0
            done_at[j] = tn
            npres -= 1
            pres[i] = pres[npres]
            own = True
        else:
            i += 1
    for j in range(ia_from, ia_to):
        pres[npres] = j
        npres += 1
        own = True
    if tn == tq:
        own = True
    if own:
        nsrv = _select(policy, k, res, pres, npres, rem, size, srv, mark)
        if policy == FB and npres > k:
            tq = tn + kf * q
        else:
            tq = INF
    return npres, nsrv, tq


@njit(cache=True, inline="always")
def _rel_work(rel, xe, thr, rem, size):
    """(work, is_relevant) of one job for a trace entry."""
    eps = 1e-12 * (1.0 + xe)
    if rel == REL_REM:
        if rem <= xe + eps:
            return rem, True
        return 0.0, False
    if rel == REL_ORIG:
        if size <= xe:
            return rem, True
        return 0.0, False
    if rel == REL_PROD:
        if size * rem <= thr * (1.0 + 1e-12) + 1e-15:
            return rem, True
        return 0.0, False
    age = size - rem
    tr = min(size, xe) - age
    if tr > eps:
        return tr, True
    return 0.0, False


@njit(cache=True)
def _measure(rel, xe, thr, pres, npres, rem, size, srv, nsrv):
    """Right-limit relevant work, relevant job count, relevant served count."""
    w = 0.0
    n = 0
    for i in range(npres):
        j = pres[i]
        ww, r = _rel_work(rel, xe, thr, rem[j], size[j])
        if r:
            w += ww
            n += 1
    b = 0
    for p in range(nsrv):
        j = srv[p]
        ww, r = _rel_work(rel, xe, thr, rem[j], size[j])
        if r:
            b += 1
    return w, n, b


@njit(cache=True)
def _next_crossing(rel, xe, thr, t, k, srv, nsrv, rem, size):
    """Earliest relevance crossing among served jobs.

    A crossing that rounds to the current instant is applied in place by
    snapping the job onto its threshold, so stops always make progress.
    """
    best = INF
    for p in range(nsrv):
        j = srv[p]
        r = rem[j]
        target = -1.0
        if rel == REL_REM:
            if r > xe + 1e-12 * (1.0 + xe):
                target = xe
        elif rel == REL_PROD:
            if size[j] * r > thr * (1.0 + 1e-12) + 1e-15:
                target = thr / size[j]
        elif rel == REL_TRUNC:
            if size[j] > xe and size[j] - r < xe - 1e-12 * (1.0 + xe):
                target = size[j] - xe
        if target >= 0.0:
            tc = t + k * (r - target)
            if tc <= t:
                rem[j] = target
            elif tc < best:
                best = tc
    return best


@njit(cache=True)
def _grow2(a, n):
    b = np.empty((n, a.shape[1]))
    b[: a.shape[0]] = a
    return b


@njit(cache=True)
def coupled_trace(
    t_arr, sizes,
    pol1, k1, polk, kk, q,
    rel1, relk, xs, thr, bound, improved, mono,
    record, max_viol,
):
    """Run System 1 and System k side by side on one arrival sequence.

    For every entry e (x = xs[e]) the relevant-work difference
    delta = RelWork_k - RelWork_1 is evaluated at the left and right limit
    of every stop: arrivals, completions, FB checks of either system, and
    any relevance crossing in either system.

    Returns max_delta[e], n_viol[e], n_mono[e], n_improved[e], violations
    (rows: e, time, delta, bound, code) and, if record, the event table
    (rows: e, time, side, relwork1, relworkk, delta, relbusy_k, n_rel_k).
    """
    n = t_arr.shape[0]
    ne = xs.shape[0]
    res = q / QUANT_BITS if q > 0.0 else 1.0
    kf1 = float(k1)
    kfk = float(kk)

    rem1 = sizes.copy()
    remk = sizes.copy()
    done1 = np.full(n, np.nan)
    donek = np.full(n, np.nan)
    pres1 = np.zeros(n, dtype=np.int64)
    presk = np.zeros(n, dtype=np.int64)
    srv1 = np.zeros(k1, dtype=np.int64)
    srvk = np.zeros(kk, dtype=np.int64)
    mark = np.zeros(n, dtype=np.int64)
    np1 = 0
    npk = 0
    ns1 = 0
    nsk = 0
    tq1 = INF
    tqk = INF

    w1 = np.zeros(ne)
    wk = np.zeros(ne)
    nrel_k = np.zeros(ne, dtype=np.int64)
    busy1 = np.zeros(ne, dtype=np.int64)
    busyk = np.zeros(ne, dtype=np.int64)
    max_delta = np.zeros(ne)
    n_viol = np.zeros(ne, dtype=np.int64)
    n_mono = np.zeros(ne, dtype=np.int64)
    n_impr = np.zeros(ne, dtype=np.int64)
    viol = np.zeros((max(max_viol, 1), 5))
    nv = 0
    ev = np.zeros((1024 if record else 1, 8))
    nev = 0

    t = 0.0
    ia = 0
    stalls = 0
    while ia < n or np1 > 0 or npk > 0:
        ta = t_arr[ia] if ia < n else INF
        tc1 = INF
        c1 = -1
        for p in range(ns1):
            tt = t + kf1 * rem1[srv1[p]]
            if tt < tc1:
                tc1 = tt
                c1 = srv1[p]
        tck = INF
        ck = -1
        for p in range(nsk):
            tt = t + kfk * remk[srvk[p]]
            if tt < tck:
                tck = tt
                ck = srvk[p]
        tn = min(min(ta, tc1), min(tck, min(tq1, tqk)))
        for e in range(ne):
            tn = min(tn, _next_crossing(rel1[e], xs[e], thr[e], t, kf1, srv1, ns1, rem1, sizes))
            tn = min(tn, _next_crossing(relk[e], xs[e], thr[e], t, kfk, srvk, nsk, remk, sizes))
        if tn == INF:
            break
        dt = tn - t
        if dt <= 0.0:
            stalls += 1
            if stalls > 100 * (n + 10):
                max_delta[:] = np.nan
                break
        else:
            stalls = 0

        # left limits by linear extrapolation over the open interval
        for e in range(ne):
            d_right_prev = wk[e] - w1[e]
            l1 = max(w1[e] - busy1[e] * dt / kf1, 0.0)
            lk = max(wk[e] - busyk[e] * dt / kfk, 0.0)
            dl = lk - l1
            many_prev = nrel_k[e] >= kk
            if dl > max_delta[e]:
                max_delta[e] = dl
            tol = 1e-9 * (1.0 + bound[e])
            code = 0
            if dl > bound[e] + tol:
                code = 1
            if improved == 1 and dl > xs[e] * busyk[e] + tol:
                code = 2
            if code > 0:
                n_viol[e] += 1
                if nv < max_viol:
                    viol[nv, 0] = e
                    viol[nv, 1] = tn
                    viol[nv, 2] = dl
                    viol[nv, 3] = bound[e] if code == 1 else xs[e] * busyk[e]
                    viol[nv, 4] = code
                    nv += 1
                if code == 2:
                    n_impr[e] += 1
            if mono == 1 and many_prev and dl > d_right_prev + tol:
                n_mono[e] += 1
            if record == 1:
                if nev >= ev.shape[0]:
                    ev = _grow2(ev, 2 * ev.shape[0])
                ev[nev, 0] = e
                ev[nev, 1] = tn
                ev[nev, 2] = 0.0
                ev[nev, 3] = l1
                ev[nev, 4] = lk
                ev[nev, 5] = dl
                ev[nev, 6] = busyk[e]
                ev[nev, 7] = nrel_k[e]
                nev += 1
            w1[e] = l1
            wk[e] = lk

        ia_to = ia
        while ia_to < n and t_arr[ia_to] <= tn:
            ia_to += 1
        np1, ns1, tq1 = _step_system(pol1, k1, q, res, t, tn, tc1, c1, False,
                                     pres1, np1, rem1, sizes, srv1, ns1, done1, mark, tq1, t_arr, ia, ia_to)
        npk, nsk, tqk = _step_system(polk, kk, q, res, t, tn, tck, ck, False,
                                     presk, npk, remk, sizes, srvk, nsk, donek, mark, tqk, t_arr, ia, ia_to)
        ia = ia_to
        t = tn

        # right limits measured directly
        for e in range(ne):
            d_left = wk[e] - w1[e]
            many_left = nrel_k[e] >= kk
            a1, _, b1 = _measure(rel1[e], xs[e], thr[e], pres1, np1, rem1, sizes, srv1, ns1)
            ak, nrk, bk = _measure(relk[e], xs[e], thr[e], presk, npk, remk, sizes, srvk, nsk)
            w1[e] = a1
            wk[e] = ak
            busy1[e] = b1
            busyk[e] = bk
            nrel_k[e] = nrk
            dr = ak - a1
            if dr > max_delta[e]:
                max_delta[e] = dr
            tol = 1e-9 * (1.0 + bound[e])
            code = 0
            if dr > bound[e] + tol:
                code = 1
            if improved == 1 and dr > xs[e] * bk + tol:
                code = 2
            if code > 0:
                n_viol[e] += 1
                if nv < max_viol:
                    viol[nv, 0] = e
                    viol[nv, 1] = tn
                    viol[nv, 2] = dr
                    viol[nv, 3] = bound[e] if code == 1 else xs[e] * bk
                    viol[nv, 4] = code
                    nv += 1
                if code == 2:
                    n_impr[e] += 1
            if mono == 1 and many_left and nrk >= kk and dr > d_left + tol:
                n_mono[e] += 1
            if record == 1:
                if nev >= ev.shape[0]:
                    ev = _grow2(ev, 2 * ev.shape[0])
                ev[nev, 0] = e
                ev[nev, 1] = tn
                ev[nev, 2] = 1.0
                ev[nev, 3] = a1
                ev[nev, 4] = ak
                ev[nev, 5] = dr
                ev[nev, 6] = bk
                ev[nev, 7] = nrk
                nev += 1

    return max_delta, n_viol, n_mono, n_impr, viol[:nv], ev[:nev], done1, donek


@njit(cache=True, inline="always")
def _aud_f(mode, rem_l, size_l, xj, rem_j):
    # relevant iff value <= 0
    if mode == AUD_REM:
        return rem_l - xj
    if mode == AUD_ORIG:
        return size_l - xj
    if mode == AUD_PROD:
        return size_l * rem_l - xj * xj
    if mode == AUD_PROD_SHRINK:
        return size_l * rem_l - xj * rem_j
    return (size_l - rem_l) - xj


@njit(cache=True, inline="always")
def _frac_le0(fa, fb):
    """Fraction of [0, 1] on which a linear function with endpoint values fa, fb is <= 0."""
    if fa <= 0.0 and fb <= 0.0:
        return 1.0
    if fa > 0.0 and fb > 0.0:
        return 0.0
    if fa <= 0.0:
        return fa / (fa - fb)
    return fb / (fb - fa)


@njit(cache=True)
def tagged_audit(t_arr, sizes, policy, k, q, mode):
    """Split each job's sojourn into tagged / old / new / virtual work.

    Returns an (n, 6) table: tagged, old, new, virt_in_service,
    virt_out_of_service, response.  Work is server time times 1/k.
    """
    n = t_arr.shape[0]
    res = q / QUANT_BITS if q > 0.0 else 1.0
    kf = float(k)
    rem = sizes.copy()
    done = np.full(n, np.nan)
    pres = np.zeros(n, dtype=np.int64)
    srv = np.zeros(k, dtype=np.int64)
    mark = np.zeros(n, dtype=np.int64)
    in_srv = np.zeros(n, dtype=np.int64)
    out = np.zeros((n, 6))
    npres = 0
    nsrv = 0
    tq = INF
    t = 0.0
    ia = 0
    while ia < n or npres > 0:
        ta = t_arr[ia] if ia < n else INF
        tc = INF
        c = -1
        for p in range(nsrv):
            tt = t + kf * rem[srv[p]]
            if tt < tc:
                tc = tt
                c = srv[p]
        tn = min(ta, min(tc, tq))
        if tn == INF:
            break
        L = tn - t
        if L > 0.0:
            share = L / kf
            idle = (k - nsrv) * share
            for p in range(nsrv):
                in_srv[srv[p]] = 1
            for i in range(npres):
                j = pres[i]
                xj = sizes[j]
                rja = rem[j]
                rjb = rja - share if in_srv[j] == 1 else rja
                virt = idle
                old = 0.0
                new = 0.0
                for p in range(nsrv):
                    l = srv[p]
                    if l == j:
                        out[j, 0] += share
                        continue
                    ra = rem[l]
                    rb = ra - share
                    fr = _frac_le0(_aud_f(mode, ra, sizes[l], xj, rja), _aud_f(mode, rb, sizes[l], xj, rjb))
                    if l < j:
                        old += fr * share
                    else:
                        new += fr * share
                    virt += (1.0 - fr) * share
                out[j, 1] += old
                out[j, 2] += new
                if in_srv[j] == 1:
                    out[j, 3] += virt
                else:
                    out[j, 4] += virt
            for p in range(nsrv):
                in_srv[srv[p]] = 0
        ia_to = ia
        while ia_to < n and t_arr[ia_to] <= tn:
            ia_to += 1
        npres, nsrv, tq = _step_system(policy, k, q, res, t, tn, tc, c, False,
                                       pres, npres, rem, sizes, srv, nsrv, done, mark, tq, t_arr, ia, ia_to)
        ia = ia_to
        t = tn
    for j in range(n):
        out[j, 5] = done[j] - t_arr[j]
    return out
