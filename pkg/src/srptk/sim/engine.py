"""Driver that feeds arrival chunks to the kernel and packages SimStats."""

from __future__ import annotations

import math

import numpy as np

from . import kernel as K
from .model import ArrivalSequence, PolicySpec
from .stats import SimStats

_INIT_SLOTS = 1024


def _grow(arrs, cap):
    out = []
    for a in arrs:
        b = np.zeros(cap, dtype=a.dtype)
        b[: a.size] = a
        out.append(b)
    return out


def run(
    policy: PolicySpec | str,
    k: int,
    arrivals: ArrivalSequence,
    n_completions: int | None = None,
    warmup_fraction: float = 0.2,
    x_grid=(),
    size_bins=None,
    n_batches: int = 32,
    keep_jobs: bool = False,
    check: bool = False,
) -> SimStats:
    """Simulate `policy` on k servers of rate 1/k.

    Measured jobs are ids in [n_warm, n_completions) with
    n_warm = floor(warmup_fraction * n_completions); the run ends once all of
    jobs 0..n_completions-1 have left.  Time averages cover the arrival window
    of the measured jobs (for explicit sequences: up to the last departure).
    """
    if isinstance(policy, str):
        policy = PolicySpec(policy)
    if int(k) != k or k < 1:
        raise ValueError("k must be an integer >= 1")
    k = int(k)
    if not arrivals.explicit and not arrivals.rho < 1.0:
        raise ValueError(f"unstable arrival stream rho={arrivals.rho:.6g} >= 1")
    if arrivals.explicit:
        n_total = len(arrivals)
        if n_completions is None:
            n_completions = n_total
        if n_completions > n_total:
            raise ValueError("explicit sequence has fewer jobs than n_completions")
    elif n_completions is None:
        raise ValueError("sampled runs need n_completions")
    n_completions = int(n_completions)
    if n_completions < 0 or (n_completions < 1 and not arrivals.explicit):
        raise ValueError("n_completions must be >= 1")
    if not 0.0 <= warmup_fraction < 1.0:
        raise ValueError("warmup_fraction must lie in [0, 1)")
    n_warm = int(math.floor(warmup_fraction * n_completions))
    n_meas = n_completions - n_warm
    n_batches = max(1, min(int(n_batches), n_meas)) if n_meas > 0 else 1

    x_grid = np.asarray(sorted(float(x) for x in x_grid), dtype=float)
    edges = np.asarray(size_bins if size_bins is not None else [], dtype=float)
    if edges.size == 1 or np.any(np.diff(edges) <= 0):
        raise ValueError("size_bins must be a strictly increasing edge list")
    nrows = 1 + max(edges.size - 1, 0)

    ist = np.zeros(K.N_ISTATE, dtype=np.int64)
    fst = np.zeros(K.N_FSTATE, dtype=np.float64)
    fst[K.F_TQ] = np.inf
    fst[K.F_T1] = np.inf

    cap = _INIT_SLOTS
    s_rem, s_size, s_arr, s_first, s_key = (np.zeros(cap) for _ in range(5))
    s_id = np.zeros(cap, dtype=np.int64)
    heap = np.zeros(cap, dtype=np.int64)
    free = np.arange(cap - 1, -1, -1, dtype=np.int64)
    ist[K.I_FREEN] = cap
    srv = np.zeros(k, dtype=np.int64)

    u_le = np.zeros(x_grid.size)
    u_bar = np.zeros(x_grid.size)
    xacc = np.zeros((K.N_XROWS, x_grid.size))
    bat_T = np.zeros((nrows, n_batches))
    bat_W = np.zeros((nrows, n_batches))
    bat_n = np.zeros((nrows, n_batches))
    n_keep = n_completions if keep_jobs else 0
    job_comp = np.full(n_keep, np.nan)
    job_first = np.full(n_keep, np.nan)
    kept_t, kept_s = [], []

    # measurement window in time: arrival of job n_warm to arrival of job n_completions
    window = [n_warm, n_completions]
    chunk_iter = arrivals.chunks()
    chunk0 = 0
    ch_t = ch_s = None
    q = policy.quantum
    pol = K.POLICY_CODES[policy.kind]

    def load_next():
        nonlocal ch_t, ch_s, chunk0
        if ch_t is not None:
            chunk0 += ch_t.size
        ch_t, ch_s, last = next(chunk_iter)
        ist[K.I_CHUNK0] = chunk0
        ist[K.I_FINAL] = 1 if last else 0
        for w, slot in ((window[0], K.F_T0), (window[1], K.F_T1)):
            if chunk0 <= w < chunk0 + ch_t.size:
                fst[slot] = ch_t[w - chunk0]
        if keep_jobs and chunk0 < n_keep:
            kept_t.append(ch_t[: n_keep - chunk0])
            kept_s.append(ch_s[: n_keep - chunk0])

    load_next()
    if arrivals.explicit and n_warm >= ch_t.size:
        fst[K.F_T0] = np.inf
    while True:
        status = K.advance(
            pol, k, q, 1 if check else 0,
            ist, fst,
            ch_t, ch_s, ch_t.size,
            s_rem, s_size, s_arr, s_first, s_key, s_id,
            srv, heap, free,
            x_grid, u_le, u_bar, xacc,
            n_completions, n_warm, n_batches, edges, bat_T, bat_W, bat_n,
            job_comp, job_first,
        )
        if status == K.DONE:
            break
        if status == K.NEED_ARRIVALS:
            load_next()
        elif status == K.NEED_SLOTS:
            new = cap * 2
            s_rem, s_size, s_arr, s_first, s_key, s_id, heap = _grow(
                [s_rem, s_size, s_arr, s_first, s_key, s_id, heap], new
            )
            fr = np.zeros(new, dtype=np.int64)
            n_free = ist[K.I_FREEN]
            fr[:n_free] = free[:n_free]
            fr[n_free : n_free + (new - cap)] = np.arange(new - 1, cap - 1, -1)
            free = fr
            ist[K.I_FREEN] = n_free + (new - cap)
            cap = new

    jobs = None
    if keep_jobs:
        at = np.concatenate(kept_t) if kept_t else np.empty(0)
        sz = np.concatenate(kept_s) if kept_s else np.empty(0)
        jobs = {
            "id": np.arange(n_keep, dtype=np.int64),
            "arrival": at,
            "size": sz,
            "first_service": job_first,
            "completion": job_comp,
            "response": job_comp - at,
        }
    return SimStats(
        policy=policy.kind,
        k=k,
        n_measured=n_meas,
        n_warmup=n_warm,
        x_grid=x_grid,
        bin_edges=edges,
        bat_T=bat_T,
        bat_W=bat_W,
        bat_n=bat_n,
        span=float(fst[K.F_SPAN]),
        x_integrals=xacc,
        nsys_integral=float(fst[K.F_NSYS_INT]),
        busy_integral=float(fst[K.F_BUSY_INT]),
        events=int(ist[K.I_EVENTS]),
        max_in_system=int(ist[K.I_MAXN]),
        bad_work=int(ist[K.I_BAD_WORK]),
        bad_order=int(ist[K.I_BAD_ORDER]),
        end_time=float(fst[K.F_T]),
        work_arrived=float(fst[K.F_ARRWORK]),
        work_served=float(fst[K.F_SERVED]),
        work_dropped=float(fst[K.F_DROPPED]),
        jobs=jobs,
    )
