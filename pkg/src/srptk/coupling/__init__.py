"""Coupled-system and tagged-job checks of the worst-case lemmas.

A coupled run feeds one arrival sequence to System 1 (one server of rate 1)
and System k (k servers of rate 1/k) and tracks, for each threshold x, the
difference delta = RelWork_k - RelWork_1 event by event.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from ..sim.kernel import POLICY_CODES
from ..sim.model import ArrivalSequence, PolicySpec
from . import _kernels as _K

__all__ = [
    "PAIRS",
    "CoupledPair",
    "DeltaTrace",
    "TaggedAudit",
    "run_coupled",
    "check_improved_delta",
    "tagged_audit",
    "AUDIT_POLICIES",
]

RS_MODES = ("frozen", "shrinking")
# tagged remaining sizes y = x * r used for the shrinking RS threshold x*y
RS_SHRINK_FRACTIONS = (1.0, 0.75, 0.5, 0.25)


@dataclass(frozen=True)
class CoupledPair:
    name: str
    system1: str
    systemk: str
    rel1: int
    relk: int
    improved: bool = False

    def bound(self, k: int, x: float, q: float) -> float:
        if self.name in ("PSJF",):
            return (k - 1) * x
        if self.name == "FB":
            return (k - 1) * x + k * q
        return k * x


PAIRS = {
    "SRPT": CoupledPair("SRPT", "SRPT", "SRPT", _K.REL_REM, _K.REL_REM),
    "PSJF": CoupledPair("PSJF", "PSJF", "PSJF", _K.REL_ORIG, _K.REL_ORIG),
    "RS": CoupledPair("RS", "RS", "RS", _K.REL_PROD, _K.REL_PROD),
    "FB": CoupledPair("FB", "FB", "FB", _K.REL_TRUNC, _K.REL_TRUNC),
    # PSJF-1 against SRPT-k, checked against x * RelBusy_k
    "PSJF-SRPT": CoupledPair("PSJF-SRPT", "PSJF", "SRPT", _K.REL_ORIG, _K.REL_REM, improved=True),
}


class TraceEvent(NamedTuple):
    time: float
    side: str  # "left" or "right" limit at this stop
    relwork_1: float
    relwork_k: float
    delta: float
    relbusy_k: int
    n_relevant_k: int
    interval_kind: str


@dataclass
class DeltaTrace:
    pair: str
    policy_pair: tuple
    k: int
    x: float
    threshold: float
    bound: float
    max_delta: float
    n_violations: int
    n_monotone: int
    n_improved: int
    violations: list = field(default_factory=list)  # (time, delta, bound, kind)
    events: list | None = None

    @property
    def ok(self) -> bool:
        return self.n_violations == 0


def _arrays(arrivals: ArrivalSequence, n_jobs: int | None):
    if arrivals.explicit:
        t, s = arrivals.times, arrivals.sizes
        if n_jobs is not None:
            t, s = t[:n_jobs], s[:n_jobs]
        return np.ascontiguousarray(t, dtype=float), np.ascontiguousarray(s, dtype=float)
    if n_jobs is None:
        raise ValueError("sampled arrival sequences need n_jobs")
    if not arrivals.rho < 1:
        raise ValueError("unstable arrival stream")
    return arrivals.head(int(n_jobs))


def _quantum(pair_or_policy: str, arrivals: ArrivalSequence, fb_quantum):
    if fb_quantum is not None:
        return float(fb_quantum)
    if "FB" not in pair_or_policy:
        return 0.0
    if arrivals.explicit:
        raise ValueError("FB on an explicit sequence needs fb_quantum")
    return 0.01 * arrivals.dist.mean()


def run_coupled(
    pair: str | CoupledPair,
    k: int,
    arrivals: ArrivalSequence,
    x_grid,
    n_jobs: int | None = None,
    fb_quantum: float | None = None,
    rs_threshold: str = "frozen",
    record: bool = False,
    max_violations: int = 1000,
) -> list[DeltaTrace]:
    """Trace delta for each x in x_grid (and, for shrinking RS, each tagged remaining size)."""
    p = PAIRS[pair.upper()] if isinstance(pair, str) else pair
    if rs_threshold not in RS_MODES:
        raise ValueError(f"rs_threshold must be one of {RS_MODES}")
    k = int(k)
    if k < 1:
        raise ValueError("k must be >= 1")
    t, s = _arrays(arrivals, n_jobs)
    q = _quantum(p.name, arrivals, fb_quantum)

    entries = []  # (x, threshold)
    for x in x_grid:
        x = float(x)
        if x <= 0:
            raise ValueError("thresholds must be positive")
        if p.name == "RS" and rs_threshold == "shrinking":
            entries.extend((x, x * (f * x)) for f in RS_SHRINK_FRACTIONS)
        elif p.name == "RS":
            entries.append((x, x * x))
        else:
            entries.append((x, x))
    xs = np.array([e[0] for e in entries])
    thr = np.array([e[1] for e in entries])
    bound = np.array([p.bound(k, x, q) for x in xs])
    rel1 = np.full(xs.size, p.rel1, dtype=np.int64)
    relk = np.full(xs.size, p.relk, dtype=np.int64)
    mono = 0 if p.name == "FB" else 1

    max_d, n_v, n_m, n_i, viol, ev, _, _ = _K.coupled_trace(
        t, s,
        POLICY_CODES[p.system1], 1, POLICY_CODES[p.systemk], k, q,
        rel1, relk, xs, thr, bound, 1 if p.improved else 0, mono,
        1 if record else 0, int(max_violations),
    )
    if np.isnan(max_d).any():
        raise RuntimeError("coupled trace stopped making progress")
    out = []
    for e in range(xs.size):
        vv = [
            (float(r[1]), float(r[2]), float(r[3]), "improved" if r[4] == 2 else "bound")
            for r in viol if int(r[0]) == e
        ]
        events = None
        if record:
            rows = ev[ev[:, 0] == e]
            events = [
                TraceEvent(
                    float(r[1]), "right" if r[2] else "left", float(r[3]), float(r[4]), float(r[5]),
                    int(r[6]), int(r[7]), "many-jobs" if r[7] >= k else "few-jobs",
                )
                for r in rows
            ]
        out.append(
            DeltaTrace(
                pair=p.name,
                policy_pair=(f"{p.system1}-1", f"{p.systemk}-k"),
                k=k,
                x=float(xs[e]),
                threshold=float(thr[e]),
                bound=float(bound[e]),
                max_delta=float(max_d[e]),
                n_violations=int(n_v[e]),
                n_monotone=int(n_m[e]),
                n_improved=int(n_i[e]),
                violations=vv,
                events=events,
            )
        )
    return out


def check_improved_delta(trace: DeltaTrace):
    """(passed, worst event).  The worst event maximises delta - x*RelBusy_k.

    Needs a trace recorded with ``record=True``; otherwise only the counter
    is consulted and the worst event is None.
    """
    if trace.pair != "PSJF-SRPT":
        raise ValueError("the improved-delta check applies to the PSJF-1 / SRPT-k pair")
    if not trace.events:
        return trace.n_improved == 0, None
    worst = max(trace.events, key=lambda e: e.delta - trace.x * e.relbusy_k)
    tol = 1e-9 * (1.0 + trace.bound)
    ok = all(e.delta <= trace.x * e.relbusy_k + tol for e in trace.events)
    return ok, worst


AUDIT_POLICIES = ("SRPT", "PSJF", "RS", "FB")


@dataclass
class TaggedAudit:
    """Per-job work categories over each job's sojourn (one row per job)."""

    policy: str
    k: int
    size: np.ndarray
    tagged_work: np.ndarray
    old_work: np.ndarray
    new_work: np.ndarray
    virt_in_service: np.ndarray
    virt_out_of_service: np.ndarray
    response: np.ndarray
    quantum: float = 0.0

    @property
    def virt_work(self) -> np.ndarray:
        return self.virt_in_service + self.virt_out_of_service

    @property
    def total(self) -> np.ndarray:
        return self.tagged_work + self.old_work + self.new_work + self.virt_work

    def __len__(self):
        return self.size.size

    @property
    def limit(self) -> np.ndarray:
        """(k-1) * size, plus k quanta for FB whose ages move in steps."""
        lim = (self.k - 1) * self.size
        return lim + self.k * self.quantum if self.policy == "FB" else lim

    def violations(self, tol: float = 1e-9) -> np.ndarray:
        """Indices of jobs whose virtual work exceeds the limit."""
        lim = self.limit
        return np.flatnonzero(self.virt_work > lim + tol * (1.0 + lim))

    def partition_error(self) -> float:
        return float(np.max(np.abs(self.total - self.response))) if len(self) else 0.0


def tagged_audit(
    policy: str,
    k: int,
    arrivals: ArrivalSequence,
    n_jobs: int | None = None,
    fb_quantum: float | None = None,
    rs_threshold: str = "frozen",
) -> TaggedAudit:
    pol = policy.upper()
    if pol not in AUDIT_POLICIES:
        raise ValueError(f"tagged audit supports {AUDIT_POLICIES}, not {policy!r}")
    if rs_threshold not in RS_MODES:
        raise ValueError(f"rs_threshold must be one of {RS_MODES}")
    t, s = _arrays(arrivals, n_jobs)
    q = _quantum(pol, arrivals, fb_quantum)
    PolicySpec(pol, q if pol == "FB" else None)  # validates quantum
    mode = {
        "SRPT": _K.AUD_REM,
        "PSJF": _K.AUD_ORIG,
        "RS": _K.AUD_PROD if rs_threshold == "frozen" else _K.AUD_PROD_SHRINK,
        "FB": _K.AUD_AGE,
    }[pol]
    tab = _K.tagged_audit(t, s, POLICY_CODES[pol], int(k), q, mode)
    return TaggedAudit(
        policy=pol,
        k=int(k),
        size=s.copy(),
        tagged_work=tab[:, 0],
        old_work=tab[:, 1],
        new_work=tab[:, 2],
        virt_in_service=tab[:, 3],
        virt_out_of_service=tab[:, 4],
        response=tab[:, 5],
        quantum=q if pol == "FB" else 0.0,
    )
