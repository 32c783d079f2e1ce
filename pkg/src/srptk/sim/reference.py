"""Plain-Python reference simulator.

Slow and simple: at every scheduling point it sorts all present jobs by
(priority, id) and serves the first k.  FB re-evaluates every k*q time units
after its last scheduling point without skipping no-op checks.  Used as a
test oracle for the compiled kernel and for the fixed counterexample.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .model import PolicySpec

_RES_BITS = 2.0**20


@dataclass
class RefJob:
    id: int
    arrival: float
    size: float
    remaining: float
    first_service: float = math.nan
    completion: float = math.nan

    @property
    def attained(self) -> float:
        return self.size - self.remaining


@dataclass
class Segment:
    """Interval [t0, t1) with a fixed served set; remaining sizes are at t0."""

    t0: float
    t1: float
    served: tuple[int, ...]
    remaining: dict


class ReferenceSystem:
    def __init__(self, policy: PolicySpec | str, k: int):
        self.policy = PolicySpec(policy) if isinstance(policy, str) else policy
        self.k = int(k)
        self.q = self.policy.quantum
        self.res = self.q / _RES_BITS if self.q > 0 else 1.0

    def priority(self, j: RefJob):
        kind = self.policy.kind
        if kind == "SRPT":
            key = j.remaining
        elif kind == "PSJF":
            key = j.size
        elif kind == "RS":
            key = j.size * j.remaining
        elif kind == "FB":
            key = math.floor(j.attained / self.res + 0.5)
        else:
            key = 0.0
        return (key, j.id)

    def run(self, times, sizes, record_segments: bool = False):
        """Simulate to completion; returns (jobs, segments)."""
        k = self.k
        jobs = [RefJob(i, float(a), float(s), float(s)) for i, (a, s) in enumerate(zip(times, sizes))]
        present: list[RefJob] = []
        served: list[RefJob] = []
        segments: list[Segment] = []
        t = 0.0
        next_check = math.inf
        ia = 0
        n = len(jobs)
        while ia < n or present:
            ta = jobs[ia].arrival if ia < n else math.inf
            tc = min((t + k * j.remaining for j in served), default=math.inf)
            tn = min(ta, tc, next_check)
            if record_segments and tn > t:
                segments.append(Segment(t, tn, tuple(j.id for j in served), {j.id: j.remaining for j in present}))
            for j in served:
                j.remaining -= (tn - t) / k
            t = tn
            first = min(served, key=lambda j: (t + k * j.remaining, j.id), default=None) if tn == tc else None
            for j in list(served):
                if j is first or j.remaining <= 1e-12 * (1.0 + j.size):
                    j.remaining = 0.0
                    j.completion = t
                    present.remove(j)
            while ia < n and jobs[ia].arrival <= t:
                present.append(jobs[ia])
                ia += 1
            served = sorted(present, key=self.priority)[:k]
            for j in served:
                if math.isnan(j.first_service):
                    j.first_service = t
            if self.policy.kind == "FB" and len(present) > k:
                next_check = t + k * self.q
            else:
                next_check = math.inf
        return jobs, segments


def completions(policy, k, times, sizes) -> list[float]:
    jobs, _ = ReferenceSystem(policy, k).run(times, sizes)
    return [j.completion for j in jobs]
