"""Policy specifications and arrival sequences."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from ..dist import ServiceDist, from_literal

POLICIES = ("SRPT", "PSJF", "RS", "FB", "FCFS")

# arrivals are generated in fixed-size chunks so that any prefix of a
# sampled sequence is independent of how far the run goes
CHUNK = 1 << 16


@dataclass(frozen=True)
class PolicySpec:
    kind: str
    fb_quantum: float | None = None

    def __post_init__(self):
        kind = self.kind.upper()
        object.__setattr__(self, "kind", kind)
        if kind not in POLICIES:
            raise ValueError(f"unknown policy {self.kind!r}; choose from {POLICIES}")
        if kind == "FB":
            if self.fb_quantum is None or not self.fb_quantum > 0:
                raise ValueError("FB requires a positive fb_quantum")
        elif self.fb_quantum is not None:
            object.__setattr__(self, "fb_quantum", None)

    @classmethod
    def parse(cls, kind: str, dist: ServiceDist | None = None, fb_quantum: float | None = None):
        """Build a spec, defaulting the FB quantum to 1% of the mean size."""
        if kind.upper() == "FB" and fb_quantum is None:
            if dist is None:
                raise ValueError("FB needs fb_quantum or a distribution to derive it from")
            fb_quantum = 0.01 * dist.mean()
        return cls(kind, fb_quantum)

    @property
    def quantum(self) -> float:
        return self.fb_quantum if self.fb_quantum is not None else 0.0


@dataclass(frozen=True)
class Job:
    id: int
    arrival: float
    size: float
    remaining: float
    attained: float


class ArrivalSequence:
    """Poisson(lam) arrivals with iid sizes, or an explicit finite list."""

    def __init__(self, *, lam=None, dist=None, seed=None, times=None, sizes=None):
        if times is not None or sizes is not None:
            t = np.asarray(times if times is not None else [], dtype=float)
            s = np.asarray(sizes if sizes is not None else [], dtype=float)
            if t.shape != s.shape or t.ndim != 1:
                raise ValueError("explicit arrivals need matching 1-D times and sizes")
            if np.any(np.diff(t) < 0) or (t.size and t[0] < 0):
                raise ValueError("arrival times must be nonnegative and nondecreasing")
            if np.any(~(s > 0)) or not np.all(np.isfinite(s)):
                raise ValueError("sizes must be positive and finite")
            self.explicit = True
            self.times, self.sizes = t, s
            self.lam = self.dist = self.seed = None
        else:
            if lam is None or dist is None or seed is None:
                raise ValueError("sampled arrivals need lam, dist and an explicit seed")
            self.explicit = False
            self.lam = float(lam)
            self.dist = from_literal(dist)
            self.seed = int(seed)
            if not self.lam > 0:
                raise ValueError("arrival rate must be positive")

    @classmethod
    def explicit_jobs(cls, jobs: Sequence[tuple[float, float]]) -> "ArrivalSequence":
        jobs = list(jobs)
        return cls(times=[a for a, _ in jobs], sizes=[s for _, s in jobs])

    @classmethod
    def poisson(cls, lam: float, dist, seed: int) -> "ArrivalSequence":
        return cls(lam=lam, dist=dist, seed=seed)

    @property
    def rho(self) -> float:
        if self.explicit:
            return math.nan
        return self.lam * self.dist.mean()

    def __len__(self):
        if not self.explicit:
            raise TypeError("sampled sequences are unbounded")
        return self.times.size

    def chunks(self) -> Iterator[tuple[np.ndarray, np.ndarray, bool]]:
        """Yield (times, sizes, is_last)."""
        if self.explicit:
            yield self.times, self.sizes, True
            return
        ss = np.random.SeedSequence(self.seed)
        g_arr, g_size = (np.random.Generator(np.random.PCG64(c)) for c in ss.spawn(2))
        t0 = 0.0
        while True:
            gaps = g_arr.standard_exponential(CHUNK) / self.lam
            times = t0 + np.cumsum(gaps)
            t0 = float(times[-1])
            yield times, self.dist.sample_n(g_size, CHUNK), False

    def head(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        """First n (time, size) pairs."""
        ts, ss, got = [], [], 0
        for t, s, _ in self.chunks():
            ts.append(t[: n - got])
            ss.append(s[: n - got])
            got += ts[-1].size
            if got >= n:
                break
        return np.concatenate(ts) if ts else np.empty(0), np.concatenate(ss) if ss else np.empty(0)
