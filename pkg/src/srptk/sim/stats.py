"""Simulation outputs and batch-means estimation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy import stats as _st


class Estimate(NamedTuple):
    mean: float
    ci_halfwidth: float
    n_batches: int
    n_jobs: int
    insufficient: bool = False


def ratio_estimate(num: np.ndarray, den: np.ndarray, level: float = 0.95) -> Estimate:
    """Ratio-of-sums estimate with a batch-means CI (delta method).

    ``num`` and ``den`` hold one sum per batch.  Batches with zero weight
    still count as batches; if fewer than two batches carry data the
    estimate is flagged insufficient.
    """
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    used = den > 0
    B = int(used.sum())
    n = int(den.sum())
    if n == 0:
        return Estimate(math.nan, math.nan, B, 0, True)
    r = num.sum() / den.sum()
    if B < 2:
        return Estimate(r, math.nan, B, n, True)
    nb, db = num[used], den[used]
    dbar = db.mean()
    resid = nb - r * db
    var = (resid @ resid) / (B * (B - 1)) / dbar**2
    h = _st.t.ppf(0.5 + level / 2.0, B - 1) * math.sqrt(var)
    return Estimate(float(r), float(h), B, n, False)


def paired_ratio(num_a, den_a, num_b, den_b, level: float = 0.95) -> Estimate:
    """Estimate (sum num_a / sum den_a) / (sum num_b / sum den_b) on aligned batches.

    Batches are assumed to cover the same jobs in both systems (common
    random numbers), so their covariance is used in the delta method.
    """
    na, da, nb, db = (np.asarray(v, dtype=float) for v in (num_a, den_a, num_b, den_b))
    used = (da > 0) & (db > 0)
    B = int(used.sum())
    if B < 2 or na.sum() == 0 or nb.sum() == 0:
        return Estimate(math.nan, math.nan, B, int(da.sum()), True)
    ma = na.sum() / da.sum()
    mb = nb.sum() / db.sum()
    r = ma / mb
    # linearised per-batch influence of the ratio of ratios
    za = (na[used] - ma * da[used]) / da[used].mean() / ma
    zb = (nb[used] - mb * db[used]) / db[used].mean() / mb
    z = za - zb
    var = r * r * (z @ z) / (B * (B - 1))
    h = _st.t.ppf(0.5 + level / 2.0, B - 1) * math.sqrt(var)
    return Estimate(float(r), float(h), B, int(da.sum()), False)


@dataclass
class SimStats:
    """Result of one run (or a merge of independent runs).

    Batch tables have shape (1 + n_bins, n_batches): row 0 collects every
    measured job and row i + 1 the jobs with size in (edges[i], edges[i+1]].
    """

    policy: str
    k: int
    n_measured: int
    n_warmup: int
    x_grid: np.ndarray
    bin_edges: np.ndarray
    bat_T: np.ndarray
    bat_W: np.ndarray
    bat_n: np.ndarray
    span: float
    x_integrals: np.ndarray  # rows: relwork_le, relwork_bar, relbusy_le, relbusy_orig
    nsys_integral: float
    busy_integral: float
    events: int
    max_in_system: int
    bad_work: int = 0
    bad_order: int = 0
    end_time: float = 0.0
    work_arrived: float = 0.0
    work_served: float = 0.0
    work_dropped: float = 0.0
    jobs: dict | None = field(default=None, repr=False)

    def _tavg(self, row: int) -> np.ndarray:
        if self.span <= 0:
            return np.zeros(self.x_grid.shape)
        return self.x_integrals[row] / self.span

    @property
    def relwork_le(self) -> np.ndarray:
        return self._tavg(0)

    @property
    def relwork_bar(self) -> np.ndarray:
        return self._tavg(1)

    @property
    def relbusy_le(self) -> np.ndarray:
        return self._tavg(2)

    @property
    def relbusy_orig(self) -> np.ndarray:
        return self._tavg(3)

    @property
    def mean_in_system(self) -> float:
        return self.nsys_integral / self.span if self.span > 0 else 0.0

    @property
    def utilization(self) -> float:
        return self.busy_integral / self.span if self.span > 0 else 0.0

    def x_index(self, x: float) -> int:
        hits = np.flatnonzero(np.isclose(self.x_grid, x, rtol=1e-12, atol=0.0) | (self.x_grid == x))
        if hits.size == 0:
            raise KeyError(f"x={x} is not on the run's x_grid {self.x_grid.tolist()}")
        return int(hits[0])

    def bin_index(self, size_bin) -> int:
        lo, hi = size_bin
        e = self.bin_edges
        for i in range(e.size - 1):
            if math.isclose(e[i], lo, rel_tol=1e-12, abs_tol=1e-15) and (
                e[i + 1] == hi or math.isclose(e[i + 1], hi, rel_tol=1e-12)
            ):
                return i + 1
        raise KeyError(f"size bin {size_bin} was not configured for this run")

    def merge(self, other: "SimStats") -> "SimStats":
        """Pool two independent runs of the same configuration."""
        if (self.policy, self.k) != (other.policy, other.k):
            raise ValueError("can only merge runs of the same policy and k")
        if not (np.array_equal(self.x_grid, other.x_grid) and np.array_equal(self.bin_edges, other.bin_edges)):
            raise ValueError("runs use different x grids or size bins")
        return SimStats(
            policy=self.policy,
            k=self.k,
            n_measured=self.n_measured + other.n_measured,
            n_warmup=self.n_warmup + other.n_warmup,
            x_grid=self.x_grid,
            bin_edges=self.bin_edges,
            bat_T=np.hstack([self.bat_T, other.bat_T]),
            bat_W=np.hstack([self.bat_W, other.bat_W]),
            bat_n=np.hstack([self.bat_n, other.bat_n]),
            span=self.span + other.span,
            x_integrals=self.x_integrals + other.x_integrals,
            nsys_integral=self.nsys_integral + other.nsys_integral,
            busy_integral=self.busy_integral + other.busy_integral,
            events=self.events + other.events,
            max_in_system=max(self.max_in_system, other.max_in_system),
            bad_work=self.bad_work + other.bad_work,
            bad_order=self.bad_order + other.bad_order,
            end_time=max(self.end_time, other.end_time),
            work_arrived=self.work_arrived + other.work_arrived,
            work_served=self.work_served + other.work_served,
            work_dropped=self.work_dropped + other.work_dropped,
            jobs=None,
        )
