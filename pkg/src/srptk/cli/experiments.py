"""Experiment drivers behind the CLI subcommands.

Each driver takes a normalized config and returns plain rows plus a list of
Check records; the CLI writes the rows and turns the checks into the exit
code.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .. import analytic as A
from .. import coupling
from .. import dist as D
from .. import sim
from ..sim.reference import ReferenceSystem
from .config import SweepConfig, seed_list


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str = ""


def pool_map(fn, tasks: list, workers: int = 1) -> list:
    """Map in task order; worker processes only when workers > 1."""
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, tasks))


def _ctx(cfg: dict) -> A.LoadContext:
    d = D.from_literal(cfg["dist"])
    lam = cfg["lambda"] if cfg["lambda"] is not None else cfg["rho"] / d.mean()
    return A.LoadContext(lam, d, cfg["k"])


def equiprobable_edges(d: D.ServiceDist, n: int) -> list[float]:
    lo, hi = d.support()
    inner = [d.quantile(i / n) for i in range(1, n)]
    return [lo, *inner, hi]


# simulate ----------------------------------------------------------------------

SUMMARY_FIELDS = ["metric", "lo", "hi", "value", "ci_halfwidth", "n"]


def simulate(cfg: dict):
    """Returns (summary rows, per-job dict or None, checks)."""
    ctx = _ctx(cfg)
    d = ctx.dist
    policy = sim.PolicySpec.parse(cfg["policy"], d, cfg["fb_quantum"])
    sb = cfg["size_bins"]
    edges = equiprobable_edges(d, sb) if isinstance(sb, int) else sb
    arr = sim.ArrivalSequence.poisson(ctx.lam, d, cfg["seed"])
    st = sim.run(
        policy, cfg["k"], arr,
        n_completions=cfg["n_completions"],
        warmup_fraction=cfg["warmup_fraction"],
        x_grid=cfg["x_grid"],
        size_bins=edges,
        n_batches=cfg["n_batches"],
        keep_jobs=cfg["jobs_csv"],
        check=cfg["check"],
    )
    rows = []
    nan = math.nan

    def est(metric, e, lo=nan, hi=nan):
        rows.append({"metric": metric, "lo": lo, "hi": hi, "value": e.mean, "ci_halfwidth": e.ci_halfwidth, "n": e.n_jobs})

    est("mean_response", sim.mean_response(st))
    est("mean_wait", sim.mean_wait(st))
    if edges is not None:
        for lo, hi in zip(edges, edges[1:]):
            est("bin_mean_response", sim.mean_response(st, (lo, hi)), lo, hi)
            est("bin_mean_wait", sim.mean_wait(st, (lo, hi)), lo, hi)
    for name in ("relwork_le", "relwork_bar", "relbusy_le", "relbusy_orig"):
        for x, v in zip(st.x_grid, getattr(st, name)):
            rows.append({"metric": name, "lo": float(x), "hi": float(x), "value": float(v), "ci_halfwidth": nan, "n": st.n_measured})
    for name, v in (("mean_in_system", st.mean_in_system), ("utilization", st.utilization), ("span", st.span)):
        rows.append({"metric": name, "lo": nan, "hi": nan, "value": float(v), "ci_halfwidth": nan, "n": st.n_measured})
    for name, v in (("events", st.events), ("max_in_system", st.max_in_system),
                    ("bad_work", st.bad_work), ("bad_order", st.bad_order)):
        rows.append({"metric": name, "lo": nan, "hi": nan, "value": float(v), "ci_halfwidth": nan, "n": st.n_measured})

    checks = [
        Check("work conservation", st.bad_work == 0, f"{st.bad_work} bad events"),
        Check("priority order", st.bad_order == 0, f"{st.bad_order} bad events"),
        Check("mean response finite", math.isfinite(sim.mean_response(st).mean)),
    ]
    if st.jobs is not None:
        j = st.jobs
        slack = j["response"] - cfg["k"] * j["size"]
        worst = float(np.min(slack)) if slack.size else 0.0
        checks.append(Check("response >= k * size", worst >= -1e-9 * (1 + float(np.max(j["response"], initial=0))),
                            f"min slack {worst!r}"))
        checks.append(Check("first service after arrival", bool(np.all(j["first_service"] >= j["arrival"]))))
    return rows, st.jobs, checks


JOB_FIELDS = ["id", "arrival", "size", "completion", "response"]


def job_rows(jobs: dict):
    cols = [jobs["id"].tolist(), jobs["arrival"].tolist(), jobs["size"].tolist(),
            jobs["completion"].tolist(), jobs["response"].tolist()]
    return zip(*cols)


# bounds --------------------------------------------------------------------------

BOUND_FIELDS = ["x", "rho_le_x", "H", "I", "psjf_bound", "fb_bound", "rs_increment"]


def bounds(cfg: dict):
    ctx = _ctx(cfg)
    rows, checks = [], []
    one = ctx.with_k(1)
    for x in cfg["x_grid"]:
        r = A.bound_report(ctx, x).as_row()
        rows.append(r)
        vals = [r[f] for f in BOUND_FIELDS]
        checks.append(Check(f"finite at x={x!r}", all(math.isfinite(v) for v in vals)))
        checks.append(Check(f"I <= H at x={x!r}", r["I"] <= r["H"] * (1 + 1e-12)))
        exact = A.srpt1_response_mean(one, x).total
        checks.append(Check(f"H >= exact SRPT-1 at x={x!r}", r["H"] >= exact, f"H={r['H']!r} T1={exact!r}"))
    return rows, checks


# sweep-ratio -------------------------------------------------------------------


@dataclass(frozen=True)
class RatioRow:
    policy: str
    rho: float
    mean_T_k: float
    ci_k: float
    mean_T_1: float
    ci_1: float
    ratio_sim: float
    ci_ratio: float
    ratio_bound_I: float
    ratio_bound_H: float
    n_completions: int
    status: str = "ok"

    @property
    def ok(self) -> bool:
        return self.status == "ok"


RATIO_FIELDS = [
    "policy", "rho", "mean_T_k", "ci_k", "mean_T_1", "ci_1", "ratio_sim", "ci_ratio",
    "ratio_bound_I", "ratio_bound_H", "n_completions", "status",
]

# analytic bound used as the numerator of ratio_bound_I for each policy
_POLICY_BOUND = {"SRPT": "I", "PSJF": "PSJF", "FB": "FB", "RS": None, "FCFS": None}


def _sweep_cell(task):
    cfg, rho, seed = task
    d = cfg.service
    n = cfg.cell_completions(rho)
    arr = sim.ArrivalSequence.poisson(rho / d.mean(), d, seed)
    kw = dict(n_completions=n, warmup_fraction=cfg.warmup_fraction, n_batches=cfg.n_batches)
    one = sim.run("SRPT", 1, arr, **kw)
    out = {"_one": (one.bat_T[0].copy(), one.bat_n[0].copy())}
    for pol in cfg.policies:
        spec = sim.PolicySpec.parse(pol, d, cfg.fb_quantum)
        st = sim.run(spec, cfg.k, arr, **kw)
        out[pol] = (st.bat_T[0].copy(), st.bat_n[0].copy())
    return out


def _safe_cell(task):
    try:
        return _sweep_cell(task)
    except Exception as exc:  # isolate the cell, keep sweeping
        return {"_error": f"{type(exc).__name__}: {exc}"}


def sweep_ratio(cfg: SweepConfig) -> list[RatioRow]:
    d = cfg.service
    seeds = seed_list(cfg.seeds)
    tasks = [(cfg, rho, s) for rho in cfg.rho_grid for s in seeds]
    results = pool_map(_safe_cell, tasks, cfg.workers)
    rows = []
    for rho in cfg.rho_grid:
        cells = [r for (c, rr, s), r in zip(tasks, results) if rr == rho]
        errs = [c["_error"] for c in cells if "_error" in c]
        n = cfg.cell_completions(rho)
        try:
            ctx1 = A.LoadContext.from_rho(rho, d, 1)
            t1_exact = A.expected(ctx1, "srpt1")
            ctxk = ctx1.with_k(cfg.k)
            bound_H = A.expected(ctxk, "H") / t1_exact
        except Exception as exc:
            errs.append(f"analytic: {type(exc).__name__}: {exc}")
            t1_exact = bound_H = math.nan
            ctxk = None
        for pol in cfg.policies:
            if errs:
                rows.append(RatioRow(pol, rho, *([math.nan] * 8), n, "; ".join(errs)))
                continue
            T1 = np.concatenate([c["_one"][0] for c in cells])
            N1 = np.concatenate([c["_one"][1] for c in cells])
            Tk = np.concatenate([c[pol][0] for c in cells])
            Nk = np.concatenate([c[pol][1] for c in cells])
            ek = sim.ratio_estimate(Tk, Nk)
            e1 = sim.ratio_estimate(T1, N1)
            r = sim.paired_ratio(Tk, Nk, T1, N1)
            bname = _POLICY_BOUND[pol]
            bI = A.expected(ctxk, bname) / t1_exact if bname else math.nan
            bH = bound_H if pol == "SRPT" else math.nan
            rows.append(RatioRow(pol, rho, ek.mean, ek.ci_halfwidth, e1.mean, e1.ci_halfwidth,
                                 r.mean, r.ci_halfwidth, bI, bH, n))
    rows.sort(key=lambda r: (cfg.policies.index(r.policy), r.rho))
    return rows


def sweep_checks(rows: list[RatioRow]) -> list[Check]:
    checks = []
    for r in rows:
        tag = f"{r.policy} rho={r.rho!r}"
        if not r.ok:
            checks.append(Check(f"cell {tag}", False, r.status))
            continue
        checks.append(Check(f"ratio_sim >= 1 within CI ({tag})", r.ratio_sim >= 1 - r.ci_ratio,
                            f"{r.ratio_sim!r} +- {r.ci_ratio!r}"))
        if r.policy == "SRPT":
            checks.append(Check(f"ratio_bound_I <= ratio_bound_H ({tag})", r.ratio_bound_I <= r.ratio_bound_H))
    return checks


def ratio_svg(rows: list[RatioRow], k: int, dist_label: str) -> str:
    from .svg import line_chart

    series = []
    for pol in dict.fromkeys(r.policy for r in rows):
        rr = [r for r in rows if r.policy == pol]
        series.append((f"simulated {pol}-{k} / SRPT-1", [r.rho for r in rr], [r.ratio_sim for r in rr]))
        if any(math.isfinite(r.ratio_bound_I) for r in rr):
            name = "I" if pol == "SRPT" else pol
            series.append((f"bound {name} / SRPT-1", [r.rho for r in rr], [r.ratio_bound_I for r in rr]))
    return line_chart(series, title=f"Mean response ratio, k={k}, {dist_label}",
                      xlabel="load rho", ylabel="E[T] ratio")


def dist_label(lit: dict) -> str:
    rest = ",".join(f"{k}={v:g}" if isinstance(v, float) else f"{k}={v}" for k, v in lit.items() if k != "kind")
    return f"{lit['kind']}({rest})"


# counterexample ------------------------------------------------------------------

COUNTER_FIELDS = ["scenario", "job", "size", "completion"]


def counterexample():
    """Runs the four-job scenario; returns (report dict, rows, checks)."""
    jobs = sim.counterexample_jobs()
    times, sizes = jobs.times.tolist(), jobs.sizes.tolist()
    rows, comps = [], {}
    for name, k in (("SRPT-2", 2), ("SRPT-1", 1), ("SRPT-4", 4)):
        ref, _ = ReferenceSystem("SRPT", k).run(times, sizes)
        st = sim.run("SRPT", k, jobs, keep_jobs=True)
        c_ref = [j.completion for j in ref]
        c_ker = st.jobs["completion"].tolist()
        if c_ref != c_ker:
            raise RuntimeError(f"{name}: kernel {c_ker} and reference {c_ref} disagree")
        comps[name] = sorted(c_ref)
        rows.extend({"scenario": name, "job": j.id, "size": j.size, "completion": j.completion} for j in ref)
    alt = sim.alternative_schedule()
    rows.extend({"scenario": "alternative", "job": i, "size": math.nan, "completion": c} for i, c in enumerate(alt))
    report = {
        "srpt2_third": comps["SRPT-2"][2],
        "alternative_third": sorted(alt)[2],
        "srpt1": comps["SRPT-1"],
        "srpt4": comps["SRPT-4"],
    }
    checks = [
        Check("SRPT-2 third completion = 6", report["srpt2_third"] == 6.0, repr(report["srpt2_third"])),
        Check("alternative third completion = 4", report["alternative_third"] == 4.0, repr(report["alternative_third"])),
        Check("SRPT-1 completions 1,2,4,6", report["srpt1"] == [1.0, 2.0, 4.0, 6.0], repr(report["srpt1"])),
        Check("SRPT-4 completions 4,4,8,8", report["srpt4"] == [4.0, 4.0, 8.0, 8.0], repr(report["srpt4"])),
    ]
    return report, rows, checks


# couple / audit ------------------------------------------------------------------

VIOLATION_FIELDS = ["pair", "dist", "k", "rho", "seed", "x", "time", "delta", "bound", "kind"]
COUPLE_SUMMARY_FIELDS = ["pair", "dist", "k", "rho", "x", "runs", "bound", "max_delta", "max_delta_over_bound", "violations"]
AUDIT_VIOLATION_FIELDS = ["policy", "dist", "k", "rho", "seed", "job", "x", "time", "delta", "bound"]
AUDIT_SUMMARY_FIELDS = [
    "policy", "dist", "k", "rho", "runs", "jobs", "max_virt_over_bound", "max_virt_out_of_service",
    "max_partition_error", "violations",
]


def _lemma_cells(cfg):
    return [
        (di, k, rho, seed)
        for di in range(len(cfg["dists"]))
        for k in cfg["k_values"]
        for rho in cfg["rho_values"]
        for seed in seed_list(cfg["seeds"])
    ]


def _arrivals(cfg, di, rho, seed):
    d = D.from_literal(cfg["dists"][di])
    return sim.ArrivalSequence.poisson(rho / d.mean(), d, seed)


def _couple_cell(task):
    cfg, (di, k, rho, seed) = task
    arr = _arrivals(cfg, di, rho, seed)
    out = []
    for pair in cfg["pairs"]:
        traces = coupling.run_coupled(
            pair, k, arr, cfg["x_grid"], n_jobs=cfg["n_jobs"],
            fb_quantum=cfg["fb_quantum"], rs_threshold=cfg["rs_threshold"],
        )
        for tr in traces:
            out.append((pair, tr.x, tr.bound, tr.max_delta, tr.n_violations + tr.n_monotone + tr.n_improved,
                        [(tm, dl, bd, kind) for tm, dl, bd, kind in tr.violations],
                        tr.n_monotone))
    return out


def couple(cfg: dict):
    """Lemma suite.  Returns (violation rows, summary rows, checks)."""
    cells = _lemma_cells(cfg)
    results = pool_map(_couple_cell, [(cfg, c) for c in cells], cfg["workers"])
    labels = [dist_label(l) for l in cfg["dists"]]
    viol, agg = [], {}
    for (di, k, rho, seed), res in zip(cells, results):
        for pair, x, bound, max_d, n_bad, vv, n_mono in res:
            key = (pair, labels[di], k, rho, x)
            a = agg.setdefault(key, {"runs": 0, "bound": bound, "max_delta": -math.inf, "ratio": -math.inf, "viol": 0})
            a["runs"] += 1
            a["max_delta"] = max(a["max_delta"], max_d)
            a["ratio"] = max(a["ratio"], max_d / bound if bound > 0 else math.nan)
            a["viol"] += n_bad
            for tm, dl, bd, kind in vv:
                viol.append({"pair": pair, "dist": labels[di], "k": k, "rho": rho, "seed": seed, "x": x,
                             "time": tm, "delta": dl, "bound": bd, "kind": kind})
            for _ in range(n_mono):
                viol.append({"pair": pair, "dist": labels[di], "k": k, "rho": rho, "seed": seed, "x": x,
                             "time": math.nan, "delta": math.nan, "bound": math.nan, "kind": "monotone"})
    summary = [
        {"pair": p, "dist": dl, "k": k, "rho": rho, "x": x, "runs": a["runs"], "bound": a["bound"],
         "max_delta": a["max_delta"], "max_delta_over_bound": a["ratio"], "violations": a["viol"]}
        for (p, dl, k, rho, x), a in agg.items()
    ]
    n_runs = len(cells)
    checks = [
        Check("no lemma violations", not viol and all(s["violations"] == 0 for s in summary),
              f"{len(viol)} violation rows over {n_runs} runs"),
    ]
    return viol, summary, checks


def _audit_cell(task):
    cfg, (di, k, rho, seed) = task
    arr = _arrivals(cfg, di, rho, seed)
    out = []
    for pol in cfg["policies"]:
        au = coupling.tagged_audit(pol, k, arr, n_jobs=cfg["n_jobs"], fb_quantum=cfg["fb_quantum"],
                                   rs_threshold=cfg["rs_threshold"])
        lim = au.limit
        bad = au.violations()
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(lim > 0, au.virt_work / np.where(lim > 0, lim, 1), 0.0)
        t, _ = arr.head(cfg["n_jobs"])
        vrows = [(int(i), float(au.size[i]), float(t[i]), float(au.virt_work[i]), float(lim[i])) for i in bad]
        out.append((pol, len(au), float(ratio.max(initial=0.0)), float(au.virt_out_of_service.max(initial=0.0)),
                    au.partition_error(), vrows))
    return out


PARTITION_TOL = 1e-7
LONE_JOB_K = 2
LONE_JOB_X = 1.0


def lone_job_virt(policy: str = "SRPT", k: int = LONE_JOB_K, x: float = LONE_JOB_X) -> float:
    arr = sim.ArrivalSequence.explicit_jobs([(0.0, x)])
    q = 0.01 * x if policy == "FB" else None
    return float(coupling.tagged_audit(policy, k, arr, fb_quantum=q).virt_work[0])


def audit(cfg: dict):
    cells = _lemma_cells(cfg)
    results = pool_map(_audit_cell, [(cfg, c) for c in cells], cfg["workers"])
    labels = [dist_label(l) for l in cfg["dists"]]
    viol, agg = [], {}
    for (di, k, rho, seed), res in zip(cells, results):
        for pol, n, ratio, vout, perr, vrows in res:
            key = (pol, labels[di], k, rho)
            a = agg.setdefault(key, {"runs": 0, "jobs": 0, "ratio": 0.0, "vout": 0.0, "perr": 0.0, "viol": 0})
            a["runs"] += 1
            a["jobs"] += n
            a["ratio"] = max(a["ratio"], ratio)
            a["vout"] = max(a["vout"], vout)
            a["perr"] = max(a["perr"], perr)
            a["viol"] += len(vrows)
            for job, x, tm, virt, lim in vrows:
                viol.append({"policy": pol, "dist": labels[di], "k": k, "rho": rho, "seed": seed, "job": job,
                             "x": x, "time": tm, "delta": virt, "bound": lim})
    summary = [
        {"policy": p, "dist": dl, "k": k, "rho": rho, "runs": a["runs"], "jobs": a["jobs"],
         "max_virt_over_bound": a["ratio"], "max_virt_out_of_service": a["vout"],
         "max_partition_error": a["perr"], "violations": a["viol"]}
        for (p, dl, k, rho), a in agg.items()
    ]
    lone = {p: lone_job_virt(p) for p in cfg["policies"]}
    want = (LONE_JOB_K - 1) * LONE_JOB_X
    checks = [
        Check("virt_work <= (k-1) size", not viol, f"{len(viol)} violating jobs over {len(cells)} runs"),
        Check("work categories partition the response",
              all(s["max_partition_error"] <= PARTITION_TOL for s in summary)),
        Check(f"lone job k={LONE_JOB_K} virt = (k-1)x",
              all(abs(v - want) <= 1e-12 for v in lone.values()), repr(lone)),
    ]
    return viol, summary, checks
