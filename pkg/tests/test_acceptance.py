"""Exit criteria, each run at its stated tolerance.

Every test records one ``PASS criterion N`` / ``FAIL criterion N`` line,
printed in the pytest terminal summary.  Run alone with

    pytest tests/test_acceptance.py -v
"""

from __future__ import annotations

import math
import shutil
import sys
import time
from pathlib import Path

import pytest

from conftest import ACCEPTANCE_LINES
from srptk import analytic as A
from srptk import dist as D
from srptk import sim
from srptk.cli import config as C
from srptk.cli import csvio
from srptk.cli import experiments as X
from srptk.cli import run_command

pytestmark = [pytest.mark.acceptance, pytest.mark.slow]

U = D.Uniform(0.0, 2.0)
HX = D.hyperexp_from_mean_scv(1.0, 10.0)
DISTS = {"uniform": (U, C.UNIFORM), "hyperexp": (HX, C.HYPEREXP)}


def record(n: int, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line, file=sys.stderr)
    assert ok, line


@pytest.fixture(scope="module")
def work(tmp_path_factory) -> Path:
    return tmp_path_factory.mktemp("acceptance")


def _cli(command: str, overrides: dict, out: Path) -> tuple[int, float]:
    doc = dict(overrides)
    if command == "sweep-ratio":
        doc["outputs"] = {"dir": str(out), "csv": "ratio.csv", "svg": "ratio.svg"}
    else:
        doc["out"] = str(out)
    cfg = C.normalize(command, doc)
    t0 = time.perf_counter()
    code = run_command(command, cfg)
    return code, time.perf_counter() - t0


# 1 ---------------------------------------------------------------------------------

def test_criterion_1_counterexample(work):
    t0 = time.perf_counter()
    report, _, checks = X.counterexample()
    dt = time.perf_counter() - t0
    code, _ = _cli("counterexample", {}, work / "c1")
    ok = report["srpt2_third"] == 6 and report["alternative_third"] == 4 and code == 0 and dt < 1.0
    record(1, ok, f"SRPT-2 third = {report['srpt2_third']:g}, alternative third = "
                  f"{report['alternative_third']:g}, exit {code}, {dt:.3f} s (< 1 s)")


# 2 ---------------------------------------------------------------------------------

C2 = {"policy": "SRPT", "k": 1, "lambda": 0.8, "rho": None, "dist": C.UNIFORM, "seed": 2024,
      "n_completions": 1_000_000, "size_bins": [0.0, 0.95, 1.05, 2.0], "x_grid": [1.0], "jobs_csv": False}


def _summary(path: Path) -> list[dict]:
    return csvio.read_rows(path / "summary.csv", {"lo": float, "hi": float, "value": float, "ci_halfwidth": float})


def test_criterion_2_srpt1_agreement(work):
    code, dt = _cli("simulate", C2, work / "c2")
    rows = _summary(work / "c2")
    overall = next(r for r in rows if r["metric"] == "mean_response")
    binr = next(r for r in rows if r["metric"] == "bin_mean_response" and r["lo"] == 0.95)
    ctx = A.LoadContext(0.8, U, 1)
    want = A.expected(ctx, "srpt1")
    rel = abs(overall["value"] - want) / want
    point = A.srpt1_response_mean(ctx, 1.0).total
    z = abs(binr["value"] - point) / binr["ci_halfwidth"]
    ok = code == 0 and rel <= 0.02 and z <= 3.0 and dt < 120
    record(2, ok, f"overall {overall['value']:.5f} vs {want:.5f} (rel {rel:.2%} <= 2%); "
                  f"bin (0.95,1.05] {binr['value']:.4f} +- {binr['ci_halfwidth']:.4f} vs {point:.4f} "
                  f"({z:.2f} CI <= 3); {dt:.1f} s")


# 3 and 4 ------------------------------------------------------------------------------

def test_criterion_3_lemma_suite(work):
    code, dt = _cli("couple", {}, work / "c3")
    cfg = C.normalize("couple", {})
    runs = len(cfg["dists"]) * len(cfg["k_values"]) * len(cfg["rho_values"]) * len(C.seed_list(cfg["seeds"]))
    size = (work / "c3" / "violations.csv").stat().st_size
    summ = csvio.read_rows(work / "c3" / "summary.csv", {"max_delta_over_bound": float})
    worst = max(r["max_delta_over_bound"] for r in summ)
    ok = code == 0 and size == 0 and runs >= 1000 and dt < 20 * 60
    record(3, ok, f"{runs} seeded runs x {len(cfg['pairs'])} pairs x {len(cfg['x_grid'])} thresholds; "
                  f"violations.csv {size} bytes; worst delta/bound {worst:.4f}; {dt:.0f} s (< 1200 s)")


def test_criterion_4_virtual_work(work):
    code, dt = _cli("audit", {}, work / "c4")
    size = (work / "c4" / "violations.csv").stat().st_size
    lone = X.lone_job_virt("SRPT", 2, 1.0)
    summ = csvio.read_rows(work / "c4" / "summary.csv", {"jobs": int, "max_virt_over_bound": float})
    jobs = sum(r["jobs"] for r in summ)
    ok = code == 0 and size == 0 and lone == 1.0
    record(4, ok, f"{jobs} audited jobs, violations.csv {size} bytes, worst virt/limit "
                  f"{max(r['max_virt_over_bound'] for r in summ):.6f}; lone job k=2 x=1 virt = {lone!r}; {dt:.0f} s")


# 5 ---------------------------------------------------------------------------------

def test_criterion_5_relbusy(work):
    doc = {"policy": "SRPT", "k": 10, "lambda": 0.8, "rho": None, "dist": C.UNIFORM, "seed": 5,
           "n_completions": 1_000_000, "x_grid": [1.0], "size_bins": None, "jobs_csv": False}
    code, dt = _cli("simulate", doc, work / "c5")
    rows = _summary(work / "c5")
    busy = next(r["value"] for r in rows if r["metric"] == "relbusy_le")
    orig = next(r["value"] for r in rows if r["metric"] == "relbusy_orig")
    ctx = A.LoadContext(0.8, U, 10)
    target = 10 * A.rho_le(ctx, 1.0)
    rel = abs(busy - target) / target
    record(5, code == 0 and rel <= 0.02,
           f"time-average RelBusy(x=1) by remaining size = {busy:.4f} vs k*rho_le(1) = {target:.4f} "
           f"(rel {rel:.1%}, tol 2%); k*rho_bar(1) = {10 * A.rho_bar(ctx, 1.0):.4f}; "
           f"counting by original size gives {orig:.4f}")


# 6 ---------------------------------------------------------------------------------

def test_criterion_6_log_identity():
    worst = 0.0
    for d, _ in DISTS.values():
        for rho in (0.5, 0.8, 0.95, 0.99):
            ctx = A.LoadContext.from_rho(rho, d)
            got = A.mean_over_sizes(ctx, lambda x: x / (1.0 - A.rho_le(ctx, x)))
            want = math.log(1.0 / (1.0 - rho)) / ctx.lam
            worst = max(worst, abs(got - want) / want)
    record(6, worst <= 1e-6, f"max relative error {worst:.2e} over 2 distributions x 4 loads (tol 1e-6)")


# 7 ---------------------------------------------------------------------------------

N_BINS = 20


def _bin_checks(d, rho, seed=7):
    k = 10
    ctx = A.LoadContext.from_rho(rho, d, k)
    edges = X.equiprobable_edges(d, N_BINS)
    n = C.default_completions(rho)
    arr = sim.ArrivalSequence.poisson(ctx.lam, d, seed)
    q = 0.01 * d.mean()
    runs = {}
    for pol in ("SRPT", "PSJF", "FB", "RS"):
        runs[pol] = sim.run(sim.PolicySpec.parse(pol, d, q), k, arr, n_completions=n, size_bins=edges)
    rs1 = sim.run("RS", 1, arr, n_completions=n, size_bins=edges)
    worst = {}
    for lo, hi in zip(edges, edges[1:]):
        b = (lo, hi)
        slack_fb = k * q / (1.0 - A.rho_bar(ctx, hi if math.isfinite(hi) else 1e300))
        limits = {
            "SRPT": (A.expected(ctx, "I", lo, hi), 0.0),
            "PSJF": (A.expected(ctx, "PSJF", lo, hi), 0.0),
            "FB": (A.expected(ctx, "FB", lo, hi) + slack_fb, 0.0),
        }
        w1 = sim.mean_wait(rs1, b)
        limits["RS"] = (w1.mean + A.expected(ctx, "RS", lo, hi), w1.ci_halfwidth)
        for pol, (lim, extra_ci) in limits.items():
            e = sim.mean_response(runs[pol], b)
            ci = math.hypot(e.ci_halfwidth, extra_ci)
            margin = (lim + 3 * ci - e.mean) / lim  # >= 0 means the bin passes
            if pol not in worst or margin < worst[pol][0]:
                worst[pol] = (margin, lo, hi, e.mean, lim, ci)
    return worst


def test_criterion_7_bound_validity():
    t0 = time.perf_counter()
    fails, notes = [], []
    for name, (d, _) in DISTS.items():
        for rho in (0.8, 0.9):
            for pol, (m, lo, hi, got, lim, ci) in _bin_checks(d, rho).items():
                tag = f"{pol}-10 {name} rho={rho}"
                notes.append(f"{tag}: tightest bin ({lo:.3g},{hi:.3g}] sim {got:.3f} vs bound {lim:.3f} (+3CI {3 * ci:.3f})")
                if m < 0:
                    fails.append(notes[-1])
    dt = time.perf_counter() - t0
    for line in notes:
        print(line, file=sys.stderr)
    detail = f"{len(notes)} policy/load/distribution cases x {N_BINS} bins, {len(fails)} failing; {dt:.0f} s"
    if fails:
        detail += "; first failure: " + fails[0]
    record(7, not fails, detail)


# 8 ---------------------------------------------------------------------------------

def test_criterion_8_heavy_traffic(work):
    t0 = time.perf_counter()
    problems, summary = [], []
    for name, (_, lit) in DISTS.items():
        out = work / f"c8_{name}"
        code, _ = _cli("sweep-ratio", {"dist": lit, "seeds": [8]}, out)
        rows = csvio.read_dataclass(out / "ratio.csv", X.RatioRow)
        r = [row.ratio_sim for row in rows]
        b = [row.ratio_bound_I for row in rows]
        if code != 0:
            problems.append(f"{name}: exit {code}")
        if any(row.ratio_sim < 1 - row.ci_ratio for row in rows):
            problems.append(f"{name}: ratio below 1 - CI")
        if not all(y < x for x, y in zip(r, r[1:])):
            problems.append(f"{name}: ratio_sim not strictly decreasing {r}")
        if not r[-1] < 0.5 * (r[0] - 1) + 1:
            problems.append(f"{name}: ratio(0.99)={r[-1]:.3f} not below {0.5 * (r[0] - 1) + 1:.3f}")
        if not all(y <= x for x, y in zip(b, b[1:])):
            problems.append(f"{name}: ratio_bound_I not decreasing {b}")
        summary.append(f"{name} sim " + "/".join(f"{v:.3f}" for v in r) + " bound_I " + "/".join(f"{v:.2f}" for v in b))
    dt = time.perf_counter() - t0
    if dt >= 3600:
        problems.append(f"runtime {dt:.0f} s")
    record(8, not problems, "; ".join(summary + problems) + f"; {dt:.0f} s (< 3600 s)")


# 9 ---------------------------------------------------------------------------------

def _same_bytes(a: Path, b: Path) -> bool:
    for f in sorted(a.glob("*.csv")):
        if f.read_bytes() != (b / f.name).read_bytes():
            return False
    return True


def test_criterion_9_determinism(work):
    # full-size reruns for the cheap commands, reduced sizes for the long ones
    cases = [
        ("counterexample", {}),
        ("bounds", {"lambda": 0.8, "rho": None}),
        ("simulate", C2),
        ("simulate", {"policy": "FB", "n_completions": 200_000, "jobs_csv": True}),
        ("sweep-ratio", {"rho_grid": [0.8, 0.95], "n_completions": 200_000, "seeds": [1, 2],
                         "policies": ["SRPT", "PSJF", "FB", "RS"]}),
        ("couple", {"seeds": 3, "n_jobs": 500}),
        ("audit", {"seeds": 3, "n_jobs": 500}),
    ]
    bad = []
    for i, (cmd, doc) in enumerate(cases):
        a, b = work / f"c9_{i}_a", work / f"c9_{i}_b"
        _cli(cmd, doc, a)
        _cli(cmd, doc, b)
        if not _same_bytes(a, b):
            bad.append(cmd)
        shutil.rmtree(b)
    record(9, not bad, f"{len(cases)} command configs rerun, byte-identical CSV: "
                       f"{'all' if not bad else 'mismatch in ' + ', '.join(bad)}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
