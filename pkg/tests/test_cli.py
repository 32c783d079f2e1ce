import json
import math
import xml.etree.ElementTree as ET

import pytest
from hypothesis import given
from hypothesis import strategies as st

from srptk.cli import config as C
from srptk.cli import csvio, main
from srptk.cli.experiments import RATIO_FIELDS, RatioRow, ratio_svg
from srptk.cli.svg import line_chart


@pytest.mark.parametrize("command", C.COMMANDS)
def test_defaults_normalize_and_round_trip(command):
    n = C.normalize(command, {})
    assert C.serialize(C.parse(command, n)) == n
    assert C.normalize(command, n) == n
    assert json.loads(C.dumps(C.parse(command, {}))) == n


floats01 = st.floats(0.05, 0.95).map(lambda v: round(v, 3))


@given(
    k=st.integers(1, 20),
    rhos=st.lists(floats01, min_size=1, max_size=5, unique=True),
    seeds=st.one_of(st.integers(1, 5), st.lists(st.integers(0, 99), min_size=1, max_size=4, unique=True)),
    dist=st.sampled_from([C.UNIFORM, C.HYPEREXP, {"kind": "exponential", "rate": 2}]),
    n=st.one_of(st.none(), st.integers(10, 10**6)),
)
def test_sweep_config_round_trip(k, rhos, seeds, dist, n):
    doc = {"k": k, "rho_grid": sorted(rhos), "seeds": seeds, "dist": dist, "n_completions": n}
    cfg = C.parse("sweep-ratio", doc)
    assert isinstance(cfg, C.SweepConfig)
    assert C.serialize(cfg) == C.normalize("sweep-ratio", doc)


@given(rho=floats01, k=st.integers(1, 12), pol=st.sampled_from(["srpt", "PSJF", "fb", "Rs", "FCFS"]))
def test_simulate_config_round_trip(rho, k, pol):
    doc = {"rho": rho, "k": k, "policy": pol}
    n = C.normalize("simulate", doc)
    assert n["policy"] == pol.upper()
    assert C.serialize(C.parse("simulate", doc)) == n


def test_overrides():
    doc = C.load("sweep-ratio", None, ["--k=4", "--rho_grid=[0.5,0.7]", "--outputs.dir=/tmp/x", "--dist.b=3"])
    n = C.normalize("sweep-ratio", doc)
    assert n["k"] == 4 and n["rho_grid"] == [0.5, 0.7]
    assert n["outputs"] == {"dir": "/tmp/x", "csv": "ratio.csv", "svg": "ratio.svg"}
    assert n["dist"] == {"kind": "uniform", "a": 0.0, "b": 3.0}
    assert C.normalize("simulate", C.load("simulate", None, ["--lambda=0.4"]))["rho"] is None
    with pytest.raises(C.ConfigError):
        C.parse_overrides(["k=3"])


@pytest.mark.parametrize(
    "command,doc",
    [
        ("sweep-ratio", {"rho_grid": [0.9, 0.8]}),
        ("sweep-ratio", {"rho_grid": [0.5, 1.0]}),
        ("sweep-ratio", {"policies": ["LIFO"]}),
        ("simulate", {"lambda": 0.8, "rho": 0.8}),
        ("simulate", {"lambda": 0.8, "dist": {"kind": "uniform", "a": 0, "b": 3}}),
        ("simulate", {"bogus": 1}),
        ("couple", {"pairs": ["XYZ"]}),
        ("couple", {"seeds": [1, 1]}),
        ("bounds", {"dist": {"kind": "pareto", "xm": 1, "alpha": 1.5}}),
    ],
)
def test_bad_configs(command, doc):
    with pytest.raises(C.ConfigError):
        C.normalize(command, doc)


def test_default_completions():
    assert C.default_completions(0.8) == 2_500_000
    assert C.default_completions(0.99) == 50_000_000
    assert C.default_completions(0.9999) == 50_000_000


nums = st.one_of(st.floats(allow_nan=True, allow_infinity=True), st.floats(-1e300, 1e300))


@given(vals=st.lists(nums, min_size=8, max_size=8), n=st.integers(0, 10**9),
       status=st.sampled_from(["ok", "ValueError: x, y", 'quote "q"']))
def test_csv_round_trip(tmp_path_factory, vals, n, status):
    row = RatioRow("SRPT", vals[0], *vals[1:8], vals[0], n, status)
    p = tmp_path_factory.mktemp("csv") / "r.csv"
    csvio.write_rows(p, RATIO_FIELDS, [row])
    (back,) = csvio.read_dataclass(p, RatioRow)
    for f in RATIO_FIELDS:
        a, b = getattr(row, f), getattr(back, f)
        assert (isinstance(a, float) and math.isnan(a) and math.isnan(b)) or a == b


def test_empty_violation_file(tmp_path):
    p = tmp_path / "v.csv"
    assert csvio.write_rows(p, ["seed", "x"], [], empty_if_none=True) == 0
    assert p.read_bytes() == b""
    assert csvio.read_rows(p) == []


def test_svg_is_well_formed():
    svg = line_chart([("a", [0.8, 0.9], [3.0, 2.0]), ("b", [0.8, 0.9], [5.0, math.nan])], "t", "x", "y")
    root = ET.fromstring(svg)
    assert root.tag.endswith("svg")
    assert svg.count("<polyline") == 1 and "a" in svg and "b" in svg
    rows = [RatioRow("SRPT", r, 1, 0, 1, 0, 2 - r, 0.1, 3 - r, 4 - r, 10) for r in (0.8, 0.9)]
    ET.fromstring(ratio_svg(rows, 10, "uniform(a=0,b=2)"))


def test_main_config_error(capsys):
    assert main(["simulate", "--rho=1.5"]) == 2
    assert "config error" in capsys.readouterr().err


def test_main_print_config(capsys):
    assert main(["bounds", "--print-config", "--k=3"]) == 0
    assert json.loads(capsys.readouterr().out)["k"] == 3


def test_bounds_command_and_determinism(tmp_path):
    out = tmp_path / "b"
    assert main(["bounds", f"--out={out}", "--lambda=0.8"]) == 0
    rows = csvio.read_rows(out / "bounds.csv", {k: float for k in ["x", "H", "I"]})
    one = [r for r in rows if r["x"] == 1.0][0]
    assert one["H"] == pytest.approx(25.416666667) and one["I"] == pytest.approx(13.36439, abs=1e-5)
    first = (out / "bounds.csv").read_bytes()
    assert main(["bounds", f"--out={out}", "--lambda=0.8"]) == 0
    assert (out / "bounds.csv").read_bytes() == first


def test_small_sweep_and_simulate(tmp_path):
    sw = tmp_path / "s"
    args = ["sweep-ratio", f"--outputs.dir={sw}", "--rho_grid=[0.5,0.8]", "--n_completions=20000", "--seeds=[1,2]"]
    assert main(args) == 0
    a = (sw / "ratio.csv").read_bytes()
    assert main(args + ["--workers=2"]) == 0
    assert (sw / "ratio.csv").read_bytes() == a
    rows = csvio.read_dataclass(sw / "ratio.csv", RatioRow)
    assert [r.rho for r in rows] == [0.5, 0.8]
    assert (sw / "ratio.svg").read_text().startswith("<svg")
    sim_out = tmp_path / "sim"
    assert main(["simulate", f"--out={sim_out}", "--n_completions=3000", "--policy=FB", "--check=true"]) == 0
    jobs = csvio.read_rows(sim_out / "jobs.csv")
    assert len(jobs) == 3000 and list(jobs[0]) == ["id", "arrival", "size", "completion", "response"]


def test_sweep_isolates_failing_cell(tmp_path, monkeypatch):
    from srptk.cli import experiments as X

    real = X._sweep_cell

    def flaky(task):
        if task[1] == 0.8:
            raise RuntimeError("boom")
        return real(task)

    monkeypatch.setattr(X, "_sweep_cell", flaky)
    cfg = C.parse("sweep-ratio", {"rho_grid": [0.5, 0.8], "n_completions": 5000})
    rows = X.sweep_ratio(cfg)
    assert rows[0].ok and not rows[1].ok and "boom" in rows[1].status
    assert not all(c.passed for c in X.sweep_checks(rows))


def test_counterexample_command(tmp_path, capsys):
    assert main(["counterexample", f"--out={tmp_path}"]) == 0
    assert "third completion: 6" in capsys.readouterr().out
