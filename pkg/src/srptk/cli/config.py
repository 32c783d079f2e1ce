"""JSON configs for the CLI subcommands.

Each subcommand has a table of defaults.  A user document is merged over the
defaults, then `--key=value` overrides are applied (dotted keys reach into
nested objects, values are parsed as JSON when possible).  ``normalize``
fills defaults and coerces types so that ``serialize(parse(c)) ==
normalize(c)`` for every valid document ``c``.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import asdict, dataclass
from typing import Any

from .. import dist as D
from ..sim.model import POLICIES

UNIFORM = {"kind": "uniform", "a": 0.0, "b": 2.0}
HYPEREXP = {"kind": "hyperexp2", "mean": 1.0, "scv": 10.0}


class ConfigError(ValueError):
    pass


DEFAULTS: dict[str, dict[str, Any]] = {
    "simulate": {
        "policy": "SRPT",
        "k": 10,
        "lambda": None,
        "rho": 0.8,
        "dist": UNIFORM,
        "seed": 1,
        "n_completions": 1_000_000,
        "warmup_fraction": 0.2,
        "n_batches": 32,
        "x_grid": [0.25, 0.5, 1.0, 1.5],
        "size_bins": 20,
        "fb_quantum": None,
        "jobs_csv": True,
        "check": False,
        "out": "out/simulate",
    },
    "bounds": {
        "k": 10,
        "lambda": None,
        "rho": 0.8,
        "dist": UNIFORM,
        "x_grid": [0.25, 0.5, 1.0, 1.5, 2.0],
        "out": "out/bounds",
    },
    "sweep-ratio": {
        "k": 10,
        "dist": UNIFORM,
        "rho_grid": [0.8, 0.9, 0.95, 0.99],
        "seeds": [1],
        "n_completions": None,
        "policies": ["SRPT"],
        "warmup_fraction": 0.2,
        "n_batches": 32,
        "fb_quantum": None,
        "workers": 1,
        "outputs": {"dir": "out/sweep", "csv": "ratio.csv", "svg": "ratio.svg"},
    },
    "couple": {
        "pairs": ["SRPT", "PSJF", "RS", "FB", "PSJF-SRPT"],
        "dists": [UNIFORM, HYPEREXP],
        "k_values": [2, 10],
        "rho_values": [0.5, 0.8, 0.95],
        "x_grid": [0.25, 0.5, 1.0, 1.5],
        "seeds": 84,
        "n_jobs": 1000,
        "fb_quantum": None,
        "rs_threshold": "frozen",
        "workers": 1,
        "out": "out/couple",
    },
    "audit": {
        "policies": ["SRPT", "PSJF", "RS", "FB"],
        "dists": [UNIFORM, HYPEREXP],
        "k_values": [2, 10],
        "rho_values": [0.5, 0.8, 0.95],
        "seeds": 84,
        "n_jobs": 1000,
        "fb_quantum": None,
        "rs_threshold": "frozen",
        "workers": 1,
        "out": "out/audit",
    },
    "counterexample": {"out": "out/counterexample"},
}

COMMANDS = tuple(DEFAULTS)


def parse_value(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_override(doc: dict, key: str, value: Any, defaults: dict | None = None) -> None:
    parts = key.split(".")
    if len(parts) > 1 and parts[0] not in doc and defaults and isinstance(defaults.get(parts[0]), dict):
        doc[parts[0]] = copy.deepcopy(defaults[parts[0]])
    node = doc
    for p in parts[:-1]:
        nxt = node.get(p)
        if not isinstance(nxt, dict):
            nxt = {}
            node[p] = nxt
        node = nxt
    node[parts[-1]] = value


def parse_overrides(args: list[str]) -> list[tuple[str, Any]]:
    out = []
    for a in args:
        if not a.startswith("--") or "=" not in a:
            raise ConfigError(f"expected --key=value, got {a!r}")
        key, _, val = a[2:].partition("=")
        if not key:
            raise ConfigError(f"empty key in {a!r}")
        out.append((key, parse_value(val)))
    return out


def _merge(base: dict, doc: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in doc.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k != "dist":
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


# coercion helpers -----------------------------------------------------------

def _num(v, name) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{name} must be a number, got {v!r}")
    v = float(v)
    if not math.isfinite(v):
        raise ConfigError(f"{name} must be finite")
    return v


def _int(v, name, lo=None) -> int:
    if isinstance(v, bool) or not isinstance(v, (int, float)) or float(v) != int(v):
        raise ConfigError(f"{name} must be an integer, got {v!r}")
    v = int(v)
    if lo is not None and v < lo:
        raise ConfigError(f"{name} must be >= {lo}")
    return v


def _opt_num(v, name):
    return None if v is None else _num(v, name)


def _dist_lit(v, name="dist") -> dict:
    if not isinstance(v, dict):
        raise ConfigError(f"{name} must be a distribution literal object")
    lit = {"kind": v.get("kind")}
    for key in sorted(k for k in v if k != "kind"):
        val = v[key]
        lit[key] = val if isinstance(val, bool) else _num(val, f"{name}.{key}")
    try:
        D.from_literal(lit)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{name}: {exc}") from None
    return lit


def _policy(v, name="policy") -> str:
    if not isinstance(v, str) or v.upper() not in POLICIES:
        raise ConfigError(f"{name} must be one of {POLICIES}, got {v!r}")
    return v.upper()


def _grid(v, name, positive=True) -> list[float]:
    if not isinstance(v, list):
        raise ConfigError(f"{name} must be a list")
    g = [_num(x, name) for x in v]
    if positive and any(x <= 0 for x in g):
        raise ConfigError(f"{name} entries must be positive")
    return g


def _seeds(v, name="seeds"):
    if isinstance(v, list):
        s = [_int(x, name, 0) for x in v]
        if len(set(s)) != len(s):
            raise ConfigError("seeds must be distinct")
        return s
    return _int(v, name, 1)


def seed_list(v) -> list[int]:
    """An integer seed count n stands for seeds 1..n."""
    return list(range(1, v + 1)) if isinstance(v, int) else list(v)


def _load_pair(doc, require_one=True):
    lam, rho = doc.get("lambda"), doc.get("rho")
    if lam is not None and rho is not None:
        raise ConfigError("give either lambda or rho, not both")
    if require_one and lam is None and rho is None:
        raise ConfigError("one of lambda or rho is required")
    lam = _opt_num(lam, "lambda")
    rho = _opt_num(rho, "rho")
    if lam is not None and lam <= 0:
        raise ConfigError("lambda must be positive")
    if rho is not None and not 0 < rho < 1:
        raise ConfigError("rho must lie in (0, 1)")
    return lam, rho


def normalize(command: str, doc: dict | None = None) -> dict:
    """Defaults filled in and values coerced; raises ConfigError on bad input."""
    if command not in DEFAULTS:
        raise ConfigError(f"unknown command {command!r}")
    doc = doc or {}
    unknown = set(doc) - set(DEFAULTS[command])
    if unknown:
        raise ConfigError(f"unknown {command} config keys: {sorted(unknown)}")
    c = _merge(DEFAULTS[command], doc)
    # an explicit lambda displaces the default rho
    if "lambda" in doc and doc["lambda"] is not None and "rho" not in doc:
        c["rho"] = None
    out: dict[str, Any] = {}
    if command in ("simulate", "bounds"):
        out["k"] = _int(c["k"], "k", 1)
        out["lambda"], out["rho"] = _load_pair(c)
        out["dist"] = _dist_lit(c["dist"])
        out["x_grid"] = _grid(c["x_grid"], "x_grid")
        d = D.from_literal(out["dist"])
        lam = out["lambda"] if out["lambda"] is not None else out["rho"] / d.mean()
        if not lam * d.mean() < 1:
            raise ConfigError(f"unstable load rho={lam * d.mean():.6g}")
    if command == "simulate":
        out["policy"] = _policy(c["policy"])
        out["seed"] = _int(c["seed"], "seed", 0)
        out["n_completions"] = _int(c["n_completions"], "n_completions", 1)
        out["warmup_fraction"] = _num(c["warmup_fraction"], "warmup_fraction")
        if not 0 <= out["warmup_fraction"] < 1:
            raise ConfigError("warmup_fraction must lie in [0, 1)")
        out["n_batches"] = _int(c["n_batches"], "n_batches", 2)
        sb = c["size_bins"]
        if sb is None or isinstance(sb, int) and not isinstance(sb, bool):
            out["size_bins"] = None if sb is None else _int(sb, "size_bins", 1)
        else:
            out["size_bins"] = _grid(sb, "size_bins", positive=False)
        out["fb_quantum"] = _opt_num(c["fb_quantum"], "fb_quantum")
        out["jobs_csv"] = bool(c["jobs_csv"])
        out["check"] = bool(c["check"])
    if command == "sweep-ratio":
        out["k"] = _int(c["k"], "k", 1)
        out["dist"] = _dist_lit(c["dist"])
        g = _grid(c["rho_grid"], "rho_grid")
        if any(r >= 1 for r in g):
            raise ConfigError("every rho in rho_grid must be < 1")
        if any(b <= a for a, b in zip(g, g[1:])) or not g:
            raise ConfigError("rho_grid must be non-empty and strictly increasing")
        out["rho_grid"] = g
        s = _seeds(c["seeds"])
        out["seeds"] = s
        nc = c["n_completions"]
        out["n_completions"] = None if nc is None else _int(nc, "n_completions", 1)
        pols = c["policies"]
        if not isinstance(pols, list) or not pols:
            raise ConfigError("policies must be a non-empty list")
        out["policies"] = [_policy(p, "policies") for p in pols]
        out["warmup_fraction"] = _num(c["warmup_fraction"], "warmup_fraction")
        out["n_batches"] = _int(c["n_batches"], "n_batches", 2)
        out["fb_quantum"] = _opt_num(c["fb_quantum"], "fb_quantum")
        out["workers"] = _int(c["workers"], "workers", 1)
        o = c["outputs"]
        if not isinstance(o, dict) or set(o) != {"dir", "csv", "svg"}:
            raise ConfigError("outputs needs exactly dir, csv and svg")
        out["outputs"] = {k: str(o[k]) for k in ("dir", "csv", "svg")}
    if command in ("couple", "audit"):
        from ..coupling import AUDIT_POLICIES, PAIRS, RS_MODES

        if command == "couple":
            pairs = c["pairs"]
            if not isinstance(pairs, list) or any(str(p).upper() not in PAIRS for p in pairs):
                raise ConfigError(f"pairs must be drawn from {sorted(PAIRS)}")
            out["pairs"] = [str(p).upper() for p in pairs]
            out["x_grid"] = _grid(c["x_grid"], "x_grid")
        else:
            pols = c["policies"]
            if not isinstance(pols, list) or any(str(p).upper() not in AUDIT_POLICIES for p in pols):
                raise ConfigError(f"policies must be drawn from {AUDIT_POLICIES}")
            out["policies"] = [str(p).upper() for p in pols]
        if not isinstance(c["dists"], list) or not c["dists"]:
            raise ConfigError("dists must be a non-empty list")
        out["dists"] = [_dist_lit(d, "dists") for d in c["dists"]]
        out["k_values"] = [_int(k, "k_values", 1) for k in c["k_values"]]
        rv = _grid(c["rho_values"], "rho_values")
        if any(r >= 1 for r in rv):
            raise ConfigError("rho_values must be < 1")
        out["rho_values"] = rv
        out["seeds"] = _seeds(c["seeds"])
        out["n_jobs"] = _int(c["n_jobs"], "n_jobs", 1)
        out["fb_quantum"] = _opt_num(c["fb_quantum"], "fb_quantum")
        if c["rs_threshold"] not in RS_MODES:
            raise ConfigError(f"rs_threshold must be one of {RS_MODES}")
        out["rs_threshold"] = c["rs_threshold"]
        out["workers"] = _int(c["workers"], "workers", 1)
    if "out" in DEFAULTS[command]:
        out["out"] = str(c["out"])
    return {k: out[k] for k in DEFAULTS[command]}


@dataclass(frozen=True)
class SweepConfig:
    k: int
    dist: dict
    rho_grid: list
    seeds: list | int
    n_completions: int | None
    policies: list
    outputs: dict
    warmup_fraction: float = 0.2
    n_batches: int = 32
    fb_quantum: float | None = None
    workers: int = 1

    def __post_init__(self):
        g = self.rho_grid
        if any(r >= 1 for r in g) or any(b <= a for a, b in zip(g, g[1:])):
            raise ConfigError("rho_grid must be strictly increasing with every rho < 1")

    @property
    def service(self) -> D.ServiceDist:
        return D.from_literal(self.dist)

    def cell_completions(self, rho: float) -> int:
        if self.n_completions is not None:
            return self.n_completions
        return default_completions(rho)


def default_completions(rho: float) -> int:
    # round first so 5e5 / 0.2 does not ceil up to 2500001
    return int(min(math.ceil(round(5e5 / (1.0 - rho), 6)), 5e7))


def parse(command: str, doc: dict | None = None):
    """Normalized config; for sweep-ratio a SweepConfig."""
    n = normalize(command, doc)
    if command == "sweep-ratio":
        return SweepConfig(**n)
    return n


def serialize(cfg) -> dict:
    if isinstance(cfg, SweepConfig):
        d = asdict(cfg)
        return {k: d[k] for k in DEFAULTS["sweep-ratio"]}
    return copy.deepcopy(cfg)


def dumps(cfg) -> str:
    return json.dumps(serialize(cfg), indent=2, sort_keys=False) + "\n"


def load(command: str, path: str | None = None, overrides: list[str] = ()) -> dict:
    doc: dict = {}
    if path:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
        if not isinstance(doc, dict):
            raise ConfigError("config file must hold a JSON object")
    for key, val in parse_overrides(list(overrides)):
        apply_override(doc, key, val, DEFAULTS.get(command))
    return doc
