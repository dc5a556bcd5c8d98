"""Command-line runner: scenario configs in, one JSON report (plus CSV tables) out.

Config files are INI-style. Each ``[scenario NAME]`` section names a
``check`` (the subcommand it belongs to), a ``test`` within that check, a
``seed`` and any test parameters. Numbers are parsed strictly: a decimal
comma or any other locale-dependent form is a config error. Lists of numbers
are whitespace separated; multi-indices are written ``1,0,0|0,2,0``.

Exit codes: 0 every verdict PASS, 1 some verdict FAIL, 2 config error.
"""

from __future__ import annotations

import argparse
import configparser
import math
import re
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__
from .config import ClusterSet, MultiIndex, PotentialSpec
from .errors import ConfigError, CuspBoundsError
from .report import Record, RunReport, default_report_dir

__all__ = ["main", "ScenarioConfig", "load_config", "parse_decimal", "SUBCOMMANDS", "builtin_scenarios"]

_DECIMAL = re.compile(r"[+-]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?", re.ASCII)
_INT = re.compile(r"[+-]?\d+", re.ASCII)


def parse_decimal(text: str, what: str = "value") -> float:
    """Plain ASCII decimal (optionally with exponent) or inf; nothing locale dependent."""
    t = text.strip()
    if t.lower() in ("inf", "+inf", "infinity"):
        return math.inf
    if not _DECIMAL.fullmatch(t):
        hint = " (decimal comma?)" if re.fullmatch(r"[+-]?\d+,\d+", t) else ""
        raise ConfigError(f"{what}: {text!r} is not a plain decimal number{hint}")
    return float(t)


def _parse_int(text: str, what: str) -> int:
    t = text.strip()
    if not _INT.fullmatch(t):
        raise ConfigError(f"{what}: {text!r} is not an integer")
    return int(t)


def _parse_list(text: str, what: str) -> list[float]:
    parts = text.split()
    if not parts:
        raise ConfigError(f"{what}: empty list")
    return [parse_decimal(p, what) for p in parts]


def _parse_int_list(text: str, what: str) -> list[int]:
    return [_parse_int(p, what) for p in text.replace(",", " ").split()]


def _parse_alpha(text: str, what: str) -> MultiIndex:
    try:
        triples = [[_parse_int(v, what) for v in blk.split(",")] for blk in text.split("|")]
        return MultiIndex.from_triples(triples)
    except CuspBoundsError:
        raise
    except Exception as exc:  # malformed shapes from MultiIndex
        raise ConfigError(f"{what}: cannot read multi-index {text!r}: {exc}") from None


def _parse_triple(text: str, what: str) -> tuple[int, int, int]:
    v = _parse_int_list(text, what)
    if len(v) != 3 or min(v) < 0:
        raise ConfigError(f"{what}: expected three non-negative integers, got {text!r}")
    return tuple(v)


PARSERS: dict[str, Callable[[str, str], object]] = {
    "int": _parse_int,
    "float": parse_decimal,
    "floats": _parse_list,
    "ints": _parse_int_list,
    "alpha": _parse_alpha,
    "triple": _parse_triple,
    "str": lambda t, w: t.strip(),
}

# Shared keys: which oracle state to use.
STATE_KEYS = {"state": "str", "Z": "float", "orbitals": "str"}


@dataclass
class Test:
    anchor: str
    schema: dict[str, str]
    defaults: dict[str, object]
    runner: Callable[["ScenarioConfig"], tuple[dict, bool, dict]]
    budget_keys: tuple[str, ...] = ()


@dataclass
class ScenarioConfig:
    name: str
    check: str
    test: str
    seed: int
    params: dict = field(default_factory=dict)

    def echo(self) -> dict:
        out = {"name": self.name, "check": self.check, "test": self.test, "seed": self.seed}
        out.update({k: (str(v) if isinstance(v, MultiIndex) else v) for k, v in self.params.items()})
        return out

    def __getitem__(self, key):
        return self.params[key]


# --- oracle construction -----------------------------------------------------


def _state(cfg: ScenarioConfig):
    from .oracles import hydrogen_2s, hydrogen_ground, product_state

    kind = cfg.params.get("state", "hydrogen")
    Z = cfg.params.get("Z", 1.0)
    if kind == "hydrogen":
        return hydrogen_ground(Z)
    if kind == "hydrogen-2s":
        return hydrogen_2s(Z)
    if kind == "product":
        orbs = []
        for item in str(cfg.params.get("orbitals", "1s 1s")).split():
            kind_z = item.split(":")
            z = parse_decimal(kind_z[1], "orbital charge") if len(kind_z) == 2 else Z
            orbs.append((kind_z[0], z))
        return product_state(orbs)
    raise ConfigError(f"scenario {cfg.name}: unknown state {kind!r} (hydrogen, hydrogen-2s, product)")


def _alpha_for(cfg: ScenarioConfig, n: int) -> MultiIndex:
    a = cfg.params["alpha"]
    if a.n_electrons == n:
        return a
    if a.n_electrons == 1:
        return MultiIndex(a.entries + (0,) * (3 * (n - 1)))
    raise ConfigError(f"scenario {cfg.name}: alpha is for {a.n_electrons} electrons, state has {n}")


def _lam_schedule(cfg: ScenarioConfig) -> np.ndarray:
    return np.logspace(-cfg.params["decades"], 0.0, cfg.params["n_centers"])


# --- runners ---------------------------------------------------------------------


def _run_partition_sum(cfg):
    from .partition import CutoffPair, partition_sum_error

    v = partition_sum_error(cfg["n_electrons"], cfg["n_points"], cfg.seed, CutoffPair(cfg["cutoff"]))
    return v, v["max_error"] <= cfg["tol"], {}


def _run_support(cfg):
    from .partition import CutoffPair, generate_partition, verify_support_control

    rows = [verify_support_control(ix, n=cfg["n_points"], seed=cfg.seed + i, cuts=CutoffPair(cfg["cutoff"]))
            for i, ix in enumerate(generate_partition(cfg["n_electrons"]))]
    worst = max((v for r in rows for v in r["ratios"].values() if v is not None), default=0.0)
    return ({"indices": len(rows), "worst_ratio": worst, "bound": 4.0 ** (cfg["n_electrons"] + 1)},
            all(r["pass"] for r in rows), {"indices": [{"index": r["index"], **r["ratios"]} for r in rows]})


def _run_chi_derivatives(cfg):
    from .partition import CutoffPair, generate_partition, verify_chi_tilde_derivative_bounds

    rows = [verify_chi_tilde_derivative_bounds(ix, cfg["beta"], cfg["n_weight"], seed=cfg.seed + i,
                                               cuts=CutoffPair(cfg["cutoff"]))
            for i, ix in enumerate(generate_partition(cfg["n_electrons"]))]
    table = [{"index": r["index"], "form": r["form"], "sup": r["sup"], "stable": r["stable"]} for r in rows]
    return ({"indices": len(rows), "max_sup": max(r["sup"] for r in rows)}, all(r["pass"] for r in rows),
            {"indices": table})


def _run_vanishing(cfg):
    from .jastrow import vanishing_sweep

    n = cfg["n_electrons"]
    x = np.random.default_rng(cfg.seed).normal(size=(cfg["n_points"], n, 3))
    v = vanishing_sweep(PotentialSpec.atomic(cfg["Z"], n), x, cfg["max_order"])
    return v, v["max"] <= cfg["tol"], {}


def _run_residual(cfg):
    from .geometry import dist_to_sigma
    from .jastrow import AlphaVariant, ClusterVariant, TildeVariant, build_system, regularized_residual
    from .oracles import eigen_residual

    st = _state(cfg)
    n = st.n_electrons
    rng = np.random.default_rng(cfg.seed)
    pts = np.empty((0, n, 3))
    while pts.shape[0] < cfg["n_points"]:
        x = rng.normal(scale=1.5, size=(4 * cfg["n_points"], n, 3))
        pts = np.concatenate([pts, x[dist_to_sigma(x) >= cfg["min_dist"]]])
    pts = pts[: cfg["n_points"]]
    bound = cfg["tol"] * (1 + np.abs(st.value(pts)))
    out = {"eigen": float(np.max(eigen_residual(st, pts) / bound * cfg["tol"]))}
    alpha = MultiIndex(tuple([1, 0, 0] + [0] * (3 * n - 3)))
    for name, var in (("tilde", TildeVariant()), ("alpha", AlphaVariant(alpha)),
                      ("cluster", ClusterVariant(ClusterSet([1], n)))):
        res = regularized_residual(build_system(var, st.spec, st.E), st.psi, pts)
        out[name] = float(np.max(res / bound * cfg["tol"]))
    return out, all(v <= cfg["tol"] for v in out.values()), {}


def _run_rescaled(cfg):
    from .jastrow import AlphaVariant, build_system, rescaled_coefficients

    n = cfg["n_electrons"]
    spec = PotentialSpec.atomic(cfg["Z"], n)
    alpha = MultiIndex(tuple([1, 0, 0] + [0] * (3 * n - 3)))
    system = build_system(AlphaVariant(alpha), spec)
    rng = np.random.default_rng(cfg.seed)
    rows = []
    for i in range(cfg["n_centers"]):
        x0 = rng.normal(scale=2.0, size=(n, 3))
        x0[0] *= 10 ** rng.uniform(-2, 0) / max(np.linalg.norm(x0[0]), 1e-12)
        rf = rescaled_coefficients(system, x0)
        for order in range(cfg["max_order"] + 1):
            gamma = MultiIndex(tuple([order, 0, 0] + [0] * (3 * n - 3)))
            rep = rf.bound_report(gamma, cfg["R"], seed=cfg.seed + i, n_max=cfg["n_samples"])
            rows.append({"center": i, **rep})
    worst = max(r["empirical_sup"] / r["bound"] for r in rows)
    return {"rows": len(rows), "worst_sup_over_bound": worst}, all(r["pass"] for r in rows), {"bounds": rows}


def _run_sharp(cfg):
    from .verify import Ray, scaling_exponent

    st = _state(cfg)
    rep = scaling_exponent(st, _alpha_for(cfg, st.n_electrons), Ray.axis(st.n_electrons), mode=cfg["mode"],
                           tol=cfg["tol"])
    vals = {"alpha": str(rep.alpha), "slope": rep.slope, "stderr": rep.stderr, "target": rep.target,
            "mode": rep.mode, "tol": rep.tol}
    table = [{"radius": t, "distance": d, "magnitude": m} for t, d, m in zip(rep.radii, rep.distances, rep.magnitudes)]
    return vals, rep.passed, {"radii": table}


def _run_pointwise(cfg):
    from .verify import approach_centers, verify_pointwise

    st = _state(cfg)
    cs = approach_centers(st.n_electrons, _lam_schedule(cfg), seed=cfg.seed)
    tab = verify_pointwise(st, _alpha_for(cfg, st.n_electrons), cfg["R"], cs, budget=cfg["budget"], seed=cfg.seed)
    return tab.stats, tab.passed, {"centers": tab.rows}


def _run_decay(cfg):
    from .verify import decay_slope

    st = _state(cfg)
    v = decay_slope(st, _alpha_for(cfg, st.n_electrons))
    return v, v["passed"], {}


def _run_main(cfg):
    from .verify import approach_centers, verify_main_theorem

    st = _state(cfg)
    cs = approach_centers(st.n_electrons, _lam_schedule(cfg), seed=cfg.seed)
    tab = verify_main_theorem(st, _alpha_for(cfg, st.n_electrons), cfg["p"], cfg["r"], cfg["R"], cs,
                              variant=cfg["variant"], budget=cfg["budget"], seed=cfg.seed)
    return tab.stats, tab.passed, {"centers": tab.rows}


def _run_parallel(cfg):
    from .verify import approach_centers, verify_parallel

    st = _state(cfg)
    t = _lam_schedule(cfg)
    cs = approach_centers(st.n_electrons, t, kind="pair", seed=cfg.seed)
    tab = verify_parallel(st, cfg["cluster"], cfg["beta"], cfg["p"], cfg["r"], cfg["R"], cs, budget=cfg["budget"],
                          seed=cfg.seed, trend=t)
    return tab.stats, tab.passed, {"centers": tab.rows}


def expected_sobolev_status(alpha: MultiIndex, a: float) -> str:
    """CONVERGENT below the critical weight (5/2 for |alpha| >= 1, 3/2 for alpha = 0), else DIVERGENT."""
    crit = 2.5 if alpha.order >= 1 else 1.5
    return "CONVERGENT" if a < crit else "DIVERGENT"


def _run_sobolev(cfg):
    from .verify import weighted_sobolev_scan

    st = _state(cfg)
    a = _alpha_for(cfg, st.n_electrons)
    scan = weighted_sobolev_scan(st, a, cfg["a_values"], budget=cfg["budget"], seed=cfg.seed)
    vals = {}
    ok = True
    for av, res in scan.results.items():
        exp = expected_sobolev_status(a, av)
        vals[str(av)] = {"status": res["status"], "expected": exp, "q": res["q"], "rel_increment": res["rel_increment"]}
        ok &= res["status"] == exp
    table = [{"eps": e, **{f"a={av}": res["values"][i] for av, res in scan.results.items()}}
             for i, e in enumerate(scan.eps)]
    return vals, ok, {"integrals": table}


def _run_rho_pointwise(cfg):
    from .density import verify_rho_pointwise

    st = _state(cfg)
    rng = np.random.default_rng(cfg.seed)
    t = _lam_schedule(cfg)
    dirs = rng.standard_normal((t.size, 3))
    pts = t[:, None] * dirs / np.linalg.norm(dirs, axis=1, keepdims=True)
    r = verify_rho_pointwise(st, cfg["beta"], cfg["R"], pts)
    return r["stats"], r["passed"], {"points": r["rows"]}


def _run_rho_lp(cfg):
    from .density import rho_weighted_lp_scan

    st = _state(cfg)
    r = rho_weighted_lp_scan(st, cfg["beta"], cfg["p"], cfg["a_values"])
    vals = {str(w): {k: v for k, v in res.items() if k != "values"} for w, res in r["results"].items()}
    ok = all(res["status"] == res["expected"] for res in r["results"].values())
    return {"threshold": r["threshold"], "results": vals}, ok, {}


def _run_rho_far(cfg):
    from .density import rho_far_field

    r = rho_far_field(_state(cfg), cfg["beta"], limit=cfg["limit"])
    return r, r["passed"], {}


def _run_rho_apriori(cfg):
    from .density import rho_apriori_checks

    st = _state(cfg)
    sched = [np.array([s, 0.0, 0.0]) for s in np.logspace(-2, 0.3, cfg["n_centers"])]
    r = rho_apriori_checks(st, sched, cfg["r"], cfg["R"], cfg["b"], n_outer=cfg["budget"], seed=cfg.seed)
    return {"checks": r["checks"], "notices": r["notices"]}, r["passed"], {"points": r["rows"]}


def _run_rho_agreement(cfg):
    from .density import density_partial

    st = _state(cfg)
    rng = np.random.default_rng(cfg.seed)
    rows = []
    for i in range(cfg["n_centers"]):
        x = rng.normal(size=3)
        c = density_partial(st, x, cfg["beta"], "closed")
        m = density_partial(st, x, cfg["beta"], cfg["method"], budget=cfg["budget"], seed=cfg.seed + i)
        rows.append({"x1": x.tolist(), "closed": c.value, "estimate": m.value, "stderr": m.stderr,
                     "agree": m.agrees_with(c)})
    return {"method": cfg["method"], "points": len(rows)}, all(r["agree"] for r in rows), {"points": rows}


def _run_sup_ratio(cfg):
    from .verify import apriori_sup_ratio, random_centers

    st = _state(cfg)
    cs = random_centers(st.n_electrons, cfg["n_centers"], seed=cfg.seed)
    a = apriori_sup_ratio(st, cs, cfg["r"], cfg["R"], budget=cfg["budget"], seed=cfg.seed)
    b = apriori_sup_ratio(st, cs, cfg["r"], cfg["R"], budget=cfg["budget"], seed=cfg.seed, scale=cfg["scale"])
    drift = float(np.max(np.abs(a.ratios / b.ratios - 1)))
    vals = dict(a.stats)
    vals["scale_drift"] = drift
    return vals, a.passed and drift <= 1e-12, {"centers": a.rows}


_CUT = {"cutoff": "str"}
TESTS: dict[str, dict[str, Test]] = {
    "partition-check": {
        "sum": Test("partition of unity sums to one", {"n_electrons": "int", "n_points": "int", "tol": "float", **_CUT},
                    {"n_electrons": 3, "n_points": 10_000, "tol": 1e-12, "cutoff": "poly7"}, _run_partition_sum,
                    ("n_points",)),
        "support": Test("partition support control", {"n_electrons": "int", "n_points": "int", **_CUT},
                        {"n_electrons": 2, "n_points": 10_000, "cutoff": "poly7"}, _run_support, ("n_points",)),
        "chi-derivatives": Test("shifted cutoff derivative bounds",
                                {"n_electrons": "int", "beta": "triple", "n_weight": "int", **_CUT},
                                {"n_electrons": 2, "beta": (1, 0, 0), "n_weight": 0, "cutoff": "poly7"},
                                _run_chi_derivatives),
    },
    "jastrow-check": {
        "vanishing": Test("regularized exponent derivatives vanish",
                          {"n_electrons": "int", "Z": "float", "n_points": "int", "max_order": "int", "tol": "float"},
                          {"n_electrons": 3, "Z": 3.0, "n_points": 100, "max_order": 3, "tol": 1e-10},
                          _run_vanishing, ("n_points",)),
        "residual": Test("eigen and transformed-equation residuals",
                         {**STATE_KEYS, "n_points": "int", "min_dist": "float", "tol": "float"},
                         {"state": "hydrogen", "Z": 1.0, "n_points": 100, "min_dist": 0.05, "tol": 1e-8},
                         _run_residual, ("n_points",)),
        "rescaled": Test("explicit constant for rescaled potential derivatives",
                         {"n_electrons": "int", "Z": "float", "n_centers": "int", "max_order": "int", "R": "float",
                          "n_samples": "int"},
                         {"n_electrons": 2, "Z": 1.0, "n_centers": 5, "max_order": 2, "R": 0.5, "n_samples": 8192},
                         _run_rescaled, ("n_samples",)),
    },
    "scaling-scan": {
        "sharp": Test("sharp derivative exponent", {**STATE_KEYS, "alpha": "alpha", "mode": "str", "tol": "float"},
                      {"state": "hydrogen", "Z": 1.0, "alpha": MultiIndex((0, 2, 0)), "mode": "sharp", "tol": 0.05},
                      _run_sharp),
        "pointwise": Test("pointwise derivative bound",
                          {**STATE_KEYS, "alpha": "alpha", "R": "float", "n_centers": "int", "decades": "float",
                           "budget": "int"},
                          {"state": "hydrogen", "Z": 1.0, "alpha": MultiIndex((0, 2, 0)), "R": 0.5, "n_centers": 16,
                           "decades": 3.0, "budget": 20_000}, _run_pointwise, ("budget",)),
        "decay": Test("exponential decay of derivatives", {**STATE_KEYS, "alpha": "alpha"},
                      {"state": "hydrogen", "Z": 1.0, "alpha": MultiIndex((1, 0, 0))}, _run_decay),
    },
    "ball-bounds": {
        "main": Test("ball-norm derivative bound",
                     {**STATE_KEYS, "alpha": "alpha", "p": "float", "r": "float", "R": "float", "n_centers": "int",
                      "decades": "float", "budget": "int", "variant": "str"},
                     {"state": "hydrogen", "Z": 1.0, "alpha": MultiIndex((2, 0, 0)), "p": 2.0, "r": 0.25, "R": 0.5,
                      "n_centers": 16, "decades": 3.0, "budget": 20_000, "variant": "alpha"}, _run_main, ("budget",)),
        "parallel": Test("cluster derivative bound",
                         {**STATE_KEYS, "cluster": "ints", "beta": "triple", "p": "float", "r": "float", "R": "float",
                          "n_centers": "int", "decades": "float", "budget": "int"},
                         {"state": "product", "orbitals": "1s 1s", "Z": 1.0, "cluster": [1, 2], "beta": (2, 0, 0),
                          "p": 2.0, "r": 0.25, "R": 0.5, "n_centers": 16, "decades": 3.0, "budget": 20_000},
                         _run_parallel, ("budget",)),
    },
    "sobolev-threshold": {
        "scan": Test("weighted Sobolev threshold",
                     {**STATE_KEYS, "alpha": "alpha", "a_values": "floats", "budget": "int"},
                     {"state": "hydrogen", "Z": 1.0, "alpha": MultiIndex((0, 0, 0)), "a_values": [1.4, 1.6],
                      "budget": 200_000}, _run_sobolev, ("budget",)),
    },
    "density-profile": {
        "pointwise": Test("density derivative bound",
                          {**STATE_KEYS, "beta": "triple", "R": "float", "n_centers": "int", "decades": "float"},
                          {"state": "hydrogen", "Z": 1.0, "beta": (0, 2, 0), "R": 1.0, "n_centers": 16,
                           "decades": 3.0}, _run_rho_pointwise),
        "lp": Test("density weighted L^p threshold",
                   {**STATE_KEYS, "beta": "triple", "p": "float", "a_values": "floats"},
                   {"state": "hydrogen", "Z": 1.0, "beta": (0, 2, 0), "p": 1.0, "a_values": [3.8, 4.2]}, _run_rho_lp),
        "far-field": Test("density far-field decay", {**STATE_KEYS, "beta": "triple", "limit": "float"},
                          {"state": "hydrogen", "Z": 1.0, "beta": (1, 0, 0), "limit": None}, _run_rho_far),
        "apriori": Test("density a priori bounds",
                        {**STATE_KEYS, "r": "float", "R": "float", "b": "float", "n_centers": "int", "budget": "int"},
                        {"state": "product", "orbitals": "1s 1s", "Z": 1.0, "r": 0.25, "R": 0.5, "b": 2.0,
                         "n_centers": 6, "budget": 1000}, _run_rho_apriori, ("budget",)),
        "agreement": Test("density derivative cross-check",
                          {**STATE_KEYS, "beta": "triple", "method": "str", "n_centers": "int", "budget": "int"},
                          {"state": "product", "orbitals": "1s 2s", "Z": 1.0, "beta": (0, 2, 0), "method": "partition",
                           "n_centers": 4, "budget": 5000}, _run_rho_agreement, ("budget",)),
    },
    "apriori-ratios": {
        "sup": Test("a priori sup bound",
                    {**STATE_KEYS, "r": "float", "R": "float", "n_centers": "int", "budget": "int", "scale": "float"},
                    {"state": "hydrogen", "Z": 1.0, "r": 0.5, "R": 1.0, "n_centers": 100, "budget": 5000,
                     "scale": 2.0}, _run_sup_ratio, ("budget",)),
    },
}

SUBCOMMANDS = tuple(TESTS)


def builtin_scenarios() -> dict[str, list[ScenarioConfig]]:
    """Default scenarios per subcommand (used when no config file is given)."""
    mk = lambda name, check, test, **kw: _finish(name, check, test, 42, kw)
    return {
        "partition-check": [mk("sum-n3", "partition-check", "sum"),
                            mk("support-n2", "partition-check", "support"),
                            mk("chi-derivatives-n2", "partition-check", "chi-derivatives")],
        "jastrow-check": [mk("vanishing-n3", "jastrow-check", "vanishing"),
                          mk("residual-hydrogen", "jastrow-check", "residual"),
                          mk("residual-product", "jastrow-check", "residual", state="product", orbitals="1s 2s"),
                          mk("rescaled-n2", "jastrow-check", "rescaled")],
        "scaling-scan": [mk(f"sharp-{a}", "scaling-scan", "sharp", alpha=MultiIndex(t))
                         for a, t in (("grad", (1, 0, 0)), ("order2", (0, 2, 0)), ("order3", (1, 2, 0)),
                                      ("order4", (0, 4, 0)))]
                        + [mk("pointwise-hydrogen", "scaling-scan", "pointwise"),
                           mk("decay-hydrogen", "scaling-scan", "decay")],
        "ball-bounds": [mk("main-hydrogen", "ball-bounds", "main"),
                        mk("parallel-pair", "ball-bounds", "parallel")],
        "sobolev-threshold": [mk("alpha0", "sobolev-threshold", "scan"),
                              mk("alpha2", "sobolev-threshold", "scan", alpha=MultiIndex((0, 2, 0)),
                                 a_values=[2.3, 2.7])],
        "density-profile": [mk("rho-pointwise", "density-profile", "pointwise"),
                            mk("rho-lp1", "density-profile", "lp"),
                            mk("rho-lp2", "density-profile", "lp", p=2.0, a_values=[2.3, 2.7]),
                            mk("rho-far", "density-profile", "far-field"),
                            mk("rho-apriori", "density-profile", "apriori"),
                            mk("rho-partition", "density-profile", "agreement")],
        "apriori-ratios": [mk("sup-hydrogen", "apriori-ratios", "sup"),
                           mk("sup-pair", "apriori-ratios", "sup", state="product", orbitals="1s 1s",
                              n_centers=30)],
    }


def _finish(name: str, check: str, test: str, seed: int, given: dict) -> ScenarioConfig:
    if check not in TESTS:
        raise ConfigError(f"scenario {name}: unknown check {check!r}; choose from {', '.join(SUBCOMMANDS)}")
    if test not in TESTS[check]:
        raise ConfigError(f"scenario {name}: check {check} has no test {test!r}; choose from {', '.join(TESTS[check])}")
    spec = TESTS[check][test]
    unknown = set(given) - set(spec.schema)
    if unknown:
        raise ConfigError(f"scenario {name}: unknown keys {sorted(unknown)} for {check}/{test}")
    params = dict(spec.defaults)
    params.update(given)
    cfg = ScenarioConfig(name, check, test, int(seed), params)
    _validate(cfg)
    return cfg


def _validate(cfg: ScenarioConfig) -> None:
    p = cfg.params
    where = f"scenario {cfg.name}"
    if cfg.seed < 0 or cfg.seed >= 2**64:
        raise ConfigError(f"{where}: seed must be an unsigned 64-bit integer")
    for key in ("n_points", "n_centers", "budget", "n_samples"):
        if key in p and p[key] < 1:
            raise ConfigError(f"{where}: {key} must be positive")
    if "n_electrons" in p and not 1 <= p["n_electrons"] <= 6:
        raise ConfigError(f"{where}: n_electrons must be between 1 and 6")
    if "r" in p and "R" in p and not 0 < p["r"] < p["R"]:
        raise ConfigError(f"{where}: need 0 < r < R")
    if cfg.check == "ball-bounds" and not p["R"] < 1:
        raise ConfigError(f"{where}: ball bounds need R < 1")
    if "p" in p and not (p["p"] == math.inf or p["p"] >= 1):
        raise ConfigError(f"{where}: p must be >= 1 or inf")
    if "b" in p and not 0 <= p["b"] < 3:
        raise ConfigError(f"{where}: b must lie in [0, 3)")
    if p.get("state", "hydrogen") not in ("hydrogen", "hydrogen-2s", "product"):
        raise ConfigError(f"{where}: unknown state {p['state']!r}")
    if p.get("cutoff", "poly7") not in ("poly7", "smooth"):
        raise ConfigError(f"{where}: cutoff must be poly7 or smooth")
    if p.get("mode", "sharp") not in ("sharp", "bound"):
        raise ConfigError(f"{where}: mode must be sharp or bound")
    if p.get("variant", "alpha") not in ("alpha", "full"):
        raise ConfigError(f"{where}: variant must be alpha or full")
    if p.get("method", "mc") not in ("mc", "partition"):
        raise ConfigError(f"{where}: method must be mc or partition")
    if "Z" in p and p["Z"] <= 0:
        raise ConfigError(f"{where}: Z must be positive")


def load_config(path: str | Path) -> list[ScenarioConfig]:
    """Read ``[scenario NAME]`` sections; every section needs check, test and seed."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        with open(path, encoding="ascii") as fh:
            parser.read_file(fh)
    except (OSError, UnicodeDecodeError, configparser.Error) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    out = []
    for section in parser.sections():
        if not section.startswith("scenario "):
            raise ConfigError(f"section [{section}] must be named [scenario NAME]")
        name = section[len("scenario "):].strip()
        items = dict(parser.items(section))
        for key in ("check", "test", "seed"):
            if key not in items:
                raise ConfigError(f"scenario {name}: missing required key {key!r}")
        check, test = items.pop("check").strip(), items.pop("test").strip()
        seed = _parse_int(items.pop("seed"), f"scenario {name}: seed")
        if check not in TESTS or test not in TESTS[check]:
            raise ConfigError(f"scenario {name}: unknown check/test {check}/{test}")
        schema = TESTS[check][test].schema
        given = {}
        for key, text in items.items():
            if key not in schema:
                raise ConfigError(f"scenario {name}: unknown key {key!r} for {check}/{test}")
            given[key] = PARSERS[schema[key]](text, f"scenario {name}: {key}")
        out.append(_finish(name, check, test, seed, given))
    if not out:
        raise ConfigError(f"config {path} defines no scenarios")
    return out


def _scale_budget(cfg: ScenarioConfig, factor: float) -> ScenarioConfig:
    keys = TESTS[cfg.check][cfg.test].budget_keys
    params = dict(cfg.params)
    for k in keys:
        params[k] = max(1, int(round(params[k] * factor)))
    return ScenarioConfig(cfg.name, cfg.check, cfg.test, cfg.seed, params)


def run_scenarios(subcommand: str, scenarios: list[ScenarioConfig]) -> RunReport:
    report = RunReport(subcommand, {"scenarios": [s.echo() for s in scenarios]})
    t0 = time.perf_counter()
    for cfg in scenarios:
        test = TESTS[cfg.check][cfg.test]
        try:
            values, ok, tables = test.runner(cfg)
            report.records.append(Record(cfg.name, cfg.test, test.anchor, values, bool(ok), tables))
        except CuspBoundsError as exc:
            report.records.append(Record(cfg.name, cfg.test, test.anchor, {}, False, error=str(exc)))
    report.wall_clock = time.perf_counter() - t0
    return report


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cuspbounds", description="Run derivative-bound checks on closed-form oracles.")
    ap.add_argument("--version", action="version", version=f"cuspbounds {__version__}")
    ap.add_argument("--list-scenarios", action="store_true", help="list built-in scenarios and exit")
    ap.add_argument("subcommand", nargs="?", choices=SUBCOMMANDS)
    ap.add_argument("--config", type=Path, help="INI file with [scenario NAME] sections")
    ap.add_argument("--seed", type=str, help="unsigned 64-bit seed overriding every scenario seed")
    ap.add_argument("--out", type=Path, help="report path (default: $CUSPBOUNDS_REPORT_DIR/<subcommand>.json)")
    ap.add_argument("--budget-scale", type=str, default="1", help="multiply sample budgets by this factor")
    ap.add_argument("--no-csv", action="store_true", help="skip the per-table CSV files")
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.list_scenarios:
        for sub, items in builtin_scenarios().items():
            for s in items:
                print(f"{sub:18s} {s.name:22s} {s.test:16s} {TESTS[sub][s.test].anchor}")
        return 0
    if args.subcommand is None:
        ap.print_usage(sys.stderr)
        print("cuspbounds: error: a subcommand is required", file=sys.stderr)
        return 2
    try:
        scale = parse_decimal(args.budget_scale, "--budget-scale")
        if not 0 < scale < math.inf:
            raise ConfigError("--budget-scale must be a positive finite number")
        if args.config is not None:
            scenarios = [s for s in load_config(args.config) if s.check == args.subcommand]
            if not scenarios:
                raise ConfigError(f"config {args.config} has no scenarios for {args.subcommand}")
        else:
            scenarios = builtin_scenarios()[args.subcommand]
        if args.seed is not None:
            seed = _parse_int(args.seed, "--seed")
            if not 0 <= seed < 2**64:
                raise ConfigError("--seed must be an unsigned 64-bit integer")
            scenarios = [ScenarioConfig(s.name, s.check, s.test, seed, s.params) for s in scenarios]
        scenarios = [_scale_budget(s, scale) for s in scenarios]
    except CuspBoundsError as exc:
        print(f"cuspbounds: config error: {exc}", file=sys.stderr)
        return 2
    report = run_scenarios(args.subcommand, scenarios)
    out = args.out or default_report_dir() / f"{args.subcommand}.json"
    report.write(out, csv_tables=not args.no_csv)
    for rec in report.records:
        tail = f"  ({rec.error})" if rec.error else ""
        print(f"{'PASS' if rec.passed else 'FAIL'}  {rec.name:22s} {rec.anchor}{tail}")
    print(f"{'PASS' if report.passed else 'FAIL'}  report: {out}")
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
