"""Experiment configs, dispatch, report files, and the Landauer check."""

from __future__ import annotations

import datetime as _dt
import logging
import math
import platform
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, List, Mapping

import yaml

from . import __version__
from .adversary import AdversaryConfig, duel, sweep_adaptivity, tournament
from .errors import InternalConsistencyError, InvalidInput, NonDeterministicStrategy
from .finite_market import binomial_tree, detect_arbitrage, search_universal, solve_emm
from .io import read_paths, read_tree, write_report
from .market import (CostModel, PricePath, check_time_reversal_consistency,
                     check_universal, time_reverse, to_exact)
from .nfl import UniformPathSpace, ensemble_pnl
from .strategies import BUNDLED, bundled_strategies, make_strategy
from .wheel import (SCENARIOS, LatticePricer, WheelConfig, generate_scenario, run_wheel)

logger = logging.getLogger(__name__)

EXPERIMENTS = ("emm", "arbitrage-search", "nfl", "adversary", "time-reversal", "wheel", "landauer")

BOLTZMANN = 1.380649e-23  # J/K, exact SI value
JOULES_PER_KWH = 3.6e6


def landauer_bit_cost(temperature: float) -> float:
    """Minimum energy in joules to erase one bit at ``temperature`` kelvin."""
    if not temperature > 0:
        raise InvalidInput("temperature must be positive", "temperature")
    return BOLTZMANN * temperature * math.log(2)


def landauer_usd_per_bit(temperature: float, usd_per_kwh: float = 1.0) -> float:
    """Dollar value of one Landauer bit at an (illustrative) energy price."""
    if usd_per_kwh < 0:
        raise InvalidInput("usd_per_kwh must be non-negative", "usd_per_kwh")
    return landauer_bit_cost(temperature) * usd_per_kwh / JOULES_PER_KWH


# --- config ---------------------------------------------------------------------

DEFAULTS: Dict[str, Dict[str, Any]] = {
    "emm": {"tree": None, "binomial": {"p0": 100, "up": 1.2, "down": 0.8, "depth": 2}},
    "arbitrage-search": {"tree": None, "binomial": {"p0": 100, "up": 1.2, "down": 0.8, "depth": 2},
                         "grid": [-1, 0, 1], "cost": 0, "bound": 1000000},
    "nfl": {"T": 10, "P0": 100, "delta": 1, "cost": 0, "samples": None,
            "strategies": ["flat", "buy-and-hold", "momentum", "contrarian"]},
    "adversary": {"epsilon": 0.01, "T": 10, "P0": 100, "alpha": 1.0, "alphas": None, "eta": 0,
                  "cost": 0, "replications": 100, "strategies": list(BUNDLED)},
    "time-reversal": {"paths": None, "P0": 100, "steps": 10, "step": 1, "cost": 0,
                      "bound": 1000000, "strategies": ["flat", "buy-and-hold", "momentum"]},
    "wheel": {"scenario": "all", "paths": None, "put_strike_ratio": 0.95, "call_strike_ratio": 1.05,
              "expiry_steps": 5, "pricing": "lattice", "fixed_premium": None, "up": 1.05,
              "down": 0.95, "capital": 100000, "cost": 0, "scenario_params": {}},
    "landauer": {"temperature": 300, "usd_per_kwh": 1.0},
}


@dataclass
class ExperimentConfig:
    experiment: str
    params: Dict[str, Any]
    out: Path = Path("reports")
    seed: int = 0
    source: Dict[str, Any] = field(default_factory=dict)

    @classmethod
    def from_mapping(cls, experiment: str, data: Mapping = None, *, out=None, seed=None,
                     overrides: Mapping = None) -> "ExperimentConfig":
        data = dict(data or {})
        if experiment not in EXPERIMENTS:
            raise InvalidInput(f"unknown experiment {experiment!r}", "experiment")
        declared = data.pop("experiment", experiment)
        if declared != experiment:
            raise InvalidInput(f"config is for {declared!r}, not {experiment!r}", "experiment")
        file_seed, file_out = data.pop("seed", 0), data.pop("out", "reports")
        base_seed = file_seed if seed is None else seed
        out_dir = file_out if out is None else out
        block = data.pop(experiment, {}) or {}
        if data:
            raise InvalidInput(f"unexpected top-level keys: {sorted(data)}", sorted(data)[0])
        params = dict(DEFAULTS[experiment])
        for key, value in list(block.items()) + list((overrides or {}).items()):
            if key not in params:
                raise InvalidInput(f"unknown {experiment} parameter {key!r}", key)
            params[key] = value
        if not isinstance(base_seed, int):
            raise InvalidInput("seed must be an integer", "seed")
        source = {"experiment": experiment, "seed": base_seed, experiment: params}
        return cls(experiment, params, Path(out_dir), base_seed, source)

    @classmethod
    def load(cls, experiment: str, file=None, **kw) -> "ExperimentConfig":
        data = {}
        if file is not None:
            try:
                data = yaml.safe_load(Path(file).read_text()) or {}
            except (OSError, yaml.YAMLError) as exc:
                raise InvalidInput(f"cannot read config {file}: {exc}", "config") from None
            if not isinstance(data, dict):
                raise InvalidInput("config file must hold a mapping", "config")
        return cls.from_mapping(experiment, data, **kw)


def _strategies(specs) -> list:
    out = []
    for spec in specs:
        if isinstance(spec, str):
            out.append(make_strategy(spec))
        elif isinstance(spec, Mapping) and "name" in spec:
            params = {k: v for k, v in spec.items() if k != "name"}
            out.append(make_strategy(spec["name"], **params))
        else:
            raise InvalidInput(f"bad strategy entry {spec!r}", "strategies")
    return out


def _cost(value) -> CostModel:
    return CostModel(to_exact(value))


def _tree(params):
    if params.get("tree"):
        return read_tree(params["tree"])
    b = params["binomial"]
    return binomial_tree(b["p0"], b["up"], b["down"], int(b["depth"]))


# --- experiments ------------------------------------------------------------------
# Each returns {filename: (columns, rows)}.


def _run_emm(cfg):
    tree = _tree(cfg.params)
    res = solve_emm(tree)
    if res.exists:
        rows = []
        for nid, probs in res.q.items():
            for cid, q in zip(tree.nodes[nid].children, probs):
                rows.append([nid, cid, q, nid in res.non_unique])
        return {"emm.csv": (["node_id", "child_id", "q", "non_unique"], rows)}
    cert = res.certificate
    rows = [["position", nid, w] for nid, w in cert.positions.items()]
    rows += [["terminal_pnl", leaf, v] for leaf, v in cert.terminal_pnl.items()]
    return {"certificate.csv": (["record", "id", "value"], rows)}


def _run_search(cfg):
    p = cfg.params
    tree = _tree(p)
    table = search_universal(tree, p["grid"], _cost(p["cost"]), to_exact(p["bound"]))
    has_emm = solve_emm(tree).exists
    cert = detect_arbitrage(tree)
    if has_emm == (cert is not None):
        raise InternalConsistencyError("solve_emm and detect_arbitrage disagree")
    if table is not None and cert is None:
        raise InternalConsistencyError("universal strategy found on an arbitrage-free tree")
    rows = [["emm_exists", "", has_emm], ["universal", "", table is not None]]
    rows += [["position", nid, w] for nid, w in (table or {}).items()]
    return {"search.csv": (["record", "node_id", "value"], rows)}


def _run_nfl(cfg):
    p = cfg.params
    space = UniformPathSpace(int(p["T"]), p["P0"], p["delta"])
    costs = _cost(p["cost"])
    rank, hist = [], []
    for s in _strategies(p["strategies"]):
        st = ensemble_pnl(s, space, costs, samples=p["samples"], seed=cfg.seed)
        rank.append([s.name, st.total, st.mean, st.minimum, st.maximum, st.count, st.exhaustive])
        hist += [[s.name, v, n] for v, n in sorted(st.histogram.items())]
    rank.sort(key=lambda r: -r[1])
    return {"nfl_rank.csv": (["strategy", "total", "mean", "min", "max", "paths", "exhaustive"],
                             rank),
            "nfl_histogram.csv": (["strategy", "pnl", "count"], hist)}


def audit_registry(config: AdversaryConfig):
    """Every bundled strategy must replay deterministically before any adversary run."""
    for s in bundled_strategies():
        try:
            duel(s, AdversaryConfig(config.epsilon, min(config.horizon, 5), config.p0,
                                    config.dead_band, 1.0, config.seed))
        except NonDeterministicStrategy as exc:
            raise InternalConsistencyError(f"registry audit failed: {exc}") from exc


def _run_adversary(cfg):
    p = cfg.params
    config = AdversaryConfig(p["epsilon"], int(p["T"]), p["P0"], p["eta"], p["alpha"], cfg.seed)
    costs = _cost(p["cost"])
    strategies = _strategies(p["strategies"])
    audit_registry(config)
    rows = tournament(strategies, config, costs)
    steps = []
    for row in rows:
        if row.record is None:
            continue
        rec = row.record
        for t, price in enumerate(rec.path.prices):
            w = rec.positions[t] if t < len(rec.positions) else ""
            steps.append([row.strategy, t, float(price), w, float(rec.ledger.wealth[t])])
    summary = [[r.strategy, r.pnl, r.defeated,
                r.active_steps, r.error or ""] for r in rows]
    out = {"adversary_steps.csv": (["strategy", "t", "P_t", "w_t", "V_t"], steps),
           "adversary_summary.csv": (["strategy", "pnl", "defeated", "active_steps", "error"],
                                     summary)}
    if p["alphas"]:
        sweep = []
        for s in strategies:
            for pt in sweep_adaptivity(s, config, p["alphas"], int(p["replications"]), costs):
                sweep.append([s.name, pt.alpha, float(pt.mean), pt.stderr, pt.replications])
        out["adversary_sweep.csv"] = (["strategy", "alpha", "mean_pnl", "stderr",
                                       "replications"], sweep)
    return out


def _reversal_paths(p) -> Dict[str, PricePath]:
    if p["paths"]:
        paths = read_paths(p["paths"])
    else:
        p0, step = to_exact(p["P0"]), to_exact(p["step"])
        paths = {"rising": PricePath([p0 + t * step for t in range(int(p["steps"]) + 1)])}
    closed = dict(paths)
    present = {q.prices for q in paths.values()}
    for pid, path in paths.items():
        if path.prices[::-1] not in present:
            closed[pid + "~rev"] = time_reverse(path)
    return closed


def _run_time_reversal(cfg):
    p = cfg.params
    paths = _reversal_paths(p)
    ids = {v.prices: k for k, v in paths.items()}
    costs, bound = _cost(p["cost"]), to_exact(p["bound"])
    rev_rows, uni_rows = [], []
    for s in _strategies(p["strategies"]):
        report = check_time_reversal_consistency(s, paths.values(), costs, bound)
        for v in report.violations:
            rev_rows.append([s.name, ids[v.path.prices], v.pnl_forward, v.pnl_reversed])
        verdict = check_universal(s, paths.values(), costs, bound)
        witness = "" if verdict.universal else ids[verdict.witness.prices]
        uni_rows.append([s.name, report.consistent, verdict.universal, witness])
    return {"reversal_violations.csv": (["strategy", "path_id", "pnl_forward", "pnl_reversed"],
                                        rev_rows),
            "reversal_summary.csv": (["strategy", "consistent", "universal", "witness"],
                                     uni_rows)}


def _run_wheel(cfg):
    p = cfg.params
    config = WheelConfig(p["put_strike_ratio"], p["call_strike_ratio"], int(p["expiry_steps"]),
                         p["pricing"], p["fixed_premium"], p["capital"])
    pricer = LatticePricer.from_factors(p["up"], p["down"]) if p["pricing"] == "lattice" else None
    if p["paths"]:
        paths = read_paths(p["paths"])
    else:
        kinds = SCENARIOS if p["scenario"] == "all" else [p["scenario"]]
        extra = dict(p["scenario_params"] or {})
        paths = {}
        for kind in kinds:
            kw = dict(extra)
            if kind == "breakout":
                kw.update(expiry_steps=config.expiry_steps,
                          put_strike_ratio=config.put_strike_ratio,
                          call_strike_ratio=config.call_strike_ratio)
            paths[kind] = generate_scenario(kind, **kw)
    steps, summary = [], []
    for pid, path in paths.items():
        run = run_wheel(config, path, pricer, _cost(p["cost"]))
        for r in run.steps:
            steps.append([pid, r.t, r.price, r.phase.value, r.cash, r.shares, r.wealth])
        summary.append([pid, run.pnl, run.premiums, len(run.assignments), len(run.call_aways),
                        run.opportunity_cost, run.ledger.admissible, run.classification.value])
    return {"wheel_steps.csv": (["path_id", "t", "price", "phase", "cash", "shares", "V_t"], steps),
            "wheel_summary.csv": (["path_id", "pnl", "premiums", "assignments", "call_aways",
                                   "opportunity_cost", "admissible", "classification"], summary)}


def _run_landauer(cfg):
    p = cfg.params
    temp = float(p["temperature"])
    energy = landauer_bit_cost(temp)
    usd = landauer_usd_per_bit(temp, float(p["usd_per_kwh"]))
    return {"landauer.csv": (["temperature_K", "joules_per_bit", "usd_per_kwh", "usd_per_bit"],
                             [[temp, energy, float(p["usd_per_kwh"]), usd]])}


RUNNERS = {
    "emm": _run_emm,
    "arbitrage-search": _run_search,
    "nfl": _run_nfl,
    "adversary": _run_adversary,
    "time-reversal": _run_time_reversal,
    "wheel": _run_wheel,
    "landauer": _run_landauer,
}


def _header(cfg: ExperimentConfig) -> List[str]:
    echo = yaml.safe_dump(_plain(cfg.source), sort_keys=True).splitlines()
    return ([f"tool=noarb-lab version={__version__} python={platform.python_version()}",
             f"experiment={cfg.experiment}", f"seed={cfg.seed}", "config:"]
            + ["  " + line for line in echo])


def _plain(obj):
    if isinstance(obj, Mapping):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, Path):
        return str(obj)
    return obj


def run(cfg: ExperimentConfig, now: str = None) -> List[Path]:
    """Run one experiment and write its reports plus a manifest into ``cfg.out``."""
    tables = RUNNERS[cfg.experiment](cfg)
    stamp = now or _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    cfg.out.mkdir(parents=True, exist_ok=True)
    header = _header(cfg)
    written = []
    for name, (columns, rows) in tables.items():
        target = cfg.out / name
        write_report(target, header, columns, rows, stamp)
        written.append(target)
    manifest = cfg.out / "manifest.csv"
    write_report(manifest, header, ["file"], [[p.name] for p in written], stamp)
    logger.info("wrote %d report files to %s", len(written), cfg.out)
    return written + [manifest]
