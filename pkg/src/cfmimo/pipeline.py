"""Monte Carlo campaigns over network drops: allocate, evaluate, aggregate.

A campaign sweeps (topology, xi_c, method) over a set of drops.  Drops are
the unit of parallel work; every drop evaluates all (xi_c, method) pairs so
methods are compared on identical channels.  Outputs are one CSV per curve
plus a JSON summary; nothing here plots.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .bounds import Allocation, avg_ratio_prop_uatf, evaluate
from .config import ConfigError, SolverSettings, SystemConfig
from .joint import alternate, fixed_count_baseline
from .power import heuristic_power, solve_power
from .sched import llsf_init
from .topology import FADING_STREAM, gen_drop

log = logging.getLogger(__name__)

METHODS = ("proposed-joint", "uatf-joint", "llsf+power", "heuristic-power", "fixed-count")
TOPOLOGIES = ("random", "piazza")
CSV_COLUMNS = ("user", "drop", "method", "xi_c", "topology", "r_uatf", "r_prop", "se_prop",
               "net_uatf", "net_prop", "xi_usage")


def solve_method(drop, method: str, xi_c: float, settings: SolverSettings | None = None):
    """Allocation for one drop by a named method; returns ``(allocation, trace_or_None)``.

    ``proposed-joint`` / ``uatf-joint`` run the alternating optimizer with the
    respective SINR; ``llsf+power`` keeps the LLSF schedule and runs max-min
    power control on the UatF SINR; ``fixed-count`` does the same on the
    proposed SINR; ``heuristic-power`` pairs LLSF with fractional power control.
    """
    settings = settings or SolverSettings()
    if method == "proposed-joint":
        res = alternate(drop, xi_c, settings, bound="prop")
        return res.allocation, res.trace
    if method == "uatf-joint":
        res = alternate(drop, xi_c, settings, bound="uatf")
        return res.allocation, res.trace
    if method == "llsf+power":
        c = llsf_init(drop, xi_c)
        pw = solve_power(drop, c, settings, bound="uatf")
        return Allocation(eta=pw.eta, c=c, xi_c=xi_c), None
    if method == "fixed-count":
        return fixed_count_baseline(drop, xi_c, settings, bound="prop"), None
    if method == "heuristic-power":
        return Allocation(eta=heuristic_power(drop), c=llsf_init(drop, xi_c), xi_c=xi_c), None
    raise ValueError(f"unknown method {method!r}; known: {METHODS}")


@dataclass
class Campaign:
    cfg: SystemConfig = field(default_factory=SystemConfig)
    topologies: tuple = ("random",)
    xi_c: tuple = (0.4, 0.7, 1.0)
    methods: tuple = ("proposed-joint", "uatf-joint")
    drops: int = 50
    mc_samples: int = 2000
    seed: int = 0
    out_dir: str = "out"
    threads: int = 1
    settings: SolverSettings = field(default_factory=SolverSettings)
    name: str = "campaign"

    def __post_init__(self):
        self.topologies = tuple(self.topologies)
        self.xi_c = tuple(float(x) for x in self.xi_c)
        self.methods = tuple(self.methods)
        self.validate()

    def validate(self) -> None:
        if self.drops < 1:
            raise ConfigError("drops must be >= 1")
        if self.mc_samples < 2:
            raise ConfigError("mc_samples must be >= 2")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        for m in self.methods:
            if m not in METHODS:
                raise ConfigError(f"unknown method {m!r}; known: {list(METHODS)}")
        for t in self.topologies:
            if t not in TOPOLOGIES:
                raise ConfigError(f"unknown topology {t!r}; known: {list(TOPOLOGIES)}")
        for x in self.xi_c:
            if not 0 < x <= 1:
                raise ConfigError(f"xi_c must lie in (0, 1], got {x}")
            if x * self.cfg.M < 1:
                raise ConfigError(f"xi_c*M = {x * self.cfg.M:g} < 1")
        if not (self.methods and self.topologies and self.xi_c):
            raise ConfigError("campaign needs at least one topology, xi_c and method")

    def to_dict(self) -> dict:
        return {"name": self.name, "config": self.cfg.to_dict(),
                "settings": dict(vars(self.settings)), "topologies": list(self.topologies),
                "xi_c": list(self.xi_c), "methods": list(self.methods), "drops": self.drops,
                "mc_samples": self.mc_samples, "seed": self.seed, "out_dir": self.out_dir,
                "threads": self.threads}

    @classmethod
    def from_dict(cls, data: dict) -> "Campaign":
        data = dict(data)
        known = {"name", "config", "settings", "topologies", "xi_c", "methods", "drops",
                 "mc_samples", "seed", "out_dir", "threads"}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown campaign keys: {sorted(unknown)}")
        cfg = SystemConfig.from_dict(data.pop("config", {}))
        settings = SolverSettings.from_dict(data.pop("settings", {}))
        return cls(cfg=cfg, settings=settings, **data)

    @classmethod
    def from_json(cls, path) -> "Campaign":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def drop_seed(self, d: int) -> int:
        # drop d is shared by all (topology, xi_c, method) curves of the campaign
        return int(np.random.SeedSequence([self.seed, d]).generate_state(1)[0])


@dataclass
class CdfTable:
    """Pooled per-user net throughputs of one curve, sorted ascending."""

    net_prop: np.ndarray
    net_uatf: np.ndarray
    xi_usage: np.ndarray  # one entry per successful drop
    varpi: float = float("nan")
    varpi_skipped: int = 0

    def __post_init__(self):
        self.net_prop = np.sort(np.asarray(self.net_prop, float))
        self.net_uatf = np.sort(np.asarray(self.net_uatf, float))
        self.xi_usage = np.asarray(self.xi_usage, float)

    def percentile(self, p: float, which: str = "prop") -> float:
        """Smallest sample x with empirical CDF(x) >= p/100."""
        vals = self.net_prop if which == "prop" else self.net_uatf
        if vals.size == 0:
            return float("nan")
        if not 0 <= p <= 100:
            raise ValueError("percentile must be in [0, 100]")
        return float(np.percentile(vals, p, method="inverted_cdf"))

    def likely(self, q: float = 95.0, which: str = "prop") -> float:
        """The q%-likely throughput, i.e. the (100 - q)th percentile."""
        return self.percentile(100.0 - q, which)

    def cdf(self, x, which: str = "prop"):
        vals = self.net_prop if which == "prop" else self.net_uatf
        return np.searchsorted(vals, x, side="right") / max(vals.size, 1)

    def summary(self) -> dict:
        out = {"users": int(self.net_prop.size), "drops": int(self.xi_usage.size)}
        for which in ("prop", "uatf"):
            out[f"likely95_{which}"] = self.likely(95, which)
            out[f"likely90_{which}"] = self.likely(90, which)
            out[f"median_{which}"] = self.percentile(50, which)
            vals = self.net_prop if which == "prop" else self.net_uatf
            out[f"mean_{which}"] = float(vals.mean()) if vals.size else float("nan")
        out["mean_xi_usage"] = float(self.xi_usage.mean()) if self.xi_usage.size else float("nan")
        out["varpi"] = self.varpi
        out["varpi_skipped"] = self.varpi_skipped
        return out


def curve_name(topology: str, xi_c: float, method: str) -> str:
    return f"{topology}_xi{xi_c:.2f}_{method}"


@dataclass
class DropOutcome:
    topology: str
    drop: int
    seed: int
    reports: dict = field(default_factory=dict)      # (xi_c, method) -> RateReport
    allocations: dict = field(default_factory=dict)  # (xi_c, method) -> Allocation
    failures: dict = field(default_factory=dict)     # (xi_c, method) -> message
    seconds: float = 0.0


def run_drop(campaign: Campaign, topology: str, d: int) -> DropOutcome:
    """All (xi_c, method) pairs on one drop; failures are caught per pair."""
    t0 = time.perf_counter()
    seed = campaign.drop_seed(d)
    out = DropOutcome(topology, d, seed)
    try:
        drop = gen_drop(campaign.cfg, seed, topology)
    except Exception as exc:  # every pair of this drop fails the same way
        for xi in campaign.xi_c:
            for m in campaign.methods:
                out.failures[(xi, m)] = f"drop generation: {exc}"
        return out
    for i, xi in enumerate(campaign.xi_c):
        for j, method in enumerate(campaign.methods):
            try:
                alloc, _ = solve_method(drop, method, xi, campaign.settings)
                problems = alloc.check()
                if problems:
                    raise RuntimeError("; ".join(problems))
                rng = np.random.default_rng([seed, FADING_STREAM, i, j])
                meta = {"drop": d, "method": method, "xi_c": xi, "topology": topology}
                out.reports[(xi, method)] = evaluate(drop, alloc, campaign.mc_samples, rng, meta)
                out.allocations[(xi, method)] = alloc
            except Exception as exc:
                out.failures[(xi, method)] = f"{type(exc).__name__}: {exc}"
                log.warning("drop %d (%s) xi=%.2f %s failed: %s", d, topology, xi, method, exc)
    out.seconds = time.perf_counter() - t0
    log.info("drop %d (%s) done in %.2fs", d, topology, out.seconds)
    return out


@dataclass
class CampaignResult:
    campaign: Campaign
    tables: dict          # curve name -> CdfTable
    outcomes: list
    files: list
    seconds: float

    @property
    def failures(self) -> list[dict]:
        return [{"topology": o.topology, "drop": o.drop, "xi_c": xi, "method": m, "error": msg}
                for o in self.outcomes for (xi, m), msg in sorted(o.failures.items())]

    def allocations(self):
        for o in self.outcomes:
            for (xi, m), a in o.allocations.items():
                yield o.topology, o.drop, xi, m, a


def _csv_rows(outcomes, topology, xi, method):
    for o in outcomes:
        if o.topology != topology or (xi, method) not in o.reports:
            continue
        rep = o.reports[(xi, method)]
        usage = o.allocations[(xi, method)].fronthaul_usage
        for k in range(len(rep.r_uatf)):
            yield {"user": k, "drop": o.drop, "method": method, "xi_c": xi, "topology": topology,
                   "r_uatf": repr(float(rep.r_uatf[k])), "r_prop": repr(float(rep.r_prop_mc[k])),
                   "se_prop": repr(float(rep.se_prop[k])),
                   "net_uatf": repr(float(rep.net_uatf[k])), "net_prop": repr(float(rep.net_prop[k])),
                   "xi_usage": repr(usage)}


def _nan_to_none(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _nan_to_none(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_nan_to_none(v) for v in obj]
    return obj


def run_campaign(campaign: Campaign, write: bool = True) -> CampaignResult:
    """Run every drop, aggregate one :class:`CdfTable` per curve, write outputs.

    Work is spread over ``campaign.threads`` threads; results are collected
    in drop order, so aggregates and files do not depend on the thread count.
    """
    t0 = time.perf_counter()
    jobs = [(topo, d) for topo in campaign.topologies for d in range(campaign.drops)]
    if campaign.threads == 1:
        outcomes = [run_drop(campaign, t, d) for t, d in jobs]
    else:
        with ThreadPoolExecutor(max_workers=campaign.threads) as pool:
            outcomes = list(pool.map(lambda job: run_drop(campaign, *job), jobs))

    tables = {}
    for topo in campaign.topologies:
        for xi in campaign.xi_c:
            for m in campaign.methods:
                reps = [o.reports[(xi, m)] for o in outcomes
                        if o.topology == topo and (xi, m) in o.reports]
                usage = [o.allocations[(xi, m)].fronthaul_usage for o in outcomes
                         if o.topology == topo and (xi, m) in o.allocations]
                cat = (lambda f: np.concatenate([getattr(r, f) for r in reps]) if reps else np.zeros(0))
                varpi, skipped = avg_ratio_prop_uatf(reps) if reps else (float("nan"), 0)
                tables[curve_name(topo, xi, m)] = CdfTable(cat("net_prop"), cat("net_uatf"), usage,
                                                           varpi, skipped)
    seconds = time.perf_counter() - t0
    result = CampaignResult(campaign, tables, outcomes, [], seconds)
    if write:
        result.files = write_outputs(result)
    log.info("campaign %s: %d drops in %.1fs, %d failures", campaign.name, len(jobs), seconds,
             len(result.failures))
    return result


def write_outputs(result: CampaignResult) -> list:
    camp = result.campaign
    out = Path(camp.out_dir)
    (out / "curves").mkdir(parents=True, exist_ok=True)
    files = []
    for topo in camp.topologies:
        for xi in camp.xi_c:
            for m in camp.methods:
                path = out / "curves" / f"{curve_name(topo, xi, m)}.csv"
                with open(path, "w", newline="") as fh:
                    w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, lineterminator="\n")
                    w.writeheader()
                    w.writerows(_csv_rows(result.outcomes, topo, xi, m))
                files.append(path)
    summary = {
        "campaign": camp.to_dict(),
        "curves": {name: t.summary() for name, t in result.tables.items()},
        "failures": result.failures,
        "drop_seconds": {f"{o.topology}/{o.drop}": round(o.seconds, 3) for o in result.outcomes},
    }
    path = out / "summary.json"
    path.write_text(json.dumps(_nan_to_none(summary), indent=2, sort_keys=True) + "\n")
    files.append(path)
    return files
