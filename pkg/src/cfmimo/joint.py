"""Joint power control and AP scheduling by alternating optimization."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

from .bounds import Allocation
from .config import SolverSettings
from .power import solve_power
from .sched import llsf_init, mm_solve, random_init, round_connections


@dataclass
class AOStep:
    round: int
    eta: np.ndarray
    c: np.ndarray
    objective: float        # min_k SINR after the scheduling step
    power_objective: float  # min_k SINR after the power step
    mm_iterations: int
    seconds: float


@dataclass
class AOTrace:
    steps: list = field(default_factory=list)
    converged: bool = False
    final_objective: float = float("nan")  # after rounding + power re-solve

    @property
    def objectives(self) -> list[float]:
        return [s.objective for s in self.steps]

    @property
    def rounds(self) -> int:
        return len(self.steps)

    def to_dict(self, with_iterates: bool = False) -> dict:
        rows = []
        for s in self.steps:
            row = {"round": s.round, "objective": s.objective,
                   "power_objective": s.power_objective,
                   "mm_iterations": s.mm_iterations, "seconds": s.seconds}
            if with_iterates:
                row["eta"] = s.eta.tolist()
                row["c"] = s.c.tolist()
            rows.append(row)
        return {"converged": self.converged, "final_objective": self.final_objective, "steps": rows}

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(**kw))


@dataclass
class JointResult:
    allocation: Allocation
    trace: AOTrace
    relaxed: Allocation


def initial_connections(drop, xi_c: float, init, rng=None) -> np.ndarray:
    if isinstance(init, str):
        if init == "llsf":
            return llsf_init(drop, xi_c)
        if init == "random":
            return random_init(drop, xi_c, rng if rng is not None else np.random.default_rng(0))
        raise ValueError(f"unknown init {init!r}")
    return np.asarray(init, float)


def alternate(drop, xi_c: float, settings: SolverSettings | None = None, *,
              bound: str = "prop", init="llsf", rng=None) -> JointResult:
    """Alternate max-min power control and relaxed MM scheduling.

    Rounds stop once the min-SINR objective changes by at most
    ``settings.ao_eps`` relative to the previous round.  The relaxed
    connections are then rounded and the powers re-optimized once for the
    binary schedule.
    """
    settings = settings or SolverSettings()
    c = initial_connections(drop, xi_c, init, rng)
    eta = None
    trace = AOTrace()
    prev = None
    for n in range(1, settings.ao_max_rounds + 1):
        t0 = time.perf_counter()
        try:
            pw = solve_power(drop, c, settings, bound=bound, eta0=eta)
            eta = pw.eta
            mm = mm_solve(drop, eta, xi_c, c, settings, bound=bound)
        except Exception as exc:
            raise RuntimeError(f"alternating optimization failed in round {n}: {exc}") from exc
        c = mm.c
        trace.steps.append(AOStep(n, eta.copy(), c.copy(), mm.objective, pw.min_sinr,
                                  mm.iterations, time.perf_counter() - t0))
        if prev is not None and abs(mm.objective - prev) <= settings.ao_eps * abs(prev):
            trace.converged = True
            break
        prev = mm.objective

    relaxed = Allocation(eta=eta, c=c, relaxed=True, xi_c=xi_c)
    c_bin = round_connections(c, xi_c)
    final = solve_power(drop, c_bin, settings, bound=bound)
    trace.final_objective = final.min_sinr
    alloc = Allocation(eta=final.eta, c=c_bin, relaxed=False, xi_c=xi_c)
    return JointResult(allocation=alloc, trace=trace, relaxed=relaxed)


def fixed_count_baseline(drop, xi_c: float, settings: SolverSettings | None = None, *,
                         bound: str = "prop") -> Allocation:
    """Every user keeps its floor(xi_c * M) strongest APs; powers by max-min control."""
    c = llsf_init(drop, xi_c)
    pw = solve_power(drop, c, settings, bound=bound)
    return Allocation(eta=pw.eta, c=c, relaxed=False, xi_c=xi_c)
