"""Bisection for quasi-concave max-min problems over linear feasibility sets.

At a fixed target ``t`` both the power-control and the relaxed scheduling
subproblems reduce to an intersection of half-spaces and a box, so the
only convex engine needed is an LP feasibility test.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import linprog


_HIGHS_OPTIONS = {"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10}


class SolverError(RuntimeError):
    """Numerical failure where feasibility could not be decided."""


class BracketError(ValueError):
    """The lower end of a bisection bracket is already infeasible."""


@dataclass
class LinearFeasibility:
    """Rows ``A x >= b`` (sense +1) or ``A x <= b`` (sense -1) within a box.

    ``cost`` optionally selects among feasible points (minimized); it does
    not affect the feasibility decision.
    """

    n_vars: int
    A: np.ndarray = None
    b: np.ndarray = None
    sense: np.ndarray = None
    lb: np.ndarray = None
    ub: np.ndarray = None
    cost: np.ndarray | None = None

    def __post_init__(self):
        n = self.n_vars
        self.A = np.zeros((0, n)) if self.A is None else np.atleast_2d(np.asarray(self.A, float))
        self.b = np.zeros(0) if self.b is None else np.asarray(self.b, float).ravel()
        if self.sense is None:
            self.sense = np.ones(len(self.b))
        self.sense = np.asarray(self.sense, float).ravel()
        self.lb = np.zeros(n) if self.lb is None else np.broadcast_to(np.asarray(self.lb, float), (n,)).copy()
        self.ub = np.ones(n) if self.ub is None else np.broadcast_to(np.asarray(self.ub, float), (n,)).copy()
        if self.A.shape != (len(self.b), n) or len(self.sense) != len(self.b):
            raise ValueError("inconsistent row dimensions")
        if not (np.all(np.isfinite(self.A)) and np.all(np.isfinite(self.b))):
            raise ValueError("coefficients must be finite")
        if np.any(self.lb > self.ub):
            raise ValueError("box lower bound exceeds upper bound")

    def add_row(self, coeffs, rhs: float, sense: str = ">=") -> None:
        s = 1.0 if sense == ">=" else -1.0
        self.A = np.vstack([self.A, np.asarray(coeffs, float)[None, :]])
        self.b = np.append(self.b, rhs)
        self.sense = np.append(self.sense, s)

    def ge_form(self):
        """Rows rewritten as ``G x >= h`` with each row scaled to unit max-norm."""
        G = self.A * self.sense[:, None]
        h = self.b * self.sense
        scale = np.maximum(np.abs(G).max(axis=1, initial=0.0), np.abs(h))
        scale[scale == 0] = 1.0
        return G / scale[:, None], h / scale

    def violation(self, x) -> float:
        """Largest violation over scaled rows and the box (0 if satisfied)."""
        x = np.asarray(x, float)
        G, h = self.ge_form()
        worst = max(0.0, float(np.max(self.lb - x, initial=0.0)), float(np.max(x - self.ub, initial=0.0)))
        if len(h):
            worst = max(worst, float(np.max(h - G @ x)))
        return worst


@dataclass
class FeasibilityResult:
    status: str  # "feasible" | "infeasible" | "indeterminate"
    x: np.ndarray | None = None
    message: str = ""

    @property
    def feasible(self) -> bool:
        return self.status == "feasible"


def feasible(problem: LinearFeasibility, slack: float = 1e-8) -> FeasibilityResult:
    """Decide whether the polytope is nonempty.

    Uses the HiGHS simplex through :func:`scipy.optimize.linprog`.  A
    reported witness is re-checked against every scaled row; if it misses by
    more than ``slack`` the answer is ``indeterminate`` rather than a guess.
    """
    n = problem.n_vars
    if len(problem.b) == 0:
        return FeasibilityResult("feasible", 0.5 * (problem.lb + problem.ub))
    G, h = problem.ge_form()
    cost = np.zeros(n) if problem.cost is None else np.asarray(problem.cost, float)
    res = linprog(cost, A_ub=-G, b_ub=-h, bounds=np.column_stack([problem.lb, problem.ub]),
                  method="highs-ds", options=_HIGHS_OPTIONS)
    if res.status == 2:
        return FeasibilityResult("infeasible", message=res.message)
    if res.status != 0:
        return FeasibilityResult("indeterminate", message=res.message)
    x = np.clip(res.x, problem.lb, problem.ub)
    if problem.violation(x) > slack:
        return FeasibilityResult("indeterminate", x, f"witness violates rows by {problem.violation(x):.3g}")
    return FeasibilityResult("feasible", x)


@dataclass
class BisectionSettings:
    t_lo: float
    t_hi: float
    rel_tol: float = 1e-4
    abs_tol: float = 1e-9
    max_iters: int = 200

    def __post_init__(self):
        if not self.t_lo < self.t_hi:
            raise ValueError(f"need t_lo < t_hi, got [{self.t_lo}, {self.t_hi}]")
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise ValueError("tolerances must be positive")


@dataclass
class BisectionResult:
    t_star: float
    witness: object
    iterations: int
    saturated: bool = False
    history: list = field(default_factory=list)


Oracle = Callable[[float], "LinearFeasibility | FeasibilityResult | tuple"]


def _ask(oracle: Oracle, t: float, slack: float, strict: bool = False):
    out = oracle(t)
    if isinstance(out, LinearFeasibility):
        out = feasible(out, slack)
    if isinstance(out, FeasibilityResult):
        if out.status == "indeterminate" and strict:
            raise SolverError(f"feasibility undecided at t={t:.6g}: {out.message}")
        # an undecided level is treated as not certified feasible
        return out.feasible, out.x
    ok, witness = out
    return bool(ok), witness


def bisect_maxmin(oracle: Oracle, settings: BisectionSettings, *, lo_witness=None,
                  slack: float = 1e-8) -> BisectionResult:
    """Largest ``t`` in the bracket for which ``oracle(t)`` is feasible.

    ``oracle`` maps ``t`` to a :class:`LinearFeasibility`, a
    :class:`FeasibilityResult`, or a ``(feasible, witness)`` pair, and must
    be monotone (feasible at ``t`` implies feasible below ``t``).  Passing
    ``lo_witness`` asserts feasibility at ``t_lo`` and skips that query.
    Above ``t_lo``, a level whose witness fails re-verification counts as
    infeasible, so ``t_star`` is only ever backed by a verified witness.
    """
    lo, hi = float(settings.t_lo), float(settings.t_hi)
    history = []
    if lo_witness is None:
        ok, lo_witness = _ask(oracle, lo, slack, strict=True)
        history.append((lo, ok))
        if not ok:
            raise BracketError(f"bracket too high: infeasible at t_lo={lo:.6g}")
    ok, w = _ask(oracle, hi, slack)
    history.append((hi, ok))
    if ok:
        return BisectionResult(hi, w, 0, saturated=True, history=history)

    best = lo_witness
    iters = 0
    while hi - lo > max(settings.abs_tol, settings.rel_tol * abs(hi)) and iters < settings.max_iters:
        mid = 0.5 * (lo + hi)
        ok, w = _ask(oracle, mid, slack)
        history.append((mid, ok))
        iters += 1
        if ok:
            lo, best = mid, w
        else:
            hi = mid
    return BisectionResult(lo, best, iters, history=history)


def max_iterations(settings: BisectionSettings) -> int:
    return max(0, math.ceil(math.log2((settings.t_hi - settings.t_lo) / settings.abs_tol)))
