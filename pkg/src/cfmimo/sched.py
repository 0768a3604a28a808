"""AP scheduling for fixed powers.

The relaxed problem (continuous ``0 <= c <= 1``, fronthaul budget, at least
one unit of connection mass per user) is attacked by minorize-maximize:
the only nonlinear piece of the SINR, the squared coherent gain
``(gamma_k . c_k)^2``, is replaced by its tangent at the current point,
which turns every per-user SINR into a ratio of affine functions.  Each MM
step is then a quasi-concave max-min problem solved by bisection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bounds import Allocation, sinr_prop, sinr_uatf
from .config import SolverSettings
from .power import BOUNDS
from .qcsolve import BisectionSettings, LinearFeasibility, bisect_maxmin, feasible

_BUDGET_RTOL = 1e-12


def per_user_count(M: int, xi_c: float) -> int:
    return int(math.floor(xi_c * M + 1e-9))


def budget(M: int, K: int, xi_c: float) -> float:
    return xi_c * M * K


def llsf_init(drop, xi_c: float) -> np.ndarray:
    """Connect each user to its floor(xi_c * M) strongest APs (ties: lowest index)."""
    M, K = drop.beta.shape
    n = per_user_count(M, xi_c)
    if n < 1:
        raise ValueError(f"xi_c * M = {xi_c * M:g} < 1: no AP can be assigned")
    c = np.zeros((M, K))
    order = np.argsort(-drop.beta, axis=0, kind="stable")
    np.put_along_axis(c, order[:n], 1.0, axis=0)
    return c


def random_init(drop, xi_c: float, rng: np.random.Generator) -> np.ndarray:
    """floor(xi_c * M) uniformly chosen APs per user."""
    M, K = drop.beta.shape
    n = per_user_count(M, xi_c)
    if n < 1:
        raise ValueError(f"xi_c * M = {xi_c * M:g} < 1: no AP can be assigned")
    c = np.zeros((M, K))
    for k in range(K):
        c[rng.choice(M, size=n, replace=False), k] = 1.0
    return c


def fronthaul_usage(c) -> int:
    return int(round(float(np.asarray(c).sum())))


def sinr_of(drop, eta, c, bound: str = "prop") -> np.ndarray:
    alloc = Allocation(eta=eta, c=c, relaxed=True)
    return sinr_prop(drop, alloc) if bound == "prop" else sinr_uatf(drop, alloc)


@dataclass(frozen=True)
class Surrogate:
    """Affine-over-affine minorizer of every user's SINR at a reference point.

    For user k:  g_k(c) = (slope[:, k] . c + offset[k]) / (den[:, k] . c).
    """

    slope: np.ndarray
    offset: np.ndarray
    den: np.ndarray
    ref_den: np.ndarray  # den[:, k] . c_ref, used to express slack in SINR units
    # tangent-form pieces: num = lin . c + w (q^2 + 2 q gamma . (c - c_ref))
    lin: np.ndarray | None = None
    gamma: np.ndarray | None = None
    c_ref: np.ndarray | None = None
    q: np.ndarray | None = None
    w: np.ndarray | None = None

    def value(self, c) -> np.ndarray:
        c = np.asarray(c, float)
        if self.gamma is not None:
            # same value as the affine form, but exact at c = c_ref (no cancellation)
            dq = np.einsum("mk,mk->k", self.gamma, c - self.c_ref)
            num = np.einsum("mk,mk->k", self.lin, c) + self.w * (self.q**2 + 2.0 * self.q * dq)
        else:
            num = np.einsum("mk,mk->k", self.slope, c) + self.offset
        den = np.einsum("mk,mk->k", self.den, c)
        out = np.zeros_like(den)
        np.divide(num, den, out=out, where=den > 0)
        return out

    def upper(self) -> float:
        """min_k max_m slope/den, an upper bound on min_k g_k over c >= 0."""
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(self.den > 0, self.slope / self.den, 0.0)
        return float(ratio.max(axis=0).min())


def surrogate(drop, eta, c_ref, bound: str = "prop") -> Surrogate:
    """Tangent minorizer of the per-user SINR at ``c_ref``.

    All terms are divided by ``rho_u * N``; the numerator's squared
    coherent gain ``N (gamma . c)^2`` is replaced by
    ``N (q^2 + 2 q gamma . (c - c_ref))`` with ``q = gamma . c_ref``.
    """
    if bound not in BOUNDS:
        raise ValueError(f"bound must be one of {BOUNDS}, got {bound!r}")
    cfg = drop.cfg
    eta = np.asarray(eta, float)
    gam, beta = drop.gamma, drop.beta
    N = cfg.N
    c_ref = np.asarray(c_ref, float)
    q = np.einsum("mk,mk->k", gam, c_ref)
    lin = eta[None, :] * gam * beta if bound == "prop" else np.zeros_like(gam)
    slope = 2.0 * N * eta[None, :] * q[None, :] * gam + lin
    offset = -N * eta * q**2
    # den[m, k] = gamma_mk (sum_{j in J(k)} eta_j beta_mj + sigma^2 / rho)
    K = len(eta)
    mask = np.ones((K, K)) - (np.eye(K) if bound == "prop" else 0.0)
    interf = beta @ (eta[:, None] * mask)
    den = gam * (interf + cfg.sigma_w2 / cfg.rho_u)
    ref_den = np.einsum("mk,mk->k", den, c_ref)
    return Surrogate(slope=slope, offset=offset, den=den, ref_den=ref_den,
                     lin=lin, gamma=gam, c_ref=c_ref.copy(), q=q, w=N * eta)


def _slack_weights(sur: Surrogate, coef: np.ndarray) -> np.ndarray:
    scale = np.where(sur.ref_den > 0, sur.ref_den, 1.0)
    return coef / scale[None, :]


def surrogate_value(c_k, c_k_ref, drop, eta, k: int, bound: str = "prop") -> float:
    """Surrogate for user k alone, evaluated at ``c_k`` (length-M vector)."""
    M, K = drop.beta.shape
    c_ref = np.zeros((M, K))
    c_ref[:, k] = c_k_ref
    c = np.zeros((M, K))
    c[:, k] = c_k
    return float(surrogate(drop, eta, c_ref, bound).value(c)[k])


def sched_rows(sur: Surrogate, t: float, xi_c: float) -> LinearFeasibility:
    """The relaxed scheduling feasibility set at target ``t`` as explicit rows.

    Variables are ``c.ravel()`` (row-major M x K).  Rows: one surrogate
    half-space per user, one coverage row per user, and the budget.
    """
    M, K = sur.slope.shape
    n = M * K
    rows, rhs, sense = [], [], []
    coef = sur.slope - t * sur.den
    for k in range(K):
        r = np.zeros((M, K))
        r[:, k] = coef[:, k]
        rows.append(r.ravel())
        rhs.append(-sur.offset[k])
        sense.append(1.0)
    for k in range(K):
        r = np.zeros((M, K))
        r[:, k] = 1.0
        rows.append(r.ravel())
        rhs.append(1.0)
        sense.append(1.0)
    rows.append(np.ones(n))
    rhs.append(budget(M, K, xi_c))
    sense.append(-1.0)
    cost = -_slack_weights(sur, coef).ravel()
    return LinearFeasibility(n_vars=n, A=np.array(rows), b=np.array(rhs), sense=np.array(sense),
                             cost=cost)


def min_mass(a: np.ndarray, b: float):
    """Least ``sum(c)`` with ``a . c >= b``, ``sum(c) >= 1``, ``0 <= c <= 1``.

    Returns ``(mass, c)`` or ``(inf, None)`` when infeasible.  Fills
    coordinates in decreasing order of ``a`` (stable, so ties go to the
    lowest index), which is optimal for this fractional-knapsack form.
    """
    M = len(a)
    order = np.argsort(-a, kind="stable")
    sa = a[order]
    c = np.zeros(M)
    if sa[0] >= b:
        c[order[0]] = 1.0
        return 1.0, c
    pos = sa > 0
    n_pos = int(pos.sum())
    cum = np.cumsum(sa[:n_pos])
    if n_pos == 0 or cum[-1] < b:
        return math.inf, None
    j = int(np.searchsorted(cum, b))  # first prefix reaching b
    prev = cum[j - 1] if j > 0 else 0.0
    frac = (b - prev) / sa[j]
    c[order[:j]] = 1.0
    c[order[j]] = min(1.0, max(frac, 0.0))
    return j + c[order[j]], c


def greedy_feasible(sur: Surrogate, t: float, xi_c: float):
    """Exact feasibility of :func:`sched_rows` exploiting per-user separability.

    Only the budget couples users, so the set is nonempty iff the sum of
    per-user minimum masses fits the budget.  The witness starts from those
    minimum-mass points and spends the remaining budget on the entries with
    the largest positive slack per unit of connection mass, which maximizes
    the total SINR-normalized slack (the ``cost`` of :func:`sched_rows`).
    """
    M, K = sur.slope.shape
    coef = sur.slope - t * sur.den
    c = np.zeros((M, K))
    total = 0.0
    for k in range(K):
        mass, ck = min_mass(coef[:, k], -sur.offset[k])
        if ck is None:
            return False, None
        c[:, k] = ck
        total += mass
    cap = budget(M, K, xi_c)
    if total > cap * (1 + _BUDGET_RTOL):
        return False, None

    left = cap - total
    w = _slack_weights(sur, coef).ravel()
    flat = c.ravel()
    room = 1.0 - flat
    open_ = np.flatnonzero((w > 0) & (room > 0))
    if left > 0 and open_.size:
        order = open_[np.argsort(-w[open_], kind="stable")]
        fill = np.cumsum(room[order])
        if fill[-1] <= left:
            flat[order] = 1.0
        else:
            j = int(np.searchsorted(fill, left))
            flat[order[:j]] = 1.0
            flat[order[j]] += left - (fill[j - 1] if j > 0 else 0.0)
    return True, flat.reshape(M, K)


def check_relaxed(c, xi_c: float, atol: float = 1e-9) -> None:
    M, K = c.shape
    if np.any(c < -atol) or np.any(c > 1 + atol):
        raise ValueError("connection coefficients outside [0, 1]")
    if np.any(c.sum(axis=0) < 1 - atol):
        raise ValueError("a user has less than one unit of connection mass")
    if c.sum() > budget(M, K, xi_c) * (1 + 1e-9) + atol:
        raise ValueError("connections exceed the fronthaul budget")


@dataclass
class MMResult:
    c: np.ndarray
    objective: float
    trace: list = field(default_factory=list)
    iterations: int = 0


def mm_solve(drop, eta, xi_c: float, c_init, settings: SolverSettings | None = None,
             *, bound: str = "prop") -> MMResult:
    """Relaxed max-min AP scheduling by minorize-maximize.

    Each iteration maximizes min_k of the tangent surrogate at the current
    point by bisection, warm-started at the current objective so the true
    objective never decreases.  Stops when the relative gain falls below
    ``settings.mm_tol`` or after ``settings.mm_max_iters`` iterations.
    """
    settings = settings or SolverSettings()
    M, K = drop.beta.shape
    if budget(M, K, xi_c) < K * (1 - 1e-12):
        raise ValueError(f"xi_c*M*K = {budget(M, K, xi_c):g} < K: coverage constraints infeasible")
    c = np.asarray(c_init, float).copy()
    check_relaxed(c, xi_c)
    eta = np.asarray(eta, float)

    obj = float(sinr_of(drop, eta, c, bound).min())
    trace = [obj]
    it = 0
    for it in range(1, settings.mm_max_iters + 1):
        sur = surrogate(drop, eta, c, bound)
        t_lo = float(sur.value(c).min())
        t_hi = max(sur.upper(), t_lo * (1 + settings.rel_tol) + settings.abs_tol)
        if settings.sched_backend == "greedy":
            oracle = lambda t, s=sur: greedy_feasible(s, t, xi_c)  # noqa: E731
        else:
            oracle = lambda t, s=sur: sched_rows(s, t, xi_c)  # noqa: E731
        res = bisect_maxmin(
            oracle,
            BisectionSettings(t_lo, t_hi, settings.rel_tol, settings.abs_tol, settings.max_bisect_iters),
            lo_witness=c, slack=settings.feas_slack,
        )
        # re-query at the final level so the witness is the canonical point
        ok, w = _witness(oracle, res.t_star, settings.feas_slack)
        c_new = np.clip(np.asarray(w if ok else res.witness, float).reshape(M, K), 0.0, 1.0)
        new_obj = float(sinr_of(drop, eta, c_new, bound).min())
        if new_obj < obj:
            break
        gain = (new_obj - obj) / obj if obj > 0 else math.inf
        c, obj = c_new, new_obj
        trace.append(obj)
        if gain < settings.mm_tol:
            break
    return MMResult(c=c, objective=obj, trace=trace, iterations=it)


def _witness(oracle, t: float, slack: float):
    out = oracle(t)
    if isinstance(out, LinearFeasibility):
        r = feasible(out, slack)
        return r.feasible, r.x
    return out


def round_connections(c_star, xi_c: float) -> np.ndarray:
    """Binary connections from a relaxed solution.

    Per user, keep the ``w_k = round(sum_m c*_mk)`` largest coefficients
    (``w_k`` clamped to [1, M], ties to the lowest AP index).  If the result
    overshoots the budget, drop the smallest kept coefficient among users
    holding more than one connection until it fits.
    """
    c_star = np.asarray(c_star, float)
    M, K = c_star.shape
    out = np.zeros((M, K))
    order = np.argsort(-c_star, axis=0, kind="stable")
    for k in range(K):
        w = int(np.floor(c_star[:, k].sum() + 0.5))
        w = min(max(w, 1), M)
        out[order[:w, k], k] = 1.0

    cap = math.floor(budget(M, K, xi_c) + 1e-9)
    while out.sum() > cap:
        counts = out.sum(axis=0)
        cand = (out > 0) & (counts[None, :] > 1)
        if not cand.any():
            break
        vals = np.where(cand, c_star, np.inf)
        m, k = np.unravel_index(np.argmin(vals), vals.shape)
        out[m, k] = 0.0
    return out
