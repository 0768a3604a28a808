"""Max-min uplink power control for a fixed AP schedule."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import SolverSettings
from .qcsolve import BisectionSettings, LinearFeasibility, bisect_maxmin

BOUNDS = ("prop", "uatf")


@dataclass(frozen=True)
class SinrModel:
    """SINR_k(eta) = eta_k * signal_k / (interf[k] @ eta + noise_k).

    Every array is divided by the per-user noise, so values are in SNR units.
    """

    signal: np.ndarray
    interf: np.ndarray
    noise: np.ndarray

    def sinr(self, eta) -> np.ndarray:
        eta = np.asarray(eta, float)
        den = self.interf @ eta + self.noise
        out = np.zeros_like(den)
        np.divide(eta * self.signal, den, out=out, where=den > 0)
        return out


def sinr_model(drop, c, bound: str = "prop") -> SinrModel:
    """Linear-fractional SINR coefficients for fixed connections ``c``."""
    if bound not in BOUNDS:
        raise ValueError(f"bound must be one of {BOUNDS}, got {bound!r}")
    cfg = drop.cfg
    rho = cfg.rho_u
    a = np.asarray(c, float) * cfg.N * drop.gamma
    coh = a.sum(axis=0)
    cross = rho * (a.T @ drop.beta)  # cross[k, j] = rho sum_m c_mk N gamma_mk beta_mj
    self_var = np.diag(cross).copy()
    noise = cfg.sigma_w2 * coh
    if bound == "prop":
        signal = self_var + rho * coh**2
        interf = cross - np.diag(self_var)
    else:
        signal = rho * coh**2
        interf = cross
    scale = np.where(noise > 0, noise, 1.0)
    return SinrModel(signal / scale, interf / scale[:, None], noise / scale)


def power_rows(model: SinrModel, t: float) -> LinearFeasibility:
    """Half-spaces {eta : SINR_k(eta) >= t for all k} inside [0, 1]^K."""
    K = len(model.signal)
    A = -t * model.interf + np.diag(model.signal)
    return LinearFeasibility(n_vars=K, A=A, b=t * model.noise, cost=np.ones(K))


@dataclass
class PowerResult:
    eta: np.ndarray
    t_star: float
    min_sinr: float
    saturated: bool
    iterations: int


def solve_power(drop, c, settings: SolverSettings | None = None, *, bound: str = "prop",
                eta0=None) -> PowerResult:
    """Maximize min_k SINR_k over 0 <= eta <= 1 by bisection on the target.

    ``eta0`` is an optional incumbent; the result never has a lower
    min-SINR than it.  Among near-optimal power vectors the one with the
    least total power is returned.
    """
    settings = settings or SolverSettings()
    c = np.asarray(c, float)
    if np.any(c.sum(axis=0) <= 0):
        raise ValueError("every user needs at least one serving AP")
    model = sinr_model(drop, c, bound)
    if np.any(model.signal <= 0):
        raise ValueError("a user has zero coherent gain under this schedule")
    K = len(model.signal)

    # each user's SINR is at most its interference-free value at full power
    solo = model.signal / (np.diag(model.interf) + model.noise)
    t_hi = float(solo.min())

    lo_witness = np.zeros(K)
    t_lo = 0.0
    if eta0 is not None:
        eta0 = np.clip(np.asarray(eta0, float), 0.0, 1.0)
        t_lo = float(model.sinr(eta0).min())
        lo_witness = eta0
    if t_lo >= t_hi:
        t_hi = t_lo * (1 + settings.rel_tol) + settings.abs_tol

    res = bisect_maxmin(
        lambda t: power_rows(model, t),
        BisectionSettings(t_lo, t_hi, settings.rel_tol, settings.abs_tol, settings.max_bisect_iters),
        lo_witness=lo_witness, slack=settings.feas_slack,
    )
    eta = np.clip(np.asarray(res.witness, float), 0.0, 1.0)
    achieved = float(model.sinr(eta).min())
    if eta0 is not None and achieved < t_lo:
        eta, achieved = eta0, t_lo
    return PowerResult(eta=eta, t_star=res.t_star, min_sinr=achieved,
                       saturated=res.saturated, iterations=res.iterations)


def heuristic_power(drop, vartheta: float = 1.0) -> np.ndarray:
    """Fractional power control: eta_k = (min_j B_j / B_k)^vartheta with B_k = sum_m beta_mk.

    The user with the weakest aggregate large-scale gain transmits at full
    power; stronger users back off.
    """
    if vartheta < 0:
        raise ValueError("vartheta must be nonnegative")
    total = drop.beta.sum(axis=0)
    return (total.min() / total) ** vartheta
