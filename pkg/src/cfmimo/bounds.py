"""Achievable-rate bounds for uplink conjugate-beamforming combining.

Closed forms (``sinr_uatf``, ``sinr_prop``, ``rate_app``) are vectorized
over users.  The Monte Carlo bounds share one set of channel samples per
call so that the per-user estimates are jointly consistent.

Closed-form moments follow the usual binary-connection convention: terms
that are truly quadratic in ``c_mk`` are written with ``c_mk`` itself, so
the relaxed scheduler optimizes a function that is linear in ``c`` in
every place except the squared coherent-gain term.  The Monte Carlo
estimators use the exact expectations (``c_mk**2``), which coincide with
the closed forms whenever ``c`` is binary.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import sample_channels

# upper bound on complex entries held in memory per Monte Carlo chunk
_CHUNK_ENTRIES = 2_000_000


@dataclass
class Allocation:
    eta: np.ndarray
    c: np.ndarray
    relaxed: bool = False
    xi_c: float = 1.0

    def __post_init__(self):
        self.eta = np.asarray(self.eta, dtype=float)
        self.c = np.asarray(self.c, dtype=float)

    @property
    def fronthaul_usage(self) -> float:
        return float(self.c.sum())

    def check(self, atol: float = 1e-9) -> list[str]:
        """Return a list of violated constraints (empty when compliant)."""
        M, K = self.c.shape
        problems = []
        if np.any(self.eta < -atol) or np.any(self.eta > 1 + atol):
            problems.append("eta outside [0, 1]")
        if self.relaxed:
            if np.any(self.c < -atol) or np.any(self.c > 1 + atol):
                problems.append("c outside [0, 1]")
        elif not np.all(np.isin(self.c, (0.0, 1.0))):
            problems.append("c not binary")
        if self.c.sum() > self.xi_c * M * K + atol:
            problems.append(f"fronthaul {self.c.sum():.6g} > xi_c*M*K = {self.xi_c * M * K:.6g}")
        if np.any(self.c.sum(axis=0) < 1 - atol):
            problems.append("user with less than one serving AP")
        return problems

    def to_dict(self) -> dict:
        return {"eta": self.eta.tolist(), "c": self.c.tolist(),
                "relaxed": self.relaxed, "xi_c": self.xi_c}

    @classmethod
    def from_dict(cls, data: dict) -> "Allocation":
        return cls(eta=data["eta"], c=data["c"], relaxed=data.get("relaxed", False),
                   xi_c=data.get("xi_c", 1.0))


@dataclass(frozen=True)
class Moments:
    """Closed-form moments of the effective gains, one entry per user.

    ``cross[k, j]`` is E|f_{k,j}|^2; its diagonal equals ``var_f``.
    """

    mean_f: np.ndarray
    second_f: np.ndarray
    var_f: np.ndarray
    cross: np.ndarray
    noise: np.ndarray

    @property
    def interference(self) -> np.ndarray:
        # off-diagonal sum taken directly: subtracting the diagonal from the
        # row total would cancel badly when a user's own term dominates
        K = self.cross.shape[0]
        return np.where(np.eye(K, dtype=bool), 0.0, self.cross).sum(axis=1)


def _eta_c(alloc_or_eta, c=None):
    if c is None:
        return alloc_or_eta.eta, alloc_or_eta.c
    return np.asarray(alloc_or_eta, dtype=float), np.asarray(c, dtype=float)


def closed_moments(drop, alloc, exact: bool = False) -> Moments:
    """Moments of f_{k,k'} for every user.

    With ``exact=True`` the variance-type sums use ``c**2`` (true
    expectation for fractional ``c``); otherwise ``c`` as in the SINR
    expressions.
    """
    eta, c = alloc.eta, alloc.c
    cfg = drop.cfg
    N, rho = cfg.N, cfg.rho_u
    a_lin = c * N * drop.gamma
    a_var = (c * c if exact else c) * N * drop.gamma
    coh = a_lin.sum(axis=0)
    cross = rho * (a_var.T @ drop.beta) * eta[None, :]
    var_f = np.diag(cross).copy()
    mean_f = np.sqrt(rho * eta) * coh
    second_f = var_f + mean_f**2
    noise = cfg.sigma_w2 * a_var.sum(axis=0)
    return Moments(mean_f=mean_f, second_f=second_f, var_f=var_f, cross=cross, noise=noise)


def _safe_div(num, den):
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    out = np.zeros(np.broadcast(num, den).shape)
    np.divide(num, den, out=out, where=den > 0)
    return out


def sinr_uatf(drop, alloc, k: int | None = None):
    """Use-and-then-forget SINR; the whole f_kk variance counts as noise."""
    mom = closed_moments(drop, alloc)
    den = mom.cross.sum(axis=1) + mom.noise
    s = _safe_div(mom.mean_f**2, den)
    return s if k is None else float(s[k])


def sinr_prop(drop, alloc, k: int | None = None):
    """SINR whose numerator is the full second moment E|f_kk|^2."""
    mom = closed_moments(drop, alloc)
    s = _safe_div(mom.second_f, mom.interference + mom.noise)
    return s if k is None else float(s[k])


def rate_uatf(drop, alloc, k: int | None = None):
    return np.log2(1.0 + sinr_uatf(drop, alloc, k))


def rate_app(sinr, tau_u: float, M: int, N: int):
    """Closed-form approximation of the proposed bound as a function of SINR."""
    sinr = np.asarray(sinr, dtype=float)
    out = np.log2(1.0 + sinr) - np.log2(1.0 + tau_u / (1.0 + M * N) * sinr) / tau_u
    return float(out) if out.ndim == 0 else out


def effective_gain(sample, alloc, k: int, k_prime: int, rho_u: float):
    """f_{k,k'} for one channel realization (or a batch along axis 0)."""
    ghat_k = sample.g_hat[..., :, k, :]
    g_kp = sample.g[..., :, k_prime, :]
    inner = np.sum(ghat_k.conj() * g_kp, axis=-1)
    return np.sqrt(rho_u * alloc.eta[k_prime]) * np.sum(alloc.c[:, k] * inner, axis=-1)


def gain_matrix(sample, alloc, rho_u: float) -> np.ndarray:
    """All f_{k,j} for a batch of samples, shape (S, K, K)."""
    g_hat, g = sample.g_hat, sample.g
    S, M, K, N = g.shape
    weighted = g_hat.conj() * alloc.c[None, :, :, None]
    lhs = weighted.transpose(0, 2, 1, 3).reshape(S, K, M * N)
    rhs = g.transpose(0, 1, 3, 2).reshape(S, M * N, K)
    return (lhs @ rhs) * np.sqrt(rho_u * alloc.eta)[None, None, :]


@dataclass
class McTerms:
    """Per-sample quantities (S x K) feeding the Monte Carlo bounds."""

    signal: np.ndarray        # |f_kk|^2
    interference: np.ndarray  # sum_{j != k} |f_kj|^2
    noise: np.ndarray         # sigma^2 sum_m c_mk^2 ||g_hat_mk||^2
    cond_interf: np.ndarray   # E[interference | user k's channels]
    mean_gain: np.ndarray     # f_kk (complex)


def mc_terms(drop, alloc, samples: int, rng: np.random.Generator) -> McTerms:
    cfg = drop.cfg
    M, K, N = cfg.M, cfg.K, cfg.N
    chunk = max(1, _CHUNK_ENTRIES // max(1, M * K * max(K, N)))
    rho = cfg.rho_u
    c2 = alloc.c**2
    out = {name: [] for name in ("signal", "interference", "noise", "cond_interf", "mean_gain")}
    done = 0
    while done < samples:
        n = min(chunk, samples - done)
        smp = sample_channels(drop, rng, size=n)
        f = gain_matrix(smp, alloc, rho)
        p = np.abs(f) ** 2
        diag = np.einsum("skk->sk", p)
        norms = np.sum(np.abs(smp.g_hat) ** 2, axis=-1)  # S, M, K
        weighted = norms * c2[None]
        # E|f_kj|^2 given user k's channels = rho eta_j sum_m c^2 ||g_hat_mk||^2 beta_mj
        cond = rho * np.einsum("smk,mj->skj", weighted, drop.beta) * alloc.eta[None, None, :]
        out["signal"].append(diag)
        out["interference"].append(p.sum(axis=2) - diag)
        out["noise"].append(cfg.sigma_w2 * weighted.sum(axis=1))
        out["cond_interf"].append(cond.sum(axis=2) - np.einsum("skk->sk", cond))
        out["mean_gain"].append(np.einsum("skk->sk", f))
        done += n
    return McTerms(**{name: np.concatenate(v, axis=0) for name, v in out.items()})


def _mean_se(x: np.ndarray):
    S = x.shape[0]
    return x.mean(axis=0), x.std(axis=0, ddof=1) / np.sqrt(S)


def _log2_ratio(num, den):
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.log2(num / den)


@dataclass
class McBounds:
    prop: np.ndarray
    prop_se: np.ndarray
    caire: np.ndarray
    caire_se: np.ndarray
    upper: np.ndarray
    upper_se: np.ndarray


def mc_bounds(drop, alloc, samples: int, rng: np.random.Generator) -> McBounds:
    """Monte Carlo estimates of the proposed, conditional-interference and upper bounds.

    All estimates are clipped below at 0 (a valid lower bound on a rate may
    always be replaced by its positive part); users that transmit nothing
    or are served by no AP get exactly 0 with zero standard error.
    """
    if samples < 2:
        raise ValueError("need at least 2 Monte Carlo samples")
    cfg = drop.cfg
    mom = closed_moments(drop, alloc, exact=True)
    expected_in = mom.interference + mom.noise
    t = mc_terms(drop, alloc, samples, rng)
    in_real = t.interference + t.noise

    with np.errstate(divide="ignore", invalid="ignore"):
        penalty = np.log2(1.0 + cfg.tau_u * _safe_div(mom.var_f, expected_in)) / cfg.tau_u

        prop_s = _log2_ratio(t.signal + in_real, expected_in[None, :])
        prop, prop_se = _mean_se(prop_s)
        prop = prop - penalty

        upper_s = np.log2(1.0 + _safe_div(t.signal, in_real))
        upper, upper_se = _mean_se(upper_s)

        caire_s = (np.log2(1.0 + _safe_div(t.signal, t.cond_interf + t.noise))
                   + np.log2(in_real))
        caire, caire_se = _mean_se(caire_s)
        caire = caire - np.log2(expected_in) - penalty

    dead = (alloc.eta <= 0) | (alloc.c.sum(axis=0) <= 0) | ~(expected_in > 0)
    result = []
    for est, se in ((prop, prop_se), (caire, caire_se), (upper, upper_se)):
        est = np.where(dead, 0.0, np.maximum(est, 0.0))
        se = np.where(dead, 0.0, se)
        result.extend([est, se])
    return McBounds(*result)


def rate_prop_mc(drop, alloc, k: int, samples: int, rng):
    b = mc_bounds(drop, alloc, samples, rng)
    return float(b.prop[k]), float(b.prop_se[k])


def rate_caire_mc(drop, alloc, k: int, samples: int, rng):
    b = mc_bounds(drop, alloc, samples, rng)
    return float(b.caire[k]), float(b.caire_se[k])


def rate_upper_mc(drop, alloc, k: int, samples: int, rng):
    b = mc_bounds(drop, alloc, samples, rng)
    return float(b.upper[k]), float(b.upper_se[k])


def hardening_ratio(drop, alloc):
    """Return (zeta, zeta_norm): V[f_kk] / E[f_kk]^2 and its max-normalized form.

    Users with no coherent gain get zeta = 0.
    """
    mom = closed_moments(drop, alloc)
    zeta = _safe_div(mom.var_f, mom.mean_f**2)
    top = zeta.max() if zeta.size else 0.0
    return zeta, (zeta / top if top > 0 else np.zeros_like(zeta))


def net_throughput(rate, cfg):
    """Per-user uplink net throughput in bit/s."""
    return cfg.bandwidth_hz * cfg.prelog * np.asarray(rate, dtype=float)


@dataclass
class RateReport:
    sinr_uatf: np.ndarray
    sinr_prop: np.ndarray
    r_uatf: np.ndarray
    r_app: np.ndarray
    r_prop_mc: np.ndarray
    se_prop: np.ndarray
    r_caire_mc: np.ndarray
    se_caire: np.ndarray
    r_upper_mc: np.ndarray
    se_upper: np.ndarray
    zeta: np.ndarray
    zeta_norm: np.ndarray
    net_uatf: np.ndarray
    net_prop: np.ndarray
    meta: dict = field(default_factory=dict)

    def rows(self) -> list[dict]:
        K = len(self.r_uatf)
        cols = [name for name in self.__dataclass_fields__ if name != "meta"]
        return [dict(self.meta, user=k, **{c: float(getattr(self, c)[k]) for c in cols})
                for k in range(K)]


def evaluate(drop, alloc, samples: int = 2000, rng: np.random.Generator | None = None,
             meta: dict | None = None) -> RateReport:
    """Closed-form and Monte Carlo rates for every user of one allocation."""
    cfg = drop.cfg
    rng = rng if rng is not None else np.random.default_rng(0)
    su = sinr_uatf(drop, alloc)
    sp = sinr_prop(drop, alloc)
    b = mc_bounds(drop, alloc, samples, rng)
    zeta, zeta_norm = hardening_ratio(drop, alloc)
    r_uatf = np.log2(1.0 + su)
    return RateReport(
        sinr_uatf=su, sinr_prop=sp, r_uatf=r_uatf,
        r_app=rate_app(sp, cfg.tau_u, cfg.M, cfg.N),
        r_prop_mc=b.prop, se_prop=b.prop_se,
        r_caire_mc=b.caire, se_caire=b.caire_se,
        r_upper_mc=b.upper, se_upper=b.upper_se,
        zeta=zeta, zeta_norm=zeta_norm,
        net_uatf=net_throughput(r_uatf, cfg), net_prop=net_throughput(b.prop, cfg),
        meta=dict(meta or {}),
    )


def avg_ratio_prop_uatf(reports) -> tuple[float, int]:
    """Mean of r_prop / r_uatf over users (and reports).

    Users with r_uatf == 0 are skipped; returns (ratio, skipped_count).
    """
    if isinstance(reports, RateReport):
        reports = [reports]
    num = np.concatenate([r.r_prop_mc for r in reports])
    den = np.concatenate([r.r_uatf for r in reports])
    keep = den > 0
    if not keep.any():
        return float("nan"), int((~keep).sum())
    return float(np.mean(num[keep] / den[keep])), int((~keep).sum())
