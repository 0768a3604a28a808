"""Pilots, LMMSE statistics and joint sampling of true/estimated channels.

Channel arrays are laid out ``(..., M, K, N)``: AP, user, antenna, with an
optional leading sample axis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PilotPlan:
    pilot_index: np.ndarray  # 1-based, one per user
    tau_p: int

    def orthogonal(self) -> bool:
        return len(np.unique(self.pilot_index)) == len(self.pilot_index)


@dataclass(frozen=True)
class ChannelSample:
    g: np.ndarray
    g_hat: np.ndarray

    @property
    def error(self) -> np.ndarray:
        return self.g - self.g_hat


def assign_pilots(K: int, tau_p: int) -> PilotPlan:
    """Give user k pilot k (1-based).  Requires ``K <= tau_p``."""
    if K < 1:
        raise ValueError("need at least one user")
    if K > tau_p:
        raise ValueError(f"K={K} > tau_p={tau_p}: pilot contamination regime is unsupported")
    return PilotPlan(pilot_index=np.arange(1, K + 1), tau_p=tau_p)


def gamma_of_beta(beta, cfg):
    """Variance of the LMMSE estimate per antenna under orthogonal pilots."""
    beta = np.asarray(beta, dtype=float)
    if np.any(beta < 0):
        raise ValueError("beta must be nonnegative")
    snr = cfg.tau_p * cfg.rho_p
    return snr * beta**2 / (snr * beta + cfg.sigma_p2)


def complex_normal(rng: np.random.Generator, shape, var=1.0) -> np.ndarray:
    """CN(0, var) entries from two real normals of variance var/2 each."""
    s = np.sqrt(np.asarray(var, dtype=float) / 2.0)
    return s * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def sample_channels(drop, rng: np.random.Generator, size: int | None = None) -> ChannelSample:
    """Draw (g, g_hat) by decomposition g = g_hat + e.

    ``g_hat ~ CN(0, gamma I)`` and ``e ~ CN(0, (beta - gamma) I)`` are
    independent, which is the joint law produced by LMMSE estimation with
    orthogonal pilots.  ``size`` adds a leading sample axis.
    """
    M, K, N = drop.beta.shape[0], drop.beta.shape[1], drop.cfg.N
    shape = (M, K, N) if size is None else (size, M, K, N)
    gam = drop.gamma[..., None]
    err_var = np.clip(drop.beta - drop.gamma, 0.0, None)[..., None]
    g_hat = complex_normal(rng, shape, gam)
    g = g_hat + complex_normal(rng, shape, err_var)
    return ChannelSample(g=g, g_hat=g_hat)


def pilot_book(tau_p: int) -> np.ndarray:
    """Orthonormal pilot sequences as columns (unitary DFT)."""
    n = np.arange(tau_p)
    return np.exp(-2j * np.pi * np.outer(n, n) / tau_p) / np.sqrt(tau_p)


def simulate_pilot_estimation(drop, rng: np.random.Generator, size: int | None = None,
                              plan: PilotPlan | None = None,
                              sigma_p2: float | None = None) -> ChannelSample:
    """Estimate channels from a simulated uplink training phase.

    Draws ``g``, forms the received pilot matrix at every AP, projects it on
    each user's transmitted pilot and applies the LMMSE weight computed from
    the second-order statistics of that projection.  Slow; kept as a
    reference for :func:`sample_channels`.
    """
    cfg = drop.cfg
    M, K, N, tau_p = cfg.M, cfg.K, cfg.N, cfg.tau_p
    plan = plan or assign_pilots(K, tau_p)
    if not plan.orthogonal():
        raise ValueError("pilot plan must be orthogonal")
    noise = cfg.sigma_p2 if sigma_p2 is None else sigma_p2
    S = 1 if size is None else size

    amp = np.sqrt(tau_p * cfg.rho_p)
    phi = amp * pilot_book(tau_p)[:, plan.pilot_index - 1]  # tau_p x K

    g = complex_normal(rng, (S, M, K, N), drop.beta[..., None])
    W = complex_normal(rng, (S, M, N, tau_p), noise)
    Y = np.einsum("smkn,tk->smnt", g, phi) + W
    # project on phi_k^*:  y_mk = tau_p rho_p g_mk + W phi_k^*
    y = np.einsum("smnt,tk->smkn", Y, phi.conj())
    weight = drop.beta / (tau_p * cfg.rho_p * drop.beta + noise)
    g_hat = weight[None, :, :, None] * y
    if size is None:
        g, g_hat = g[0], g_hat[0]
    return ChannelSample(g=g, g_hat=g_hat)
