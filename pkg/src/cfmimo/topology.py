"""Network drops and large-scale fading.

A drop is one realization of AP and user positions together with the
large-scale gains ``beta`` and LMMSE estimate variances ``gamma`` (both
M x K, linear scale).  Random drops use wraparound distances on the D x D
torus; piazza drops put the APs on the square boundary and use plain
Euclidean distances.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .channel import gamma_of_beta
from .config import SystemConfig

# named RNG substreams derived from a drop seed
AP_STREAM = 0
USER_STREAM = 1
FADING_STREAM = 2


def substream(seed: int, stream: int) -> np.random.Generator:
    """Independent generator for ``stream`` under a drop ``seed``."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(stream)]))


@dataclass(frozen=True, eq=False)
class NetworkDrop:
    ap_pos: np.ndarray
    user_pos: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray
    cfg: SystemConfig
    topology_kind: str = "random"
    seed: int | None = None

    def __post_init__(self):
        M, K = self.cfg.M, self.cfg.K
        if self.beta.shape != (M, K) or self.gamma.shape != (M, K):
            raise ValueError(f"beta/gamma must be {M}x{K}, got {self.beta.shape}/{self.gamma.shape}")
        if self.ap_pos.shape != (M, 2) or self.user_pos.shape != (K, 2):
            raise ValueError("position arrays have wrong shape")
        for arr in (self.ap_pos, self.user_pos, self.beta, self.gamma):
            arr.flags.writeable = False

    @property
    def M(self) -> int:
        return self.cfg.M

    @property
    def K(self) -> int:
        return self.cfg.K

    @property
    def N(self) -> int:
        return self.cfg.N

    def to_dict(self) -> dict:
        return {
            "cfg": self.cfg.to_dict(),
            "topology_kind": self.topology_kind,
            "seed": self.seed,
            "ap_pos": self.ap_pos.tolist(),
            "user_pos": self.user_pos.tolist(),
            "beta": self.beta.tolist(),
            "gamma": self.gamma.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "NetworkDrop":
        return cls(
            ap_pos=np.array(data["ap_pos"], dtype=float).reshape(-1, 2),
            user_pos=np.array(data["user_pos"], dtype=float).reshape(-1, 2),
            beta=np.array(data["beta"], dtype=float),
            gamma=np.array(data["gamma"], dtype=float),
            cfg=SystemConfig.from_dict(data["cfg"]),
            topology_kind=data.get("topology_kind", "random"),
            seed=data.get("seed"),
        )

    def to_json(self, path: str | Path | None = None) -> str:
        text = json.dumps(self.to_dict())
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_json(cls, path: str | Path) -> "NetworkDrop":
        return cls.from_dict(json.loads(Path(path).read_text()))


def wrap_distance(p, q, D: float):
    """Distance between ``p`` and ``q`` on the D x D torus.

    Minimum over the 9 translated images of ``q``.  Broadcasts over leading
    axes, so ``p[:, None, :]`` against ``q[None, :, :]`` yields a matrix.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    best = None
    for sx in (-D, 0.0, D):
        for sy in (-D, 0.0, D):
            d = np.hypot(p[..., 0] - q[..., 0] - sx, p[..., 1] - q[..., 1] - sy)
            best = d if best is None else np.minimum(best, d)
    return best


def cost_hata_loss_db(cfg: SystemConfig) -> float:
    lf = np.log10(cfg.f_mhz)
    return (46.3 + 33.9 * lf - 13.82 * np.log10(cfg.h_ap)
            - (1.1 * lf - 0.7) * cfg.h_user + 1.56 * lf - 0.8)


def path_loss_db(d, cfg: SystemConfig):
    """Large-scale gain in dB (negative) from the 3-slope + COST-Hata model.

    ``d`` is in meters; it is converted to ``cfg.distance_unit`` together
    with the breakpoints before the logarithms are taken.  Distances at or
    below ``d0`` fall on the plateau, so ``d = 0`` is finite.
    """
    scale = 1e-3 if cfg.distance_unit == "km" else 1.0
    d = np.asarray(d, dtype=float) * scale
    d0, d1 = cfg.d0 * scale, cfg.d1 * scale
    dc = np.maximum(d, d0)  # keeps log10 finite on the plateau branch
    slope = np.where(
        d > d1,
        -35.0 * np.log10(dc),
        np.where(
            d > d0,
            -15.0 * np.log10(d1) - 20.0 * np.log10(dc),
            -15.0 * np.log10(d1) - 20.0 * np.log10(d0),
        ),
    )
    out = -cost_hata_loss_db(cfg) + slope
    return float(out) if out.ndim == 0 else out


def drop_from_positions(cfg: SystemConfig, ap_pos, user_pos, *, wraparound: bool = True,
                        topology_kind: str = "custom", seed: int | None = None) -> NetworkDrop:
    """Build a drop from explicit coordinates."""
    ap_pos = np.asarray(ap_pos, dtype=float).reshape(cfg.M, 2)
    user_pos = np.asarray(user_pos, dtype=float).reshape(cfg.K, 2)
    if wraparound:
        dist = wrap_distance(ap_pos[:, None, :], user_pos[None, :, :], cfg.D)
    else:
        dist = np.hypot(ap_pos[:, None, 0] - user_pos[None, :, 0],
                        ap_pos[:, None, 1] - user_pos[None, :, 1])
    beta = 10.0 ** (np.asarray(path_loss_db(dist, cfg)) / 10.0)
    gamma = gamma_of_beta(beta, cfg)
    return NetworkDrop(ap_pos=ap_pos, user_pos=user_pos, beta=beta, gamma=gamma,
                       cfg=cfg, topology_kind=topology_kind, seed=seed)


def _users(cfg: SystemConfig, seed: int) -> np.ndarray:
    return substream(seed, USER_STREAM).uniform(0.0, cfg.D, size=(cfg.K, 2))


def gen_random_drop(cfg: SystemConfig, seed: int) -> NetworkDrop:
    """APs and users i.i.d. uniform on [0, D)^2 with wraparound distances."""
    cfg.validate()
    ap_pos = substream(seed, AP_STREAM).uniform(0.0, cfg.D, size=(cfg.M, 2))
    return drop_from_positions(cfg, ap_pos, _users(cfg, seed), wraparound=True,
                               topology_kind="random", seed=seed)


def piazza_positions(M: int, D: float) -> np.ndarray:
    """AP coordinates on the square boundary, clockwise from (0, 0).

    Sides are walked left (up), top (right), right (down), bottom (left).
    Each side carries ``M // 4`` equally spaced APs starting at its first
    corner; the ``M % 4`` leftover APs go to the bottom side.
    """
    per_side = [M // 4] * 4
    per_side[3] += M % 4
    corners = np.array([[0.0, 0.0], [0.0, D], [D, D], [D, 0.0], [0.0, 0.0]])
    pts = []
    for side, n in enumerate(per_side):
        if n == 0:
            continue
        a, b = corners[side], corners[side + 1]
        frac = np.arange(n) / n
        pts.append(a + frac[:, None] * (b - a))
    return np.vstack(pts)


def gen_piazza_drop(cfg: SystemConfig, seed: int) -> NetworkDrop:
    """APs evenly spaced on the perimeter; users uniform inside; no wraparound."""
    cfg.validate()
    return drop_from_positions(cfg, piazza_positions(cfg.M, cfg.D), _users(cfg, seed),
                               wraparound=False, topology_kind="piazza", seed=seed)


def gen_drop(cfg: SystemConfig, seed: int, topology: str = "random") -> NetworkDrop:
    if topology == "random":
        return gen_random_drop(cfg, seed)
    if topology == "piazza":
        return gen_piazza_drop(cfg, seed)
    raise ValueError(f"unknown topology {topology!r}")
