"""System and solver parameters.

Defaults follow the 300 m x 300 m evaluation scenario: 1.9 GHz carrier,
20 MHz bandwidth, 200-sample coherence block split 20/90/90, 100 mW user
power and -92 dBm noise.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path


class ConfigError(ValueError):
    """Raised when a configuration violates its invariants."""


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


@dataclass(frozen=True)
class SystemConfig:
    M: int = 200
    N: int = 1
    K: int = 20
    D: float = 300.0
    tau_c: int = 200
    tau_p: int = 20
    tau_d: int = 90
    tau_u: int = 90
    rho_u: float = 0.1
    # pilot power and pilot noise are not given separately; tied to data values
    rho_p: float = 0.1
    sigma_w2: float = dbm_to_watt(-92.0)
    sigma_p2: float = dbm_to_watt(-92.0)
    f_mhz: float = 1900.0
    h_ap: float = 10.0
    h_user: float = 1.65
    d0: float = 10.0
    d1: float = 50.0
    bandwidth_hz: float = 20e6
    # unit the distances are expressed in inside the log10 terms of the
    # 3-slope model; "m" reads the formula literally, "km" matches the
    # COST-Hata calibration used by most cell-free studies
    distance_unit: str = "m"

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        for name in ("M", "N", "K", "tau_c", "tau_p", "tau_u"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if self.tau_d < 0:
            raise ConfigError(f"tau_d must be nonnegative, got {self.tau_d}")
        if self.tau_c != self.tau_p + self.tau_d + self.tau_u:
            raise ConfigError(
                f"tau_c={self.tau_c} != tau_p + tau_d + tau_u = "
                f"{self.tau_p + self.tau_d + self.tau_u}"
            )
        if self.K > self.tau_p:
            raise ConfigError(
                f"K={self.K} exceeds tau_p={self.tau_p}; pilot contamination is not supported"
            )
        for name in ("D", "rho_u", "rho_p", "sigma_w2", "sigma_p2", "f_mhz",
                     "h_ap", "h_user", "bandwidth_hz"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be strictly positive, got {getattr(self, name)}")
        if not 0 < self.d0 < self.d1 < self.D:
            raise ConfigError(f"need 0 < d0 < d1 < D, got d0={self.d0}, d1={self.d1}, D={self.D}")
        if self.distance_unit not in ("m", "km"):
            raise ConfigError(f"distance_unit must be 'm' or 'km', got {self.distance_unit!r}")

    @property
    def prelog(self) -> float:
        """Fraction of the coherence block spent on uplink data."""
        return 1.0 - (self.tau_p + self.tau_d) / self.tau_c

    def replace(self, **changes) -> "SystemConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "SystemConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown SystemConfig keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_json(cls, path: str | Path) -> "SystemConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class SolverSettings:
    """Tolerances and iteration caps for the optimizers and estimators."""

    rel_tol: float = 1e-4
    abs_tol: float = 1e-9
    max_bisect_iters: int = 200
    feas_slack: float = 1e-8
    mm_tol: float = 1e-3
    mm_max_iters: int = 20
    ao_eps: float = 1e-3
    ao_max_rounds: int = 15
    mc_samples: int = 2000
    # "greedy" uses the per-user closed-form oracle for the relaxed scheduling
    # step; "lp" routes the same rows through the generic LP feasibility engine
    sched_backend: str = "greedy"
    seed: int = 0

    def __post_init__(self):
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise ConfigError("tolerances must be positive")
        if self.sched_backend not in ("greedy", "lp"):
            raise ConfigError(f"unknown sched_backend {self.sched_backend!r}")

    def replace(self, **changes) -> "SolverSettings":
        return dataclasses.replace(self, **changes)

    @classmethod
    def from_dict(cls, data: dict) -> "SolverSettings":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown SolverSettings keys: {sorted(unknown)}")
        return cls(**data)
