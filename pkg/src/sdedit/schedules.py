"""Noise schedules for the forward/reverse diffusion SDEs.

Two parameterizations are supported:

* variance-exploding (VE): x(t) = x(0) + sigma(t) z with
  sigma(t) = sigma_min (sigma_max/sigma_min)^t for t > 0 and sigma(0) = 0
  (piecewise: the noise magnitude jumps from 0 to sigma_min at t = 0+).
* variance-preserving (VP): x(t) = sqrt(abar(t)) x(0) + sqrt(1 - abar(t)) z
  with beta(t) = beta_min + t (beta_max - beta_min) affine and abar either the
  continuous exp(-int_0^t beta) or the discrete product over a sampling grid.

Both expose the common signal/noise coefficients ``alpha(t)`` and ``sigma(t)``
of the perturbation kernel x(t) = alpha(t) x(0) + sigma(t) z, so score models
can treat them uniformly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ResolutionError

__all__ = [
    "VeSchedule",
    "VpSchedule",
    "TimeGrid",
    "make_time_grid",
    "SCHEDULE_PRESETS",
    "schedule_from_config",
    "load_schedule",
]


def _check_time(t) -> np.ndarray:
    t = np.asarray(t, dtype=np.float64)
    if np.any(t < 0.0) or np.any(t > 1.0):
        raise DomainError(f"time must lie in [0, 1], got {t!r}")
    return t


@dataclass(frozen=True)
class VeSchedule:
    """Variance-exploding schedule: geometric sigma(t), alpha(t) = 1."""

    sigma_min: float = 0.01
    sigma_max: float = 25.0

    variant = "ve"

    def __post_init__(self):
        if not (0.0 < self.sigma_min < self.sigma_max):
            raise DomainError(
                f"need 0 < sigma_min < sigma_max, got {self.sigma_min}, {self.sigma_max}"
            )

    def sigma(self, t):
        """Noise std at time t; 0 exactly at t = 0, geometric on (0, 1].

        Evaluated in log space so large sigma_max does not overflow.
        """
        t = _check_time(t)
        log_sigma = math.log(self.sigma_min) + t * (
            math.log(self.sigma_max) - math.log(self.sigma_min)
        )
        out = np.where(t > 0.0, np.exp(log_sigma), 0.0)
        return float(out) if out.ndim == 0 else out

    def sigma2(self, t):
        s = self.sigma(t)
        return s * s

    def alpha(self, t):
        t = _check_time(t)
        out = np.ones_like(t)
        return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class VpSchedule:
    """Variance-preserving schedule with affine beta(t)."""

    beta_min: float = 0.1
    beta_max: float = 20.0

    variant = "vp"

    def __post_init__(self):
        if not (0.0 < self.beta_min <= self.beta_max):
            raise DomainError(
                f"need 0 < beta_min <= beta_max, got {self.beta_min}, {self.beta_max}"
            )

    def beta(self, t):
        t = _check_time(t)
        out = self.beta_min + t * (self.beta_max - self.beta_min)
        return float(out) if out.ndim == 0 else out

    def alpha_bar(self, t):
        """Continuous signal-variance retention exp(-int_0^t beta(s) ds)."""
        t = _check_time(t)
        integral = self.beta_min * t + 0.5 * (self.beta_max - self.beta_min) * t * t
        out = np.exp(-integral)
        return float(out) if out.ndim == 0 else out

    def discrete_alpha(self, t0: float, n_steps: int) -> float:
        """Product prod_{n=1..N} (1 - beta(n t0 / N) dt) over the sampling grid.

        Converges to ``alpha_bar(t0)`` as N grows; raises if the grid is too
        coarse for the schedule (some factor would be <= 0).
        """
        return float(self.discrete_alpha_prefix(t0, n_steps)[-1])

    def discrete_alpha_prefix(self, t0: float, n_steps: int) -> np.ndarray:
        """Prefix products: entry n is prod_{i=1..n}(1 - beta(i t0/N) dt), entry 0 is 1."""
        if t0 == 0.0:
            # empty product by convention
            return np.ones(1)
        grid = make_time_grid(t0, n_steps)
        factors = 1.0 - self.beta(grid.times[::-1]) * grid.delta_t  # ascending i = 1..N
        if np.any(factors <= 0.0):
            raise ResolutionError(
                f"n_steps={n_steps} too small for beta_max={self.beta_max} at t0={t0}: "
                "some 1 - beta*dt factor is <= 0"
            )
        out = np.empty(n_steps + 1)
        out[0] = 1.0
        np.cumprod(factors, out=out[1:])
        return out

    def alpha(self, t):
        """Signal coefficient sqrt(abar(t)) of the perturbation kernel."""
        return np.sqrt(self.alpha_bar(t))

    def sigma(self, t):
        """Noise std sqrt(1 - abar(t)) of the perturbation kernel."""
        return np.sqrt(1.0 - self.alpha_bar(t))

    def sigma2(self, t):
        return 1.0 - self.alpha_bar(t)


@dataclass(frozen=True)
class TimeGrid:
    """Descending evaluation times t0*n/N for n = N..1, with dt = t0/N."""

    t0: float
    n_steps: int

    def __post_init__(self):
        if not (0.0 < self.t0 <= 1.0):
            raise DomainError(f"t0 must lie in (0, 1], got {self.t0}")
        if self.n_steps < 1:
            raise DomainError(f"n_steps must be >= 1, got {self.n_steps}")

    @property
    def delta_t(self) -> float:
        return self.t0 / self.n_steps

    @property
    def times(self) -> np.ndarray:
        n = np.arange(self.n_steps, 0, -1, dtype=np.float64)
        return self.t0 * n / self.n_steps

    def step_pairs(self) -> np.ndarray:
        """(N, 2) array of (t, t - dt) per step, both evaluated as exact grid points."""
        n = np.arange(self.n_steps, 0, -1, dtype=np.float64)
        return np.stack([self.t0 * n / self.n_steps, self.t0 * (n - 1) / self.n_steps], axis=1)


def make_time_grid(t0: float, n_steps: int) -> TimeGrid:
    return TimeGrid(float(t0), int(n_steps))


#: Named schedule constants; the *-256/-1024 entries carry the published
#: per-dataset VE sigma_max values, "ve-toy" is the desk-scale default.
SCHEDULE_PRESETS: dict[str, VeSchedule | VpSchedule] = {
    "ve-church-256": VeSchedule(0.01, 380.0),
    "ve-bedroom-256": VeSchedule(0.01, 378.0),
    "ve-celebahq-256": VeSchedule(0.01, 348.0),
    "ve-ffhq-1024": VeSchedule(0.01, 1348.0),
    "ve-toy": VeSchedule(0.01, 25.0),
    "vp-default": VpSchedule(0.1, 20.0),
}


def schedule_from_config(cfg: dict) -> VeSchedule | VpSchedule:
    """Build a schedule from a key-value mapping.

    Accepts either {"preset": name} or
    {"variant": "ve"|"vp", "sigma_min": .., "sigma_max": ..} /
    {"variant": "vp", "beta_min": .., "beta_max": ..}.
    """
    if "preset" in cfg:
        name = cfg["preset"]
        if name not in SCHEDULE_PRESETS:
            raise KeyError(f"unknown schedule preset {name!r}")
        return SCHEDULE_PRESETS[name]
    variant = str(cfg.get("variant", "")).lower()
    if variant == "ve":
        return VeSchedule(float(cfg.get("sigma_min", 0.01)), float(cfg["sigma_max"]))
    if variant == "vp":
        return VpSchedule(float(cfg.get("beta_min", 0.1)), float(cfg.get("beta_max", 20.0)))
    raise ValueError(f"config must name a preset or a variant 've'/'vp', got {cfg!r}")


def load_schedule(path) -> VeSchedule | VpSchedule:
    """Load a schedule from a JSON config file (see ``schedule_from_config``)."""
    with open(path, "r", encoding="utf-8") as fh:
        return schedule_from_config(json.load(fh))


def schedule_to_config(schedule) -> dict:
    """Inverse of ``schedule_from_config`` for non-preset serialization."""
    if isinstance(schedule, VeSchedule):
        return {"variant": "ve", "sigma_min": schedule.sigma_min, "sigma_max": schedule.sigma_max}
    if isinstance(schedule, VpSchedule):
        return {"variant": "vp", "beta_min": schedule.beta_min, "beta_max": schedule.beta_max}
    raise TypeError(f"not a schedule: {schedule!r}")
