"""Guided synthesis and editing by hijacking the reverse diffusion SDE.

The procedure: perturb a user guide to an intermediate time t0 with the
forward kernel, then integrate the reverse SDE back to t ~ 0 with
Euler-Maruyama. Small t0 stays faithful to the guide, large t0 gives realism;
t0 = 1 degenerates to unconditional synthesis. Masked variants pin the
uneditable region to the guide plus matched decaying noise; class-conditional
variants add a classifier log-posterior gradient to the drift.

Randomness: every Gaussian draw comes from a counter-based Philox stream
keyed by (seed, repeat, step), so identical (guide, config, seed) give
bit-identical results regardless of how runs are batched; the batch axis of a
draw addresses the run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DomainError, ProtocolError, ResolutionError, ShapeMismatchError
from .schedules import VeSchedule, VpSchedule, make_time_grid

__all__ = [
    "Guide",
    "EditMask",
    "SdeditConfig",
    "SampleResult",
    "T0SearchState",
    "forward_perturb",
    "reverse_step_ve",
    "reverse_step_vp",
    "sdedit",
    "sdedit_masked",
    "sdedit_class_conditional",
    "t0_binary_search",
    "FEEDBACK_MORE_REALISTIC",
    "FEEDBACK_MORE_FAITHFUL",
    "FEEDBACK_ACCEPT",
]


# -- domain types ---------------------------------------------------------


@dataclass(frozen=True)
class Guide:
    """A d-dimensional editing guide: flat vector or flattened image in [0, 1]."""

    data: np.ndarray
    shape: tuple
    kind: str = "vector"  # "vector" | "image"

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float64).ravel()
        if not np.all(np.isfinite(data)):
            raise DomainError("guide entries must be finite")
        if self.kind == "image" and (data.min() < 0.0 or data.max() > 1.0):
            raise DomainError("image guides must have values in [0, 1]")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "shape", tuple(self.shape))

    @classmethod
    def from_vector(cls, v) -> "Guide":
        v = np.asarray(v, dtype=np.float64).ravel()
        return cls(v, (v.size,), "vector")

    @classmethod
    def from_image(cls, img) -> "Guide":
        img = np.asarray(img, dtype=np.float64)
        if img.ndim not in (2, 3):
            raise ShapeMismatchError(f"image must be (H, W) or (H, W, C), got {img.shape}")
        return cls(img.ravel(), img.shape, "image")

    @property
    def dim(self) -> int:
        return self.data.size

    def image(self) -> np.ndarray:
        return self.data.reshape(self.shape)


@dataclass(frozen=True)
class EditMask:
    """Binary mask over guide coordinates: 1 = editable, 0 = keep."""

    omega: np.ndarray
    shape: tuple

    def __post_init__(self):
        om = np.asarray(self.omega, dtype=np.float64).ravel()
        if not np.all((om == 0.0) | (om == 1.0)):
            raise DomainError("mask entries must be 0 or 1")
        object.__setattr__(self, "omega", om)
        object.__setattr__(self, "shape", tuple(self.shape))

    @classmethod
    def from_image(cls, mask, channels: int | None = None) -> "EditMask":
        mask = np.asarray(mask, dtype=np.float64)
        if channels is not None and mask.ndim == 2:
            mask = np.repeat(mask[:, :, None], channels, axis=2)
        return cls(mask.ravel(), mask.shape)

    @classmethod
    def ones(cls, shape) -> "EditMask":
        return cls(np.ones(int(np.prod(shape))), tuple(shape))

    @property
    def dim(self) -> int:
        return self.omega.size


@dataclass(frozen=True)
class SdeditConfig:
    """Run parameters: start time t0, step count, repeats, seed, options."""

    t0: float
    n_steps: int
    repeats: int = 1
    seed: int = 0
    variant: str | None = None  # "ve" | "vp"; checked against the schedule when set
    label: int | None = None
    snapshot_stride: int = 0
    hard_restore: bool = False

    def __post_init__(self):
        if not (0.0 <= self.t0 <= 1.0):
            raise DomainError(f"t0 must lie in [0, 1], got {self.t0}")
        if self.n_steps < 1:
            raise DomainError(f"n_steps must be >= 1, got {self.n_steps}")
        if self.repeats < 1:
            raise DomainError(f"repeats must be >= 1, got {self.repeats}")
        if self.seed < 0:
            raise DomainError("seed must be nonnegative")
        if self.variant not in (None, "ve", "vp"):
            raise DomainError(f"variant must be 've' or 'vp', got {self.variant!r}")


@dataclass
class SampleResult:
    """Output of one run (or one batch of runs sharing a seed)."""

    output: np.ndarray
    perturbed: np.ndarray  # state right after the forward perturbation (last repeat)
    seed: int
    steps_run: int
    snapshots: list = field(default_factory=list)  # (repeat, t, state), descending t
    shape: tuple | None = None


# -- keyed noise ----------------------------------------------------------

_MASK64 = (1 << 64) - 1
_MASK32 = (1 << 32) - 1


def _noise(seed: int, repeat: int, step: int, shape) -> np.ndarray:
    """Standard-normal draw from the Philox stream keyed by (seed, repeat, step)."""
    key = ((seed & _MASK64) << 64) | ((repeat & _MASK32) << 32) | (step & _MASK32)
    return np.random.Generator(np.random.Philox(key=key)).standard_normal(shape)


def _as_runs(x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        return x[None, :], True
    if x.ndim == 2:
        return x, False
    raise ShapeMismatchError(f"expected (d,) or (B, d) state, got shape {x.shape}")


def _resolve_rng(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


# -- elementary operations ------------------------------------------------


def forward_perturb(guide, schedule, t0: float, rng=None, *, n_steps: int | None = None,
                    z: np.ndarray | None = None) -> np.ndarray:
    """One draw of the forward perturbation kernel at time t0.

    VE: x + sigma(t0) z. VP: sqrt(a) x + sqrt(1 - a) z, where a is the
    discrete grid product when ``n_steps`` is given, else the continuous
    exp(-int beta). t0 = 0 returns the guide unchanged.
    """
    data = guide.data if isinstance(guide, Guide) else guide
    x, squeeze = _as_runs(data)
    if t0 == 0.0:
        out = x.copy()
        return out[0] if squeeze else out
    if z is None:
        z = _resolve_rng(rng).standard_normal(x.shape)
    if isinstance(schedule, VeSchedule):
        out = x + schedule.sigma(t0) * z
    elif isinstance(schedule, VpSchedule):
        a = schedule.discrete_alpha(t0, n_steps) if n_steps else schedule.alpha_bar(t0)
        out = math.sqrt(a) * x + math.sqrt(1.0 - a) * z
    else:
        raise TypeError(f"unknown schedule type {type(schedule)!r}")
    return out[0] if squeeze else out


def reverse_step_ve(x, t: float, delta_t: float, score, schedule, rng=None, *,
                    z: np.ndarray | None = None, t_prev: float | None = None,
                    extra_drift: np.ndarray | None = None) -> np.ndarray:
    """One Euler-Maruyama step of the reverse VE SDE from t to t - delta_t.

    x <- x + eps^2 s(x, t) + eps z with eps = sqrt(sigma^2(t) - sigma^2(t - dt)).
    """
    x, squeeze = _as_runs(x)
    if t_prev is None:
        t_prev = t - delta_t
    if t_prev < 0.0:
        raise DomainError(f"step leaves [0, 1]: t - delta_t = {t_prev}")
    eps2 = schedule.sigma2(t) - schedule.sigma2(t_prev)
    if eps2 < 0.0:
        raise ResolutionError(f"negative variance increment at t={t}: {eps2}")
    if z is None:
        z = _resolve_rng(rng).standard_normal(x.shape)
    drift = score(x, t)
    if extra_drift is not None:
        drift = drift + extra_drift
    out = x + eps2 * drift + math.sqrt(eps2) * z
    return out[0] if squeeze else out


def reverse_step_vp(x, t: float, delta_t: float, score, schedule, rng=None, *,
                    z: np.ndarray | None = None,
                    classifier_drift: np.ndarray | None = None) -> np.ndarray:
    """One reverse VP step: x <- (x + b dt s(x, t)) / sqrt(1 - b dt) + sqrt(b dt) z.

    A classifier gradient, when given, contributes b dt * grad outside the
    rescaling, matching the class-guided update rule.
    """
    x, squeeze = _as_runs(x)
    bdt = schedule.beta(t) * delta_t
    if bdt >= 1.0:
        raise ResolutionError(f"beta(t) * delta_t = {bdt} >= 1; increase n_steps")
    if z is None:
        z = _resolve_rng(rng).standard_normal(x.shape)
    out = (x + bdt * score(x, t)) / math.sqrt(1.0 - bdt) + math.sqrt(bdt) * z
    if classifier_drift is not None:
        out = out + bdt * classifier_drift
    return out[0] if squeeze else out


# -- the full procedure ---------------------------------------------------


def _check_variant(schedule, config: SdeditConfig) -> str:
    variant = "ve" if isinstance(schedule, VeSchedule) else "vp"
    if config.variant is not None and config.variant != variant:
        raise DomainError(
            f"config variant {config.variant!r} does not match schedule {variant!r}"
        )
    return variant


def _run(guide, mask, score, schedule, config: SdeditConfig, classifier=None):
    shape = None
    if isinstance(guide, Guide):
        shape = guide.shape
        guide = guide.data
    x0, squeeze = _as_runs(guide)

    omega = None
    if mask is not None:
        om = mask.omega if isinstance(mask, EditMask) else np.asarray(mask, dtype=np.float64).ravel()
        if om.size != x0.shape[1]:
            raise ShapeMismatchError(
                f"mask has {om.size} entries but guide has {x0.shape[1]} coordinates"
            )
        omega = om[None, :]

    variant = _check_variant(schedule, config)
    grad_fn = None
    if classifier is not None:
        if config.label is None:
            raise DomainError("class-conditional run needs config.label")
        provider = classifier.grad if hasattr(classifier, "grad") else classifier
        grad_fn = lambda xx, tt: provider(xx, tt, config.label)

    if config.t0 == 0.0:
        out = x0.copy()
        result = SampleResult(out, x0.copy(), config.seed, 0, [], shape)
        if squeeze:
            result.output, result.perturbed = result.output[0], result.perturbed[0]
        return result

    N, K, seed = config.n_steps, config.repeats, config.seed
    grid = make_time_grid(config.t0, N)
    pairs = grid.step_pairs()
    dt = grid.delta_t
    if variant == "ve":
        sigma_t0 = schedule.sigma(config.t0)
        sigmas_t = schedule.sigma(pairs[:, 0]) if omega is not None else None
    else:
        prefix = schedule.discrete_alpha_prefix(config.t0, N)
        alpha0 = prefix[-1]

    x = x0.copy()
    snapshots: list = []
    perturbed = None
    for k in range(1, K + 1):
        z = _noise(seed, k, 0, x.shape)
        if variant == "ve":
            if omega is None:
                x = x + sigma_t0 * z
            else:
                x = (1.0 - omega) * x0 + omega * x + sigma_t0 * z
        else:
            ra = math.sqrt(alpha0)
            if omega is None:
                x = ra * x + math.sqrt(1.0 - alpha0) * z
            else:
                x = (1.0 - omega) * ra * x0 + omega * ra * x + math.sqrt(1.0 - alpha0) * z
        if k == K:
            perturbed = x.copy()
        for i, n in enumerate(range(N, 0, -1)):
            t, t_prev = pairs[i]
            z = _noise(seed, k, n, x.shape)
            extra = grad_fn(x, t) if grad_fn is not None else None
            if variant == "ve":
                xe = reverse_step_ve(x, t, dt, score, schedule,
                                     z=z, t_prev=t_prev, extra_drift=extra)
                if omega is None:
                    x = xe
                else:
                    x = (1.0 - omega) * (x0 + sigmas_t[i] * z) + omega * xe
            else:
                xe = reverse_step_vp(x, t, dt, score, schedule, z=z,
                                     classifier_drift=extra)
                if omega is None:
                    x = xe
                else:
                    a_n = prefix[n]  # discrete alpha at the current grid time t
                    pinned = math.sqrt(a_n) * x0 + math.sqrt(1.0 - a_n) * z
                    x = (1.0 - omega) * pinned + omega * xe
            if config.snapshot_stride > 0 and (i + 1) % config.snapshot_stride == 0:
                snapshots.append((k, float(t_prev), (x[0] if squeeze else x).copy()))

    if omega is not None and config.hard_restore:
        x = (1.0 - omega) * x0 + omega * x

    result = SampleResult(x, perturbed, seed, N * K, snapshots, shape)
    if squeeze:
        result.output, result.perturbed = result.output[0], result.perturbed[0]
    return result


def sdedit(guide, score, schedule, config: SdeditConfig) -> SampleResult:
    """Perturb the guide to t0, then run K rounds of N reverse steps.

    ``guide`` may be a Guide, a (d,) vector, or a (B, d) batch of independent
    runs (one output row per run, all driven by the keyed noise streams of
    ``config.seed``).
    """
    return _run(guide, None, score, schedule, config)


def sdedit_masked(guide, mask, score, schedule, config: SdeditConfig) -> SampleResult:
    """Masked variant: editable coordinates (omega = 1) follow the reverse SDE,
    the rest are pinned to the guide plus noise that decays with the schedule,
    so they converge back to the guide as t -> 0. ``config.hard_restore``
    additionally copies the guide into the uneditable region at the end.
    """
    if mask is None:
        raise DomainError("sdedit_masked requires a mask; use sdedit instead")
    return _run(guide, mask, score, schedule, config)


def sdedit_class_conditional(guide, score, classifier, schedule,
                             config: SdeditConfig) -> SampleResult:
    """Class-guided variant: the drift gains the classifier's log-posterior
    gradient for ``config.label`` (VE: added to the score; VP: beta dt scaled
    term outside the rescale)."""
    return _run(guide, None, score, schedule, config, classifier=classifier)


# -- interactive t0 search ------------------------------------------------

FEEDBACK_MORE_REALISTIC = "more_realistic"
FEEDBACK_MORE_FAITHFUL = "more_faithful"
FEEDBACK_ACCEPT = "accept"


@dataclass(frozen=True)
class T0SearchState:
    """Bisection over t0 driven by realism/faithfulness verdicts.

    Starts on [0.3, 0.6] (a good range for reasonable guides); asking for more
    realism raises the lower end, more faithfulness lowers the upper end.
    """

    lo: float = 0.3
    hi: float = 0.6
    iterations: int = 0
    accepted: bool = False
    history: tuple = ()

    def __post_init__(self):
        if not (0.0 <= self.lo < self.hi <= 1.0):
            raise DomainError(f"need 0 <= lo < hi <= 1, got [{self.lo}, {self.hi}]")

    @property
    def probe(self) -> float:
        return 0.5 * (self.lo + self.hi)


def t0_binary_search(state: T0SearchState, feedback: str) -> T0SearchState:
    """Advance the bisection; 'accept' freezes the state, further feedback errors."""
    if state.accepted:
        raise ProtocolError("search already accepted; no further feedback allowed")
    entry = (state.probe, feedback)
    if feedback == FEEDBACK_ACCEPT:
        return replace(state, accepted=True, history=state.history + (entry,))
    if feedback == FEEDBACK_MORE_REALISTIC:
        return replace(state, lo=state.probe, iterations=state.iterations + 1,
                       history=state.history + (entry,))
    if feedback == FEEDBACK_MORE_FAITHFUL:
        return replace(state, hi=state.probe, iterations=state.iterations + 1,
                       history=state.history + (entry,))
    raise ProtocolError(f"unknown feedback {feedback!r}")
