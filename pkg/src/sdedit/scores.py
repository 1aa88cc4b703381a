"""Score models: exact Gaussian-mixture oracle, zero stub, class-posterior gradients.

A Gaussian mixture convolved with the diffusion perturbation kernel stays a
Gaussian mixture, so its time-t score has a closed form: component k of the
perturbed density has mean alpha(t) mu_k and variance alpha(t)^2 s_k^2 + sigma(t)^2.
That makes the analytic mixture an exact oracle against which samplers and
learned models are checked.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .errors import DomainError, ShapeMismatchError

__all__ = [
    "GmmSpec",
    "ScoreModel",
    "AnalyticGmmScore",
    "ZeroScore",
    "class_posterior_grad",
    "GmmClassifier",
]


@dataclass(frozen=True)
class GmmSpec:
    """Isotropic Gaussian mixture: weights (K,), means (K, d), stds (K,)."""

    weights: np.ndarray
    means: np.ndarray
    stds: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        m = np.atleast_2d(np.asarray(self.means, dtype=np.float64))
        s = np.asarray(self.stds, dtype=np.float64)
        if w.ndim != 1 or s.ndim != 1 or m.ndim != 2:
            raise ShapeMismatchError("weights and stds must be 1-D, means 2-D")
        if not (len(w) == len(s) == m.shape[0]):
            raise ShapeMismatchError(
                f"component counts disagree: {len(w)} weights, {m.shape[0]} means, {len(s)} stds"
            )
        if np.any(w <= 0.0):
            raise DomainError("weights must be positive")
        if abs(w.sum() - 1.0) > 1e-12:
            raise DomainError(f"weights must sum to 1 within 1e-12, got {w.sum()!r}")
        if np.any(s <= 0.0):
            raise DomainError("stds must be positive")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", m)
        object.__setattr__(self, "stds", s)

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    @property
    def n_components(self) -> int:
        return self.means.shape[0]

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Draw n points from the mixture."""
        ks = rng.choice(self.n_components, size=n, p=self.weights)
        return self.means[ks] + self.stds[ks, None] * rng.standard_normal((n, self.dim))

    def perturbed_params(self, schedule, t: float):
        """(means, variances) of the mixture after the time-t perturbation kernel."""
        a = float(schedule.alpha(t))
        var = a * a * self.stds**2 + float(schedule.sigma2(t))
        return a * self.means, var


class ScoreModel:
    """Maps a state batch and a time to estimated scores of the perturbed density.

    ``x`` may be (d,) or (B, d); the output matches. Evaluation is
    deterministic and read-only, safe to share across threads.
    """

    def __call__(self, x: np.ndarray, t: float) -> np.ndarray:
        raise NotImplementedError


def _as_batch(x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        return x[None, :], True
    if x.ndim == 2:
        return x, False
    raise ShapeMismatchError(f"state must be (d,) or (B, d), got shape {x.shape}")


@dataclass
class AnalyticGmmScore(ScoreModel):
    """Exact score of a noise-perturbed Gaussian mixture."""

    gmm: GmmSpec
    schedule: object

    def __call__(self, x, t):
        xb, squeeze = _as_batch(x)
        if xb.shape[1] != self.gmm.dim:
            raise ShapeMismatchError(
                f"state dim {xb.shape[1]} != mixture dim {self.gmm.dim}"
            )
        means, var = self.gmm.perturbed_params(self.schedule, t)
        inv_var = 1.0 / var
        d = self.gmm.dim
        log_norm_w = np.log(self.gmm.weights) - 0.5 * d * np.log(2.0 * np.pi * var)
        out = _backend.gmm_score(np.ascontiguousarray(xb), means, inv_var, log_norm_w)
        return out[0] if squeeze else out


@dataclass
class ZeroScore(ScoreModel):
    """Identically-zero score; the C = 0 case of the deviation bound."""

    def __call__(self, x, t):
        return np.zeros_like(np.asarray(x, dtype=np.float64))


def class_posterior_grad(gmm: GmmSpec, schedule, x, t: float, label: int) -> np.ndarray:
    """Gradient of log p_t(label | x) for the perturbed mixture.

    Equals the score of component ``label``'s perturbed Gaussian minus the full
    mixture score (weight constants vanish under the gradient).
    """
    if not (0 <= label < gmm.n_components):
        raise DomainError(f"label {label} out of range for {gmm.n_components} components")
    xb, squeeze = _as_batch(x)
    means, var = gmm.perturbed_params(schedule, t)
    comp = (means[label][None, :] - xb) / var[label]
    mix = AnalyticGmmScore(gmm, schedule)(xb, t)
    out = comp - mix
    return out[0] if squeeze else out


@dataclass
class GmmClassifier:
    """Classifier-gradient provider for class-conditional sampling on a mixture."""

    gmm: GmmSpec
    schedule: object

    def grad(self, x, t: float, label: int) -> np.ndarray:
        return class_posterior_grad(self.gmm, self.schedule, x, t, label)


@dataclass
class MaxNormRecorder(ScoreModel):
    """Wraps a score model and records the largest squared norm it returned.

    Used to measure the score bound C a posteriori for the deviation-bound check.
    """

    inner: ScoreModel
    max_sq_norm: float = field(default=0.0)

    def __call__(self, x, t):
        s = self.inner(x, t)
        sq = np.asarray(s, dtype=np.float64) ** 2
        total = sq.sum(axis=-1)
        self.max_sq_norm = max(self.max_sq_norm, float(np.max(total)))
        return s
