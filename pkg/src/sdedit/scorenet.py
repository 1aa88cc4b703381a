"""Small MLP score network trained by denoising score matching.

The net regresses the noise: it outputs u(x, t) ~ -z and the score is
u / sigma(t). Inputs are rescaled by 1/sqrt(alpha(t)^2 + sigma(t)^2) so a
single tanh network covers the whole noise range of a VE schedule. With this
parameterization the per-time objective E || sigma_t s(x_t, t) + z ||^2
becomes a plain unit-scale regression E || u + z ||^2, whose minimizer is the
exact perturbed score.

Training is plain SGD with optional momentum; t is drawn uniformly from
(1e-3, 1] to avoid the sigma(0) = 0 degeneracy, with uniform weighting
across times.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ShapeMismatchError, TrainingError
from .schedules import SCHEDULE_PRESETS, schedule_from_config, schedule_to_config
from .scores import GmmSpec, ScoreModel, _as_batch

__all__ = ["MlpScoreNet", "DsmBatchLoss", "dsm_loss", "train_score",
           "save_weights", "load_weights"]

MAGIC = "SDEDIT-MLP 1"


class MlpScoreNet(ScoreModel):
    """Fully-connected tanh net mapping (state, time) to a score estimate."""

    def __init__(self, dim: int, schedule, hidden=(64, 64), n_freqs: int = 4,
                 seed: int = 0):
        self.dim = int(dim)
        self.schedule = schedule
        self.hidden = tuple(int(h) for h in hidden)
        self.n_freqs = int(n_freqs)
        self.seed = int(seed)
        self.freqs = 2.0 ** np.arange(self.n_freqs)
        sizes = [self.dim + 1 + 2 * self.n_freqs, *self.hidden, self.dim]
        rng = np.random.default_rng(seed)
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        for n_in, n_out in zip(sizes[:-1], sizes[1:]):
            self.weights.append(rng.standard_normal((n_in, n_out)) / np.sqrt(n_in))
            self.biases.append(np.zeros(n_out))

    # -- forward ---------------------------------------------------------

    def _features(self, x: np.ndarray, t: float) -> np.ndarray:
        a = float(self.schedule.alpha(t))
        sigma = float(self.schedule.sigma(t))
        xn = x / np.sqrt(a * a + sigma * sigma)
        ang = 2.0 * np.pi * self.freqs * t
        emb = np.concatenate([[t], np.sin(ang), np.cos(ang)])
        return np.concatenate([xn, np.broadcast_to(emb, (x.shape[0], emb.size))], axis=1)

    def _forward(self, x: np.ndarray, t: float):
        """Noise-prediction u(x, t) plus the per-layer activations for backprop."""
        h = self._features(x, t)
        acts = [h]
        for W, b in zip(self.weights[:-1], self.biases[:-1]):
            h = np.tanh(h @ W + b)
            acts.append(h)
        u = h @ self.weights[-1] + self.biases[-1]
        return u, acts

    def __call__(self, x, t):
        xb, squeeze = _as_batch(x)
        if xb.shape[1] != self.dim:
            raise ShapeMismatchError(f"state dim {xb.shape[1]} != net dim {self.dim}")
        sigma = float(self.schedule.sigma(t))
        if sigma == 0.0:
            raise DomainError("score net undefined at sigma(t) = 0 (t = 0)")
        u, _ = self._forward(xb, t)
        s = u / sigma
        return s[0] if squeeze else s

    # -- backward --------------------------------------------------------

    def _backward(self, acts, du):
        """Gradients of the loss wrt every weight/bias given dL/du."""
        grads_w = [None] * len(self.weights)
        grads_b = [None] * len(self.biases)
        delta = du
        for layer in range(len(self.weights) - 1, -1, -1):
            grads_w[layer] = acts[layer].T @ delta
            grads_b[layer] = delta.sum(axis=0)
            if layer > 0:
                delta = (delta @ self.weights[layer].T) * (1.0 - acts[layer] ** 2)
        return grads_w, grads_b

    # -- parameter plumbing ----------------------------------------------

    def copy(self) -> "MlpScoreNet":
        clone = MlpScoreNet(self.dim, self.schedule, self.hidden, self.n_freqs, self.seed)
        clone.weights = [W.copy() for W in self.weights]
        clone.biases = [b.copy() for b in self.biases]
        return clone

    def parameters(self):
        return self.weights + self.biases


@dataclass
class DsmBatchLoss:
    """Monte-Carlo DSM loss with (optionally) its weight gradients."""

    value: float
    grads_w: list | None = None
    grads_b: list | None = None


def dsm_loss(model, schedule, batch: np.ndarray, t: float,
             rng: np.random.Generator) -> DsmBatchLoss:
    """One-draw-per-element denoising-score-matching loss at time t.

    For an ``MlpScoreNet`` the weight gradients come along via backprop; any
    other ScoreModel yields the loss value only.
    """
    batch = np.atleast_2d(np.asarray(batch, dtype=np.float64))
    if batch.shape[0] == 0:
        raise DomainError("batch must be nonempty")
    sigma = float(schedule.sigma(t))
    if sigma == 0.0:
        raise DomainError("DSM loss degenerate at sigma(t) = 0 (t = 0)")
    a = float(schedule.alpha(t))
    z = rng.standard_normal(batch.shape)
    x_t = a * batch + sigma * z
    if isinstance(model, MlpScoreNet):
        u, acts = model._forward(x_t, t)
        # sigma * s + z with s = u / sigma; the exact perturbed score is the
        # unique minimizer (sigma * grad log p_t(x_t) = -E[z | x_t])
        resid = u + z
        value = float(np.mean(np.sum(resid**2, axis=1)))
        du = 2.0 * resid / batch.shape[0]
        gw, gb = model._backward(acts, du)
        return DsmBatchLoss(value, gw, gb)
    s = model(x_t, t)
    resid = sigma * s + z
    return DsmBatchLoss(float(np.mean(np.sum(resid**2, axis=1))))


def _batch_source(data):
    if isinstance(data, GmmSpec):
        return lambda n, rng: data.sample(n, rng)
    if callable(data):
        return data
    arr = np.atleast_2d(np.asarray(data, dtype=np.float64))
    return lambda n, rng: arr[rng.integers(0, arr.shape[0], size=n)]

def train_score(net: MlpScoreNet, data, schedule, steps: int, lr: float = 1e-2,
                batch_size: int = 128, momentum: float = 0.9, seed: int = 0,
                t_min: float = 1e-3, lr_decay: str = "cosine") -> list[float]:
    """SGD on the DSM objective; mutates ``net`` in place, returns the loss history.

    ``data`` may be a GmmSpec, an (N, d) array sampled with replacement, or a
    callable (n, rng) -> (n, d). The step size follows a cosine decay from
    ``lr`` to 0 by default (``lr_decay="constant"`` disables it); constant-rate
    SGD leaves the weights jittering at the gradient-noise floor. Fixed seed
    gives bit-identical final weights. Raises TrainingError with the step
    index if the loss stops being finite.
    """
    if steps < 0:
        raise DomainError("steps must be >= 0")
    if lr_decay not in ("cosine", "constant"):
        raise DomainError(f"lr_decay must be 'cosine' or 'constant', got {lr_decay!r}")
    rng = np.random.default_rng(seed)
    draw = _batch_source(data)
    vel_w = [np.zeros_like(W) for W in net.weights]
    vel_b = [np.zeros_like(b) for b in net.biases]
    history: list[float] = []
    for step in range(steps):
        rate = lr
        if lr_decay == "cosine":
            rate = lr * 0.5 * (1.0 + np.cos(np.pi * step / steps))
        t = rng.uniform(t_min, 1.0)
        batch = draw(batch_size, rng)
        loss = dsm_loss(net, schedule, batch, t, rng)
        if not np.isfinite(loss.value):
            raise TrainingError(f"loss became non-finite at step {step}", step=step)
        for i in range(len(net.weights)):
            vel_w[i] = momentum * vel_w[i] - rate * loss.grads_w[i]
            vel_b[i] = momentum * vel_b[i] - rate * loss.grads_b[i]
            net.weights[i] += vel_w[i]
            net.biases[i] += vel_b[i]
        history.append(loss.value)
    return history


# -- serialization: versioned text header + raw float64 ------------------


def _schedule_header(schedule) -> str:
    for name, preset in SCHEDULE_PRESETS.items():
        if preset == schedule:
            return f"schedule preset {name}"
    cfg = schedule_to_config(schedule)
    if cfg["variant"] == "ve":
        return f"schedule inline ve {cfg['sigma_min']!r} {cfg['sigma_max']!r}"
    return f"schedule inline vp {cfg['beta_min']!r} {cfg['beta_max']!r}"


def save_weights(net: MlpScoreNet, path) -> None:
    """Write the net to a flat binary container with a versioned text header."""
    header = "\n".join([
        MAGIC,
        f"dim {net.dim}",
        "hidden " + " ".join(str(h) for h in net.hidden),
        f"freqs {net.n_freqs}",
        _schedule_header(net.schedule),
        f"seed {net.seed}",
        "---",
        "",
    ])
    with open(path, "wb") as fh:
        fh.write(header.encode("utf-8"))
        for W, b in zip(net.weights, net.biases):
            fh.write(np.ascontiguousarray(W, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(b, dtype="<f8").tobytes())


def load_weights(path) -> MlpScoreNet:
    """Read a net written by ``save_weights``."""
    with open(path, "rb") as fh:
        raw = fh.read()
    end = raw.index(b"---\n")
    lines = raw[:end].decode("utf-8").strip().splitlines()
    if lines[0] != MAGIC:
        raise ValueError(f"bad header magic {lines[0]!r}")
    fields = dict((ln.split(" ", 1) + [""])[:2] for ln in lines[1:])
    dim = int(fields["dim"])
    hidden = tuple(int(h) for h in fields["hidden"].split()) if fields["hidden"] else ()
    n_freqs = int(fields["freqs"])
    seed = int(fields["seed"])
    sched_parts = fields["schedule"].split()
    if sched_parts[0] == "preset":
        schedule = SCHEDULE_PRESETS[sched_parts[1]]
    else:
        variant = sched_parts[1]
        lo, hi = float(sched_parts[2]), float(sched_parts[3])
        key = ("sigma_min", "sigma_max") if variant == "ve" else ("beta_min", "beta_max")
        schedule = schedule_from_config({"variant": variant, key[0]: lo, key[1]: hi})
    net = MlpScoreNet(dim, schedule, hidden, n_freqs, seed)
    body = raw[end + 4:]
    offset = 0
    for i, (W, b) in enumerate(zip(net.weights, net.biases)):
        nw, nb = W.size, b.size
        net.weights[i] = np.frombuffer(
            body, dtype="<f8", count=nw, offset=offset).reshape(W.shape).copy()
        offset += nw * 8
        net.biases[i] = np.frombuffer(body, dtype="<f8", count=nb, offset=offset).copy()
        offset += nb * 8
    if offset != len(body):
        raise ValueError(f"trailing bytes in weight container: {len(body) - offset}")
    return net
