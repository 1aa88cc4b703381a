"""Model presets: a named bundle of shape, schedule, and score model.

Built-in presets cover desk-scale analytic mixtures (flat 2-D and small
grayscale/RGB blob images whose pixel-space mixture components are synthetic
patterns). Extra presets load from JSON files in a directory, either inline
mixtures or trained score-net weight files.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .schedules import SCHEDULE_PRESETS, schedule_from_config, schedule_to_config
from .scores import AnalyticGmmScore, GmmSpec, ScoreModel, ZeroScore

__all__ = ["ModelPreset", "builtin_presets", "load_preset_dir", "resolve_presets",
           "PRESET_DIR_ENV"]

PRESET_DIR_ENV = "SDEDIT_PRESET_DIR"


@dataclass
class ModelPreset:
    name: str
    shape: tuple
    schedule: object
    kind: str  # "analytic-gmm" | "mlp" | "zero"
    gmm: GmmSpec | None = None
    weights_path: str | None = None
    description: str = ""
    _score: ScoreModel | None = field(default=None, repr=False)

    @property
    def dim(self) -> int:
        return int(np.prod(self.shape))

    def score(self) -> ScoreModel:
        """The preset's score model (lazily constructed and cached)."""
        if self._score is None:
            if self.kind == "analytic-gmm":
                self._score = AnalyticGmmScore(self.gmm, self.schedule)
            elif self.kind == "zero":
                self._score = ZeroScore()
            elif self.kind == "mlp":
                from .scorenet import load_weights

                self._score = load_weights(self.weights_path)
            else:
                raise ValueError(f"unknown preset kind {self.kind!r}")
        return self._score

    def info(self) -> dict:
        return {
            "name": self.name,
            "shape": list(self.shape),
            "kind": self.kind,
            "schedule": schedule_to_config(self.schedule),
            "description": self.description,
        }


def _disk(h: int, w: int, cy: float, cx: float, r: float) -> np.ndarray:
    yy, xx = np.mgrid[0:h, 0:w]
    return (((yy - cy) ** 2 + (xx - cx) ** 2) <= r * r).astype(np.float64)


def _blob_means_gray(size: int) -> np.ndarray:
    h = w = size
    disk = 0.15 + 0.7 * _disk(h, w, h / 2, w / 2, size * 0.28)
    hbar = np.full((h, w), 0.2)
    hbar[int(h * 0.4): int(h * 0.65), :] = 0.85
    grad = np.tile(np.linspace(0.1, 0.9, w), (h, 1))
    return np.stack([disk.ravel(), hbar.ravel(), grad.ravel()])


def _blob_means_rgb(size: int) -> np.ndarray:
    h = w = size
    means = []
    sky = np.zeros((h, w, 3))
    sky[:, :] = (0.35, 0.55, 0.85)
    sky[int(h * 0.6):, :] = (0.25, 0.6, 0.25)
    means.append(sky)
    sun = np.zeros((h, w, 3))
    sun[:, :] = (0.15, 0.2, 0.45)
    d = _disk(h, w, h * 0.35, w * 0.6, size * 0.2)
    for c, v in enumerate((0.95, 0.8, 0.2)):
        sun[:, :, c] = np.where(d > 0, v, sun[:, :, c])
    means.append(sun)
    stripes = np.zeros((h, w, 3))
    stripes[:, :] = (0.8, 0.3, 0.3)
    stripes[:, int(w * 0.45):] = (0.9, 0.85, 0.75)
    means.append(stripes)
    return np.stack([m.ravel() for m in means])


def builtin_presets() -> dict[str, ModelPreset]:
    toy = SCHEDULE_PRESETS["ve-toy"]
    gmm2d = GmmSpec(
        weights=[0.5, 0.3, 0.2],
        means=[[0.0, 2.0], [-2.0, -1.0], [2.0, -1.0]],
        stds=[0.30, 0.25, 0.35],
    )
    gray = _blob_means_gray(16)
    rgb = _blob_means_rgb(32)
    presets = [
        ModelPreset(
            "gmm-2d", (2,), toy, "analytic-gmm", gmm=gmm2d,
            description="3-component 2-D mixture with an exact analytic score",
        ),
        ModelPreset(
            "blobs-16", (16, 16), toy, "analytic-gmm",
            gmm=GmmSpec(np.full(3, 1 / 3), gray, np.full(3, 0.06)),
            description="16x16 grayscale mixture of synthetic patterns",
        ),
        ModelPreset(
            "blobs-32-rgb", (32, 32, 3), toy, "analytic-gmm",
            gmm=GmmSpec(np.full(3, 1 / 3), rgb, np.full(3, 0.08)),
            description="32x32 RGB mixture of synthetic scenes (paint on this one)",
        ),
    ]
    return {p.name: p for p in presets}


def load_preset_dir(path) -> dict[str, ModelPreset]:
    """Load *.json preset files: {name, shape, schedule, kind, gmm|weights}."""
    out: dict[str, ModelPreset] = {}
    root = Path(path)
    for file in sorted(root.glob("*.json")):
        with open(file, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
        schedule = schedule_from_config(cfg["schedule"])
        kind = cfg.get("kind", "analytic-gmm")
        gmm = None
        weights = None
        if kind == "analytic-gmm":
            g = cfg["gmm"]
            gmm = GmmSpec(g["weights"], g["means"], g["stds"])
        elif kind == "mlp":
            weights = str(root / cfg["weights"])
        preset = ModelPreset(cfg["name"], tuple(cfg["shape"]), schedule, kind,
                             gmm=gmm, weights_path=weights,
                             description=cfg.get("description", ""))
        out[preset.name] = preset
    return out


def resolve_presets(preset_dir=None) -> dict[str, ModelPreset]:
    """Built-ins plus any directory presets (explicit arg, else $SDEDIT_PRESET_DIR)."""
    presets = builtin_presets()
    directory = preset_dir or os.environ.get(PRESET_DIR_ENV)
    if directory:
        presets.update(load_preset_dir(directory))
    return presets
