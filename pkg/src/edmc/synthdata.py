"""Reproducible synthetic ground-truth point clouds."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import read_points_csv
from .sampling import rng_from_seed

KINDS = ("sphere_surface", "swiss_roll", "unit_ball_uniform", "file")


@dataclass(frozen=True)
class DatasetSpec:
    """What to generate: kind, size, ambient dimension, seed.

    ``swiss_roll`` ignores ``r`` (it is intrinsically 3-d) and takes the
    number of turns and the slab height as parameters; ``file`` reads a
    point-cloud CSV from ``path``.
    """

    kind: str
    n: int = 0
    r: int = 3
    seed: int = 0
    swiss_turns: float = 1.5
    swiss_height: float = 21.0
    path: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown dataset kind {self.kind!r}; choose from {KINDS}")
        if self.kind != "file":
            if self.n < self.r + 1:
                raise ValueError("need at least r + 1 points")
        elif not self.path:
            raise ValueError("file datasets need a path")


def generate(spec: DatasetSpec):
    """Centered point cloud for a dataset spec; deterministic per seed."""
    if spec.kind == "file":
        points = read_points_csv(spec.path)
        return points - points.mean(axis=0)
    rng = rng_from_seed(spec.seed)
    if spec.kind == "sphere_surface":
        g = rng.standard_normal((spec.n, spec.r))
        points = g / np.linalg.norm(g, axis=1, keepdims=True)
    elif spec.kind == "unit_ball_uniform":
        g = rng.standard_normal((spec.n, spec.r))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        radii = rng.random(spec.n) ** (1.0 / spec.r)
        points = g * radii[:, None]
    elif spec.kind == "swiss_roll":
        if spec.r != 3:
            raise ValueError("swiss_roll is three dimensional; set r=3")
        t = spec.swiss_turns * np.pi * (1.0 + 2.0 * rng.random(spec.n))
        height = spec.swiss_height * rng.random(spec.n)
        points = np.column_stack([t * np.cos(t), height, t * np.sin(t)])
    else:  # pragma: no cover
        raise AssertionError(spec.kind)
    return points - points.mean(axis=0)
