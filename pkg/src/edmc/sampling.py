"""Index-set generation and observation models.

Observed data is a subset of the strictly upper-triangular squared
distances, indexed by pairs ``(i, j)`` with ``i < j`` (0-based in memory,
1-based in serialized files).  Sampling is Bernoulli(p) over all
``L = n(n-1)/2`` pairs, reproducible from a single integer seed.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np


def rng_from_seed(seed):
    """Seeded PCG64 generator; SeedSequence makes per-stream spawning cheap."""
    return np.random.default_rng(np.random.SeedSequence(seed))


def pair_count(n):
    return n * (n - 1) // 2


@dataclass(frozen=True)
class PairSet:
    """Strictly upper-triangular index pairs, sorted lexicographically."""

    n: int
    ii: np.ndarray
    jj: np.ndarray

    def __post_init__(self):
        ii = np.asarray(self.ii, dtype=np.int64)
        jj = np.asarray(self.jj, dtype=np.int64)
        object.__setattr__(self, "ii", ii)
        object.__setattr__(self, "jj", jj)
        if ii.shape != jj.shape or ii.ndim != 1:
            raise ValueError("ii and jj must be equal-length 1-d arrays")
        if ii.size:
            if ii.min() < 0 or jj.max() >= self.n:
                raise ValueError("pair indices out of range")
            if np.any(ii >= jj):
                raise ValueError("pairs must satisfy i < j")
            code = ii * self.n + jj
            if np.any(np.diff(code) <= 0):
                raise ValueError("pairs must be sorted and unique")

    def __len__(self):
        return int(self.ii.size)

    @property
    def m(self):
        return len(self)

    def __iter__(self):
        return zip(self.ii.tolist(), self.jj.tolist())

    @classmethod
    def full(cls, n):
        ii, jj = np.triu_indices(n, k=1)
        return cls(n, ii, jj)

    @classmethod
    def from_pairs(cls, n, pairs):
        pairs = sorted({(min(i, j), max(i, j)) for i, j in pairs})
        ii = np.array([p[0] for p in pairs], dtype=np.int64)
        jj = np.array([p[1] for p in pairs], dtype=np.int64)
        return cls(n, ii, jj)


def bernoulli_sample(n, p, seed):
    """Include each of the L upper-triangle pairs independently with prob p."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"sampling probability {p} outside [0, 1]")
    ii, jj = np.triu_indices(n, k=1)
    mask = rng_from_seed(seed).random(ii.size) < p
    return PairSet(n, ii[mask], jj[mask])


@dataclass(frozen=True)
class SampledDistances:
    """Observed squared distances ``d[k] = D[ii[k], jj[k]]`` on a pair set.

    ``p`` records the Bernoulli parameter when known; otherwise the
    empirical fill ``m / L`` stands in.
    """

    pairs: PairSet
    values: np.ndarray
    p: float | None = None
    seed: int | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        if values.shape != self.pairs.ii.shape:
            raise ValueError("one value per pair required")
        if values.size and values.min() < -1e-12:
            raise ValueError("squared distances must be nonnegative")

    @property
    def n(self):
        return self.pairs.n

    @property
    def m(self):
        return len(self.pairs)

    def fill_probability(self):
        if self.p is not None:
            return float(self.p)
        return self.m / pair_count(self.n)

    def save(self, path):
        """Write (i, j, d) CSV (1-based indices) plus a JSON sidecar."""
        path = Path(path)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["i", "j", "d"])
            for i, j, d in zip(self.pairs.ii, self.pairs.jj, self.values):
                writer.writerow([int(i) + 1, int(j) + 1, repr(float(d))])
        sidecar = {"n": int(self.n), "p": self.p, "seed": self.seed}
        path.with_suffix(".json").write_text(json.dumps(sidecar, sort_keys=True))

    @classmethod
    def load(cls, path):
        path = Path(path)
        sidecar = json.loads(path.with_suffix(".json").read_text())
        ii, jj, vals = [], [], []
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            for row in reader:
                if not row or row[0].lstrip().startswith("#") or row[0] == "i":
                    continue
                ii.append(int(row[0]) - 1)
                jj.append(int(row[1]) - 1)
                vals.append(float(row[2]))
        pairs = PairSet(int(sidecar["n"]), np.asarray(ii), np.asarray(jj))
        return cls(pairs, np.asarray(vals), p=sidecar.get("p"), seed=sidecar.get("seed"))


def observe(x_true, pairs: PairSet, p=None, seed=None):
    """Extract ``<X, w_(i,j)> = X_ii + X_jj - 2 X_ij`` on the sampled pairs."""
    x = np.asarray(x_true, dtype=float)
    if x.shape[0] != pairs.n:
        raise ValueError("gram matrix size does not match pair set")
    ii, jj = pairs.ii, pairs.jj
    values = x[ii, ii] + x[jj, jj] - 2.0 * x[ii, jj]
    return SampledDistances(pairs, values, p=p, seed=seed)


@dataclass(frozen=True)
class NoiseSpec:
    """Bounded centered noise: i.i.d. entries uniform on [-bound, bound]."""

    bound: float
    seed: int = 0

    def __post_init__(self):
        if self.bound < 0:
            raise ValueError("noise bound must be nonnegative")


def perturb_points(points, spec: NoiseSpec):
    """Return ``P + N`` with ``||N||_inf <= bound`` by construction."""
    points = np.asarray(points, dtype=float)
    if spec.bound == 0.0:
        return points.copy()
    noise = rng_from_seed(spec.seed).uniform(-spec.bound, spec.bound, size=points.shape)
    return points + noise


def degrees_of_freedom(n, r):
    return n * r - r * (r - 1) // 2


def oversampling_ratio(n, r, p):
    """Samples per degree of freedom: ``p L / (n r - r(r-1)/2)``."""
    dof = degrees_of_freedom(n, r)
    if dof <= 0:
        raise ValueError(f"degenerate degree-of-freedom count {dof}")
    return p * pair_count(n) / dof


def probability_for_ratio(n, r, rho):
    """Bernoulli parameter giving oversampling ratio rho (capped at 1)."""
    dof = degrees_of_freedom(n, r)
    if dof <= 0:
        raise ValueError(f"degenerate degree-of-freedom count {dof}")
    return min(1.0, rho * dof / pair_count(n))
