"""Seeded experiment grids: recovery tables, oversampling-transition grids,
and noise sweeps, with embarrassingly parallel cells.

Every trial owns its RNG (base seed + trial index) and every cell is
independent, so results are bitwise reproducible regardless of worker
count; cells are merged in deterministic order.
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .geometry import gram_from_points
from .sampling import (NoiseSpec, bernoulli_sample, observe, oversampling_ratio,
                       perturb_points, probability_for_ratio)
from .solver import Problem, SolveResult, SolverConfig, solve
from .synthdata import DatasetSpec, generate

DEFAULT_NOISELESS_THRESHOLD = 1e-3
DEFAULT_NOISE_THRESHOLD = 1e-2


@dataclass(frozen=True)
class GridCell:
    r: int
    p: float
    rho: float
    gamma: float | None = None   # noise exponent; bound = 10**gamma


@dataclass(frozen=True)
class ExperimentConfig:
    """A full grid: dataset x rank grid x sampling grid x noise grid."""

    dataset: DatasetSpec
    r_grid: tuple
    rho_grid: tuple = ()
    p_grid: tuple = ()
    gamma_grid: tuple = (None,)
    trials: int = 20
    seed: int = 0
    success_threshold: float | None = None
    solver: SolverConfig = field(default_factory=SolverConfig)
    workers: int = 1

    def __post_init__(self):
        if not self.r_grid:
            raise ValueError("empty rank grid")
        if bool(self.rho_grid) == bool(self.p_grid):
            raise ValueError("specify exactly one of rho_grid and p_grid")
        if self.trials < 1:
            raise ValueError("trials must be positive")
        thr = self.success_threshold
        if thr is not None and thr <= 0:
            raise ValueError("success threshold must be positive")

    def threshold(self):
        if self.success_threshold is not None:
            return self.success_threshold
        noisy = any(g is not None for g in self.gamma_grid)
        return DEFAULT_NOISE_THRESHOLD if noisy else DEFAULT_NOISELESS_THRESHOLD

    def cells(self):
        out = []
        for r in self.r_grid:
            if self.rho_grid:
                sampling = [(probability_for_ratio(self.dataset.n, r, rho), rho)
                            for rho in self.rho_grid]
            else:
                sampling = [(p, oversampling_ratio(self.dataset.n, r, p))
                            for p in self.p_grid]
            for p, rho in sampling:
                for gamma in self.gamma_grid:
                    out.append(GridCell(r=r, p=p, rho=rho, gamma=gamma))
        return out


@dataclass
class TrialResult:
    rel_error: float
    iterations: int
    status: str
    seed: int


@dataclass
class CellResult:
    cell: GridCell
    trials: list
    wall_time_s: float

    def success_fraction(self, threshold):
        ok = sum(1 for t in self.trials if t.rel_error <= threshold)
        return ok / len(self.trials)

    def median_rel_error(self):
        return float(np.median([t.rel_error for t in self.trials]))

    def median_iterations(self):
        return float(np.median([t.iterations for t in self.trials]))


def run_trial(dataset: DatasetSpec, cell: GridCell, seed: int,
              solver_config: SolverConfig) -> TrialResult:
    """One seeded instance: generate, (perturb,) sample, solve, score.

    Generator datasets are drawn in the cell's rank (points on the sphere
    in r dimensions when sweeping r); file datasets are fixed.  The
    reported error is always measured against the clean ground truth, so
    under point noise it is floored by the truth perturbation itself.
    """
    if dataset.kind == "file":
        points = generate(dataset)
    else:
        points = generate(replace(dataset, seed=seed, r=cell.r))
    truth = gram_from_points(points)
    observed_points = points
    if cell.gamma is not None:
        observed_points = perturb_points(
            points, NoiseSpec(bound=10.0 ** cell.gamma, seed=seed + 1)
        )
        observed_points = observed_points - observed_points.mean(axis=0)
    observed = gram_from_points(observed_points)
    pairs = bernoulli_sample(dataset.n, cell.p, seed)
    data = observe(observed, pairs, p=cell.p, seed=seed)
    problem = Problem(data, rank=cell.r)
    config = replace(solver_config, truth=truth)
    try:
        result: SolveResult = solve(problem, config=config)
        rec = result.trace.records[-1]
        rel = rec.rel_truth_error
        return TrialResult(float(rel), len(result.trace.records),
                           result.trace.status, seed)
    except RuntimeError:
        return TrialResult(float("inf"), 0, "degenerate", seed)


def run_cell(dataset: DatasetSpec, cell: GridCell, base_seed: int, trials: int,
             solver_config: SolverConfig) -> CellResult:
    t0 = time.perf_counter()
    results = [run_trial(dataset, cell, base_seed + t, solver_config)
               for t in range(trials)]
    return CellResult(cell, results, time.perf_counter() - t0)


def run_grid(config: ExperimentConfig):
    """All cells, optionally in a process pool; deterministic cell order."""
    cells = config.cells()
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            futures = [
                pool.submit(run_cell, config.dataset, cell, config.seed,
                            config.trials, config.solver)
                for cell in cells
            ]
            return [f.result() for f in futures]
    return [run_cell(config.dataset, cell, config.seed, config.trials, config.solver)
            for cell in cells]


GRID_CSV_COLUMNS = ("r", "rho", "p", "gamma", "trials", "successes",
                    "success_fraction", "median_rel_error", "median_iterations",
                    "wall_time_s")


def grid_rows(results, threshold):
    """Plot-ready rows, one per cell, in the configured cell order."""
    rows = []
    for res in results:
        cell = res.cell
        successes = sum(1 for t in res.trials if t.rel_error <= threshold)
        rows.append({
            "r": cell.r,
            "rho": cell.rho,
            "p": cell.p,
            "gamma": "" if cell.gamma is None else cell.gamma,
            "trials": len(res.trials),
            "successes": successes,
            "success_fraction": successes / len(res.trials),
            "median_rel_error": res.median_rel_error(),
            "median_iterations": res.median_iterations(),
            "wall_time_s": res.wall_time_s,
        })
    return rows
