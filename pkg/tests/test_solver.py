import json

import numpy as np
import pytest

from edmc.geometry import FactoredGram, gram_from_points, truncated_gram
from edmc.manifold import project_tangent
from edmc.sampling import PairSet, bernoulli_sample, observe
from edmc.solver import (DegenerateInitError, DegenerateStepError, Problem,
                         SolverConfig, init_one_step, recover_points, solve,
                         step_size)
from edmc.synthdata import DatasetSpec, generate

from conftest import random_centered_symmetric, random_factored_gram


def make_problem(n, r, p, seed, p_known=True):
    points = generate(DatasetSpec("sphere_surface", n=n, r=r, seed=seed))
    truth = gram_from_points(points)
    pairs = bernoulli_sample(n, p, seed=seed + 1)
    data = observe(truth, pairs, p=p if p_known else None, seed=seed + 1)
    return Problem(data, rank=r), truth, points


class TestProblem:
    def test_p_defaults_to_empirical_fill(self):
        prob, _, _ = make_problem(30, 2, 0.5, seed=0, p_known=False)
        m = prob.data.m
        assert prob.p == pytest.approx(m / (30 * 29 / 2))

    def test_validation(self):
        prob, _, _ = make_problem(10, 2, 1.0, seed=0)
        with pytest.raises(ValueError):
            Problem(prob.data, rank=0)


class TestInitOneStep:
    def test_exact_at_full_sampling(self):
        prob, truth, _ = make_problem(40, 3, 1.0, seed=1)
        x0 = init_one_step(prob)
        rel = np.linalg.norm(x0.matrix() - truth) / np.linalg.norm(truth)
        assert rel <= 1e-12

    def test_empty_observation_degenerate(self):
        prob, _, _ = make_problem(20, 2, 1.0, seed=2)
        empty = observe(np.zeros((20, 20)), PairSet(20, np.array([], int), np.array([], int)), p=0.5)
        with pytest.raises(DegenerateInitError):
            init_one_step(Problem(empty, rank=2))

    def test_dense_and_lanczos_paths_agree(self):
        prob, truth, _ = make_problem(80, 3, 0.4, seed=3)
        dense = init_one_step(prob, dense_cutoff=100)
        lanczos = init_one_step(prob, dense_cutoff=10)
        assert np.abs(dense.matrix() - lanczos.matrix()).max() <= 1e-7 * np.abs(truth).max()

    def test_scales_by_inverse_probability(self):
        prob, truth, _ = make_problem(60, 3, 0.5, seed=4)
        x0 = init_one_step(prob)
        # eigenvalue scale should land near the truth's, not p times it
        assert x0.eigs[0] == pytest.approx(np.linalg.eigvalsh(truth)[-1], rel=0.5)


class TestSolve:
    def test_fixed_point_at_truth(self):
        # iterate matching the observed coefficients exactly: zero gradient,
        # immediate convergence
        prob, truth, _ = make_problem(25, 2, 1.0, seed=5)
        x0 = truncated_gram(truth, 2)
        from edmc.dualbasis import w_coeffs_factored
        from edmc.sampling import SampledDistances

        exact = SampledDistances(
            prob.data.pairs,
            w_coeffs_factored(x0.U, x0.eigs, prob.data.pairs),
            p=1.0,
        )
        result = solve(Problem(exact, rank=2), x0=x0,
                       config=SolverConfig(truth=x0.matrix()))
        assert result.trace.status == "converged"
        assert len(result.trace.records) == 1
        rec = result.trace.records[0]
        assert rec.rel_change == 0.0
        assert rec.step_size == 0.0
        assert rec.rel_truth_error <= 1e-12
        assert rec.residual_norm == 0.0

    def test_recovers_midscale_instance(self):
        prob, truth, points = make_problem(120, 2, 0.4, seed=6)
        config = SolverConfig(truth=truth, change_tol_mode="absolute")
        result = solve(prob, config=config)
        assert result.trace.status == "converged"
        assert result.trace.records[-1].rel_truth_error <= 1e-6
        rec_points = recover_points(result.gram)
        from edmc.geometry import procrustes_error

        assert procrustes_error(points, rec_points) <= 1e-5 * np.linalg.norm(points)

    def test_stopping_mode_controls_final_accuracy(self):
        prob, truth, _ = make_problem(120, 2, 0.4, seed=6)
        rel = solve(prob, config=SolverConfig(truth=truth))
        absolute = solve(prob, config=SolverConfig(truth=truth,
                                                   change_tol_mode="absolute"))
        assert rel.trace.records[-1].rel_truth_error <= 1e-4
        assert (absolute.trace.records[-1].rel_truth_error
                < rel.trace.records[-1].rel_truth_error)

    def test_deterministic_trace(self):
        prob, truth, _ = make_problem(50, 3, 0.6, seed=7)
        a = solve(prob, config=SolverConfig(truth=truth))
        b = solve(prob, config=SolverConfig(truth=truth))
        assert len(a.trace.records) == len(b.trace.records)
        for ra, rb in zip(a.trace.records, b.trace.records):
            assert ra == rb
        assert np.array_equal(a.gram.U, b.gram.U)
        assert np.array_equal(a.gram.eigs, b.gram.eigs)

    def test_rank_mismatch_rejected(self):
        prob, truth, _ = make_problem(20, 2, 0.8, seed=8)
        with pytest.raises(ValueError):
            solve(prob, x0=truncated_gram(truth, 3))

    def test_iterates_stay_centered(self):
        prob, truth, _ = make_problem(60, 3, 0.5, seed=9)
        result = solve(prob, config=SolverConfig(truth=truth))
        assert np.abs(result.gram.U.sum(axis=0)).max() <= 1e-6

    def test_debiased_mode_runs_when_well_sampled(self):
        prob, truth, _ = make_problem(40, 2, 0.9, seed=10)
        result = solve(prob, config=SolverConfig(truth=truth, gradient_op="debiased",
                                                 max_iters=200))
        assert result.trace.status in ("converged", "max_iters")

    def test_max_iters_status(self):
        prob, truth, _ = make_problem(60, 3, 0.35, seed=11)
        result = solve(prob, config=SolverConfig(truth=truth, max_iters=2))
        assert result.trace.status == "max_iters"
        assert len(result.trace.records) == 2

    def test_trace_jsonl_round_trip(self, tmp_path):
        prob, truth, _ = make_problem(30, 2, 0.7, seed=12)
        result = solve(prob, config=SolverConfig(truth=truth))
        path = tmp_path / "trace.jsonl"
        result.trace.save_jsonl(path)
        lines = [json.loads(line) for line in path.read_text().splitlines()]
        assert len(lines) == len(result.trace.records) + 1
        assert lines[-1]["status"] == "converged"
        assert lines[0]["iteration"] == 0


class TestStepSize:
    def _tangent_instance(self, n, r, p, seed):
        prob, truth, _ = make_problem(n, r, p, seed=seed)
        x0 = init_one_step(prob)
        y = random_centered_symmetric(n, seed=seed + 2)
        return project_tangent(x0, y), prob

    def test_alpha_one_at_full_sampling(self):
        t, prob = self._tangent_instance(20, 2, 1.0, seed=13)
        alpha, flagged = step_size(t, prob.data.pairs, 1.0)
        assert alpha == pytest.approx(1.0, abs=1e-12)
        alpha_d, _ = step_size(t, prob.data.pairs, 1.0, gradient_op="debiased")
        assert alpha_d == pytest.approx(1.0, abs=1e-12)

    def test_scale_invariance(self):
        t, prob = self._tangent_instance(25, 2, 0.6, seed=14)
        a1, _ = step_size(t, prob.data.pairs, prob.p)
        a2, _ = step_size(t.scale(-3.7), prob.data.pairs, prob.p)
        assert a2 == pytest.approx(a1, rel=1e-12)

    def test_debiased_quotient_concentrates(self):
        # well-sampled regime: the quotient stays in [p^-2/2, 2 p^-2]
        for seed in range(50):
            t, prob = self._tangent_instance(100, 2, 0.5, seed=100 + seed)
            alpha, flagged = step_size(t, prob.data.pairs, 0.5, gradient_op="debiased",
                                       flag_eps=1.0 / 8.0)
            assert 0.5 * 0.5**-2 <= alpha <= 2.0 * 0.5**-2
            assert not flagged

    def test_zero_tangent_rejected(self):
        prob, truth, _ = make_problem(15, 2, 0.9, seed=15)
        x0 = init_one_step(prob)
        from edmc.manifold import TangentVector

        zero = TangentVector(x0, np.zeros((2, 2)), np.zeros((15, 2)))
        with pytest.raises(DegenerateStepError):
            step_size(zero, prob.data.pairs, prob.p)


class TestRecoverPoints:
    def test_two_point_gram(self):
        fg = truncated_gram(np.array([[1.0, -1.0], [-1.0, 1.0]]), 1)
        pts = recover_points(fg).ravel()
        assert np.allclose(np.sort(pts), [-1.0, 1.0], atol=1e-12)

    def test_tiny_negative_clamped_quietly(self):
        u = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, -1.0]]) / np.sqrt([2.0, 2.0])
        u, _ = np.linalg.qr(u - u.mean(axis=0))
        fg = FactoredGram(u[:, :2], np.array([1.0, -1e-12]))
        import warnings

        with warnings.catch_warnings():
            warnings.simplefilter("error")
            pts = recover_points(fg)
        assert pts[:, 1].max() == 0.0

    def test_strong_negative_warns(self):
        fg = random_factored_gram(6, 2, seed=16)
        bad = FactoredGram(fg.U, np.array([1.0, -0.5]))
        with pytest.warns(RuntimeWarning):
            pts = recover_points(bad)
        assert np.all(pts[:, 1] == 0.0)


@pytest.mark.slow
class TestPaperScaleExamples:
    def test_swiss_roll_low_sampling(self):
        points = generate(DatasetSpec("swiss_roll", n=2048, r=3, seed=0))
        truth = gram_from_points(points)
        pairs = bernoulli_sample(2048, 0.02, seed=1)
        data = observe(truth, pairs, p=0.02, seed=1)
        result = solve(Problem(data, rank=3),
                       config=SolverConfig(truth=truth, change_tol=1e-7))
        assert result.trace.records[-1].rel_truth_error <= 1e-4
