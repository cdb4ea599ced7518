import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from edmc.diagnostics import (ANALYSIS_NU_SCALE, coherence_gram_lambda_max,
                              cross_coherence, cross_term_max, incoherence,
                              rip_estimate, sum_pairwise_row_distances)
from edmc.geometry import FactoredGram
from edmc.sampling import PairSet, bernoulli_sample

from conftest import random_factored_gram

TRIANGLE_U = np.sqrt(2.0 / 3.0) * np.array(
    [[1.0, 0.0], [-0.5, np.sqrt(3) / 2], [-0.5, -np.sqrt(3) / 2]]
)
TRIANGLE = FactoredGram(TRIANGLE_U, np.array([1.0, 1.0]))


def dense_projected_inner(u, alpha, beta):
    """Oracle: <P_U w_a, P_U w_b> with explicit projector and basis matrices."""
    from edmc.dualbasis import w_alpha_dense

    n = u.shape[0]
    pu = u @ u.T
    wa = pu @ w_alpha_dense(n, *alpha)
    wb = pu @ w_alpha_dense(n, *beta)
    return float(np.sum(wa * wb))


class TestIncoherence:
    def test_triangle_example(self):
        rep = incoherence(TRIANGLE)
        assert rep.nu == pytest.approx(1.5, abs=1e-12)
        assert rep.whitened_nu == pytest.approx(rep.nu, abs=1e-10)
        # each of the three pairs attains the max
        du = TRIANGLE_U[rep.argmax_pair[0]] - TRIANGLE_U[rep.argmax_pair[1]]
        assert du @ du == pytest.approx(2.0, abs=1e-12)
        assert rep.lower_bound_stated == pytest.approx(2.0)
        assert rep.lower_bound_derived == pytest.approx(1.5)
        assert rep.upper_bound == pytest.approx(3.0)

    def test_high_coherence_example(self):
        # two isolated axis points plus mass on a third axis: near-maximal nu
        n, r = 10, 3
        u = np.zeros((n, r))
        u[0, 0] = 1.0
        u[1, 1] = 1.0
        u[2:, 2] = 1.0 / np.sqrt(n - 2)
        fg = FactoredGram(u, np.array([3.0, 2.0, 1.0]))
        rep = incoherence(fg)
        max_sq = max(
            np.sum((u[i] - u[j]) ** 2) for i, j in itertools.combinations(range(n), 2)
        )
        assert rep.nu >= 0.9 * (2 * n / r) * (max_sq / 4.0)
        assert rep.nu == pytest.approx((n / (2 * r)) * max_sq, rel=1e-12)

    @given(st.integers(0, 2**31 - 1))
    @settings(max_examples=30, deadline=None)
    def test_upper_bound_always_holds(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(4, 16))
        r = int(rng.integers(1, min(4, n - 1)))
        fg = random_factored_gram(n, r, seed)
        rep = incoherence(fg, cross_terms=False)
        assert rep.nu <= rep.upper_bound + 1e-12

    @given(st.integers(0, 2**31 - 1))
    @settings(max_examples=30, deadline=None)
    def test_whitened_form_agrees(self, seed):
        fg = random_factored_gram(9, 3, seed)
        rep = incoherence(fg, cross_terms=False)
        assert abs(rep.whitened_nu - rep.nu) <= 1e-10 * max(1.0, rep.nu)

    def test_report_serializes(self):
        rep = incoherence(TRIANGLE)
        payload = json.loads(rep.to_json())
        assert payload["n"] == 3
        assert payload["analysis_nu_scale"] == ANALYSIS_NU_SCALE
        assert rep.analysis_nu == pytest.approx(8.0 * rep.nu)

    def test_rank_zero_rejected(self):
        fg = FactoredGram(np.zeros((4, 0)), np.zeros(0))
        with pytest.raises(ValueError):
            incoherence(fg)


class TestCrossCoherence:
    def test_disjoint_pairs_vanish_exhaustively(self):
        for n in (6, 8):
            fg = random_factored_gram(n, 2, seed=n)
            pairs = list(itertools.combinations(range(n), 2))
            for a in pairs:
                for b in pairs:
                    if set(a) & set(b):
                        continue
                    assert cross_coherence(fg, a, b) == 0.0

    def test_equal_pair_is_twice_row_distance(self):
        fg = random_factored_gram(8, 3, seed=3)
        for (i, j) in [(0, 1), (2, 7)]:
            du = fg.U[i] - fg.U[j]
            assert cross_coherence(fg, (i, j), (i, j)) == pytest.approx(
                2.0 * du @ du, rel=1e-12
            )

    def test_matches_dense_projector_oracle(self):
        for fg in (TRIANGLE, random_factored_gram(7, 2, seed=5)):
            n = fg.n
            pairs = list(itertools.combinations(range(n), 2))
            for a in pairs:
                for b in pairs:
                    expect = dense_projected_inner(fg.U, a, b)
                    assert cross_coherence(fg, a, b) == pytest.approx(expect, abs=1e-11)

    def test_index_guard(self):
        with pytest.raises(IndexError):
            cross_coherence(TRIANGLE, (0, 1), (0, 5))

    def test_cross_term_max_matches_bruteforce(self):
        fg = random_factored_gram(8, 2, seed=6)
        pairs = list(itertools.combinations(range(8), 2))
        brute = max(
            abs(dense_projected_inner(fg.U, a, b))
            for a in pairs
            for b in pairs
            if a != b and set(a) & set(b)
        )
        assert cross_term_max(fg) == pytest.approx(brute, rel=1e-10)


class TestCoherenceGram:
    def test_triangle_bounded_by_analysis_nu(self):
        rep = incoherence(TRIANGLE)
        lmax = coherence_gram_lambda_max(TRIANGLE)
        assert lmax <= rep.analysis_nu * TRIANGLE.r + 1e-9

    def test_rank_zero_is_zero(self):
        fg = FactoredGram(np.zeros((5, 0)), np.zeros(0))
        assert coherence_gram_lambda_max(fg) == 0.0

    def test_gershgorin_dominates(self):
        fg = random_factored_gram(20, 3, seed=7)
        n = 20
        ii, jj = np.triu_indices(n, k=1)
        y = fg.U[ii] - fg.U[jj]
        from edmc.diagnostics import _pair_overlap_matrix

        htilde = (y @ y.T) * _pair_overlap_matrix(n, ii, jj)
        lmax = coherence_gram_lambda_max(fg)
        gershgorin = np.abs(htilde).sum(axis=1).max()
        assert lmax <= gershgorin + 1e-9
        assert lmax == pytest.approx(np.linalg.eigvalsh(htilde).max(), rel=1e-9)

    def test_power_iteration_matches_dense(self):
        fg = random_factored_gram(30, 3, seed=8)
        dense = coherence_gram_lambda_max(fg, dense_cutoff=40)
        power = coherence_gram_lambda_max(fg, dense_cutoff=10)
        assert power == pytest.approx(dense, rel=1e-8)


class TestPairwiseRowDistances:
    def test_triangle(self):
        assert sum_pairwise_row_distances(TRIANGLE) == pytest.approx(6.0, abs=1e-12)

    def test_two_points(self):
        u = np.array([[1.0], [-1.0]]) / np.sqrt(2.0)
        fg = FactoredGram(u, np.array([1.0]))
        assert sum_pairwise_row_distances(fg) == pytest.approx(2.0, abs=1e-14)

    def test_equals_n_times_r(self):
        fg = random_factored_gram(12, 3, seed=9)
        assert sum_pairwise_row_distances(fg) == pytest.approx(12 * 3, abs=1e-9)

    def test_bruteforce_oracle(self):
        fg = random_factored_gram(12, 3, seed=10)
        brute = 0.0
        for i in range(12):
            for j in range(i + 1, 12):
                brute += np.sum((fg.U[i] - fg.U[j]) ** 2)
        assert sum_pairwise_row_distances(fg) == pytest.approx(brute, rel=1e-12)


class TestRipEstimate:
    def test_zero_at_full_sampling(self):
        fg = random_factored_gram(8, 2, seed=11)
        est = rip_estimate(fg, PairSet.full(8), p=1.0)
        assert est.epsilon <= 1e-8

    @staticmethod
    def _dense_epsilon(fg, pairs, p):
        import edmc.dualbasis as db

        basis = db.s_basis(fg.n)
        pu = fg.U @ fg.U.T

        def proj_t(y):
            return pu @ y + y @ pu - pu @ y @ pu

        L = len(basis)
        theta = np.zeros((L, L))
        for l in range(L):
            image = proj_t(db.m_omega_dense(proj_t(basis[l]), pairs, p))
            image -= p**2 * proj_t(basis[l])
            theta[:, l] = np.einsum("kij,ij->k", basis, image)
        return np.abs(np.linalg.eigvalsh(theta)).max() / p**2

    def test_matches_dense_materialization(self):
        n, p = 8, 0.7
        fg = random_factored_gram(n, 2, seed=12)
        pairs = bernoulli_sample(n, p, seed=21)
        est = rip_estimate(fg, pairs, p=p, seed=1)
        assert est.converged
        assert est.epsilon == pytest.approx(self._dense_epsilon(fg, pairs, p), abs=1e-6)

    def test_degenerate_spectrum_flagged_approximate(self):
        # two leading magnitudes within 2e-3 of each other: the cap triggers
        # and the estimate comes back flagged but still close
        n, p = 8, 0.6
        fg = random_factored_gram(n, 2, seed=12)
        pairs = bernoulli_sample(n, p, seed=13)
        est = rip_estimate(fg, pairs, p=p, seed=1)
        assert not est.converged
        assert est.iterations == 500
        assert est.epsilon == pytest.approx(self._dense_epsilon(fg, pairs, p), abs=1e-3)

    def test_median_decreases_with_p(self):
        fg = random_factored_gram(8, 2, seed=14)
        medians = []
        for p in (0.2, 0.4, 0.8):
            vals = [
                rip_estimate(fg, bernoulli_sample(8, p, seed=100 + s), p=p).epsilon
                for s in range(30)
            ]
            medians.append(np.median(vals))
        assert medians[0] > medians[1] > medians[2]

    def test_bad_p_rejected(self):
        fg = random_factored_gram(6, 2, seed=15)
        with pytest.raises(ValueError):
            rip_estimate(fg, PairSet.full(6), p=0.0)
