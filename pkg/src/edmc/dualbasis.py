"""The non-orthogonal basis ``{w_a}`` of the zero-row-sum symmetric
matrices, its explicit dual ``{v_a}``, and the sampling operators built
from them.

For a pair ``a = (i, j)`` with ``i < j``:

* ``w_a = e_ii + e_jj - e_ij - e_ji`` so that ``<X, w_a> = D_ij``,
* ``v_a = -1/2 (a b^T + b a^T)`` with ``a = e_i - 1/n``, ``b = e_j - 1/n``,

and ``<v_a, w_b> = delta_ab``.  Every operator here consumes a coefficient
vector ``c[k] = <Y, w_a_k>`` on the sampled pairs, which is the only data
the completion problem exposes, and has an O(m) fast path plus a dense
brute-force twin used as a test oracle.

Operators (Omega the sampled pair set, m = |Omega|):

* ``f_omega``:   restricted frame operator ``sum_a <.,w_a> w_a``
* ``r_omega``:   oblique sampler ``sum_a <.,w_a> v_a = -1/2 J P_O(D) J``
* ``rstar_r``:   normal operator ``sum_{a,b} <.,w_a><v_a,v_b> w_b``
* ``m_omega``:   de-biased variant with the diagonal rescaled by p, so
  that the Bernoulli(p) expectation is ``p^2 I``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_array
from scipy.sparse.linalg import LinearOperator

from .sampling import PairSet, pair_count


@dataclass(frozen=True)
class DualBasisConstants:
    """Closed-form spectral constants of the basis pair at size n."""

    n: int
    v_norm_sq: float      # ||v_a||_F^2, equal for every pair
    h_diag: float         # <v_a, v_a>
    h_adjacent: float     # <v_a, v_b>, pairs sharing one index
    h_disjoint: float     # <v_a, v_b>, disjoint pairs
    h_eig_max: float      # largest eigenvalue of H = [<w_a, w_b>]
    hinv_eig_max: float   # largest eigenvalue of H^{-1}


def v_norm_sq(n):
    return 0.5 * (1.0 - 2.0 / n + 2.0 / n**2)


def constants(n):
    if n < 2:
        raise ValueError("need at least two points")
    d = v_norm_sq(n)
    # lambda_min(H) is 2 only once disjoint pairs exist (n >= 4); the
    # eigenvalue spectrum of H is {2n, n, 2} with the 2-eigenspace of
    # dimension n(n-3)/2
    hinv_max = {2: 0.25, 3: 1.0 / 3.0}.get(n, 0.5)
    return DualBasisConstants(
        n=n,
        v_norm_sq=d,
        h_diag=d,
        h_adjacent=-1.0 / (2 * n) + 1.0 / n**2,
        h_disjoint=1.0 / n**2,
        h_eig_max=2.0 * n,
        hinv_eig_max=hinv_max,
    )


def h_inv_entry(n, alpha, beta):
    """Closed-form entry ``<v_alpha, v_beta>`` of the inverse Gram matrix."""
    shared = len(set(alpha) & set(beta))
    if shared == 2:
        return v_norm_sq(n)
    if shared == 1:
        return -1.0 / (2 * n) + 1.0 / n**2
    return 1.0 / n**2


def w_alpha_dense(n, i, j):
    if not 0 <= i < j < n:
        raise IndexError(f"pair ({i}, {j}) out of range for n={n}")
    w = np.zeros((n, n))
    w[i, i] = w[j, j] = 1.0
    w[i, j] = w[j, i] = -1.0
    return w


def v_alpha_dense(n, i, j):
    """Explicit dual element ``-1/2 (a b^T + b a^T)``; rows sum to zero."""
    if not 0 <= i < j < n:
        raise IndexError(f"pair ({i}, {j}) out of range for n={n}")
    a = np.full(n, -1.0 / n)
    a[i] += 1.0
    b = np.full(n, -1.0 / n)
    b[j] += 1.0
    return -0.5 * (np.outer(a, b) + np.outer(b, a))


def w_inner(x, i, j):
    """``<X, w_(i,j)> = X_ii + X_jj - 2 X_ij`` for dense or factored input."""
    from .geometry import FactoredGram

    if isinstance(x, FactoredGram):
        du = x.U[i] - x.U[j]
        return float(np.dot(du * du, x.eigs))
    x = np.asarray(x, dtype=float)
    if not (0 <= i < x.shape[0] and 0 <= j < x.shape[0]):
        raise IndexError(f"pair ({i}, {j}) out of range")
    return float(x[i, i] + x[j, j] - x[i, j] - x[j, i])


def w_coeffs(x, pairs: PairSet):
    """Vectorized ``<X, w_a>`` over a pair set for a dense symmetric X."""
    x = np.asarray(x, dtype=float)
    ii, jj = pairs.ii, pairs.jj
    return x[ii, ii] + x[jj, jj] - 2.0 * x[ii, jj]


def w_coeffs_factored(U, eigs, pairs: PairSet):
    """``<U diag(eigs) U^T, w_a>`` in O(m r): row differences of U."""
    dU = U[pairs.ii] - U[pairs.jj]
    return (dU * dU) @ eigs


# ---------------------------------------------------------------------------
# O(m) fast paths.  All operator images lie in the span of {w_b : b in
# Omega} and are returned either as expansion coefficients g (the matrix
# is sum_b g_b w_b) or assembled as a sparse symmetric matrix.


def w_expand(g, pairs: PairSet):
    """Assemble ``sum_b g_b w_b`` as a sparse symmetric matrix.

    Support is the pair pattern plus the diagonal: at most ``4m + n``
    stored entries.
    """
    n = pairs.n
    ii, jj = pairs.ii, pairs.jj
    g = np.asarray(g, dtype=float)
    rho = np.bincount(ii, weights=g, minlength=n) + np.bincount(jj, weights=g, minlength=n)
    rows = np.concatenate([ii, jj, np.arange(n)])
    cols = np.concatenate([jj, ii, np.arange(n)])
    vals = np.concatenate([-g, -g, rho])
    return csr_array((vals, (rows, cols)), shape=(n, n))


def w_expand_matvec(g, pairs: PairSet, V):
    """``(sum_b g_b w_b) @ V`` without assembling the sparse matrix."""
    n = pairs.n
    ii, jj = pairs.ii, pairs.jj
    g = np.asarray(g, dtype=float)
    rho = np.bincount(ii, weights=g, minlength=n) + np.bincount(jj, weights=g, minlength=n)
    V = np.asarray(V, dtype=float)
    out = rho[:, None] * V
    for k in range(V.shape[1]):
        out[:, k] -= np.bincount(ii, weights=g * V[jj, k], minlength=n)
        out[:, k] -= np.bincount(jj, weights=g * V[ii, k], minlength=n)
    return out


def f_omega_apply(coeffs, pairs: PairSet):
    """Restricted frame operator image ``sum_a c_a w_a`` (sparse)."""
    return w_expand(coeffs, pairs)


def _jpj_on_support(coeffs, pairs: PairSet):
    """Entries of ``J P_O(T(Y)) J`` at the sampled positions, in O(m + n).

    With S the sparse symmetric matrix carrying the coefficients, the
    J-conjugation is S plus rank-one corrections, so its entry at (i, j)
    is ``S_ij - (s_i + s_j)/n + t/n^2`` with s the row sums and t their
    total.
    """
    n = pairs.n
    ii, jj = pairs.ii, pairs.jj
    c = np.asarray(coeffs, dtype=float)
    s = np.bincount(ii, weights=c, minlength=n) + np.bincount(jj, weights=c, minlength=n)
    t = s.sum()
    return c - (s[ii] + s[jj]) / n + t / n**2


def rstar_r_coeffs(coeffs, pairs: PairSet):
    """w-expansion coefficients of the normal operator image.

    ``sum_{a,b in O} c_a <v_a, v_b> w_b`` equals ``sum_b g_b w_b`` with
    ``g_b`` half the (i, j) entry of ``J P_O(T(Y)) J``; this is the sparse
    plus rank-one bookkeeping behind the O(m) cost.
    """
    return 0.5 * _jpj_on_support(coeffs, pairs)


def rstar_r_apply(coeffs, pairs: PairSet):
    """Normal operator image as a sparse symmetric matrix, O(m)."""
    return w_expand(rstar_r_coeffs(coeffs, pairs), pairs)


def m_omega_coeffs(coeffs, pairs: PairSet, p):
    """w-expansion coefficients of the de-biased operator image.

    The de-biasing subtracts ``||v||_F^2 (1-p)`` times the frame image so
    the diagonal (a = b) terms carry weight p: the Bernoulli expectation of
    the assembled operator is then exactly ``p^2 I`` on zero-row-sum
    symmetric matrices.
    """
    if not 0.0 < p <= 1.0:
        raise ValueError(f"p must be in (0, 1], got {p}")
    c = np.asarray(coeffs, dtype=float)
    return rstar_r_coeffs(c, pairs) - v_norm_sq(pairs.n) * (1.0 - p) * c


def m_omega_apply(coeffs, pairs: PairSet, p):
    return w_expand(m_omega_coeffs(coeffs, pairs, p), pairs)


def r_omega_apply(coeffs, pairs: PairSet):
    """Dense ``-1/2 J P_O(D) J`` built from observed coefficients.

    Materializes the n-by-n image; use :func:`r_omega_operator` when only
    matrix-vector products are needed.
    """
    n = pairs.n
    ii, jj = pairs.ii, pairs.jj
    c = np.asarray(coeffs, dtype=float)
    s = np.bincount(ii, weights=c, minlength=n) + np.bincount(jj, weights=c, minlength=n)
    t = c.sum() * 2.0
    out = np.full((n, n), t / n**2)
    out -= np.add.outer(s, s) / n
    out[ii, jj] += c
    out[jj, ii] += c
    return -0.5 * out


def r_omega_operator(coeffs, pairs: PairSet):
    """Matrix-free ``-1/2 J P_O(D) J`` with O(m + n) matvecs."""
    n = pairs.n
    ii, jj = pairs.ii, pairs.jj
    c = np.asarray(coeffs, dtype=float)
    s = np.bincount(ii, weights=c, minlength=n) + np.bincount(jj, weights=c, minlength=n)
    t = c.sum() * 2.0
    ones = np.ones(n)

    def matvec(x):
        x = np.asarray(x, dtype=float).ravel()
        sx = np.zeros(n)
        np.add.at(sx, ii, c * x[jj])
        np.add.at(sx, jj, c * x[ii])
        xsum = x.sum()
        jsj = sx - s * (xsum / n) - ones * (s @ x / n) + ones * (t * xsum / n**2)
        return -0.5 * jsj

    return LinearOperator((n, n), matvec=matvec, rmatvec=matvec, dtype=float)


def sum_v_squared(n):
    """Closed form ``sum_a v_a^2 = ((n^2 - 2n + 2) / 4n) J``."""
    if n < 2:
        raise ValueError("need at least two points")
    j = np.eye(n) - 1.0 / n
    return (n**2 - 2 * n + 2) / (4 * n) * j


# ---------------------------------------------------------------------------
# dense oracles: literal sums over explicit basis matrices, for testing


def f_omega_dense(y, pairs: PairSet):
    n = pairs.n
    out = np.zeros((n, n))
    for i, j in pairs:
        out += w_inner(y, i, j) * w_alpha_dense(n, i, j)
    return out


def r_omega_dense(y, pairs: PairSet):
    n = pairs.n
    out = np.zeros((n, n))
    for i, j in pairs:
        out += w_inner(y, i, j) * v_alpha_dense(n, i, j)
    return out


def rstar_r_dense(y, pairs: PairSet):
    n = pairs.n
    vs = [v_alpha_dense(n, i, j) for i, j in pairs]
    cs = [w_inner(y, i, j) for i, j in pairs]
    out = np.zeros((n, n))
    for b, (i, j) in enumerate(pairs):
        g = sum(ca * np.sum(va * vs[b]) for ca, va in zip(cs, vs))
        out += g * w_alpha_dense(n, i, j)
    return out


def m_omega_dense(y, pairs: PairSet, p):
    n = pairs.n
    vs = [v_alpha_dense(n, i, j) for i, j in pairs]
    cs = [w_inner(y, i, j) for i, j in pairs]
    out = np.zeros((n, n))
    for b, (i, j) in enumerate(pairs):
        g = 0.0
        for a in range(len(vs)):
            scale = p if a == b else 1.0
            g += scale * cs[a] * np.sum(vs[a] * vs[b])
        out += g * w_alpha_dense(n, i, j)
    return out


def s_basis(n):
    """Orthonormal basis of the zero-row-sum symmetric matrices.

    Conjugates the canonical symmetric basis of (n-1)-space by an
    orthonormal basis of the complement of the all-ones vector, giving
    L = n(n-1)/2 mutually orthonormal matrices.
    """
    j = np.eye(n) - 1.0 / n
    v = np.linalg.svd(j)[0][:, : n - 1]
    basis = []
    for a in range(n - 1):
        for b in range(a, n - 1):
            e = np.zeros((n - 1, n - 1))
            if a == b:
                e[a, a] = 1.0
            else:
                e[a, b] = e[b, a] = 1.0 / np.sqrt(2.0)
            basis.append(v @ e @ v.T)
    return np.array(basis)


_DENSE_OPS = {
    "f_omega": lambda y, pairs, p: f_omega_dense(y, pairs),
    "r_omega": lambda y, pairs, p: r_omega_dense(y, pairs),
    "rstar_r": lambda y, pairs, p: rstar_r_dense(y, pairs),
    "m_omega": m_omega_dense,
}


def dense_operator_matrix(op, pairs: PairSet, p=None, basis=None):
    """Materialize an operator on the orthonormal basis of the ambient space.

    Entry (k, l) is ``<B_k, op(B_l)>`` for the basis from :func:`s_basis`;
    self-adjoint operators give symmetric matrices whose eigenvalues are the
    operator spectrum.  Guarded to small n, this is the exact oracle the
    fast paths are tested against.
    """
    n = pairs.n
    if n > 20:
        raise ValueError("dense operator materialization is limited to n <= 20")
    if op not in _DENSE_OPS:
        raise ValueError(f"unknown operator {op!r}; choose from {sorted(_DENSE_OPS)}")
    if op == "m_omega" and p is None:
        raise ValueError("m_omega needs the sampling probability p")
    if basis is None:
        basis = s_basis(n)
    fn = _DENSE_OPS[op]
    L = pair_count(n)
    out = np.zeros((L, L))
    for l in range(L):
        image = fn(basis[l], pairs, p)
        out[:, l] = np.einsum("kij,ij->k", basis, image)
    return out
