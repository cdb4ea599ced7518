"""Fixed-rank manifold primitives: tangent-space projection at a factored
iterate and the rank-r hard-thresholding retraction.

The tangent space at ``X = U diag(eigs) U^T`` is
``{U Z^T + Z U^T : Z in R^{n x r}}``; the orthogonal projection of a
symmetric Y onto it is ``P_U Y + Y P_U - P_U Y P_U`` and is stored in the
factored form ``U M U^T + Zu U^T + U Zu^T`` with ``Zu^T U = 0``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import FactoredGram, magnitude_order, select_rank
from .sampling import PairSet


class RankCollapseError(RuntimeError):
    """Retraction produced fewer than r usable eigenvalues."""


@dataclass(frozen=True)
class TangentVector:
    """Tangent element ``U M U^T + Zu U^T + U Zu^T`` at a factored base."""

    base: FactoredGram
    M: np.ndarray
    Zu: np.ndarray

    def __post_init__(self):
        M = np.asarray(self.M, dtype=float)
        Zu = np.asarray(self.Zu, dtype=float)
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "Zu", Zu)
        r = self.base.r
        if M.shape != (r, r) or Zu.shape != (self.base.n, r):
            raise ValueError("component shapes do not match the base factorization")

    def norm_fro(self):
        # Zu is orthogonal to U, so the cross blocks are mutually orthogonal
        return float(np.sqrt(np.sum(self.M**2) + 2.0 * np.sum(self.Zu**2)))

    def inner(self, other: "TangentVector"):
        return float(np.sum(self.M * other.M) + 2.0 * np.sum(self.Zu * other.Zu))

    def scale(self, c):
        return TangentVector(self.base, c * self.M, c * self.Zu)

    def add(self, other: "TangentVector"):
        return TangentVector(self.base, self.M + other.M, self.Zu + other.Zu)

    def matrix(self):
        U = self.base.U
        return U @ self.M @ U.T + self.Zu @ U.T + U @ self.Zu.T

    def w_coeffs(self, pairs: PairSet):
        """``<T, w_a>`` over a pair set in O(m r), without densifying."""
        U = self.base.U
        ii, jj = pairs.ii, pairs.jj
        dU = U[ii] - U[jj]
        B = U @ self.M
        out = np.einsum("ij,ij->i", B[ii] - B[jj], dU)
        out += 2.0 * np.einsum("ij,ij->i", self.Zu[ii] - self.Zu[jj], dU)
        return out


def project_tangent(base: FactoredGram, y) -> TangentVector:
    """Orthogonal projection of a symmetric matrix onto the tangent space.

    ``y`` may be dense or scipy-sparse; the cost is one product ``y @ U``
    plus O(n r^2) dense work.
    """
    U = base.U
    yu = y @ U
    yu = np.asarray(yu)
    M = U.T @ yu
    M = 0.5 * (M + M.T)
    Zu = yu - U @ M
    return TangentVector(base, M, Zu)


def hard_threshold(y, r) -> FactoredGram:
    """Best rank-r approximation by eigenvalue magnitude (dense path).

    Eigenvalues are kept by magnitude, negative ones included; a tie at the
    rank boundary or a numerically deficient selection is flagged on the
    result rather than raised.
    """
    y = np.asarray(y, dtype=float)
    eigvals, eigvecs = np.linalg.eigh(y)
    return select_rank(eigvals, eigvecs, r)


def retract_structured(base: FactoredGram, t: TangentVector, step) -> FactoredGram:
    """``hard_threshold(base + step * t, r)`` via a thin QR and a 2r core.

    The sum lives in span([U | Zu]); a QR of Zu reduces the retraction to
    the eigendecomposition of a 2r-by-2r symmetric core, keeping the update
    at O(n r^2) instead of a dense n-by-n eigendecomposition.
    """
    if t.base is not base and t.base.U is not base.U:
        if not (np.array_equal(t.base.U, base.U) and np.array_equal(t.base.eigs, base.eigs)):
            raise ValueError("tangent vector is not based at the given point")
    r = base.r
    if step == 0.0 or (not np.any(t.M) and not np.any(t.Zu)):
        return base
    U = base.U
    q2, r2 = np.linalg.qr(t.Zu)
    core = np.zeros((2 * r, 2 * r))
    core[:r, :r] = np.diag(base.eigs) + step * t.M
    core[:r, r:] = step * r2.T
    core[r:, :r] = step * r2
    eigvals, eigvecs = np.linalg.eigh(core)
    order = magnitude_order(eigvals)[:r]
    lam = eigvals[order]
    scale = np.abs(eigvals).max()
    if scale == 0.0 or np.abs(lam[-1]) <= 1e-14 * scale:
        raise RankCollapseError(
            f"retraction core kept only {int(np.sum(np.abs(lam) > 1e-14 * scale))} "
            f"of {r} eigenvalues; the iterate degenerated"
        )
    vecs = np.hstack([U, q2]) @ eigvecs[:, order]
    rest = np.delete(np.abs(eigvals), order)
    tie = bool(rest.size and np.abs(np.abs(lam[-1]) - rest.max()) <= 1e-12 * scale)
    return FactoredGram(vecs, lam, boundary_tie=tie)
