"""Linear complementarity solvers for symmetric positive-definite Z-matrices.

Given q and such a matrix M (a K-matrix), find (w, z) with

    w = q + M z,    w >= 0,    z >= 0,    w^T z = 0.

K-matrices make the solution unique and monotone in q, which the pivoting
solver exploits: inverses of principal submatrices have nonnegative entries,
so growing the active set never pushes a primal coordinate negative. A
brute-force enumerator and a projected-gradient bound-constrained QP solver
provide two independent cross-checks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .errors import (
    DimensionMismatch,
    DimensionTooLarge,
    MaxIterations,
    MultipleSolutions,
    NoSolution,
    NotKMatrix,
    PivotCycle,
)

# Strict-inequality threshold; scale-relative on non-unit-scale data.
STRICT_TOL = 1e-12

BRUTEFORCE_MAX_DIM = 20


@dataclass(frozen=True)
class LcpSolution:
    """A complementary pair (w, z) with its strictly-positive support.

    Coordinates with w_i = z_i = 0 (degenerate boundaries) are classified
    as inactive and excluded from the support.
    """

    w: np.ndarray
    z: np.ndarray
    support: tuple[int, ...]

    def residuals(self, q: np.ndarray, M: np.ndarray) -> dict[str, float]:
        """Violation magnitudes of the defining conditions (0 when exact)."""
        affine = float(np.max(np.abs(self.w - q - M @ self.z)))
        neg_w = float(max(0.0, -np.min(self.w, initial=0.0)))
        neg_z = float(max(0.0, -np.min(self.z, initial=0.0)))
        comp = float(abs(self.w @ self.z))
        per_coord = float(np.max(np.minimum(self.w, self.z), initial=0.0))
        return {
            "affine": affine,
            "negative_w": neg_w,
            "negative_z": neg_z,
            "complementarity": comp,
            "per_coordinate": max(0.0, per_coord),
        }


def _prepare(q, M) -> tuple[np.ndarray, np.ndarray]:
    q = np.asarray(q, dtype=float)
    M = np.asarray(M, dtype=float)
    if q.ndim != 1 or M.shape != (q.size, q.size):
        raise DimensionMismatch(f"incompatible shapes q{q.shape}, M{M.shape}")
    return q, M


def check_k_matrix(M: np.ndarray) -> None:
    """Cheap certification: symmetric, nonpositive off-diagonals, Cholesky."""
    asym = np.max(np.abs(M - M.T))
    if asym > STRICT_TOL * max(1.0, np.max(np.abs(M))):
        raise NotKMatrix(f"matrix not symmetric (max asymmetry {asym:.3e})")
    off = M - np.diag(np.diag(M))
    if np.any(off > 0.0):
        raise NotKMatrix("positive off-diagonal entry")
    try:
        cho_factor(M)
    except LinAlgError:
        raise NotKMatrix("matrix is not positive definite") from None


def solve_lcp(q, M) -> LcpSolution:
    """Solve the complementarity problem by active-set pivoting.

    Starting from z = 0, any coordinate with negative dual value joins the
    active set and the principal system is re-solved; coordinates whose
    primal value turns negative are dropped. For K-matrices the primal
    iterates are monotone, so drops never fire except through roundoff and
    the loop terminates after at most d additions. A generous pivot bound
    guards against the impossible cycle.
    """
    q, M = _prepare(q, M)
    check_k_matrix(M)
    d = q.size

    active = np.zeros(d, dtype=bool)
    z = np.zeros(d)
    w = q.copy()
    max_pivots = d * (2 ** min(d, 24))
    pivots = 0
    while True:
        pivots += 1
        if pivots > max_pivots:
            raise PivotCycle(f"exceeded {max_pivots} pivots at d={d}")
        idx = np.flatnonzero(active)
        if idx.size:
            try:
                factor = cho_factor(M[np.ix_(idx, idx)])
            except LinAlgError:
                raise NotKMatrix(
                    f"principal submatrix {idx.tolist()} not positive definite"
                ) from None
            z_active = cho_solve(factor, -q[idx])
        else:
            z_active = np.empty(0)

        negative = z_active < -STRICT_TOL
        if negative.any():
            active[idx[negative]] = False
            continue

        z = np.zeros(d)
        if idx.size:
            z[idx] = np.maximum(z_active, 0.0)
        w = q + M @ z
        w[idx] = 0.0
        violated = np.flatnonzero(~active & (w < -STRICT_TOL))
        if violated.size == 0:
            break
        active[violated[np.argmin(w[violated])]] = True

    support = tuple(np.flatnonzero(z > STRICT_TOL).tolist())
    w = np.maximum(w, 0.0)
    return LcpSolution(w=w, z=z, support=support)


def solve_lcp_bruteforce(q, M) -> LcpSolution:
    """Solve by enumerating all 2^d supports; oracle for the pivoting path.

    A support I passes when z_I = -(M_II)^{-1} q_I is strictly positive and
    the induced dual vector is nonnegative. Uniqueness of the passing
    support is part of the contract: zero passes mean the problem is
    infeasible for this matrix class, several mean M is not a K-matrix or
    the data sits on a degenerate boundary.
    """
    q, M = _prepare(q, M)
    d = q.size
    if d > BRUTEFORCE_MAX_DIM:
        raise DimensionTooLarge(f"brute force limited to d <= {BRUTEFORCE_MAX_DIM}")

    winners: list[LcpSolution] = []
    for mask in range(2 ** d):
        idx = np.flatnonzero([(mask >> i) & 1 for i in range(d)])
        z = np.zeros(d)
        if idx.size:
            try:
                z_active = np.linalg.solve(M[np.ix_(idx, idx)], -q[idx])
            except np.linalg.LinAlgError:
                continue
            if np.any(z_active <= STRICT_TOL):
                continue
            z[idx] = z_active
        w = q + M @ z
        w[idx] = 0.0
        if np.any(w < -STRICT_TOL):
            continue
        winners.append(
            LcpSolution(w=np.maximum(w, 0.0), z=z, support=tuple(idx.tolist()))
        )

    if not winners:
        raise NoSolution("no support passes the sign checks")
    if len(winners) > 1:
        raise MultipleSolutions(
            f"{len(winners)} supports pass: {[s.support for s in winners]}"
        )
    return winners[0]


def solve_qp_nonneg(q, M, tol: float = 1e-10, max_iter: int = 500_000) -> np.ndarray:
    """Minimize <q, theta> + 0.5 <theta, M theta> over theta >= 0.

    Projected gradient descent with the fixed step 1/lambda_max(M), run
    until the unit-step projected-gradient residual drops below ``tol``.
    Deliberately independent of the pivoting code path.
    """
    q, M = _prepare(q, M)
    eigs = np.linalg.eigvalsh(M)
    if eigs[0] <= 0.0:
        raise NotKMatrix(f"matrix not positive definite (lambda_min={eigs[0]:.3e})")
    step = 1.0 / eigs[-1]

    theta = np.zeros(q.size)
    residual = np.inf
    for _ in range(max_iter):
        grad = q + M @ theta
        residual = float(np.max(np.abs(theta - np.maximum(theta - grad, 0.0))))
        if residual <= tol:
            return theta
        theta = np.maximum(theta - step * grad, 0.0)
    raise MaxIterations(residual=residual, iterations=max_iter)
