"""Regression instances with positively-correlated outputs and
anti-correlated features.

An instance is the pair (M, r) with M = X^T X the feature covariance and
r = X^T y the feature-output covariance, subject to

    A1:  r_i > 0 for every i,
    A2:  M_ij <= 0 for every i != j.

Together these force M to be positive definite (hence n >= d), which every
construction path here re-verifies.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    AssumptionViolated,
    DegenerateScale,
    DimensionMismatch,
    DomainError,
    NonFinite,
    NotPositiveDefinite,
    RejectionBudgetExceeded,
    ValidationError,
)

SYMMETRY_RTOL = 1e-12
RECONSTRUCTION_RTOL = 1e-10


def _finite_array(a, name: str, ndim: int) -> np.ndarray:
    arr = np.array(a, dtype=float)
    if arr.ndim != ndim:
        raise DimensionMismatch(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if arr.size == 0:
        raise DimensionMismatch(f"{name} must be nonempty")
    if not np.all(np.isfinite(arr)):
        raise NonFinite(f"{name} contains non-finite entries")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class RegressionData:
    """Raw design matrix X (n samples by d features) and outputs y."""

    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "X", _finite_array(self.X, "X", 2))
        object.__setattr__(self, "y", _finite_array(self.y, "y", 1))
        if self.y.shape[0] != self.X.shape[0]:
            raise DimensionMismatch(
                f"y has length {self.y.shape[0]}, X has {self.X.shape[0]} rows"
            )

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]


@dataclass(frozen=True)
class ProblemInstance:
    """Validated pair (M, r); optionally keeps the data it came from.

    Construction checks symmetry, A1 and A2 and raises if any fails.
    Positive definiteness is implied and is verified separately by
    :func:`check_positive_definite`.
    """

    M: np.ndarray
    r: np.ndarray
    data: RegressionData | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        M = _finite_array(self.M, "M", 2)
        r = _finite_array(self.r, "r", 1)
        if M.shape[0] != M.shape[1]:
            raise DimensionMismatch(f"M must be square, got shape {M.shape}")
        if r.shape[0] != M.shape[0]:
            raise DimensionMismatch(
                f"r has length {r.shape[0]}, M is {M.shape[0]}x{M.shape[1]}"
            )
        asym = np.max(np.abs(M - M.T))
        if asym > SYMMETRY_RTOL * max(1.0, np.max(np.abs(M))):
            raise ValidationError(f"M is not symmetric (max asymmetry {asym:.3e})")
        bad_r = np.flatnonzero(~(r > 0.0))
        if bad_r.size:
            raise AssumptionViolated("A1", bad_r)
        off = M - np.diag(np.diag(M))
        bad_m = np.argwhere(off > 0.0)
        if bad_m.size:
            raise AssumptionViolated("A2", [tuple(ij) for ij in bad_m])
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "r", r)

    @property
    def d(self) -> int:
        return self.r.shape[0]

    @property
    def has_offset(self) -> bool:
        """True when the constant 0.5*||y||^2 term of the loss is known."""
        return self.data is not None

    def minimizer(self) -> np.ndarray:
        """Unconstrained minimizer M^{-1} r of the quadratic loss."""
        return np.linalg.solve(self.M, self.r)


@dataclass(frozen=True)
class Initialization:
    """Initialization theta_i(0) = C_i * epsilon^{k_i} of the flow."""

    C: np.ndarray
    k: np.ndarray
    epsilon: float

    def __post_init__(self):
        C = _finite_array(self.C, "C", 1)
        k = _finite_array(self.k, "k", 1)
        if C.shape != k.shape:
            raise DimensionMismatch("C and k must have the same length")
        if not np.all(C > 0.0):
            raise DomainError("C must be strictly positive")
        if not np.all(k > 0.0):
            raise DomainError("k must be strictly positive")
        if not (0.0 < self.epsilon < 1.0):
            raise DomainError("epsilon must lie strictly between 0 and 1")
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "k", k)

    @property
    def log_epsilon(self) -> float:
        """log(epsilon) < 0; the only form in which epsilon enters the flow."""
        return float(np.log(self.epsilon))


@dataclass(frozen=True)
class PdReport:
    """Smallest-eigenvalue certificate for an instance's covariance."""

    lambda_min: float
    success: bool


def from_data(data: RegressionData) -> ProblemInstance:
    """Build the validated (M, r) pair from raw data, keeping provenance."""
    M = data.X.T @ data.X
    r = data.X.T @ data.y
    return ProblemInstance(M=M, r=r, data=data, meta={"n": data.n, "d": data.d})


def check_positive_definite(instance: ProblemInstance) -> PdReport:
    """Verify lambda_min(M) > 0.

    This must hold for every instance that passed A1 and A2; a failure
    indicates a construction or numerics bug, so it raises rather than
    returning a failed report.
    """
    lam = float(np.linalg.eigvalsh(instance.M)[0])
    if not lam > 0.0:
        raise NotPositiveDefinite(lam)
    return PdReport(lambda_min=lam, success=True)


def generate_rejection(
    n: int, d: int, seed: int, max_attempts: int = 10_000
) -> RegressionData:
    """Draw i.i.d. standard Gaussian (X, y) until A1 and A2 both hold.

    The acceptance probability decays rapidly with d, so this is only
    practical at small dimensions; use :func:`generate_direct` otherwise.
    Deterministic for a fixed seed.
    """
    if n < 1 or d < 1:
        raise DimensionMismatch("need n >= 1 and d >= 1")
    rng = np.random.default_rng(seed)
    for attempt in range(1, max_attempts + 1):
        X = rng.standard_normal((n, d))
        y = rng.standard_normal(n)
        r = X.T @ y
        if not np.all(r > 0.0):
            continue
        M = X.T @ X
        off = M - np.diag(np.diag(M))
        if np.any(off > 0.0):
            continue
        return RegressionData(X=X, y=y)
    raise RejectionBudgetExceeded(max_attempts)


def generate_direct(
    d: int, seed: int, offdiag_scale: float | None = None
) -> tuple[ProblemInstance, RegressionData]:
    """Build a valid instance of any dimension without rejection.

    M is symmetric with nonpositive off-diagonals and strictly diagonally
    dominant (hence positive definite), r is positive, and consistent data
    is reconstructed through the Cholesky factor: X is the upper factor of
    M (n = d) and y solves X^T y = r, so X^T X = M and X^T y = r up to
    roundoff. The default off-diagonal scale shrinks with d to keep
    dominance at any dimension; larger explicit values raise
    ``DegenerateScale`` when they break it.
    """
    if d < 1:
        raise DimensionMismatch("need d >= 1")
    if offdiag_scale is None:
        offdiag_scale = 0.5 / max(1, d - 1)
    if offdiag_scale < 0.0:
        raise DegenerateScale("offdiag_scale must be nonnegative")
    rng = np.random.default_rng(seed)
    diag = rng.uniform(1.0, 2.0, size=d)
    upper = -offdiag_scale * rng.uniform(0.0, 1.0, size=(d, d))
    off = np.triu(upper, k=1)
    off = off + off.T
    M = off + np.diag(diag)
    row_off = np.sum(np.abs(off), axis=1)
    if np.any(row_off >= diag):
        raise DegenerateScale(
            f"offdiag_scale={offdiag_scale} breaks strict diagonal dominance "
            f"at d={d}"
        )
    r = rng.uniform(0.5, 1.5, size=d)

    L = np.linalg.cholesky(M)          # M = L L^T
    X = L.T                            # X^T X = L L^T = M
    y = np.linalg.solve(L, r)          # X^T y = L y = r
    data = RegressionData(X=X, y=y)

    m_err = np.max(np.abs(data.X.T @ data.X - M))
    r_err = np.max(np.abs(data.X.T @ data.y - r))
    if m_err > RECONSTRUCTION_RTOL * np.max(np.abs(M)):
        raise DegenerateScale(f"covariance reconstruction residual {m_err:.3e}")
    if r_err > RECONSTRUCTION_RTOL * np.max(np.abs(r)):
        raise DegenerateScale(f"correlation reconstruction residual {r_err:.3e}")

    instance = ProblemInstance(
        M=M,
        r=r,
        data=data,
        meta={"seed": seed, "generator": "direct", "n": d, "d": d,
              "offdiag_scale": offdiag_scale},
    )
    return instance, data


def loss(instance: ProblemInstance, theta) -> float:
    """Quadratic loss at theta.

    Includes the constant 0.5*||y||^2 only when the instance carries its
    raw data; otherwise the offset-free value is returned (flagged by
    ``instance.has_offset``).
    """
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (instance.d,):
        raise DimensionMismatch(f"theta must have shape ({instance.d},)")
    value = -float(instance.r @ theta) + 0.5 * float(theta @ instance.M @ theta)
    if instance.data is not None:
        value += 0.5 * float(instance.data.y @ instance.data.y)
    return value


def loss_gradient(instance: ProblemInstance, theta) -> np.ndarray:
    """Gradient M theta - r of the quadratic loss."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (instance.d,):
        raise DimensionMismatch(f"theta must have shape ({instance.d},)")
    return instance.M @ theta - instance.r


# -- serialization ----------------------------------------------------------

def to_json_dict(instance: ProblemInstance) -> dict:
    obj = {
        "M": instance.M.tolist(),
        "r": instance.r.tolist(),
        "meta": dict(instance.meta),
    }
    if instance.data is not None:
        obj["X"] = instance.data.X.tolist()
        obj["y"] = instance.data.y.tolist()
        obj["meta"].setdefault("n", instance.data.n)
        obj["meta"].setdefault("d", instance.data.d)
    return obj


def from_json_dict(obj: dict) -> ProblemInstance:
    data = None
    if obj.get("X") is not None and obj.get("y") is not None:
        data = RegressionData(X=np.array(obj["X"]), y=np.array(obj["y"]))
    return ProblemInstance(
        M=np.array(obj["M"]),
        r=np.array(obj["r"]),
        data=data,
        meta=dict(obj.get("meta", {})),
    )


def save_instance(instance: ProblemInstance, path) -> None:
    """Write the instance JSON atomically (temp file + rename)."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(to_json_dict(instance), indent=2))
    os.replace(tmp, path)


def load_instance(path) -> ProblemInstance:
    return from_json_dict(json.loads(Path(path).read_text()))
