"""Gradient-flow simulation from vanishing initialization.

The flow theta_i' = theta_i (r - M theta)_i is integrated on the rescaled
clock s = t / log(1/epsilon) and entirely in logarithmic coordinates

    w_i = log(theta_i) / log(epsilon),    dw/ds = M theta - r,

so that initializations like theta_i(0) = epsilon^{k_i} with epsilon down
to 1e-20 and beyond stay exactly representable: epsilon itself is never
exponentiated, only exp(w_i * log(epsilon)) is formed. The right-hand side
is bounded along trajectories, so an explicit adaptive pair suffices.

The running integral of theta is carried as extra state, which makes
trajectory averages available at integrator accuracy with the same
Runge-Kutta weights.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, MonotonicityViolated, NotReached, OutOfRange
from .fixed_points import FixedPoint
from .integrate import IntegratorStats, integrate
from .problem import Initialization, ProblemInstance, loss

MONOTONE_RUNTIME_TOL = 1e-8
DEFAULT_TOL = 1e-9
DEFAULT_GRID_POINTS = 400
HITTING_REL_ACCURACY = 1e-6


@dataclass(frozen=True)
class TrajectoryPoint:
    """One sample: rescaled time s, physical time t, and both coordinate systems."""

    s: float
    t: float
    w: np.ndarray
    theta: np.ndarray


class Trajectory:
    """Sampled solution of the rescaled flow plus its dense interpolant.

    Immutable once returned; ``theta_at``/``w_at``/``average`` evaluate the
    dense output anywhere inside the integrated range.
    """

    def __init__(self, instance, init, s_grid, dense, stats, s_end):
        self.instance = instance
        self.init = init
        self.stats: IntegratorStats = stats
        self._dense = dense
        self._log_eps = init.log_epsilon
        self._s_end = float(s_end)

        self.s = np.asarray(s_grid, dtype=float)
        u = dense(self.s)
        d = instance.d
        self.w = u[:, :d]
        self.theta = np.exp(self.w * self._log_eps)
        self.integral = u[:, d:]
        self.t = self.s * (-self._log_eps)

    @property
    def s_max(self) -> float:
        return self._s_end

    def __len__(self) -> int:
        return self.s.shape[0]

    def point(self, i: int) -> TrajectoryPoint:
        return TrajectoryPoint(
            s=float(self.s[i]), t=float(self.t[i]), w=self.w[i], theta=self.theta[i]
        )

    def _state_at(self, s):
        s_arr = np.atleast_1d(np.asarray(s, dtype=float))
        if np.any(s_arr < 0.0) or np.any(s_arr > self._s_end * (1 + 1e-12) + 1e-15):
            raise OutOfRange(f"s must lie in [0, {self._s_end}]")
        return self._dense(np.minimum(s_arr, self._s_end))

    def w_at(self, s) -> np.ndarray:
        u = self._state_at(s)
        w = u[:, : self.instance.d]
        return w[0] if np.ndim(s) == 0 else w

    def theta_at(self, s) -> np.ndarray:
        return np.exp(self.w_at(s) * self._log_eps)

    def average(self, s) -> np.ndarray:
        """Running trajectory average (1/s) * integral of theta over [0, s]."""
        s_arr = np.atleast_1d(np.asarray(s, dtype=float))
        if np.any(s_arr <= 0.0):
            raise OutOfRange("trajectory average requires s > 0")
        u = self._state_at(s_arr)
        avg = u[:, self.instance.d :] / s_arr[:, None]
        return avg[0] if np.ndim(s) == 0 else avg

    def loss_values(self) -> np.ndarray:
        return np.array([loss(self.instance, th) for th in self.theta])


def _flow(instance: ProblemInstance, log_eps: float):
    M, r, d = instance.M, instance.r, instance.d

    def rhs(s, u):
        theta = np.exp(u[:d] * log_eps)
        out = np.empty(2 * d)
        out[:d] = M @ theta - r
        out[d:] = theta
        return out

    return rhs


def simulate(
    instance: ProblemInstance,
    init: Initialization,
    s_max: float,
    s_grid=None,
    tol: float = DEFAULT_TOL,
) -> Trajectory:
    """Integrate the flow up to rescaled time s_max.

    Sampling happens on ``s_grid`` (default: 400 uniform points on
    [0, s_max]) through the dense output. Any coordinate decreasing by more
    than 1e-8 between accepted steps aborts with ``MonotonicityViolated``:
    trajectories are provably monotone once the initialization is small
    enough to start inside the invariant region, so a decrease means
    epsilon is too large for the asymptotic regime (or the integration
    broke down).
    """
    if init.C.shape[0] != instance.d:
        raise DomainError(f"initialization has dimension {init.C.shape[0]}, "
                          f"instance has {instance.d}")
    if s_max <= 0.0:
        raise OutOfRange("s_max must be positive")
    d = instance.d
    log_eps = init.log_epsilon
    w0 = init.k + np.log(init.C) / log_eps
    u0 = np.concatenate([w0, np.zeros(d)])

    # Inside the invariant region theta stays componentwise below the
    # minimizer, so the flow's local rates never exceed
    # |log eps| * lambda_max(M) * max theta. Capping the step keeps the
    # method's stability function in (0, 1) on every mode: the converged
    # tail contracts monotonically instead of bouncing along the stability
    # boundary, which would otherwise inject tolerance-scale jitter into
    # coordinates that the monotonicity check watches.
    theta_cap = max(
        float(np.max(instance.minimizer())),
        float(np.max(init.C * np.exp(init.k * log_eps))),
    )
    lam_max = float(np.linalg.eigvalsh(instance.M)[-1])
    h_stab = 2.8 / (abs(log_eps) * lam_max * max(theta_cap, 1e-12))

    def check_monotone(s_old, u_old, s_new, u_new):
        drop = np.exp(u_old[:d] * log_eps) - np.exp(u_new[:d] * log_eps)
        worst = float(np.max(drop))
        if worst > MONOTONE_RUNTIME_TOL:
            i = int(np.argmax(drop))
            raise MonotonicityViolated(
                f"theta_{i} decreased by {worst:.3e} over [{s_old:.6g}, {s_new:.6g}]; "
                f"epsilon={init.epsilon:g} is too large for monotone dynamics"
            )

    result = integrate(
        _flow(instance, log_eps),
        0.0,
        u0,
        s_max,
        rtol=tol,
        atol=tol,
        err_indices=slice(0, d),
        max_step=h_stab,
        step_callback=check_monotone,
    )
    if s_grid is None:
        s_grid = np.linspace(0.0, s_max, DEFAULT_GRID_POINTS)
    else:
        s_grid = np.asarray(s_grid, dtype=float)
        if s_grid.ndim != 1 or s_grid.size == 0 or np.any(np.diff(s_grid) <= 0):
            raise OutOfRange("s_grid must be a nonempty strictly increasing vector")
        if s_grid[0] < 0 or s_grid[-1] > s_max * (1 + 1e-12):
            raise OutOfRange(f"s_grid must lie within [0, {s_max}]")
    return Trajectory(instance, init, s_grid, result.dense, result.stats, result.s)


def average_trajectory(trajectory: Trajectory, s: float) -> np.ndarray:
    """Trajectory average (1/s) * integral of theta, at rescaled time s."""
    return trajectory.average(s)


def hitting_time_on(trajectory: Trajectory, eta: float) -> float:
    """First physical time t with ||theta(t) - M^{-1} r||_2 <= eta.

    Scans the dense output on the accepted-step grid refined enough to
    bracket the first crossing, then bisects to relative accuracy 1e-6.
    """
    instance = trajectory.instance
    target = instance.minimizer()

    def gap(s):
        return float(np.linalg.norm(trajectory.theta_at(s) - target)) - eta

    log_term = -trajectory.init.log_epsilon
    if gap(0.0) <= 0.0:
        return 0.0
    # Coordinates are monotone but the l2 gap need not be; a fine scan
    # bounds the risk of skipping a crossing.
    s_cap = trajectory.s_max
    grid = np.linspace(0.0, s_cap, max(4 * DEFAULT_GRID_POINTS, 1600))
    values = np.array([gap(s) for s in grid])
    below = np.flatnonzero(values <= 0.0)
    if below.size == 0:
        raise NotReached(s_cap)
    j = below[0]
    lo, hi = grid[j - 1], grid[j]
    while hi - lo > HITTING_REL_ACCURACY * max(hi, 1e-300):
        mid = 0.5 * (lo + hi)
        if gap(mid) <= 0.0:
            hi = mid
        else:
            lo = mid
    return hi * log_term


def hitting_time(
    instance: ProblemInstance,
    init: Initialization,
    eta: float,
    s_cap: float,
    tol: float = DEFAULT_TOL,
) -> float:
    """Simulate and return the physical hitting time of the eta-ball
    around the unconstrained minimizer."""
    target = instance.minimizer()
    if not eta < float(np.min(target)):
        raise DomainError(
            f"eta={eta:g} must be smaller than every minimizer coordinate "
            f"(min {float(np.min(target)):g})"
        )
    trajectory = simulate(instance, init, s_cap, s_grid=np.array([0.0, s_cap]), tol=tol)
    return hitting_time_on(trajectory, eta)


def lyapunov(theta, fp: FixedPoint) -> float:
    """Energy sum_{i in support} (theta_i - theta*_i log theta_i).

    Along the flow this decreases up to vanishing corrections while the
    trajectory travels the plateau of the given stationary point; exposed
    as a diagnostic.
    """
    theta = np.asarray(theta, dtype=float)
    if not fp.support:
        return 0.0
    idx = np.array(fp.support, dtype=int)
    vals = theta[idx]
    if np.any(vals <= 0.0):
        raise DomainError("theta must be strictly positive on the support")
    return float(np.sum(vals - fp.theta[idx] * np.log(vals)))


def in_invariant_region(
    instance: ProblemInstance, theta, slack: float = 1e-10
) -> bool:
    """Membership in {theta >= 0 : r - M theta >= 0}, up to slack on the
    residual side; this region is forward-invariant and forces monotone
    trajectories."""
    theta = np.asarray(theta, dtype=float)
    if np.any(theta < 0.0):
        return False
    return bool(np.all(instance.r - instance.M @ theta >= -slack))
