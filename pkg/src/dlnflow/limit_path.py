"""The small-initialization limit: regularization path and activation times.

As the initialization scale vanishes, the rescaled trajectory converges to
a piecewise-constant process hopping between stationary points, and its
running average to the minimizer mu(s) of the decreasingly-regularized
problem

    min_{theta >= 0}  f(theta) + <k, theta> / s.

Both are read off one parametric complementarity problem with offset
q(s) = k - s r: the primal solution z(s) equals s * mu(s) and its support
I(s) grows with s. On each interval between activation events z and the
dual w are affine in s, so the whole path is computed exactly by a
homotopy: follow the affine formulas, find the next dual zero crossing in
closed form, enlarge the active set, repeat until it saturates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from . import lcp
from .errors import (
    AtBreakpoint,
    DomainError,
    NegativePrimalOnSegment,
    OutOfRange,
    PathInconsistent,
    SingularSubmatrix,
)
from .fixed_points import fixed_point
from .problem import ProblemInstance

BREAKPOINT_TOL = 1e-12
SEGMENT_CHECK_TOL = 1e-9


@dataclass(frozen=True)
class PathSegment:
    """One constancy interval [s_lo, s_hi) of the active set.

    Carries the stationary point the trajectory plateaus at and the exact
    affine coefficients of the primal/dual path on the interval:
    z(s) = z_intercept + s * z_slope (zero off the active set) and
    w(s) = w_intercept + s * w_slope (zero on it).
    """

    s_lo: float
    s_hi: float
    active: tuple[int, ...]
    theta_star: np.ndarray
    z_intercept: np.ndarray
    z_slope: np.ndarray
    w_intercept: np.ndarray
    w_slope: np.ndarray

    def z_at(self, s: float) -> np.ndarray:
        return self.z_intercept + s * self.z_slope

    def w_at(self, s: float) -> np.ndarray:
        return self.w_intercept + s * self.w_slope


@dataclass(frozen=True)
class LimitPath:
    """Breakpoints s_1 < ... < s_q, nested active sets, and affine pieces."""

    breakpoints: np.ndarray
    segments: tuple[PathSegment, ...]
    s_star: float

    def segment_at(self, s: float) -> PathSegment:
        if s <= 0.0:
            raise OutOfRange("the limit path is defined for s > 0")
        for seg in self.segments:
            if seg.s_lo <= s < seg.s_hi:
                return seg
        return self.segments[-1]

    def active_at(self, s: float) -> tuple[int, ...]:
        return self.segment_at(s).active

    def z_at(self, s: float) -> np.ndarray:
        return self.segment_at(s).z_at(s)

    def mu_at(self, s: float) -> np.ndarray:
        if s <= 0.0:
            raise OutOfRange("mu is defined for s > 0")
        return self.z_at(s) / s


def _check_k(instance: ProblemInstance, k) -> np.ndarray:
    k = np.asarray(k, dtype=float)
    if k.shape != (instance.d,):
        raise DomainError(f"k must have shape ({instance.d},)")
    if not np.all(k > 0.0):
        raise DomainError("k must be strictly positive")
    return k


def solve_limit_lcp(instance: ProblemInstance, k, s: float) -> lcp.LcpSolution:
    """Pointwise solve of the parametric problem at rescaled time s."""
    k = _check_k(instance, k)
    if s <= 0.0:
        raise OutOfRange("s must be positive")
    return lcp.solve_lcp(k - s * instance.r, instance.M)


def mu(instance: ProblemInstance, k, s: float) -> np.ndarray:
    """Minimizer of f + <k, theta>/s over theta >= 0, via z(s) = s mu(s)."""
    return solve_limit_lcp(instance, k, s).z / s


def compute_path(instance: ProblemInstance, k) -> LimitPath:
    """Exact homotopy in s.

    The empty active set is valid on (0, min_i k_i / r_i). With active set
    I, the inactive dual coordinates are affine in s; the next breakpoint
    is the smallest root beyond the current one, and every coordinate tied
    at that root activates simultaneously. Coordinates never deactivate,
    so the loop ends after at most d events with the full set; the last
    breakpoint is the convergence time. Each segment's closed form is
    verified against a pointwise solve at the segment midpoint.
    """
    k = _check_k(instance, k)
    M, r, d = instance.M, instance.r, instance.d

    active: list[int] = []
    s_cur = 0.0
    breakpoints: list[float] = []
    segments: list[PathSegment] = []

    for _ in range(d + 1):
        idx = np.array(active, dtype=int)
        z_int, z_slp = np.zeros(d), np.zeros(d)
        if idx.size:
            try:
                factor = cho_factor(M[np.ix_(idx, idx)])
            except LinAlgError:
                raise SingularSubmatrix(
                    f"active submatrix {active} failed to factor"
                ) from None
            z_int[idx] = cho_solve(factor, -k[idx])
            z_slp[idx] = cho_solve(factor, r[idx])

        inactive = np.setdiff1d(np.arange(d), idx, assume_unique=True)
        w_int, w_slp = np.zeros(d), np.zeros(d)
        if inactive.size:
            cross = M[np.ix_(inactive, idx)] if idx.size else None
            w_int[inactive] = k[inactive]
            w_slp[inactive] = -r[inactive]
            if idx.size:
                w_int[inactive] += cross @ z_int[idx]
                w_slp[inactive] += cross @ z_slp[idx]

        if inactive.size:
            # Next event: earliest upcoming zero of an inactive dual line.
            roots = np.full(d, np.inf)
            descending = w_slp[inactive] < 0.0
            cand = inactive[descending]
            roots[cand] = -w_int[cand] / w_slp[cand]
            roots[roots <= s_cur + BREAKPOINT_TOL * max(1.0, s_cur)] = np.inf
            s_next = float(np.min(roots))
            if not np.isfinite(s_next):
                raise PathInconsistent(
                    f"no upcoming activation from active set {active}; "
                    f"the full set must eventually activate"
                )
            joining = np.flatnonzero(
                np.abs(roots - s_next) <= BREAKPOINT_TOL * max(1.0, s_next)
            )
        else:
            s_next = math.inf
            joining = np.empty(0, dtype=int)

        segment = PathSegment(
            s_lo=s_cur,
            s_hi=s_next,
            active=tuple(active),
            theta_star=fixed_point(instance, active).theta,
            z_intercept=z_int,
            z_slope=z_slp,
            w_intercept=w_int,
            w_slope=w_slp,
        )
        _verify_segment(instance, k, segment)
        segments.append(segment)

        if not inactive.size:
            break
        breakpoints.append(s_next)
        active = sorted(active + joining.tolist())
        s_cur = s_next

    path = LimitPath(
        breakpoints=np.array(breakpoints),
        segments=tuple(segments),
        s_star=breakpoints[-1],
    )
    return path


def _verify_segment(instance, k, segment: PathSegment) -> None:
    """Compare the affine formulas with a pointwise solve at the midpoint."""
    if math.isinf(segment.s_hi):
        mid = segment.s_lo + max(1.0, segment.s_lo)
    else:
        mid = 0.5 * (segment.s_lo + segment.s_hi)
    z_mid = segment.z_at(mid)
    w_mid = segment.w_at(mid)
    if np.min(z_mid) < -lcp.STRICT_TOL:
        raise NegativePrimalOnSegment(
            f"z(s) negative on segment [{segment.s_lo:.6g}, {segment.s_hi:.6g}): "
            f"min {np.min(z_mid):.3e}"
        )
    sol = solve_limit_lcp(instance, k, mid)
    scale = max(1.0, float(np.max(np.abs(z_mid))), float(np.max(np.abs(w_mid))))
    z_err = float(np.max(np.abs(z_mid - sol.z)))
    w_err = float(np.max(np.abs(w_mid - sol.w)))
    if max(z_err, w_err) > SEGMENT_CHECK_TOL * scale:
        raise PathInconsistent(
            f"segment [{segment.s_lo:.6g}, {segment.s_hi:.6g}) disagrees with "
            f"pointwise solve at s={mid:.6g}: z err {z_err:.3e}, w err {w_err:.3e}"
        )


def convergence_time_s_star(
    instance: ProblemInstance, k, verify: bool = True
) -> float:
    """Closed form max_i (M^{-1} k)_i / (M^{-1} r)_i.

    Past this rescaled time the full support is active and the limit sits
    at the unconstrained minimizer. When ``verify`` is set, the value is
    cross-checked against the last breakpoint of the computed path.
    """
    k = _check_k(instance, k)
    mk = np.linalg.solve(instance.M, k)
    mr = instance.minimizer()
    s_star = float(np.max(mk / mr))
    if verify:
        path = compute_path(instance, k)
        last = float(path.breakpoints[-1])
        if abs(last - s_star) > 1e-9 * max(1.0, abs(s_star)):
            raise PathInconsistent(
                f"path terminal breakpoint {last!r} disagrees with closed form "
                f"{s_star!r}"
            )
    return s_star


def theta_star_of_s(path: LimitPath, s: float) -> np.ndarray:
    """Value of the piecewise-constant limit process at rescaled time s.

    Undefined within 1e-12 of an activation time, where the limit jumps;
    such queries raise ``AtBreakpoint``.
    """
    if s <= 0.0:
        raise OutOfRange("the limit process is defined for s > 0")
    gaps = np.abs(path.breakpoints - s)
    if np.any(gaps < BREAKPOINT_TOL):
        j = int(np.argmin(gaps))
        raise AtBreakpoint(
            f"s={s!r} is within {BREAKPOINT_TOL} of breakpoint "
            f"s_{j + 1}={path.breakpoints[j]!r}"
        )
    return path.segment_at(s).theta_star
