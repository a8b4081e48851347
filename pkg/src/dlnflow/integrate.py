"""Embedded Dormand-Prince 5(4) integration with quartic dense output.

Plain explicit adaptive stepping: the systems integrated here have bounded
right-hand sides by construction, so no stiff machinery is needed. The
dense output is the classical order-4 continuous extension built from the
seven stages, evaluated in Horner form.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import StepUnderflow

# Dormand & Prince (1980) tableau; the first weight row propagates (order 5),
# E is the difference against the embedded order-4 row.
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_E = np.array(
    [71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40]
)
# Weights of the order-4 continuous extension (Hairer, Norsett & Wanner).
_D = np.array(
    [
        -12715105075 / 11282082432,
        0.0,
        87487479700 / 32700410799,
        -10690763975 / 1880347072,
        701980252875 / 199316789632,
        -1453857185 / 822651844,
        69997945 / 29380423,
    ]
)

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 5.0
_ORDER_EXP = -1.0 / 5.0


@dataclass
class IntegratorStats:
    """Counters exposed on every integration result."""

    steps: int = 0
    rejected: int = 0
    max_step: float = 0.0
    rhs_evaluations: int = 0


class DenseOutput:
    """Piecewise-quartic interpolant over the accepted steps."""

    def __init__(self, lefts: np.ndarray, widths: np.ndarray, cont: np.ndarray):
        self._lefts = lefts          # (nseg,)
        self._widths = widths        # (nseg,)
        self._cont = cont            # (nseg, 5, n)
        self.s_min = float(lefts[0])
        self.s_max = float(lefts[-1] + widths[-1])

    def __call__(self, s):
        s_arr = np.atleast_1d(np.asarray(s, dtype=float))
        lo, hi = self.s_min, self.s_max
        if np.any(s_arr < lo - 1e-12) or np.any(s_arr > hi + 1e-12):
            raise ValueError(f"dense output queried outside [{lo}, {hi}]")
        seg = np.clip(
            np.searchsorted(self._lefts, s_arr, side="right") - 1,
            0,
            len(self._lefts) - 1,
        )
        tau = (s_arr - self._lefts[seg]) / self._widths[seg]
        tau = np.clip(tau, 0.0, 1.0)
        c = self._cont[seg]          # (m, 5, n)
        tau = tau[:, None]
        omt = 1.0 - tau
        out = c[:, 0] + tau * (c[:, 1] + omt * (c[:, 2] + tau * (c[:, 3] + omt * c[:, 4])))
        if np.isscalar(s) or np.asarray(s).ndim == 0:
            return out[0]
        return out


@dataclass
class IntegrationResult:
    s: float
    y: np.ndarray
    dense: DenseOutput
    stats: IntegratorStats


def _initial_step(f, s0, y0, f0, s_end, scale, idx):
    """Hairer-style starting step guess, clipped to the span."""
    d0 = np.sqrt(np.mean((y0[idx] / scale) ** 2))
    d1 = np.sqrt(np.mean((f0[idx] / scale) ** 2))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, s_end - s0)
    f1 = f(s0 + h0, y0 + h0 * f0)
    d2 = np.sqrt(np.mean(((f1 - f0)[idx] / scale) ** 2)) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100 * h0, h1, s_end - s0)


def integrate(
    f: Callable[[float, np.ndarray], np.ndarray],
    s0: float,
    y0,
    s_end: float,
    rtol: float,
    atol: float,
    err_indices: slice | None = None,
    max_step: float = np.inf,
    step_callback: Callable[[float, np.ndarray, float, np.ndarray], None] | None = None,
) -> IntegrationResult:
    """Integrate y' = f(s, y) from s0 to s_end.

    Error control is mixed (atol + rtol * |y|), applied to the components
    selected by ``err_indices`` (all by default), RMS-normed. After each
    accepted step ``step_callback(s_old, y_old, s_new, y_new)`` may raise to
    abort with a domain-specific diagnosis.
    """
    y = np.array(y0, dtype=float)
    n = y.size
    idx = err_indices if err_indices is not None else slice(None)
    if s_end <= s0:
        raise ValueError("s_end must exceed s0")

    stats = IntegratorStats()
    k = np.empty((7, n))
    k[0] = f(s0, y)
    stats.rhs_evaluations += 2  # includes the probe in _initial_step

    scale0 = atol + rtol * np.abs(y[idx])
    h = min(_initial_step(f, s0, y, k[0], s_end, scale0, idx), max_step)

    s = s0
    lefts, widths, conts = [], [], []

    while s < s_end - 1e-14 * max(1.0, abs(s_end)):
        h = min(h, s_end - s, max_step)
        if h < 1e-14 * max(1.0, abs(s)):
            raise StepUnderflow(f"step {h:.3e} underflowed at s={s:.6g}")

        for i in range(1, 7):
            k[i] = f(s + _C[i] * h, y + h * (_A[i] @ k[:i]))
        stats.rhs_evaluations += 6
        y_new = y + h * (_B @ k)

        err_vec = h * (_E @ k)
        scale = atol + rtol * np.maximum(np.abs(y[idx]), np.abs(y_new[idx]))
        with np.errstate(over="ignore", invalid="ignore"):
            err_norm = float(np.sqrt(np.mean((err_vec[idx] / scale) ** 2)))

        if not np.isfinite(err_norm):
            stats.rejected += 1
            h *= _MIN_FACTOR
            continue
        if err_norm > 1.0:
            stats.rejected += 1
            h *= max(_MIN_FACTOR, _SAFETY * err_norm ** _ORDER_EXP)
            continue

        ydiff = y_new - y
        bspl = h * k[0] - ydiff
        cont = np.stack(
            [y, ydiff, bspl, ydiff - h * k[6] - bspl, h * (_D @ k)]
        )
        lefts.append(s)
        widths.append(h)
        conts.append(cont)

        if step_callback is not None:
            step_callback(s, y, s + h, y_new)

        stats.steps += 1
        stats.max_step = max(stats.max_step, h)
        s += h
        y = y_new
        k[0] = k[6]  # FSAL

        if err_norm == 0.0:
            factor = _MAX_FACTOR
        else:
            factor = min(_MAX_FACTOR, max(_MIN_FACTOR, _SAFETY * err_norm ** _ORDER_EXP))
        h *= factor

    dense = DenseOutput(np.array(lefts), np.array(widths), np.array(conts))
    return IntegrationResult(s=s, y=y, dense=dense, stats=stats)
