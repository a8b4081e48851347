"""Experiment harnesses: simulate, compare against the limit, emit files.

Everything here is deterministic for a fixed configuration: instances come
from seeded generators or files, tolerances are explicit, and all outputs
are written atomically (temp file + rename) with a schema version header.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import dynamics, fixed_points, limit_path, problem
from .errors import DimensionMismatch, DomainError, NotReached
from .problem import Initialization, ProblemInstance

CSV_SCHEMA = "dlnflow-csv v1"


# -- output helpers ----------------------------------------------------------

def write_csv(path, kind: str, header: list[str], rows) -> Path:
    """Write a CSV with a version/kind comment header, atomically."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", newline="") as fh:
        fh.write(f"# {CSV_SCHEMA} {kind}\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            values = [float(v) for v in row]
            if not all(math.isfinite(v) for v in values):
                raise DomainError(f"non-finite value in {kind} row: {values}")
            writer.writerow(f"{v!r}" for v in values)
    os.replace(tmp, path)
    return path


def write_json(path, obj) -> Path:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(obj, indent=2))
    os.replace(tmp, path)
    return path


# -- configuration -----------------------------------------------------------

@dataclass
class ExperimentConfig:
    """Declarative description of one experiment run.

    ``instance`` is either a path to an instance JSON or a generator spec
    like {"generator": "direct", "d": 4, "seed": 7} /
    {"generator": "rejection", "n": 5, "d": 4, "seed": 7}.
    """

    instance: str | dict
    epsilons: list[float]
    C: list[float] | None = None
    k: list[float] | None = None
    s_max: float | None = None
    grid_points: int = 400
    tol: float = dynamics.DEFAULT_TOL
    delta_fraction: float = 0.05
    eta_fraction: float = 0.1
    out_dir: str = "."
    format: str = "csv"

    def __post_init__(self):
        eps = [float(e) for e in self.epsilons]
        if not eps:
            raise DomainError("epsilons must be nonempty")
        if len(set(eps)) != len(eps):
            raise DomainError("epsilons must be distinct")
        if any(not (0.0 < e < 1.0) for e in eps):
            raise DomainError("epsilons must lie strictly inside (0, 1)")
        if self.grid_points < 2:
            raise DomainError("grid_points must be at least 2")
        if self.format not in ("csv", "json"):
            raise DomainError(f"unknown format {self.format!r}")
        self.epsilons = eps

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        obj = json.loads(Path(path).read_text())
        known = set(cls.__dataclass_fields__)
        unknown = set(obj) - known
        if unknown:
            raise DomainError(f"unknown config keys: {sorted(unknown)}")
        return cls(**obj)

    def resolve_instance(self) -> ProblemInstance:
        if isinstance(self.instance, str):
            return problem.load_instance(self.instance)
        spec = dict(self.instance)
        kind = spec.pop("generator")
        if kind == "direct":
            inst, _ = problem.generate_direct(**spec)
            return inst
        if kind == "rejection":
            data = problem.generate_rejection(**spec)
            inst = problem.from_data(data)
            meta = dict(inst.meta)
            meta.update(seed=spec.get("seed"), generator="rejection")
            return ProblemInstance(M=inst.M, r=inst.r, data=data, meta=meta)
        raise DomainError(f"unknown generator {kind!r}")

    def vectors(self, d: int) -> tuple[np.ndarray, np.ndarray]:
        C = np.ones(d) if self.C is None else np.asarray(self.C, dtype=float)
        k = np.ones(d) if self.k is None else np.asarray(self.k, dtype=float)
        return C, k


# -- limit evaluation on a grid ----------------------------------------------

def _limit_on_grid(instance, path: limit_path.LimitPath, grid: np.ndarray):
    """theta*(I(s)), f(theta*(I(s))) and mu(s) for every positive grid point."""
    theta = np.zeros((grid.size, instance.d))
    losses = np.zeros(grid.size)
    mu_vals = np.zeros((grid.size, instance.d))
    seg_idx = np.searchsorted(path.breakpoints, grid, side="right")
    for j, seg in enumerate(path.segments):
        mask = seg_idx == j
        if not mask.any():
            continue
        theta[mask] = seg.theta_star
        losses[mask] = problem.loss(instance, seg.theta_star)
        mu_vals[mask] = seg.z_intercept[None, :] + grid[mask, None] * seg.z_slope
    positive = grid > 0
    mu_vals[positive] /= grid[positive, None]
    mu_vals[~positive] = 0.0
    return theta, losses, mu_vals


# -- comparison experiment -----------------------------------------------------

@dataclass(frozen=True)
class ComparisonRow:
    """Sup-norm gaps between one simulation and the asymptotic prediction."""

    epsilon: float
    state_error: float
    loss_error: float
    average_error: float
    hitting_ratio: float | None
    hitting_reached: bool


@dataclass(frozen=True)
class ComparisonReport:
    rows: tuple[ComparisonRow, ...]          # ordered by decreasing epsilon
    excluded_windows: tuple[tuple[float, float], ...]
    average_window: tuple[float, float]
    breakpoints: tuple[float, ...]
    s_star: float
    eta: float
    state_monotone: bool | None
    loss_monotone: bool | None
    average_monotone: bool | None

    def to_json_dict(self) -> dict:
        return {
            "schema": "dlnflow-compare v1",
            "s_star": self.s_star,
            "breakpoints": list(self.breakpoints),
            "excluded_windows": [list(w) for w in self.excluded_windows],
            "average_window": list(self.average_window),
            "eta": self.eta,
            "state_monotone": self.state_monotone,
            "loss_monotone": self.loss_monotone,
            "average_monotone": self.average_monotone,
            "rows": [
                {
                    "epsilon": row.epsilon,
                    "state_error": row.state_error,
                    "loss_error": row.loss_error,
                    "average_error": row.average_error,
                    "hitting_ratio": row.hitting_ratio,
                    "hitting_reached": row.hitting_reached,
                }
                for row in self.rows
            ],
        }


def _monotone_decreasing(values: list[float]) -> bool:
    return all(b < a for a, b in zip(values, values[1:]))


def run_compare(
    instance: ProblemInstance,
    C,
    k,
    epsilons,
    *,
    s_max: float | None = None,
    grid_points: int = 400,
    tol: float = dynamics.DEFAULT_TOL,
    delta_fraction: float = 0.05,
    eta_fraction: float = 0.1,
) -> ComparisonReport:
    """Per-epsilon sup-norm gaps to the limiting process and its average.

    The state and loss gaps are taken over the grid minus radius-delta
    windows around each activation time, where uniform convergence provably
    fails; the windows are recorded in the report. The average gap is taken
    over [0.1 s*, s_max]. With several epsilons (ordered decreasing) the
    report flags whether each gap decreases monotonically.
    """
    C = np.asarray(C, dtype=float)
    k = np.asarray(k, dtype=float)
    path = limit_path.compute_path(instance, k)
    s_star = path.s_star
    if s_max is None:
        s_max = 1.5 * s_star
    grid = np.linspace(0.0, s_max, grid_points)

    delta = delta_fraction * s_star
    windows = tuple((float(b - delta), float(b + delta)) for b in path.breakpoints)
    state_mask = grid > 0
    for lo, hi in windows:
        state_mask &= ~((grid >= lo) & (grid <= hi))
    avg_lo = 0.1 * s_star
    avg_mask = (grid >= avg_lo) & (grid <= s_max)

    limit_theta, limit_loss, limit_mu = _limit_on_grid(instance, path, grid)
    eta = eta_fraction * float(np.min(instance.minimizer()))

    def partial_report(rows):
        return ComparisonReport(
            rows=tuple(rows),
            excluded_windows=windows,
            average_window=(float(avg_lo), float(s_max)),
            breakpoints=tuple(float(b) for b in path.breakpoints),
            s_star=float(s_star),
            eta=float(eta),
            state_monotone=None,
            loss_monotone=None,
            average_monotone=None,
        )

    rows = []
    for eps in sorted(epsilons, reverse=True):
        init = Initialization(C=C, k=k, epsilon=float(eps))
        try:
            traj = dynamics.simulate(instance, init, s_max, s_grid=grid, tol=tol)
        except Exception as exc:
            # Keep what already completed available to the caller.
            exc.partial_report = partial_report(rows)
            raise
        state_err = float(
            np.max(np.abs(traj.theta[state_mask] - limit_theta[state_mask]))
        )
        loss_err = float(
            np.max(np.abs(traj.loss_values()[state_mask] - limit_loss[state_mask]))
        )
        avg = traj.integral[avg_mask] / grid[avg_mask, None]
        avg_err = float(np.max(np.abs(avg - limit_mu[avg_mask])))
        try:
            ratio = dynamics.hitting_time_on(traj, eta) / (-init.log_epsilon)
            reached = True
        except NotReached:
            ratio, reached = None, False
        rows.append(
            ComparisonRow(
                epsilon=float(eps),
                state_error=state_err,
                loss_error=loss_err,
                average_error=avg_err,
                hitting_ratio=ratio,
                hitting_reached=reached,
            )
        )

    if len(rows) >= 2:
        state_mono = _monotone_decreasing([r.state_error for r in rows])
        loss_mono = _monotone_decreasing([r.loss_error for r in rows])
        avg_mono = _monotone_decreasing([r.average_error for r in rows])
    else:
        state_mono = loss_mono = avg_mono = None

    return ComparisonReport(
        rows=tuple(rows),
        excluded_windows=windows,
        average_window=(float(avg_lo), float(s_max)),
        breakpoints=tuple(float(b) for b in path.breakpoints),
        s_star=float(s_star),
        eta=float(eta),
        state_monotone=state_mono,
        loss_monotone=loss_mono,
        average_monotone=avg_mono,
    )


# -- hitting-time experiment ---------------------------------------------------

@dataclass(frozen=True)
class HittingRow:
    epsilon: float
    ratio: float | None
    relative_error: float | None
    reached: bool


@dataclass(frozen=True)
class HittingTable:
    rows: tuple[HittingRow, ...]
    s_star: float
    eta: float

    def to_json_dict(self) -> dict:
        return {
            "schema": "dlnflow-hitting v1",
            "s_star": self.s_star,
            "eta": self.eta,
            "rows": [
                {
                    "epsilon": r.epsilon,
                    "ratio": r.ratio,
                    "relative_error": r.relative_error,
                    "reached": r.reached,
                }
                for r in self.rows
            ],
        }


def run_hitting(
    instance: ProblemInstance,
    C,
    k,
    epsilons,
    eta_fraction: float,
    *,
    s_cap: float | None = None,
    tol: float = dynamics.DEFAULT_TOL,
) -> HittingTable:
    """Rescaled hitting times of the eta-ball around the minimizer.

    eta is eta_fraction times the smallest minimizer coordinate, which
    keeps it inside the regime where the limiting ratio is insensitive to
    eta. Rows are ordered by decreasing epsilon and carry the relative gap
    to the predicted convergence time.
    """
    if not (0.0 < eta_fraction < 1.0):
        raise DomainError("eta_fraction must lie strictly between 0 and 1")
    C = np.asarray(C, dtype=float)
    k = np.asarray(k, dtype=float)
    s_star = limit_path.convergence_time_s_star(instance, k)
    if s_cap is None:
        s_cap = 2.0 * s_star
    eta = eta_fraction * float(np.min(instance.minimizer()))

    rows = []
    for eps in sorted(epsilons, reverse=True):
        init = Initialization(C=C, k=k, epsilon=float(eps))
        try:
            tau = dynamics.hitting_time(instance, init, eta, s_cap, tol=tol)
            ratio = tau / (-init.log_epsilon)
            rel = abs(ratio - s_star) / s_star
            rows.append(HittingRow(float(eps), ratio, rel, True))
        except NotReached:
            rows.append(HittingRow(float(eps), None, None, False))
    return HittingTable(rows=tuple(rows), s_star=float(s_star), eta=float(eta))


# -- phase-portrait experiment ---------------------------------------------------

def run_figure1(
    instance: ProblemInstance,
    C,
    k,
    epsilons,
    out_dir,
    *,
    field_points: int = 25,
    s_max: float | None = None,
    grid_points: int = 400,
    tol: float = dynamics.DEFAULT_TOL,
) -> dict[str, str]:
    """Phase-portrait data for two-dimensional instances.

    Emits the vector field of the flow on a rectangular grid, all four
    stationary points, and one trajectory file per epsilon. Rendering is
    left to external tools.
    """
    if instance.d != 2:
        raise DimensionMismatch(f"phase portrait requires d = 2, got {instance.d}")
    C = np.asarray(C, dtype=float)
    k = np.asarray(k, dtype=float)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if s_max is None:
        s_max = 2.0 * limit_path.convergence_time_s_star(instance, k)

    points = fixed_points.enumerate_fixed_points(instance)
    hi = 1.25 * max(float(np.max(p.theta)) for p in points)
    hi = max(hi, 1e-3)

    axis = np.linspace(0.0, hi, field_points)
    field_rows = []
    for th1 in axis:
        for th2 in axis:
            theta = np.array([th1, th2])
            v = theta * (instance.r - instance.M @ theta)
            field_rows.append([th1, th2, v[0], v[1]])
    paths = {}
    paths["field"] = str(
        write_csv(
            out_dir / "field.csv",
            "figure1-field",
            ["theta_1", "theta_2", "v_1", "v_2"],
            field_rows,
        )
    )

    paths["fixed_points"] = str(
        write_json(
            out_dir / "fixed_points.json",
            {
                "schema": "dlnflow-fixed-points v1",
                "points": [
                    {
                        "support": list(p.support),
                        "theta": p.theta.tolist(),
                        "residual": p.residual,
                    }
                    for p in points
                ],
            },
        )
    )

    for eps in sorted(epsilons, reverse=True):
        init = Initialization(C=C, k=k, epsilon=float(eps))
        traj = dynamics.simulate(
            instance, init, s_max, s_grid=np.linspace(0.0, s_max, grid_points),
            tol=tol,
        )
        rows = np.column_stack([traj.s, traj.t, traj.theta, traj.w])
        name = f"trajectory_eps_{eps:.0e}.csv"
        paths[name] = str(
            write_csv(
                out_dir / name,
                "figure1-trajectory",
                ["s", "t", "theta_1", "theta_2", "w_1", "w_2"],
                rows,
            )
        )
    return paths
