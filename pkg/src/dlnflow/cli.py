"""Command-line interface.

Exit codes: 0 success, 2 assumption/input violation, 3 numerical failure,
4 sampling budget exceeded.
"""

from __future__ import annotations

import functools
import json
import sys
from pathlib import Path

import click
import numpy as np

from . import dynamics, experiments, fixed_points, lcp, limit_path, problem
from .errors import DlnFlowError, exit_code


def _vector(text: str | None, d: int, name: str) -> np.ndarray:
    if text is None:
        return np.ones(d)
    values = np.array([float(x) for x in text.split(",")], dtype=float)
    if values.size != d:
        raise click.UsageError(f"--{name} needs {d} comma-separated values")
    return values


def _epsilon_list(text: str) -> list[float]:
    return [float(x) for x in text.split(",")]


def handles_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except DlnFlowError as exc:
            partial = getattr(exc, "partial_report", None)
            if partial is not None and partial.rows:
                out = Path("compare.partial.json")
                experiments.write_json(out, partial.to_json_dict())
                click.echo(f"flushed partial results to {out}", err=True)
            click.echo(f"error: {exc}", err=True)
            sys.exit(exit_code(exc))

    return wrapper


@click.group()
@click.option("--out-dir", default=".", show_default=True,
              help="Directory for emitted files.")
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]),
              default="csv", show_default=True, help="Tabular output format.")
@click.option("--seed", type=int, default=None, help="Default generator seed.")
@click.pass_context
def main(ctx, out_dir, fmt, seed):
    """Simulate anti-correlated regression gradient flows and compare them
    with their small-initialization limit."""
    ctx.ensure_object(dict)
    ctx.obj["out_dir"] = Path(out_dir)
    ctx.obj["format"] = fmt
    ctx.obj["seed"] = seed


@main.command()
@click.option("--n", type=int, default=None, help="Samples (rejection generator).")
@click.option("--d", type=int, required=True, help="Dimension.")
@click.option("--seed", type=int, default=None, help="Generator seed.")
@click.option("--generator", type=click.Choice(["rejection", "direct"]),
              default="direct", show_default=True)
@click.option("--offdiag-scale", type=float, default=None,
              help="Off-diagonal magnitude (direct generator); default "
                   "adapts to d.")
@click.option("--max-attempts", type=int, default=10_000, show_default=True,
              help="Rejection budget.")
@click.option("--out", type=click.Path(), required=True, help="Instance JSON path.")
@click.pass_context
@handles_errors
def gen(ctx, n, d, seed, generator, offdiag_scale, max_attempts, out):
    """Generate a valid instance and write it as JSON."""
    if seed is None:
        seed = ctx.obj.get("seed")
    if seed is None:
        raise click.UsageError("provide --seed (command or group level)")
    if generator == "direct":
        instance, _ = problem.generate_direct(d, seed, offdiag_scale=offdiag_scale)
    else:
        if n is None:
            raise click.UsageError("--n is required for the rejection generator")
        data = problem.generate_rejection(n, d, seed, max_attempts=max_attempts)
        instance = problem.from_data(data)
        instance = problem.ProblemInstance(
            M=instance.M, r=instance.r, data=data,
            meta={"seed": seed, "generator": "rejection", "n": n, "d": d},
        )
    report = problem.check_positive_definite(instance)
    problem.save_instance(instance, out)
    click.echo(f"wrote {out} (d={instance.d}, lambda_min={report.lambda_min:.6g})")


@main.command("lcp-solve")
@click.option("--input", "input_path", type=click.Path(exists=True), required=True,
              help='JSON file {"q": [...], "M": [[...]]}.')
@handles_errors
def lcp_solve(input_path):
    """Solve the complementarity problem for a (q, M) pair."""
    obj = json.loads(Path(input_path).read_text())
    solution = lcp.solve_lcp(np.array(obj["q"], dtype=float),
                             np.array(obj["M"], dtype=float))
    click.echo(json.dumps({
        "w": solution.w.tolist(),
        "z": solution.z.tolist(),
        "support": list(solution.support),
    }, indent=2))


@main.command("fixed-points")
@click.option("--instance", "instance_path", type=click.Path(exists=True),
              required=True)
@handles_errors
def fixed_points_cmd(instance_path):
    """Print all 2^d stationary points of an instance as JSON."""
    instance = problem.load_instance(instance_path)
    points = fixed_points.enumerate_fixed_points(instance)
    click.echo(json.dumps({
        "schema": "dlnflow-fixed-points v1",
        "points": [
            {"support": list(p.support), "theta": p.theta.tolist(),
             "residual": p.residual}
            for p in points
        ],
    }, indent=2))


@main.command()
@click.option("--instance", "instance_path", type=click.Path(exists=True),
              required=True)
@click.option("--epsilon", type=float, required=True)
@click.option("--C", "c_text", default=None, help="Comma-separated, default all 1.")
@click.option("--k", "k_text", default=None, help="Comma-separated, default all 1.")
@click.option("--s-max", type=float, required=True)
@click.option("--grid", type=int, default=dynamics.DEFAULT_GRID_POINTS,
              show_default=True)
@click.option("--tol", type=float, default=dynamics.DEFAULT_TOL, show_default=True)
@click.option("--out", type=click.Path(), required=True, help="Trajectory CSV path.")
@handles_errors
def simulate(instance_path, epsilon, c_text, k_text, s_max, grid, tol, out):
    """Integrate the flow and write the sampled trajectory as CSV."""
    instance = problem.load_instance(instance_path)
    d = instance.d
    init = problem.Initialization(
        C=_vector(c_text, d, "C"), k=_vector(k_text, d, "k"), epsilon=epsilon
    )
    traj = dynamics.simulate(
        instance, init, s_max, s_grid=np.linspace(0.0, s_max, grid), tol=tol
    )
    losses = traj.loss_values()
    averages = np.zeros_like(traj.theta)
    positive = traj.s > 0
    averages[positive] = traj.integral[positive] / traj.s[positive, None]
    header = (
        ["s", "t"]
        + [f"theta_{i + 1}" for i in range(d)]
        + [f"w_{i + 1}" for i in range(d)]
        + ["loss"]
        + [f"avg_{i + 1}" for i in range(d)]
    )
    rows = np.column_stack([traj.s, traj.t, traj.theta, traj.w, losses, averages])
    experiments.write_csv(out, "trajectory", header, rows)
    click.echo(
        f"wrote {out} ({len(traj)} samples, {traj.stats.steps} steps, "
        f"{traj.stats.rejected} rejected)"
    )


@main.command("limit-path")
@click.option("--instance", "instance_path", type=click.Path(exists=True),
              required=True)
@click.option("--k", "k_text", default=None, help="Comma-separated, default all 1.")
@click.option("--out-json", type=click.Path(), required=True)
@click.option("--out-csv", type=click.Path(), default=None,
              help="Optional grid sampling of mu(s) and the limit process.")
@click.option("--grid", type=int, default=200, show_default=True)
@handles_errors
def limit_path_cmd(instance_path, k_text, out_json, out_csv, grid):
    """Compute breakpoints, active sets and affine pieces of the limit."""
    instance = problem.load_instance(instance_path)
    k = _vector(k_text, instance.d, "k")
    path = limit_path.compute_path(instance, k)
    experiments.write_json(out_json, {
        "schema": "dlnflow-limit-path v1",
        "breakpoints": path.breakpoints.tolist(),
        "s_star": path.s_star,
        "active_sets": [list(seg.active) for seg in path.segments],
        "fixed_points": [seg.theta_star.tolist() for seg in path.segments],
    })
    click.echo(f"wrote {out_json} ({len(path.breakpoints)} breakpoints, "
               f"s_star={path.s_star:.6g})")
    if out_csv is not None:
        s_grid = np.linspace(0.0, 1.5 * path.s_star, grid)
        theta, _, mu_vals = experiments._limit_on_grid(instance, path, s_grid)
        d = instance.d
        header = (["s"] + [f"mu_{i + 1}" for i in range(d)]
                  + [f"theta_star_{i + 1}" for i in range(d)])
        rows = np.column_stack([s_grid, mu_vals, theta])
        experiments.write_csv(out_csv, "limit-path", header, rows)
        click.echo(f"wrote {out_csv}")


def _config_from_options(ctx, config, instance_path, epsilons, c_text, k_text,
                         s_max, grid, tol, eta_fraction=None):
    if config is not None:
        cfg = experiments.ExperimentConfig.from_json(config)
    else:
        if instance_path is None or epsilons is None:
            raise click.UsageError("provide --config or both --instance and "
                                   "--epsilons")
        cfg = experiments.ExperimentConfig(
            instance=instance_path,
            epsilons=_epsilon_list(epsilons),
            C=None if c_text is None else [float(x) for x in c_text.split(",")],
            k=None if k_text is None else [float(x) for x in k_text.split(",")],
            s_max=s_max,
            grid_points=grid,
            tol=tol,
            out_dir=str(ctx.obj["out_dir"]),
            format=ctx.obj["format"],
        )
        if eta_fraction is not None:
            cfg.eta_fraction = eta_fraction
    return cfg


_common_options = [
    click.option("--config", type=click.Path(exists=True), default=None,
                 help="JSON experiment config; overrides the other flags."),
    click.option("--instance", "instance_path", type=click.Path(exists=True),
                 default=None),
    click.option("--epsilons", default=None, help="Comma-separated list."),
    click.option("--C", "c_text", default=None),
    click.option("--k", "k_text", default=None),
    click.option("--s-max", type=float, default=None),
    click.option("--grid", type=int, default=400, show_default=True),
    click.option("--tol", type=float, default=dynamics.DEFAULT_TOL,
                 show_default=True),
]


def common_options(fn):
    for option in reversed(_common_options):
        fn = option(fn)
    return fn


@main.command()
@common_options
@click.pass_context
@handles_errors
def compare(ctx, config, instance_path, epsilons, c_text, k_text, s_max, grid, tol):
    """Compare simulations against the limit process and its average."""
    cfg = _config_from_options(ctx, config, instance_path, epsilons, c_text,
                               k_text, s_max, grid, tol)
    instance = cfg.resolve_instance()
    C, k = cfg.vectors(instance.d)
    report = experiments.run_compare(
        instance, C, k, cfg.epsilons, s_max=cfg.s_max,
        grid_points=cfg.grid_points, tol=cfg.tol,
        delta_fraction=cfg.delta_fraction, eta_fraction=cfg.eta_fraction,
    )
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    out = out_dir / "compare.json"
    experiments.write_json(out, report.to_json_dict())
    click.echo(f"wrote {out}")
    if cfg.format == "csv":
        rows = [
            [r.epsilon, r.state_error, r.loss_error, r.average_error,
             r.hitting_ratio if r.hitting_ratio is not None else float("nan")]
            for r in report.rows if r.hitting_reached
        ]
        out_csv = out_dir / "compare.csv"
        experiments.write_csv(
            out_csv, "compare",
            ["epsilon", "state_error", "loss_error", "average_error",
             "hitting_ratio"],
            rows,
        )
        click.echo(f"wrote {out_csv}")
    for row in report.rows:
        click.echo(
            f"epsilon={row.epsilon:.0e}  state={row.state_error:.3e}  "
            f"loss={row.loss_error:.3e}  average={row.average_error:.3e}"
        )


@main.command("hitting-time")
@common_options
@click.option("--eta-fraction", type=float, default=0.1, show_default=True)
@click.pass_context
@handles_errors
def hitting_time_cmd(ctx, config, instance_path, epsilons, c_text, k_text,
                     s_max, grid, tol, eta_fraction):
    """Measure hitting times of the minimizer ball across epsilons."""
    cfg = _config_from_options(ctx, config, instance_path, epsilons, c_text,
                               k_text, s_max, grid, tol, eta_fraction)
    instance = cfg.resolve_instance()
    C, k = cfg.vectors(instance.d)
    table = experiments.run_hitting(
        instance, C, k, cfg.epsilons, cfg.eta_fraction,
        s_cap=cfg.s_max, tol=cfg.tol,
    )
    out_dir = Path(cfg.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    out = out_dir / "hitting.json"
    experiments.write_json(out, table.to_json_dict())
    click.echo(f"wrote {out} (target s_star={table.s_star:.6g})")
    if cfg.format == "csv":
        rows = [[r.epsilon, r.ratio, r.relative_error]
                for r in table.rows if r.reached]
        out_csv = out_dir / "hitting.csv"
        experiments.write_csv(out_csv, "hitting",
                              ["epsilon", "ratio", "relative_error"], rows)
        click.echo(f"wrote {out_csv}")
    for row in table.rows:
        if row.reached:
            click.echo(f"epsilon={row.epsilon:.0e}  ratio={row.ratio:.6g}  "
                       f"rel_error={row.relative_error:.3%}")
        else:
            click.echo(f"epsilon={row.epsilon:.0e}  NOT REACHED")


@main.command()
@common_options
@click.pass_context
@handles_errors
def figure1(ctx, config, instance_path, epsilons, c_text, k_text, s_max, grid, tol):
    """Emit phase-portrait data (d = 2): field, fixed points, trajectories."""
    cfg = _config_from_options(ctx, config, instance_path, epsilons, c_text,
                               k_text, s_max, grid, tol)
    instance = cfg.resolve_instance()
    C, k = cfg.vectors(instance.d)
    paths = experiments.run_figure1(
        instance, C, k, cfg.epsilons, cfg.out_dir,
        s_max=cfg.s_max, grid_points=cfg.grid_points, tol=cfg.tol,
    )
    for name, path in paths.items():
        click.echo(f"wrote {path}")


if __name__ == "__main__":
    main()
