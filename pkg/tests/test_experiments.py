import json

import numpy as np
import pytest

from dlnflow import (
    ExperimentConfig,
    ProblemInstance,
    compute_path,
    from_data,
    generate_direct,
    generate_rejection,
    run_compare,
    run_figure1,
    run_hitting,
    theta_star_of_s,
)
from dlnflow.errors import DimensionMismatch, DomainError
from dlnflow.experiments import write_csv

ONES2 = np.ones(2)


def scalar_logistic(t, theta0, rate=1.0, limit=1.0):
    c = limit / theta0 - 1.0
    return limit / (1.0 + c * np.exp(-rate * t))


@pytest.fixture(scope="module")
def fig2_instance():
    return from_data(generate_rejection(n=5, d=4, seed=20))


@pytest.fixture(scope="module")
def scalar_instance():
    return ProblemInstance(M=[[1.0]], r=[1.0])


@pytest.fixture(scope="module")
def portrait(tmp_path_factory):
    instance = from_data(generate_rejection(n=3, d=2, seed=5))
    out = tmp_path_factory.mktemp("fig1")
    paths = run_figure1(instance, ONES2, ONES2, [1e-8, 1e-20], out,
                        field_points=10, tol=1e-11)
    return instance, out, paths


class TestRunCompare:
    def test_sharper_approximation_at_smaller_epsilon(self, fig2_instance):
        report = run_compare(
            fig2_instance, np.ones(4), np.ones(4), [1e-8, 1e-20], tol=1e-11
        )
        assert [row.epsilon for row in report.rows] == [1e-8, 1e-20]
        assert report.rows[1].state_error < report.rows[0].state_error
        assert report.rows[1].loss_error < report.rows[0].loss_error
        assert report.state_monotone and report.loss_monotone

    def test_windows_follow_breakpoints(self, separable_instance):
        report = run_compare(separable_instance, ONES2, ONES2, [1e-10],
                             delta_fraction=0.05)
        assert report.breakpoints == (0.5, 1.0)
        np.testing.assert_allclose(
            report.excluded_windows, [(0.45, 0.55), (0.95, 1.05)]
        )

    def test_separable_state_error_matches_closed_form(self, separable_instance):
        # Independent oracle: both coordinates follow explicit logistics, so
        # the reported sup gap can be recomputed from the closed form alone.
        eps = 1e-12
        report = run_compare(separable_instance, ONES2, ONES2, [eps],
                             s_max=1.5, grid_points=400, tol=1e-11)
        path = compute_path(separable_instance, ONES2)
        grid = np.linspace(0.0, 1.5, 400)
        mask = grid > 0
        for lo, hi in report.excluded_windows:
            mask &= ~((grid >= lo) & (grid <= hi))
        t = grid * np.log(1.0 / eps)
        sim = np.column_stack(
            [scalar_logistic(t, eps, rate=2.0, limit=2.0),
             scalar_logistic(t, eps, rate=1.0, limit=1.0)]
        )
        limit = np.array([theta_star_of_s(path, s) for s in grid[mask]])
        expected = float(np.max(np.abs(sim[mask] - limit)))
        assert report.rows[0].state_error == pytest.approx(expected, abs=1e-6)

    def test_single_epsilon_has_no_flags(self, separable_instance):
        report = run_compare(separable_instance, ONES2, ONES2, [1e-10])
        assert len(report.rows) == 1
        assert report.state_monotone is None
        assert report.loss_monotone is None
        assert report.average_monotone is None

    def test_deterministic(self, separable_instance):
        a = run_compare(separable_instance, ONES2, ONES2, [1e-8, 1e-12])
        b = run_compare(separable_instance, ONES2, ONES2, [1e-8, 1e-12])
        assert a == b

    def test_json_dict_serializable(self, separable_instance):
        report = run_compare(separable_instance, ONES2, ONES2, [1e-10])
        text = json.dumps(report.to_json_dict())
        assert "state_error" in text


class TestRunHitting:
    def test_scalar_ratios_match_closed_form(self, scalar_instance):
        table = run_hitting(scalar_instance, [1.0], [1.0], [1e-8, 1e-20],
                            eta_fraction=0.1, tol=1e-11)
        assert table.s_star == pytest.approx(1.0)
        for row in table.rows:
            log_term = np.log(1.0 / row.epsilon)
            exact = np.log(
                (1 - row.epsilon) * (1 - 0.1) / (row.epsilon * 0.1)
            ) / log_term
            assert row.reached
            assert row.ratio == pytest.approx(exact, rel=1e-5)

    def test_ratio_approaches_target(self, scalar_instance):
        table = run_hitting(scalar_instance, [1.0], [1.0], [1e-8, 1e-14, 1e-20],
                            eta_fraction=0.1, tol=1e-11)
        gaps = [row.relative_error for row in table.rows]
        assert gaps[0] > gaps[1] > gaps[2]

    def test_eta_gap_matches_closed_form_and_shrinks(self, scalar_instance):
        # The limiting ratio does not depend on eta; at finite epsilon the
        # scalar gap between eta-fractions f and f' is exactly
        # [ln((1-f)/f) - ln((1-f')/f')] / ln(1/eps).
        gaps = {}
        for eps in (1e-8, 1e-20):
            ratios = {}
            for frac in (0.1, 0.9):
                table = run_hitting(scalar_instance, [1.0], [1.0], [eps],
                                    eta_fraction=frac, tol=1e-11)
                ratios[frac] = table.rows[0].ratio
            gaps[eps] = abs(ratios[0.1] - ratios[0.9])
            exact = 2 * np.log(9.0) / np.log(1.0 / eps)
            assert gaps[eps] == pytest.approx(exact, rel=1e-4)
        assert gaps[1e-20] < gaps[1e-8]

    def test_not_reached_flagged(self, scalar_instance):
        table = run_hitting(scalar_instance, [1.0], [1.0], [1e-8],
                            eta_fraction=0.1, s_cap=0.5)
        assert not table.rows[0].reached
        assert table.rows[0].ratio is None

    def test_eta_fraction_validated(self, scalar_instance):
        with pytest.raises(DomainError):
            run_hitting(scalar_instance, [1.0], [1.0], [1e-8], eta_fraction=1.5)


class TestRunFigure1:
    def test_files_exist(self, portrait):
        _, out, paths = portrait
        assert set(paths) == {
            "field", "fixed_points",
            "trajectory_eps_1e-08.csv", "trajectory_eps_1e-20.csv",
        }
        assert (out / "field.csv").exists()

    def test_field_matches_flow(self, portrait):
        instance, out, _ = portrait
        rows = np.loadtxt(out / "field.csv", delimiter=",", skiprows=2)
        assert rows.shape == (100, 4)
        theta = rows[37, :2]
        expected = theta * (instance.r - instance.M @ theta)
        np.testing.assert_allclose(rows[37, 2:], expected, atol=1e-12)

    def test_origin_among_fixed_points(self, portrait):
        _, out, _ = portrait
        obj = json.loads((out / "fixed_points.json").read_text())
        assert len(obj["points"]) == 4
        assert [0.0, 0.0] in [p["theta"] for p in obj["points"]]

    def test_trajectories_terminate_at_minimizer(self, portrait):
        instance, out, _ = portrait
        target = instance.minimizer()
        for name in ("trajectory_eps_1e-08.csv", "trajectory_eps_1e-20.csv"):
            rows = np.loadtxt(out / name, delimiter=",", skiprows=2)
            final = rows[-1, 2:4]
            assert np.linalg.norm(final - target) <= 1e-3

    def test_trajectories_visit_every_saddle(self, portrait):
        # The flow lingers near each stationary point of the activation
        # sequence before jumping to the next one.
        instance, out, _ = portrait
        path = compute_path(instance, ONES2)
        for name in ("trajectory_eps_1e-08.csv", "trajectory_eps_1e-20.csv"):
            rows = np.loadtxt(out / name, delimiter=",", skiprows=2)
            theta = rows[:, 2:4]
            for seg in path.segments[1:]:
                approach = np.min(
                    np.linalg.norm(theta - seg.theta_star, axis=1)
                )
                assert approach <= 1e-3

    def test_dimension_guard(self, tmp_path):
        inst = ProblemInstance(M=np.eye(3), r=[1.0, 1.0, 1.0])
        with pytest.raises(DimensionMismatch):
            run_figure1(inst, np.ones(3), np.ones(3), [1e-8], tmp_path)


class TestExperimentConfig:
    def test_roundtrip_from_json(self, tmp_path):
        cfg = dict(
            instance={"generator": "direct", "d": 3, "seed": 2},
            epsilons=[1e-8, 1e-12],
            grid_points=100,
        )
        path = tmp_path / "config.json"
        path.write_text(json.dumps(cfg))
        config = ExperimentConfig.from_json(path)
        inst = config.resolve_instance()
        assert inst.d == 3
        C, k = config.vectors(3)
        np.testing.assert_array_equal(C, np.ones(3))

    def test_instance_from_file(self, tmp_path):
        from dlnflow import save_instance

        inst, _ = generate_direct(d=2, seed=4)
        p = tmp_path / "inst.json"
        save_instance(inst, p)
        config = ExperimentConfig(instance=str(p), epsilons=[1e-8])
        loaded = config.resolve_instance()
        np.testing.assert_allclose(loaded.M, inst.M)

    @pytest.mark.parametrize(
        "eps", [[], [0.5, 0.5], [1.5], [0.0]],
    )
    def test_invalid_epsilons(self, eps):
        with pytest.raises(DomainError):
            ExperimentConfig(instance="x.json", epsilons=eps)

    def test_unknown_keys_rejected(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text(json.dumps({"instance": "x", "epsilons": [0.1],
                                    "bogus": 1}))
        with pytest.raises(DomainError):
            ExperimentConfig.from_json(path)

    def test_rejection_generator_spec(self):
        config = ExperimentConfig(
            instance={"generator": "rejection", "n": 4, "d": 2, "seed": 3},
            epsilons=[1e-8],
        )
        inst = config.resolve_instance()
        assert inst.meta["generator"] == "rejection"
        assert inst.data is not None


class TestWriters:
    def test_schema_header(self, tmp_path):
        p = write_csv(tmp_path / "t.csv", "test-kind", ["a", "b"], [[1.0, 2.0]])
        lines = p.read_text().splitlines()
        assert lines[0] == "# dlnflow-csv v1 test-kind"
        assert lines[1] == "a,b"

    def test_non_finite_rejected(self, tmp_path):
        with pytest.raises(DomainError):
            write_csv(tmp_path / "t.csv", "test-kind", ["a"], [[np.nan]])
