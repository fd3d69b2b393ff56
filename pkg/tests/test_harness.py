"""Lemma verification harness: verdicts, emission, determinism."""

import csv
import json
import math

import pytest

from fetsim.errors import PlantingError, UsageError
from fetsim.harness import (
    LemmaReport,
    POINT_FIELDS,
    SWEEP_FIELDS,
    cyan_expectation_check,
    emit,
    plant_pair,
    run_lemma,
    verify_cyan,
    verify_green,
    verify_purple,
    verify_red,
    verify_yellow,
)
from fetsim.domains import DomainLabel
from fetsim.dynamics import AnalysisConstants


class TestPlanting:
    def test_valid_plant(self):
        c = AnalysisConstants.for_population(4096, delta=0.2, c_sample=3.0)
        kx, ky = plant_pair(4096, c, 0.2, 0.5, DomainLabel.GREEN1)
        assert (kx, ky) == (819, 2048)

    def test_empty_domain_aborts(self):
        # Red is empty at (n=4096, delta=0.05): lambda_n is too large for
        # any x to satisfy both band conditions.
        c = AnalysisConstants.for_population(4096, delta=0.05, c_sample=3.0)
        with pytest.raises(PlantingError):
            plant_pair(4096, c, 0.3, 0.3 * (1 - c.lambda_n) * 0.9, DomainLabel.RED1)


class TestGreen:
    def test_documented_point_passes(self):
        report = verify_green(trials=150, seed=0)
        assert report.verdict == "PASS"
        assert {row["domain"] for row in report.points} == {"Green1", "Green0"}
        for row in report.points:
            assert row["failures"] == 0

    def test_ell_precondition(self):
        with pytest.raises(UsageError):
            verify_green(n=4096, delta=0.2, ell=100)


class TestPurple:
    def test_documented_point_passes(self):
        report = verify_purple(trials=150, seed=0)
        assert report.verdict == "PASS"
        xs = {row["point_x"] for row in report.points}
        boundary = math.ceil(4096 / math.log(4096)) / 4096
        assert boundary in xs


class TestRed:
    def test_exit_fast_and_never_into_yellow_or_red(self):
        report = verify_red(trials=150, seed=0)
        assert report.verdict == "PASS"
        tally = report.details["exit_label_tally"]
        assert set(tally) <= {"Green1", "Purple1", "Green0", "Purple0", "Cyan1", "Cyan0"}
        assert report.params["exit_round_bound"] < 5


class TestCyan:
    def test_simulated_and_analytic_pass(self):
        report = verify_cyan(trials=120, seed=0)
        assert report.verdict == "PASS"
        assert report.details["analytic"]["violations"] == 0
        assert report.details["max_exit_rounds"] < report.params["exit_round_bound"]
        assert set(report.details["exit_label_tally"]) <= {"Green1", "Purple1"}

    def test_expectation_grid_small_population(self):
        result = cyan_expectation_check(512, delta=0.05, c_sample=3.0)
        assert result["violations"] == 0
        assert result["grid_points_checked"] > 0
        assert result["worst_margin"] > 0


class TestSweeps:
    def test_yellow_reduced_sweep_reports(self):
        report = verify_yellow(n_list=(256, 512), trials=40, seed=1, max_rounds=4000)
        assert report.kind == "sweep"
        assert len(report.sweep) == 2
        for row in report.sweep:
            assert set(row) >= {"n", "quantile50", "quantile99", "fit_C", "fit_r2"}
        assert report.details["all_escaped"]
        assert "b_dwell" in report.details

    def test_convergence_reduced_sweep(self):
        # 100 trials is the smallest count where "99% within budget" is
        # reachable (one sample may exceed the interpolated quantile).
        report = run_lemma(
            "convergence",
            {
                "convergence_n_list": (128, 256),
                "convergence_trials": 100,
                "convergence_presets": ("all_wrong", "cyan_corner"),
                "seed": 2,
            },
        )
        assert report.details["all_converged"]
        assert report.verdict == "PASS"
        for cell in report.details["cells"].values():
            assert cell["within_budget_fraction"] >= 0.99


class TestEmission:
    def test_pointwise_csv_schema(self, tmp_path):
        report = verify_green(trials=40, seed=3)
        path = emit(report, "csv", tmp_path / "green.csv")
        with path.open() as fh:
            rows = list(csv.DictReader(fh))
        assert list(rows[0]) == list(POINT_FIELDS)
        assert len(rows) == len(report.points)

    def test_sweep_csv_schema(self, tmp_path):
        report = verify_yellow(n_list=(256,), trials=20, seed=3, max_rounds=4000)
        path = emit(report, "csv", tmp_path / "yellow.csv")
        with path.open() as fh:
            rows = list(csv.DictReader(fh))
        assert list(rows[0]) == list(SWEEP_FIELDS)

    def test_json_round_trip_excludes_runtime(self, tmp_path):
        report = verify_green(trials=40, seed=3)
        assert report.runtime_s > 0
        path = emit(report, "json", tmp_path / "green.json")
        payload = json.loads(path.read_text())
        assert payload["verdict"] == report.verdict
        assert "runtime_s" not in json.dumps(payload)

    def test_unknown_format(self, tmp_path):
        with pytest.raises(UsageError):
            emit(LemmaReport("x", {}, "pointwise"), "yaml", tmp_path / "x.yaml")

    def test_reports_byte_deterministic(self, tmp_path):
        a = emit(verify_green(trials=40, seed=9), "json", tmp_path / "a.json")
        b = emit(verify_green(trials=40, seed=9), "json", tmp_path / "b.json")
        assert a.read_bytes() == b.read_bytes()
        c = emit(verify_cyan(trials=30, seed=9), "csv", tmp_path / "c.csv")
        d = emit(verify_cyan(trials=30, seed=9), "csv", tmp_path / "d.csv")
        assert c.read_bytes() == d.read_bytes()


class TestRunLemma:
    def test_run_all_emits_summary(self, tmp_path):
        from fetsim.harness import run_all

        settings = {
            "trials": 30,
            "seed": 6,
            "yellow_n_list": (256,),
            "yellow_trials": 20,
            "convergence_n_list": (128,),
            "convergence_trials": 100,
            "convergence_presets": ("all_wrong",),
        }
        reports = run_all(settings, tmp_path)
        summary = json.loads((tmp_path / "summary.json").read_text())
        assert set(summary) == {"green", "purple", "red", "cyan", "yellow", "convergence"}
        for lemma in summary:
            assert (tmp_path / f"{lemma}.csv").exists()
            assert (tmp_path / f"{lemma}.json").exists()
            assert summary[lemma] == reports[lemma].verdict

    def test_whp_rows_carry_empirical_exponent(self):
        report = verify_green(trials=40, seed=5)
        for row in report.points:
            assert row["empirical_exponent_floor"] > 0

    def test_unknown_lemma(self):
        with pytest.raises(UsageError):
            run_lemma("mauve")

    def test_override_plumbing(self):
        report = run_lemma("green", {"trials": 25, "seed": 4, "green_delta": 0.2})
        assert report.params["trials"] == 25
        assert report.params["delta"] == 0.2
