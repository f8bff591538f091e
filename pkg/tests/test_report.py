import math

import pytest

from app.core.exceptions import ReportIOError
from app.models.report import Method, ReplicateResult, RunReport, TimingReport


def make_report(**overrides) -> RunReport:
    data = dict(method=Method.CC, matrix_source="c.mtx", matrix_fingerprint="abc", order=4, nnz=10,
                scalar_kind="complex", estimate_real=1.0, estimate_imag=-0.5, mc_std_error=0.01)
    data.update(overrides)
    return RunReport(**data)


class TestRunReport:
    def test_save_and_load(self, tmp_path):
        report = make_report(replicates=2, replicate_results=[
            ReplicateResult(seed=1, estimate_real=1.0, mc_std_error=0.01, effective_length=100.0),
            ReplicateResult(seed=2, estimate_real=1.1, mc_std_error=0.01, effective_length=120.0),
        ])
        path = str(tmp_path / "nested" / "run.json")
        report.save(path)
        loaded = RunReport.load(path)
        assert loaded == report
        assert loaded.estimate == complex(1.0, -0.5)

    def test_load_missing_file(self, tmp_path):
        with pytest.raises(ReportIOError) as info:
            RunReport.load(str(tmp_path / "absent.json"))
        assert info.value.exit_code == 5

    def test_load_invalid_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"method": "cc"}')
        with pytest.raises(ReportIOError):
            RunReport.load(str(path))

    def test_z_score(self):
        assert make_report().z_score_vs_exact is None
        report = make_report(exact_real=1.03, exact_imag=-0.46)
        assert report.z_score_vs_exact == pytest.approx(5.0)
        assert make_report(mc_std_error=0.0, exact_real=0.0).z_score_vs_exact == math.inf


class TestTimingReport:
    def test_normalize_against_own_cycle(self):
        timings = TimingReport(total_seconds=10.0, seconds_per_cycle=0.01, seconds_per_burn_in_cycle=0.02)
        timings.normalize(None)
        assert timings.baseline_seconds_per_cycle == 0.01
        assert timings.normalized["cycle"] == 1.0
        assert timings.normalized["burn_in_cycle"] == pytest.approx(2.0)
        assert timings.normalized["total"] == pytest.approx(1000.0)
        assert "round" not in timings.normalized

    def test_normalize_against_baseline(self):
        timings = TimingReport(total_seconds=1.0, seconds_per_system=0.5, seconds_per_round=0.05)
        timings.normalize(0.025)
        assert timings.normalized["system"] == pytest.approx(20.0)
        assert timings.normalized["round"] == pytest.approx(2.0)

    def test_nothing_to_normalize(self):
        timings = TimingReport()
        timings.normalize(None)
        assert timings.normalized == {}
