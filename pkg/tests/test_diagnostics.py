import numpy as np
import pytest

from app.core.exceptions import InsufficientSamplesError, ReportIOError
from app.models.report import Method, RunReport
from app.services.diagnostics import (
    dump_series_csv,
    effective_length,
    empirical_std_error,
    iid_summary,
    lag_autocorrelation,
    mc_std_error,
    render_report_table,
    summarize,
)


def ar1(n, phi, seed=0):
    rng = np.random.default_rng(seed)
    eps = rng.standard_normal(n)
    x = np.empty(n)
    x[0] = eps[0] / np.sqrt(1 - phi**2)
    for t in range(1, n):
        x[t] = phi * x[t - 1] + eps[t]
    return x


class TestEffectiveLength:
    def test_constant_series(self):
        summary = summarize(np.full(50, 3.0))
        assert summary.effective_length == 50
        assert summary.mc_std_error == 0.0
        assert summary.mean == 3.0

    def test_independent_samples(self):
        x = np.random.default_rng(1).standard_normal(20000)
        assert effective_length(x) == pytest.approx(20000, rel=0.1)

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_ar1_half(self, seed):
        # (1 + 0.5) / (1 - 0.5) = 3
        n = 100000
        assert effective_length(ar1(n, 0.5, seed=seed)) == pytest.approx(n / 3, rel=0.1)

    def test_independent_samples_ten_thousand(self):
        x = np.random.default_rng(5).standard_normal(10000)
        assert effective_length(x) == pytest.approx(10000, rel=0.1)

    def test_ar1_series(self):
        n = 100000
        # integrated autocorrelation time of AR(1) is (1 + phi) / (1 - phi) = 19
        assert effective_length(ar1(n, 0.9)) == pytest.approx(n / 19, rel=0.2)

    def test_anticorrelated_series_is_capped(self):
        x = np.tile([1.0, -1.0], 500)
        assert effective_length(x) == pytest.approx(1.5 * x.size)

    def test_too_short(self):
        with pytest.raises(InsufficientSamplesError):
            summarize(np.arange(9.0))

    def test_two_dimensional_rejected(self):
        with pytest.raises(ValueError):
            summarize(np.ones((10, 2)))


class TestErrors:
    def test_mc_error_matches_variance_over_length(self):
        x = ar1(20000, 0.5, seed=2)
        summary = summarize(x)
        assert summary.mc_std_error == pytest.approx(np.sqrt(summary.variance / summary.effective_length))
        assert mc_std_error(x) == summary.mc_std_error

    def test_complex_parts_add_in_quadrature(self):
        re = ar1(5000, 0.3, seed=3)
        im = ar1(5000, 0.6, seed=4)
        combined = summarize(re + 1j * im)
        expected = np.hypot(mc_std_error(re), mc_std_error(im))
        assert combined.mc_std_error == pytest.approx(expected)
        assert combined.mc_std_error == pytest.approx(np.sqrt(combined.variance / combined.effective_length))
        assert isinstance(combined.mean, complex)

    def test_iid_summary(self):
        x = np.array([1.0, 2.0, 3.0, 4.0])
        summary = iid_summary(x)
        assert summary.effective_length == 4
        assert summary.mc_std_error == pytest.approx(np.std(x, ddof=1) / 2)

    def test_empirical_std_error(self):
        assert empirical_std_error([1.0, 3.0]) == pytest.approx(np.sqrt(2.0))
        with pytest.raises(InsufficientSamplesError):
            empirical_std_error([1.0])

    def test_lag_autocorrelation(self):
        assert lag_autocorrelation(ar1(50000, 0.7, seed=5)) == pytest.approx(0.7, abs=0.02)
        assert lag_autocorrelation(np.ones(10)) == 0.0


class TestOutput:
    def test_series_dump(self, tmp_path):
        path = tmp_path / "dump" / "series.csv"
        dump_series_csv(np.array([1.0 + 2.0j, 3.0]), str(path), first_cycle=11)
        lines = path.read_text().splitlines()
        assert lines[0] == "cycle,real,imag"
        assert lines[1] == "11,1,2"
        assert lines[2] == "12,3,0"

    def test_series_dump_unwritable(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        with pytest.raises(ReportIOError):
            dump_series_csv(np.ones(3), str(blocker / "series.csv"))

    def test_table(self):
        cc = RunReport(method=Method.CC, matrix_source="a.mtx", matrix_fingerprint="f", order=10, nnz=30,
                       scalar_kind="real", estimate_real=1.25, burn_in_cycles=40, sampling_cycles=900,
                       effective_length=450.0, mc_std_error=0.01)
        se = RunReport(method=Method.SE, matrix_source="a.mtx", matrix_fingerprint="f", order=10, nnz=30,
                       scalar_kind="real", estimate_real=1.26, se_systems=300, se_total_rounds=2400,
                       se_rounds_per_system=8.0)
        table = render_report_table([cc, se], titles=["CC", "SE"])
        lines = table.splitlines()
        assert lines[0].split() == ["CC", "SE"]
        n_row = next(line for line in lines if line.startswith("N "))
        assert n_row.split()[-2:] == ["40", "-"]
        systems = next(line for line in lines if line.startswith("Number of systems"))
        assert systems.split()[-2:] == ["-", "300"]
