import numpy as np
import pytest

from app.core.config import LoggingConfig, SamplerConfig, Settings
from app.core.exceptions import (
    ConfigError,
    ConvergenceGateError,
    DivergenceError,
    MismatchedTargetsError,
    NotHermitianError,
)
from app.models.experiment import ExperimentConfig, WuSchaefferSource
from app.models.generators import LatticeSpec
from app.models.report import Method, RunReport
from app.services.experiment_runner import compare, load_target, run_experiment, run_replicates
from app.services.sparse_matrix import build


@pytest.fixture
def fast_settings() -> Settings:
    return Settings(
        sampler=SamplerConfig(rel_tolerance_real=1e-2, rel_tolerance_complex=1e-2, max_cycles=200000),
        logging=LoggingConfig(file=None),
    )


class TestExperimentConfig:
    def test_needs_exactly_one_source(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.parse({})
        with pytest.raises(ConfigError):
            ExperimentConfig.parse({"matrix_path": "c.mtx", "dirac": {"n0": 2}})

    def test_from_settings_drops_unset_overrides(self, quiet_settings):
        config = ExperimentConfig.from_settings(quiet_settings, matrix_path="c.mtx", seed=None, replicates=3)
        assert config.seed == quiet_settings.noise.seed
        assert config.replicates == 3
        assert config.burn_in.tolerance == quiet_settings.sampler.burn_in_tolerance

    def test_invalid_override(self, quiet_settings):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_settings(quiet_settings, matrix_path="c.mtx", jobs=0)

    @pytest.mark.parametrize("extra", [
        {"entries": []},
        {"entries": [[0, 0]], "query": "diag:rows.txt"},
        {"entries": [[0, 0]], "method": "oracle"},
    ])
    def test_invalid_entries(self, extra):
        with pytest.raises(ConfigError):
            ExperimentConfig.parse({"matrix_path": "c.mtx", **extra})

    def test_source_labels(self):
        assert ExperimentConfig(matrix_path="c.mtx").source_label() == "c.mtx"
        assert ExperimentConfig(dirac=LatticeSpec.cubic(2)).source_label().startswith("dirac 2x2x2x2")
        assert "animals=200" in ExperimentConfig(wu_schaeffer=WuSchaefferSource()).source_label()


class TestLoadTarget:
    def test_generated_targets(self, quiet_settings):
        ws = load_target(ExperimentConfig(wu_schaeffer=WuSchaefferSource(n_animals=30, n_herds=3)), quiet_settings)
        assert ws.matrix.order == 33
        dirac = load_target(ExperimentConfig(dirac=LatticeSpec.cubic(2)), quiet_settings)
        assert dirac.matrix.order == 64
        assert dirac.boundary_conditions == "periodic"

    def test_target_carries_the_source_label(self, quiet_settings, matrix_file):
        for config in (ExperimentConfig(matrix_path=matrix_file()),
                       ExperimentConfig(wu_schaeffer=WuSchaefferSource(n_animals=30, n_herds=3)),
                       ExperimentConfig(dirac=LatticeSpec.cubic(2))):
            assert load_target(config, quiet_settings).source == config.source_label()


class TestRunExperiment:
    def test_oracle(self, matrix_file, diag24, fast_settings):
        report = run_experiment(ExperimentConfig(matrix_path=matrix_file(diag24), method=Method.ORACLE),
                                fast_settings)
        assert report.estimate == pytest.approx(0.75)
        assert report.exact == report.estimate
        assert report.total_cycles == 0

    def test_cc_against_exact(self, matrix_file, fast_settings, tmp_path):
        report_path = str(tmp_path / "cc.json")
        series_path = str(tmp_path / "series.csv")
        config = ExperimentConfig(matrix_path=matrix_file(), with_exact=True, seed=3,
                                  report_path=report_path, dump_series_path=series_path)
        report = run_experiment(config, fast_settings)
        assert report.converged
        assert report.z_score_vs_exact <= 3.0
        assert report.spectral_radius_t < 1.0
        assert report.total_cycles == report.burn_in_cycles + report.sampling_cycles
        assert RunReport.load(report_path).estimate == report.estimate
        rows = np.loadtxt(series_path, delimiter=",", skiprows=1)
        assert rows.shape[0] == report.sampling_cycles
        assert rows[0, 0] == report.burn_in_cycles + 1

    def test_precheck_gate(self, matrix_file, divergent4, fast_settings):
        config = ExperimentConfig(matrix_path=matrix_file(divergent4))
        with pytest.raises(ConvergenceGateError) as info:
            run_experiment(config, fast_settings)
        assert info.value.exit_code == 3

    def test_force_skips_the_gate(self, matrix_file, divergent4, fast_settings):
        config = ExperimentConfig(matrix_path=matrix_file(divergent4), force=True)
        with pytest.raises(DivergenceError) as info:
            run_experiment(config, fast_settings)
        assert not isinstance(info.value, ConvergenceGateError)

    def test_replicates(self, matrix_file, fast_settings):
        config = ExperimentConfig(matrix_path=matrix_file(), replicates=3, jobs=2, seed=10)
        report = run_experiment(config, fast_settings)
        assert [r.seed for r in report.replicate_results] == [10, 11, 12]
        assert report.burn_in_cycles == sum(r.burn_in_cycles for r in report.replicate_results)
        assert report.empirical_std_error is not None
        assert report.geyer_mean_std_error is not None
        values = [r.estimate_real for r in report.replicate_results]
        assert min(values) <= report.estimate_real <= max(values)

    def test_se_with_baseline(self, matrix_file, fast_settings, tmp_path):
        path = matrix_file()
        baseline = str(tmp_path / "cc.json")
        cc = run_experiment(ExperimentConfig(matrix_path=path, report_path=baseline), fast_settings)
        se = run_experiment(ExperimentConfig(matrix_path=path, method=Method.SE, baseline_report_path=baseline),
                            fast_settings)
        assert se.se_systems == se.total_cycles
        assert se.se_rounds_per_system == pytest.approx(se.se_total_rounds / se.se_systems)
        assert se.timings.baseline_seconds_per_cycle == cc.timings.seconds_per_cycle
        assert "system" in se.timings.normalized
        assert compare(cc, se).z_score <= 3.0

    def test_element_replicates(self, matrix_file, fast_settings):
        config = ExperimentConfig(matrix_path=matrix_file(), entries=[(2, 2), (0, 7)], replicates=2, jobs=2,
                                  with_exact=True, seed=4)
        report = run_experiment(config, fast_settings)
        assert report.query == "entries:2,2;0,7"
        assert len(report.element_results) == 2
        assert report.estimate == report.element_results[0].estimate
        assert report.empirical_std_error is not None
        for element in report.element_results:
            assert abs(element.estimate - element.exact) <= 3 * element.mc_std_error + 1e-12

    def test_gs_rejects_non_hermitian(self, matrix_file, fast_settings):
        with pytest.raises(NotHermitianError):
            run_experiment(ExperimentConfig(matrix_path=matrix_file(), method=Method.GS), fast_settings)

    def test_dirac_lattice(self, fast_settings):
        config = ExperimentConfig(dirac=LatticeSpec.cubic(4, k=0.1), with_exact=True, seed=5)
        report = run_experiment(config, fast_settings)
        assert report.order == 1024
        assert report.scalar_kind == "complex"
        assert report.z_score_vs_exact <= 3.0
        assert abs(report.estimate_imag) <= 3.0 * report.mc_std_error

    def test_wu_schaeffer(self, fast_settings):
        source = WuSchaefferSource(n_animals=200, n_herds=20, generations=4, seed=2)
        cc = run_experiment(ExperimentConfig(wu_schaeffer=source, with_exact=True, seed=6), fast_settings)
        se = run_experiment(ExperimentConfig(wu_schaeffer=source, method=Method.SE, with_exact=True, seed=6),
                            fast_settings)
        assert cc.order == se.order == 220
        assert cc.z_score_vs_exact <= 3.0
        assert se.z_score_vs_exact <= 3.0
        assert compare(cc, se).z_score <= 3.0


async def test_run_replicates_keeps_seed_order():
    def fake(seed):
        return seed * 2

    assert await run_replicates(fake, [3, 1, 2], jobs=2) == [6, 2, 4]


class TestCompare:
    def test_identical_reports(self, matrix_file, diag24, fast_settings):
        report = run_experiment(ExperimentConfig(matrix_path=matrix_file(diag24), method=Method.ORACLE),
                                fast_settings)
        table = compare(report, report, titles=("LU", "LU again"))
        assert table.z_score == 0.0
        assert table.cpu_ratio == pytest.approx(1.0)
        assert "LU again" in table.render()

    def test_mismatched_targets(self, matrix_file, diag24, fast_settings):
        a = run_experiment(ExperimentConfig(matrix_path=matrix_file(diag24), method=Method.ORACLE), fast_settings)
        other = build(2, [(0, 0, 2.0), (1, 1, 5.0)])
        b = run_experiment(ExperimentConfig(matrix_path=matrix_file(other, "other.mtx"), method=Method.ORACLE),
                           fast_settings)
        with pytest.raises(MismatchedTargetsError):
            compare(a, b)
