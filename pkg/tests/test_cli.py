import json

import pytest

from app.cli import build_parser, main
from app.models.report import RunReport
from app.services.sparse_matrix import read_matrix_market


@pytest.fixture
def run(config_file):
    """Invoke the CLI with the test configuration"""

    def invoke(*argv: str) -> int:
        return main(["--config", config_file, *argv])

    return invoke


class TestGenerate:
    def test_wu_schaeffer(self, run, tmp_path):
        out = str(tmp_path / "ws.mtx")
        assert run("generate", "wu-schaeffer", "--animals", "30", "--herds", "3", "--out", out) == 0
        assert read_matrix_market(out).order == 33

    def test_dirac(self, run, tmp_path, capsys):
        out = str(tmp_path / "dirac.mtx")
        assert run("generate", "dirac", "--n0", "2", "--n1", "2", "--n2", "2", "--n3", "2", "--out", out) == 0
        matrix = read_matrix_market(out)
        assert matrix.order == 64
        assert matrix.is_complex
        assert "order 64" in capsys.readouterr().out

    def test_lattice_too_small(self, run, tmp_path):
        assert run("generate", "dirac", "--n0", "1", "--out", str(tmp_path / "d.mtx")) == 2


class TestPrecheck:
    def test_json_output(self, run, matrix_file, capsys):
        assert run("precheck", "--matrix", matrix_file(), "--json") == 0
        result = json.loads(capsys.readouterr().out)
        assert result["passes"] is True
        assert result["spectral_radius_t"] < 1.0

    def test_divergent_matrix(self, run, matrix_file, divergent4):
        assert run("precheck", "--matrix", matrix_file(divergent4)) == 3


class TestInvert:
    def test_oracle(self, run, matrix_file, diag24, capsys):
        assert run("oracle", "--matrix", matrix_file(diag24)) == 0
        assert "0.75" in capsys.readouterr().out

    def test_cc_se_then_compare(self, run, matrix_file, tmp_path, capsys):
        matrix = matrix_file()
        cc = str(tmp_path / "cc.json")
        se = str(tmp_path / "se.json")
        assert run("invert-cc", "--matrix", matrix, "--tol", "1e-2", "--exact", "--report", cc) == 0
        assert run("invert-se", "--matrix", matrix, "--tol", "1e-2", "--inner", "gs", "--report", se,
                   "--baseline-report", cc) == 0
        capsys.readouterr()

        assert run("compare", cc, se) == 0
        out = capsys.readouterr().out
        assert "cc.json" in out and "se.json" in out
        assert "|A - B|" in out

        assert run("report", cc, se) == 0
        assert "Number of systems" in capsys.readouterr().out

    @pytest.mark.parametrize("command", ["invert-cc", "invert-se"])
    def test_entries(self, run, matrix_file, tmp_path, capsys, command):
        entries = tmp_path / "entries.txt"
        entries.write_text("0 0\n3 5\n11 11\n")
        report_path = str(tmp_path / "elements.json")
        assert run(command, "--matrix", matrix_file(), "--entries", str(entries), "--tol", "1e-2",
                   "--exact", "--report", report_path) == 0
        assert "C^-1[3,5]" in capsys.readouterr().out

        report = RunReport.load(report_path)
        assert report.query == "entries:0,0;3,5;11,11"
        assert [(e.row, e.col) for e in report.element_results] == [(0, 0), (3, 5), (11, 11)]
        assert report.estimate == report.element_results[0].estimate
        assert report.exact == report.element_results[0].exact
        for element in report.element_results:
            assert abs(element.estimate - element.exact) <= 3 * element.mc_std_error + 1e-12

    def test_entries_outside_matrix(self, run, matrix_file, tmp_path):
        entries = tmp_path / "entries.txt"
        entries.write_text("0 12\n")
        assert run("invert-cc", "--matrix", matrix_file(), "--entries", str(entries)) == 2

    def test_entries_with_trace_query(self, run, matrix_file, tmp_path):
        entries = tmp_path / "entries.txt"
        entries.write_text("0 0\n")
        rows = tmp_path / "rows.txt"
        rows.write_text("0 1\n")
        assert run("invert-cc", "--matrix", matrix_file(), "--entries", str(entries), "--q", f"diag:{rows}") == 2

    def test_cycle_cap(self, run, matrix_file):
        assert run("invert-cc", "--matrix", matrix_file(), "--tol", "1e-12", "--max-cycles", "300") == 4

    def test_gate_exit_code(self, run, matrix_file, divergent4):
        assert run("invert-cc", "--matrix", matrix_file(divergent4)) == 3

    def test_gs_on_non_hermitian(self, run, matrix_file):
        assert run("invert-gs", "--matrix", matrix_file(), "--tol", "1e-2") == 2

    def test_missing_matrix(self, run, tmp_path):
        assert run("invert-cc", "--matrix", str(tmp_path / "absent.mtx")) == 5

    def test_invalid_option_value(self, run, matrix_file):
        assert run("invert-cc", "--matrix", matrix_file(), "--replicates", "0") == 2

    def test_missing_report(self, run, tmp_path):
        assert run("report", str(tmp_path / "absent.json")) == 5


class TestEntryPoint:
    def test_no_command(self, capsys):
        assert main([]) == 2

    def test_bad_config(self, tmp_path, matrix_file):
        path = tmp_path / "bad.yaml"
        path.write_text("sampler:\n  check_every: -1\n")
        assert main(["--config", str(path), "precheck", "--matrix", matrix_file()]) == 2

    def test_version(self, capsys):
        with pytest.raises(SystemExit) as info:
            build_parser().parse_args(["--version"])
        assert info.value.code == 0
        assert "mcinv" in capsys.readouterr().out
