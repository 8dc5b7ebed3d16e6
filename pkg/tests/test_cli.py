import json

import pytest

from affmax.cli import main


def run(argv):
    return main(argv)


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    """End-to-end artifact chain shared by the CLI tests."""
    d = tmp_path_factory.mktemp("cli")
    assert run(["solve-positive", "--v0", "1.0", "--theta", "0.55",
                "--lambda", "1.0", "--rmax", "10", "--out",
                str(d / "phi.csv")]) == 0
    assert run(["solve-negative", "--n", "2", "--theta", "0.55",
                "--eta0", "1.05", "--eta-max-bounds", "50000",
                "--out", str(d / "curve.csv"),
                "--report", str(d / "report.json")]) == 0
    assert run(["reconstruct", "--curve", str(d / "curve.csv"), "--v0", "1.0",
                "--n", "2", "--out", str(d / "psi.csv")]) == 0
    assert run(["assemble", "--phi", str(d / "phi.csv"),
                "--psi", str(d / "psi.csv"), "--curve", str(d / "curve.csv"),
                "--m", "0", "--theta", "0.55",
                "--n", "2", "--report", str(d / "report.json"),
                "--out", str(d / "solution.json")]) == 0
    return d


class TestPipeline:
    def test_report_schema(self, workdir):
        rep = json.loads((workdir / "report.json").read_text())
        for key in ("taylor", "lambda_cal", "iterations", "bounds", "T_inf",
                    "tail_bound", "R_inf"):
            assert key in rep
        assert set(rep["bounds"]) == {"rho", "eps0", "eta1", "eta2"}
        assert rep["taylor"]["alpha"] == pytest.approx(4.13333333, abs=1e-6)

    def test_curve_header(self, workdir):
        assert (workdir / "curve.csv").read_text().splitlines()[0] == "eta,zeta,I"

    def test_profile_header(self, workdir):
        assert (workdir / "phi.csv").read_text().splitlines()[0] == "r,v,u"

    def test_verify_passes(self, workdir):
        rc = run(["verify", "--solution", str(workdir / "solution.json"),
                  "--points", "60", "--seed", "1",
                  "--report", str(workdir / "verify.json")])
        assert rc == 0
        rep = json.loads((workdir / "verify.json").read_text())
        assert rep["pass"]
        assert rep["residual_max"] < 1e-4
        assert rep["convexity_margin"] > 0
        assert len(rep["residuals"]) == 60

    def test_emit_plot_kinds(self, workdir):
        for kind, artifact in [("phase", "curve.csv"), ("profile", "phi.csv"),
                               ("bounds", "curve.csv"),
                               ("residual-hist", "verify.json")]:
            out = workdir / f"plot_{kind}.dat"
            assert run(["emit-plot-data", "--artifact", str(workdir / artifact),
                        "--kind", kind, "--out", str(out)]) == 0
            lines = out.read_text().splitlines()
            assert lines[0].startswith("#")
            assert len(lines) > 2

    def test_unknown_plot_kind(self, workdir):
        assert run(["emit-plot-data", "--artifact", str(workdir / "curve.csv"),
                    "--kind", "nope", "--out", str(workdir / "x.dat")]) == 1

    def test_columns_only_assemble_fallback(self, workdir, tmp_path):
        # without the curve, factors are re-splined from the CSV columns;
        # the residual floor is then set by re-differentiation (~5e-4)
        out = tmp_path / "sol2.json"
        assert run(["assemble", "--phi", str(workdir / "phi.csv"),
                    "--psi", str(workdir / "psi.csv"), "--m", "0",
                    "--theta", "0.55", "--n", "2",
                    "--report", str(workdir / "report.json"),
                    "--out", str(out)]) == 0
        assert run(["verify", "--solution", str(out), "--points", "40",
                    "--seed", "2", "--tol", "1e-3",
                    "--report", str(tmp_path / "v2.json")]) == 0


class TestDeterminism:
    def test_byte_identical_reruns(self, tmp_path):
        for tag in ("a", "b"):
            assert run(["solve-negative", "--n", "2", "--theta", "0.55",
                        "--eta0", "1.05", "--eta-max", "200",
                        "--eta-max-bounds", "200",
                        "--out", str(tmp_path / f"c_{tag}.csv"),
                        "--report", str(tmp_path / f"r_{tag}.json")]) in (0, 2)
        assert (tmp_path / "c_a.csv").read_bytes() == (tmp_path / "c_b.csv").read_bytes()
        assert (tmp_path / "r_a.json").read_bytes() == (tmp_path / "r_b.json").read_bytes()


class TestConfigAndErrors:
    def test_config_file_and_override(self, tmp_path):
        cfg = tmp_path / "run.ini"
        cfg.write_text("[bernstein-radial]\nn = 3\ntheta = 1.0\n"
                       "out = %s\n" % (tmp_path / "rep.json"))
        assert run(["bernstein-radial", "--config", str(cfg)]) == 0
        rep = json.loads((tmp_path / "rep.json").read_text())
        assert rep["n"] == 3 and rep["theta"] == 1.0
        # flag overrides the file
        assert run(["bernstein-radial", "--config", str(cfg),
                    "--theta", "1.5"]) == 0

    def test_missing_solution_is_usage_error(self, tmp_path):
        assert run(["verify", "--solution", str(tmp_path / "missing.json")]) == 1

    def test_bad_subcommand(self, capsys):
        assert run(["frobnicate"]) == 1
        assert "usage" in capsys.readouterr().err

    def test_no_command_prints_usage(self, capsys):
        assert run([]) == 1
        assert "usage" in capsys.readouterr().err

    def test_version(self, capsys):
        assert run(["--version"]) == 0
        out = capsys.readouterr().out
        assert "affmax" in out and "schema" in out

    def test_invalid_dimension_is_usage_error(self):
        assert run(["bernstein-radial", "--n", "2", "--theta", "1.0"]) == 1

    def test_bernstein_1d(self, tmp_path):
        out = tmp_path / "b1.json"
        assert run(["bernstein-1d", "--theta", "0.6", "--out", str(out)]) == 0
        assert json.loads(out.read_text())["pass"]


class TestSweep:
    def test_sweep_marks_unclaimed_rows(self, tmp_path):
        rc = run(["sweep", "--n", "2", "--theta-min", "0.55",
                  "--theta-max", "0.68", "--steps", "2", "--jobs", "1",
                  "--eta-max", "200", "--outdir", str(tmp_path / "sw")])
        assert rc in (0, 2)
        rep = json.loads((tmp_path / "sw" / "sweep.json").read_text())
        rows = rep["rows"]
        assert len(rows) == 2
        assert rows[0]["upper_bound_claimed"] is True
        assert rows[1]["upper_bound_claimed"] is False
        assert rows[1].get("note") == "upper-bound-not-claimed"
        assert all(r["status"] == "ok" for r in rows)

    def test_sweep_parallel_matches_serial(self, tmp_path):
        args = ["sweep", "--n", "2", "--theta-min", "0.54", "--theta-max",
                "0.58", "--steps", "2", "--eta-max", "150"]
        run(args + ["--jobs", "1", "--outdir", str(tmp_path / "s1")])
        run(args + ["--jobs", "2", "--outdir", str(tmp_path / "s2")])
        assert (tmp_path / "s1" / "sweep.json").read_bytes() == \
            (tmp_path / "s2" / "sweep.json").read_bytes()
