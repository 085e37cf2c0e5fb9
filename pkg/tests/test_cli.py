"""End-to-end command line driver tests (in-process, via main)."""
from pathlib import Path

import numpy as np
import pytest

from wplap.cli import (
    main,
    read_certificate,
    read_constants_csv,
    read_oracle_profile,
    read_scan_summary,
    read_solution_csv,
)

REPO = Path(__file__).resolve().parents[1]
SHIPPED = REPO / "configs" / "three_solutions_1d.cfg"
LINEAR = REPO / "configs" / "linear_benchmark_1d.cfg"

XI_REF = 1.4907119849998596
ETA_REF = 3.006474494967301
LOWER_REF = 8.888888888888889
UPPER_REF = 36.15555555555556


def run_cli(*argv):
    return main([str(a) for a in argv])


def variant(tmp_path, name, *replacements, base=SHIPPED):
    """Copy a shipped config applying exact text substitutions."""
    text = base.read_text()
    for old, new in replacements:
        assert old in text, old
        text = text.replace(old, new)
    path = tmp_path / name
    path.write_text(text)
    return path


class TestCheck:
    def test_shipped_certificate_passes(self, tmp_path, capsys):
        code = run_cli("check", "--config", SHIPPED, "--out", tmp_path)
        assert code == 0
        out = capsys.readouterr().out
        assert "overall: pass" in out
        cert = read_certificate(tmp_path / "certificate.txt")
        assert cert["meta"]["overall"] == "pass"
        assert cert["meta"]["exit_code"] == "0"
        expected = {"sandwich": "pass", "H1": "pass", "H2": "pass",
                    "H3": "heuristic-pass", "H4": "pass", "H5": "pass",
                    "dxi_gt_c": "pass", "level_separation": "pass",
                    "bona1": "pass"}
        got = {name: entry["verdict"] for name, entry in cert["checks"].items()}
        assert got == expected

    def test_constants_round_trip(self, tmp_path):
        run_cli("check", "--config", SHIPPED, "--out", tmp_path)
        consts = read_constants_csv(tmp_path / "constants.csv")
        assert consts["xi"] == pytest.approx(XI_REF, rel=1e-12)
        assert consts["eta"] == pytest.approx(ETA_REF, rel=1e-12)
        assert consts["r"] == pytest.approx(0.08, rel=1e-12)
        assert consts["sandwich_lower"] == pytest.approx(LOWER_REF, rel=1e-12)
        assert consts["sandwich_upper"] == pytest.approx(UPPER_REF, rel=1e-12)
        assert consts["ustar_norm_p"] == pytest.approx(21.0181339, rel=1e-3)
        assert consts["sandwich_margin_lower"] > 0
        assert consts["sandwich_margin_upper"] > 0
        cert = read_certificate(tmp_path / "certificate.txt")
        assert cert["constants"]["k_mode"] == "certified"
        assert cert["variants"]["k_upper"]["r"] == pytest.approx(consts["r"], rel=1e-12)
        assert consts["k[k_lower]"] <= consts["k[k_upper]"]

    def test_oversized_c_fails_named_condition(self, tmp_path, capsys):
        cfg = variant(tmp_path, "bad_c.cfg", ("c = 0.2", "c = 1.5"))
        code = run_cli("check", "--config", cfg, "--out", tmp_path / "out")
        assert code == 2
        out = capsys.readouterr().out
        assert "failing or inconclusive conditions:" in out
        assert "dxi_gt_c" in out

    def test_missing_growth_bound_inconclusive(self, tmp_path):
        cfg = variant(tmp_path, "no_growth.cfg", ("growth_h = 1\n", ""))
        code = run_cli("check", "--config", cfg, "--out", tmp_path / "out")
        assert code == 3
        cert = read_certificate(tmp_path / "out" / "certificate.txt")
        assert cert["checks"]["H3"]["verdict"] == "inconclusive"
        assert cert["meta"]["overall"] == "inconclusive"

    def test_check_needs_ball_and_constants(self, tmp_path, capsys):
        code = run_cli("check", "--config", LINEAR, "--out", tmp_path)
        assert code == 64
        assert "check requires" in capsys.readouterr().err

    def test_coarse_mesh_rejected(self, tmp_path, capsys):
        cfg = variant(tmp_path, "coarse.cfg", ("h = 0.00390625", "h = 0.05"))
        code = run_cli("check", "--config", cfg, "--out", tmp_path / "out")
        assert code == 64
        assert "config error:" in capsys.readouterr().err

    def test_seed_override_recorded(self, tmp_path):
        run_cli("check", "--config", SHIPPED, "--out", tmp_path, "--seed", "7")
        cert = read_certificate(tmp_path / "certificate.txt")
        assert cert["meta"]["seed"] == "7"


class TestSolve:
    def test_shipped_cell_three_solutions(self, tmp_path, capsys):
        code = run_cli("solve", "--config", SHIPPED, "--out", tmp_path)
        assert code == 0
        assert "3 distinct solution(s)" in capsys.readouterr().out
        report = (tmp_path / "solve_report.txt").read_text()
        assert "status = ok" in report
        assert "count = 3" in report
        assert "count_nontrivial = 2" in report
        files = sorted(tmp_path.glob("solution_*.csv"))
        assert len(files) == 3
        coords, vals = read_solution_csv(files[0])
        assert coords.shape[1] == 1
        assert coords.shape[0] == vals.size
        assert vals[0] == 0.0 and vals[-1] == 0.0

    def test_lambda_mu_overrides(self, tmp_path):
        code = run_cli("solve", "--config", SHIPPED, "--out", tmp_path,
                       "--lambda", "0.0", "--mu", "0.0")
        assert code == 0
        report = (tmp_path / "solve_report.txt").read_text()
        assert "lambda = 0.0" in report
        assert "count = 1" in report
        assert "count_nontrivial = 0" in report
        assert sorted(p.name for p in tmp_path.glob("solution_*.csv")) == \
            ["solution_000.csv"]
        _, vals = read_solution_csv(tmp_path / "solution_000.csv")
        assert np.max(np.abs(vals)) == 0.0

    def test_budget_exhaustion_reports_failure(self, tmp_path, capsys):
        cfg = variant(tmp_path, "starved.cfg", base=LINEAR,
                      *[("p = 2.0", "p = 3.0"),
                        ("[run]", "[solver]\nmax_iter = 1\n\n[run]")])
        code = run_cli("solve", "--config", cfg, "--out", tmp_path / "out")
        assert code == 4
        assert "solver failure" in capsys.readouterr().err
        report = (tmp_path / "out" / "solve_report.txt").read_text()
        assert "status = failed" in report

    def test_missing_growth_warns_but_solves(self, tmp_path, capsys):
        cfg = variant(tmp_path, "no_growth.cfg", ("growth_h = 1\n", ""))
        code = run_cli("solve", "--config", cfg, "--out", tmp_path / "out")
        assert code == 0
        assert "H3 growth bound not established" in capsys.readouterr().err


class TestScan:
    def test_shipped_grid_counts_and_window(self, tmp_path):
        code = run_cli("scan", "--config", SHIPPED, "--out", tmp_path)
        assert code == 0
        rows = read_scan_summary(tmp_path / "scan_summary.csv")
        assert len(rows) == 10
        counts = {(row["lambda"], row["mu"]): row["count"] for row in rows}
        for mu in (0.0, 0.05):
            for lam in (12.0, 14.0, 16.0):
                assert counts[(lam, mu)] == 1
            for lam in (18.0, 20.0):
                assert counts[(lam, mu)] == 3
        report = (tmp_path / "scan_report.txt").read_text()
        window = next(line for line in report.splitlines()
                      if line.startswith("lambda_window"))
        assert window.count("(") == 4
        assert "(18," in window and "(20," in window
        assert len(list(tmp_path.glob("scan_c*_s*.csv"))) == sum(counts.values())

    def test_deterministic_reruns(self, tmp_path):
        run_cli("scan", "--config", SHIPPED, "--out", tmp_path / "a")
        run_cli("scan", "--config", SHIPPED, "--out", tmp_path / "b")
        for name in ("scan_summary.csv", "scan_report.txt"):
            assert (tmp_path / "a" / name).read_bytes() == \
                (tmp_path / "b" / name).read_bytes()

    def test_missing_grid_is_config_error(self, tmp_path, capsys):
        code = run_cli("scan", "--config", LINEAR, "--out", tmp_path)
        assert code == 64
        assert "non-empty [lambda_grid]" in capsys.readouterr().err


class TestOracle:
    def _fast_cfg(self, tmp_path):
        return variant(tmp_path, "fast_oracle.cfg",
                       ("[run]", "[oracle]\nsigma_min = -10.0\nsigma_max = 10.0\n"
                                 "n_scan = 401\n\n[run]"))

    def test_shipped_roots(self, tmp_path, capsys):
        cfg = self._fast_cfg(tmp_path)
        code = run_cli("oracle", "--config", cfg, "--out", tmp_path / "out")
        assert code == 0
        assert "3 root(s)" in capsys.readouterr().out
        sigma, terminal, diverged = read_oracle_profile(
            tmp_path / "out" / "oracle_profile.csv")
        assert sigma.size == terminal.size == diverged.size == 401
        assert not diverged.all()
        report = (tmp_path / "out" / "oracle_report.txt").read_text()
        assert "roots = 3" in report
        assert "degenerate_flat = False" in report
        assert len(list((tmp_path / "out").glob("oracle_root_*.csv"))) == 3

    def test_planar_domain_unsupported(self, tmp_path, capsys):
        cfg = variant(tmp_path, "planar.cfg", base=LINEAR,
                      *[("kind = interval", "kind = box"),
                        ("bounds = 0.0 1.0", "bounds = 0.0 1.0 0.0 1.0")])
        code = run_cli("oracle", "--config", cfg, "--out", tmp_path / "out")
        assert code == 65
        assert "unsupported:" in capsys.readouterr().err


class TestConfigDiagnostics:
    def test_missing_required_key_names_location(self, tmp_path, capsys):
        cfg = variant(tmp_path, "no_p.cfg", ("p = 2.0\n", ""))
        code = run_cli("check", "--config", cfg, "--out", tmp_path / "out")
        assert code == 64
        err = capsys.readouterr().err
        assert "missing required key 'p'" in err
        assert "(line " in err

    def test_unknown_section_rejected(self, tmp_path, capsys):
        cfg = variant(tmp_path, "bogus.cfg", ("[run]", "[bogus]\nz = 1\n\n[run]"))
        code = run_cli("check", "--config", cfg, "--out", tmp_path / "out")
        assert code == 64
        assert "unknown section [bogus]" in capsys.readouterr().err

    def test_reader_header_validation(self, tmp_path):
        junk = tmp_path / "junk.csv"
        junk.write_text("a,b\n1,2\n")
        with pytest.raises(ValueError):
            read_solution_csv(junk)
        with pytest.raises(ValueError):
            read_scan_summary(junk)
        with pytest.raises(ValueError):
            read_constants_csv(junk)
        with pytest.raises(ValueError):
            read_oracle_profile(junk)
