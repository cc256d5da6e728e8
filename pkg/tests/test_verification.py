"""Tests for the verification suite."""

import itertools
import os

import numpy as np
import pytest

from msdiffeo.data import read_csv
from msdiffeo.verification import (
    CHECK_ORDER, TOLERANCES, CheckResult, VerifyReport, run_checks, run_matrix_oracle, write_verify_report
)
from msdiffeo.verification import verify_utils
from msdiffeo.verification.verify_utils import check_determinism, check_norm_identity, check_rng

CHEAP = ("A1", "A2", "A3", "A9", "A10")


class TestReport:
    """Tests for CheckResult and VerifyReport."""

    def test_passes_only_when_every_row_passes(self):
        """One failing row fails the report."""
        ok = CheckResult("A1", 1e-12, "<= 1e-07", True)
        bad = CheckResult("A2", 1.0, "<= 1e-09", False)
        assert VerifyReport([ok]).passed
        assert not VerifyReport([ok, bad]).passed
        assert VerifyReport([ok, bad]).rows()[1]["status"] == "FAIL"

    def test_csv_text_has_full_precision(self):
        """Measured values are written with 17 significant digits."""
        text = VerifyReport([CheckResult("A1", 0.1, "<= 1e-07", False)]).to_csv_text()
        assert text.splitlines() == ["check,measured,bound,status", "A1,0.10000000000000001,<= 1e-07,FAIL"]

    def test_generators_differ_per_check(self):
        """Each check draws from its own stream."""
        assert check_rng(0, "A1").random() != check_rng(0, "A2").random()
        assert check_rng(0, "A1").random() == check_rng(0, "A1").random()


class TestRunChecks:
    """Tests for run_checks on the fast checks."""

    def test_cheap_checks_pass(self):
        """The algebraic checks pass at default tolerances."""
        report = run_checks(7, CHEAP, oracle_tuples=20)
        assert [r.check for r in report.results] == list(CHEAP)
        assert report.passed, report.format_table()

    def test_canonical_order(self):
        """Results follow the canonical order whatever the request order."""
        report = run_checks(7, ("A9", "A1"))
        assert [r.check for r in report.results] == ["A1", "A9"]

    def test_deterministic(self):
        """Two runs from one seed give byte-identical reports."""
        a = run_checks(3, ("A1", "A2", "A3"), oracle_tuples=10).to_csv_text()
        b = run_checks(3, ("A1", "A2", "A3"), oracle_tuples=10).to_csv_text()
        assert a == b

    def test_check_independent_of_selection(self):
        """A check measures the same value alone or with others."""
        alone = run_checks(5, ("A2",)).results[0].measured
        together = run_checks(5, ("A1", "A2")).results[1].measured
        assert alone == together

    def test_threshold_scale_moves_bounds_only(self):
        """Scaling thresholds changes the bound, never the measurement."""
        a = run_checks(1, ("A1",)).results[0]
        b = run_checks(1, ("A1",), threshold_scale=10.0).results[0]
        assert a.measured == b.measured
        assert a.bound == f"<= {TOLERANCES['A1']:.3g}"
        assert b.bound == f"<= {10 * TOLERANCES['A1']:.3g}"

    def test_tiny_threshold_fails(self):
        """An impossibly tight bound fails the run."""
        assert not run_checks(1, ("A1",), threshold_scale=1e-300).passed

    def test_unknown_check(self):
        """Unknown names are rejected."""
        with pytest.raises(ValueError):
            run_checks(0, ("A1", "B7"))

    @pytest.mark.slow
    @pytest.mark.parametrize("name", [c for c in CHECK_ORDER if c not in CHEAP])
    def test_expensive_checks_pass(self, name):
        """The convergence and optimization checks pass at default tolerances."""
        result = run_checks(7, (name,)).results[0]
        assert result.passed, result

    def test_norm_identity_measures_project_scales(self, monkeypatch):
        """A2 uses the minimal-norm split; an even split breaks the identity."""
        assert check_norm_identity(4).passed

        def halves(spec, v, points):
            return [np.asarray(v) / len(spec.components)] * len(spec.components)

        monkeypatch.setattr(verify_utils, "project_scales", halves)
        assert not check_norm_identity(4).passed


class TestDeterminism:
    """Tests for the A10 report-file comparison."""

    def test_identical_reports(self):
        """Repeating A1, A2 and A3 writes byte-identical files."""
        result = check_determinism(3, oracle_tuples=5)
        assert result.passed and result.measured == 0.0

    def test_repeats_selected_checks(self):
        """A10 repeats the other selected checks and takes its canonical place."""
        report = run_checks(3, ("A10", "A9", "A1"), oracle_tuples=5)
        assert [r.check for r in report.results] == ["A1", "A9", "A10"]
        assert report.passed, report.format_table()

    def test_changing_measurement_fails(self, monkeypatch):
        """A check whose value drifts between runs fails A10."""
        counter = itertools.count()
        monkeypatch.setitem(verify_utils.CHECKS, "A9",
                            lambda seed, threshold_scale: CheckResult("A9", float(next(counter)), "== 0", True))
        report = run_checks(1, ("A9", "A10"))
        assert not report.results[-1].passed
        assert report.results[-1].check == "A10"

    def test_report_file(self, tmp_path):
        """write_verify_report writes the run header and one row per check."""
        report = VerifyReport([CheckResult("A1", 0.25, "<= 1e-07", False)])
        path = write_verify_report(report, str(tmp_path / "out"), 9)
        assert path == os.path.join(str(tmp_path / "out"), "verify_report.csv")
        with open(path, encoding="utf-8") as f:
            assert "seed=9 cmd=verify" in f.readline()
        assert read_csv(path)[0]["status"] == "FAIL"


class TestMatrixOracle:
    """Tests for the per-law oracle report."""

    def test_row_names(self):
        """Rows are named by tuple length and law."""
        report = run_matrix_oracle(2, tuples=5, lengths=(1, 3))
        names = [r.check for r in report.results]
        assert "n1_associativity_coarse_last" in names
        assert "n3_triangle" in names
        assert all(n.startswith(("n1_", "n3_")) for n in names)
        assert report.passed
