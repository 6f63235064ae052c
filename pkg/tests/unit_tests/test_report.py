import pytest
import pytest_check as check
import csv
import json
import math
import numpy as np
from fractions import Fraction
from maxdual.log import LogLevel, logging_level, maxdual_log, set_logging_level, set_output_file
from maxdual.report import ProbeReport, family_hash, jsonable, merge_reports, write_reports
"""
Unit tests for probe reports and the logging interface.
"""


class TestProbeReport:
    @pytest.fixture
    def make_report(self):
        report = ProbeReport("toy", seed=3, resolution=6)
        report.record(True, 0.5, "first", x=1)
        report.record(True, 0.9, "second", x=2)
        return report

    def test_record(self, make_report):
        report = make_report
        check.is_true(report.passed)
        check.equal(report.trials, 2)
        check.equal(report.worst_ratio, 0.9)
        check.equal(report.argmax, "second")
        check.equal(report.rows[0]["label"], "first")

    def test_violation(self, make_report):
        report = make_report
        report.record(False, 1.5, "third")
        check.is_false(report.passed)
        check.equal(report.violations, 1)
        check.equal(len(report.rows), 2)
        check.is_in("1 violation(s) in 3 trials", report.summary())

    def test_summary_wording(self, make_report):
        check.is_in("no violation found in 2 trials", make_report.summary())
        make_report.conditional = True
        check.is_in("conditional", make_report.summary())

    def test_fail(self, make_report):
        make_report.fail("broken")
        check.is_false(make_report.passed)
        check.equal(make_report.violations, 0)
        check.is_in("broken", make_report.notes)

    def test_json_sorted_and_finite(self, make_report):
        make_report.fitted["c"] = math.inf
        data = json.loads(make_report.to_json())
        check.equal(data["fitted"]["c"], "inf")
        check.equal(data["seed"], 3)
        check.equal(list(data), sorted(data))

    def test_csv(self, make_report):
        rows = list(csv.DictReader(make_report.to_csv().splitlines()))
        check.equal(len(rows), 2)
        check.equal(rows[1]["x"], "2")


class TestHelpers:
    def test_jsonable(self):
        out = jsonable({"a": np.float64(1.5), "b": Fraction(1, 4), "c": np.arange(2), 1: np.bool_(True)})
        check.equal(out, {"a": 1.5, "b": 0.25, "c": [0, 1], "1": True})
        check.equal(jsonable(float("nan")), "nan")

    def test_family_hash(self):
        check.equal(family_hash([1, "a", np.zeros(3)]), family_hash([1, "a", np.zeros(3)]))
        check.not_equal(family_hash([1]), family_hash([2]))
        check.equal(len(family_hash([])), 16)

    def test_merge(self):
        a = ProbeReport("a")
        a.record(True, 0.2, "x")
        b = ProbeReport("b")
        b.record(False, 3.0, "y")
        merged = merge_reports("both", [a, b], seed=1)
        check.equal(merged.trials, 2)
        check.equal(merged.violations, 1)
        check.is_false(merged.passed)
        check.equal(merged.worst_ratio, 3.0)
        check.equal(merged.argmax, "y (b)")
        check.equal([r["label"] for r in merged.rows], ["a", "b"])
        check.equal(merged.seed, 1)

    def test_write_reports(self, tmp_path):
        a = ProbeReport("a")
        a.record(True, 0.2, "x", value=1.0)
        b = ProbeReport("b")
        b.record(True, 0.1, "y")
        paths = write_reports([a, b], str(tmp_path / "out"), "run")
        check.equal([p.rsplit(".", 1)[1] for p in paths], ["json", "csv", "txt"])
        with open(paths[0]) as fin:
            check.equal([r["inequality"] for r in json.load(fin)], ["a", "b"])
        with open(paths[1]) as fin:
            rows = list(csv.DictReader(fin))
        check.equal([r["inequality"] for r in rows], ["a", "b"])
        with open(paths[2]) as fin:
            check.is_in("no violation found in 1 trials", fin.read())


class TestLogging:
    def test_level(self):
        previous = logging_level()
        set_logging_level(LogLevel.Warning)
        check.equal(logging_level(), LogLevel.Warning)
        set_logging_level(previous)
        with pytest.raises(TypeError):
            set_logging_level("debug")

    def test_output_file(self, tmp_path):
        previous = logging_level()
        set_logging_level(LogLevel.Info)
        path = tmp_path / "run.log"
        set_output_file(str(path))
        maxdual_log(LogLevel.Info, "hello")
        maxdual_log(LogLevel.Debug, "hidden")
        set_logging_level(previous)
        text = path.read_text()
        check.is_in("[INFO] hello", text)
        check.is_not_in("hidden", text)
