import pytest
import pytest_check as check
from maxdual.selftest import (
    RANDOM_COUNT,
    covering_suite,
    luxemburg_calibration,
    modular_norm_suite,
)
"""
Unit tests for the suites of the invariant run at their default sizes.
"""


class TestSuiteSizes:
    def test_luxemburg_calibration(self):
        report = luxemburg_calibration(1, 4, seed=2)
        check.is_true(report.passed)
        # four exponents, one hundred functions each
        check.equal(report.trials, 400)

    def test_modular_bounds_hit_both_branches(self):
        report = modular_norm_suite(1, 4, seed=3)
        check.is_true(report.passed)
        check.greater_equal(report.fitted["norm>1"], 100)
        check.greater_equal(report.fitted["norm<=1"], 100)
        check.equal(report.fitted["norm>1"] + report.fitted["norm<=1"], 1000)

    def test_modular_bounds_short_run(self):
        report = modular_norm_suite(1, 4, seed=3, count=5)
        check.is_true(report.passed)
        check.equal(report.fitted["norm>1"] + report.fitted["norm<=1"], 5)

    @pytest.mark.parametrize("n", [1, 2])
    def test_covering(self, n):
        report = covering_suite(n, seed=4, count=500)
        check.is_true(report.passed)
        check.equal(report.fitted["n"], n)
        check.equal(report.trials, 500)

    def test_random_counts(self):
        check.equal(RANDOM_COUNT, {1: 1000, 2: 100})
