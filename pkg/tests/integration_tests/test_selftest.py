import pytest
import pytest_timeout
import pytest_check as check
from maxdual.selftest import run_selftest, selftest_passed
"""
Integration test for the invariant suite behind ``maxdual selftest``
"""


def without_timestamps(reports):
    out = []
    for r in reports:
        d = r.to_dict()
        d.pop("timestamp")
        out.append(d)
    return out


class TestSelftest:

    @pytest.mark.timeout(600)
    def test_selftest_1d(self):
        reports = run_selftest(1, 6, seed=7, trials=5)
        for r in reports:
            check.is_true(r.passed, r.summary())
        check.is_true(selftest_passed(reports))
        names = [r.inequality for r in reports]
        check.is_in("grid-covering", names)
        check.is_in("sparse-domination", names)
        check.is_in("key-estimate", names)

    @pytest.mark.timeout(600)
    def test_selftest_2d(self):
        reports = run_selftest(2, 3, seed=11, trials=3)
        for r in reports:
            check.is_true(r.passed, r.summary())

    # Identical inputs must give identical reports up to the timestamp
    @pytest.mark.timeout(600)
    def test_reproducible(self):
        a = run_selftest(1, 5, seed=3, trials=2)
        b = run_selftest(1, 5, seed=3, trials=2)
        check.equal(without_timestamps(a), without_timestamps(b))

    # Every suite at its acceptance size, n = 1 and m = 8
    @pytest.mark.timeout(1200)
    def test_selftest_full_size(self):
        reports = run_selftest(1, 8, seed=7)
        for r in reports:
            check.is_true(r.passed, r.summary())
        by_name = {}
        for r in reports:
            by_name.setdefault(r.inequality, []).append(r)
        check.equal(by_name["luxemburg-calibration"][0].trials, 400)
        check.equal(sorted(r.fitted["n"] for r in by_name["grid-covering"]), [1, 2])
        check.equal([r.trials for r in by_name["grid-covering"]], [10000, 10000])
        check.greater_equal(by_name["modular-norm-bounds"][0].fitted["norm>1"], 100)
        check.greater_equal(by_name["modular-norm-bounds"][0].fitted["norm<=1"], 100)
        check.equal(len(by_name["cz-decay"][0].rows), 1000)
        check.equal(len(by_name["sparse-domination"][0].rows), 1000)
        check.equal(len(by_name["sparse-duality"][0].rows), 1000)
        check.equal(len(by_name["grid-comparison"][0].rows), 1000)
