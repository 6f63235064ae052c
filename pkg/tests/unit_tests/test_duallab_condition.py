import pytest
import pytest_check as check
import math
from maxdual.duallab import SpaceSpec, adjoint_bound_probe, condition_ii_probe, suff_probe
"""
Unit tests for the sparse condition probes.
"""


class TestConditionProbe:
    @pytest.fixture
    def make_space(self):
        return SpaceSpec.named("calibration", 1, 6)

    @pytest.mark.parametrize("q", [2.0, 3.0, 4.0])
    def test_single_cube_exponent(self, q):
        space = SpaceSpec.from_presets("const:{:g}".format(q), "const:1", 1, 6)
        report = condition_ii_probe(space, trials=1, mode="single")
        check.is_true(report.passed)
        check.almost_equal(report.fitted["delta"], 1.0 / q, abs=1e-6)
        check.almost_equal(report.fitted["c"], 1.0, rel=1e-6)
        check.almost_equal(report.fitted["r_squared"], 1.0, abs=1e-6)

    def test_mixed(self, make_space):
        report = condition_ii_probe(make_space, trials=4, seed=2)
        check.is_true(report.passed)
        check.less_equal(report.worst_ratio, 1.0 + 1e-9)
        check.is_true(math.isfinite(report.fitted["delta"]))
        check.equal(report.provenance["mode"], "mixed")
        check.equal(len(report.family_hash), 16)

    def test_one_density(self, make_space):
        report = condition_ii_probe(make_space, trials=1, mode="single", densities=(0.5,))
        check.is_true(math.isnan(report.fitted["delta"]))

    @pytest.mark.parametrize(
        "kwargs", [{"mode": "bogus"}, {"densities": (0.0,)}, {"densities": (1.5,)}]
    )
    def test_arguments(self, make_space, kwargs):
        with pytest.raises(ValueError):
            condition_ii_probe(make_space, **kwargs)

    def test_reproducible(self, make_space):
        a = condition_ii_probe(make_space, trials=2, seed=9)
        b = condition_ii_probe(make_space, trials=2, seed=9)
        check.equal(a.family_hash, b.family_hash)
        check.equal(a.fitted["delta"], b.fitted["delta"])


class TestModularProbe:
    def test_calibration(self):
        space = SpaceSpec.named("calibration", 1, 5)
        report = suff_probe(space, trials=3, seed=1)
        check.is_true(report.passed)
        check.greater(report.fitted["strata_checks"], 0)
        check.greater(len(report.rows), 0)

    def test_variable(self):
        space = SpaceSpec.named("loghold", 1, 5)
        report = suff_probe(space, trials=3, seed=4)
        check.is_true(report.passed)


class TestAdjointBound:
    def test_calibration(self):
        space = SpaceSpec.named("calibration", 1, 5)
        report = adjoint_bound_probe(space, 4.0, 1.0, 0.5, trials=3, seed=2)
        check.is_true(report.passed)
        check.equal(report.fitted["nu"], 3)
        check.almost_equal(report.fitted["bound"], 24.0)
        check.equal(report.trials, 3)
