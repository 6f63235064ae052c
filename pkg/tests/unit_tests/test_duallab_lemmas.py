import pytest
import pytest_check as check
import math
import numpy as np
from maxdual.duallab import (
    LemmaConstants,
    SpaceSpec,
    build_constants,
    compute_tQ_bQ,
    key_lemma_check,
    lemma51_decay_probe,
    lemma51_probe,
    lemma52_check,
    lemma53_check,
    random_disjoint_family,
)
from maxdual.lattice import Box
"""
Unit tests for the cube-local estimates, on the unweighted space with
exponent 2 where every quantity has a closed form.
"""


class TestCalibration:
    @pytest.fixture
    def make_space(self):
        return SpaceSpec.named("calibration", 1, 6)

    @pytest.fixture
    def make_constants(self):
        return LemmaConstants(r=1.25, c=2.0, p_minus=2.0, p_plus=2.0, s=1.5, nu=3.0, gamma=1.125)

    @pytest.fixture
    def make_cubes(self):
        return [Box((0.0,), 1.0), Box((0.0,), 0.5), Box((0.25,), 0.25)]

    def test_averaged_sums(self, make_space):
        report = lemma51_probe(make_space, r_grid=(1.25, 2.0), trials=10, seed=1)
        check.is_true(report.passed)
        check.almost_equal(report.fitted["c_hat(r=1.25)"], 1.0, rel=1e-9)
        check.almost_equal(report.fitted["c_hat(r=2)"], 1.0, rel=1e-9)

    def test_averaged_sums_resolutions(self, make_space):
        report = lemma51_probe(make_space, r_grid=(1.5,), trials=5, compare_resolutions=(5,))
        check.equal(report.fitted["unstable_r"], [])
        with pytest.raises(ValueError):
            lemma51_probe(make_space, r_grid=(1.0,))

    def test_build_constants(self, make_space):
        const = build_constants(make_space, trials=5, seed=2)
        check.almost_equal(const.c, 2.0, rel=1e-9)
        check.equal(const.s, 1.5)
        check.equal(const.nu, 3.0)
        check.almost_equal(const.gamma, 1.125)
        check.almost_equal(const.k, 8.0, rel=1e-9)
        check.is_in("c", const.provenance)

    def test_build_constants_overrides(self, make_space):
        const = build_constants(make_space, overrides={"c": 3.0, "s": 2.0, "nu": 2.0, "k": 5.0})
        check.equal(const.c, 3.0)
        check.equal(const.k, 5.0)
        check.equal(const.provenance["s"], "override")
        with pytest.raises(ValueError):
            build_constants(make_space, overrides={"zeta": 1.0})

    def test_tq_empty(self, make_space, make_constants):
        res = compute_tQ_bQ(Box((0.0,), 0.5), make_space, make_constants)
        check.is_true(res.empty)
        check.equal(res.b_q, 0.0)
        check.almost_equal(res.t_max, math.sqrt(2.0), rel=1e-12)

    def test_tq_at_top(self, make_space):
        const = LemmaConstants(1.25, 2.0, 2.0, 2.0, 1.5, 3.0, 1.125, k_override=0.5)
        res = compute_tQ_bQ(Box((0.0,), 0.5), make_space, const)
        check.almost_equal(res.t_q, res.t_max, rel=1e-12)
        check.almost_equal(res.b_q, 1.0, rel=1e-9)
        with pytest.raises(ValueError):
            compute_tQ_bQ(Box((0.0,), 0.5), make_space, const, grid_points=1)

    def test_b_measure(self, make_space, make_constants):
        report = lemma52_check(make_space, make_constants, samples=50, seed=3, count=5)
        check.is_true(report.passed)
        check.is_true(report.conditional)
        check.equal(report.fitted["nonempty_cubes"], 0)
        check.equal(report.fitted["max_family_sum"], 0.0)
        check.almost_equal(report.fitted["eqb_worst"], 1.0 / make_constants.k, rel=1e-9)

    def test_scale_window(self, make_space, make_constants, make_cubes):
        report = lemma53_check(make_space, make_constants, make_cubes)
        check.is_true(report.passed)
        check.almost_equal(report.fitted["c_hat"], 1.0, rel=1e-9)

    def test_key_estimate(self, make_space, make_constants, make_cubes):
        report = key_lemma_check(make_space, make_constants, make_cubes)
        check.is_true(report.passed)
        check.almost_equal(report.fitted["c_hat"], 1.0, rel=1e-9)
        check.almost_equal(report.fitted["eta"], make_constants.key_exponent)
        check.equal(report.fitted["sum_b"], 0.0)

    # norm(chi_Q) is 1/2 and 1/4, so the default sweep reaches t >= 1
    def test_key_estimate_large_scales(self, make_space, make_constants):
        cubes = [Box((0.25,), 0.25), Box((0.25,), 0.0625)]
        window = lemma53_check(make_space, make_constants, cubes)
        key = key_lemma_check(make_space, make_constants, cubes)
        check.is_true(key.passed)
        c_window = [row["c"] for row in window.rows if row["check"] == "window"]
        large = [row for row in key.rows if row["check"] == "t>=1"]
        check.equal(len(large), len(cubes))
        for row, c in zip(large, c_window):
            check.is_true(row["ok"])
            check.almost_equal(row["c_window"], c, rel=1e-9)
            check.almost_equal(row["c"], c, rel=1e-9)
        check.almost_equal(key.fitted["c_rh"], 1.0, rel=1e-9)

    def test_key_estimate_bad_sweep(self, make_space, make_constants, make_cubes):
        with pytest.raises(ValueError):
            key_lemma_check(make_space, make_constants, make_cubes[:1], t_sweep=[10.0])

    def test_decay_of_constants(self, make_space):
        cubes = random_disjoint_family(1, 6, np.random.default_rng(0))
        report = lemma51_decay_probe(make_space, cubes, 4.0)
        check.is_true(report.passed)
        check.is_in("no stopping set above level 0", report.notes)
        check.almost_equal(report.fitted["beta"], (1.0 - 8.0**-2.0) ** 0.5, rel=1e-12)
        with pytest.raises(ValueError):
            lemma51_decay_probe(make_space, cubes, 0.5)
        with pytest.raises(ValueError):
            lemma51_decay_probe(make_space, cubes, 4.0, t=[1.0] * (len(cubes) + 1))


class TestVariableExponent:
    @pytest.fixture
    def make_space(self):
        return SpaceSpec.from_presets("affine:1.5,1", "power-weight:0.25", 1, 6)

    def test_tq_with_unit_k(self, make_space):
        # Jensen puts the ratio above 1 at every scale, so t_Q is the top scale
        const = LemmaConstants(1.25, 1.0, 1.5, 2.5, 2.0, 2.0, 1.1, k_override=1.0)
        for q in (Box((0.0,), 1.0), Box((0.5,), 0.5), Box((0.0,), 0.25)):
            res = compute_tQ_bQ(q, make_space, const)
            check.almost_equal(res.t_q, res.t_max, rel=1e-12)
            check.greater_equal(res.b_q, 1.0 - 1e-9)

    def test_decay(self, make_space):
        cubes = random_disjoint_family(1, 6, np.random.default_rng(5))
        report = lemma51_decay_probe(make_space, cubes, 50.0, seed=5)
        check.is_true(report.passed)
        check.equal(report.fitted["gamma"], 4.0)

    def test_key_estimate_agrees_with_scale_window(self, make_space):
        const = LemmaConstants(1.25, 1.0, 1.5, 2.5, 2.0, 2.0, 1.1, k_override=1.0)
        cubes = [Box((0.5,), 0.0625), Box((0.25,), 0.125)]
        window = lemma53_check(make_space, const, cubes)
        key = key_lemma_check(make_space, const, cubes)
        c_window = [row["c"] for row in window.rows if row["check"] == "window"]
        large = [row for row in key.rows if row["check"] == "t>=1"]
        check.equal(len(large), len(cubes))
        for row, c in zip(large, c_window):
            check.is_true(row["ok"])
            check.almost_equal(row["c_window"], c, rel=1e-9)
            check.less_equal(row["c"], c * (1.0 + 1e-9))
            check.greater_equal(row["c"], 1.0 - 1e-12)
