import pytest
import pytest_check as check
import numpy as np
from hypothesis import given, settings, strategies as st
from maxdual.lattice import Box, LatticeFunction, support_box
from maxdual.presets import exponent_preset, function_preset, weight_preset
from maxdual.varlp import (
    POWER_CACHE_SIZE,
    ExponentField,
    WeightField,
    bfs_axiom_check,
    check_modular_norm_bounds,
    conjugate,
    holder_pairing_check,
    log_holder_check,
    luxemburg_norm,
    modular,
    norm_of_indicator,
    weighted_norm,
)
"""
Unit tests for modulars, Luxemburg norms and weights.
"""


def random_function(seed, n=1, m=5):
    rng = np.random.default_rng(seed)
    support = LatticeFunction.indicator(support_box(n), m).values
    return LatticeFunction(rng.exponential(size=support.shape) * support, m, nonnegative=True)


class TestExponentField:
    def test_bounds(self):
        p = exponent_preset("affine:1.5,1", 1, 4)
        check.almost_equal(p.p_minus, 1.5, abs=1e-12)
        check.almost_equal(p.p_plus, 2.5, abs=1e-12)
        check.is_false(p.is_constant)

    def test_p_minus_one_rejected(self):
        with pytest.raises(ValueError):
            ExponentField.constant(1.0, 1, 3)

    def test_conjugate(self):
        p = ExponentField.constant(3.0, 1, 3)
        check.almost_equal(conjugate(p).p_minus, 1.5, abs=1e-12)

    def test_type_checked(self):
        with pytest.raises(TypeError):
            ExponentField(np.full(24, 2.0))


class TestWeightField:
    def test_positive(self):
        with pytest.raises(ValueError):
            WeightField(LatticeFunction.zeros(1, 3))

    def test_dual_power(self):
        w = WeightField.constant(2.0, 1, 3)
        p = ExponentField.constant(2.0, 1, 3)
        check.almost_equal(float(w.power(p).values[0]), 4.0, rel=1e-12)
        check.almost_equal(float(w.dual_power(p).values[0]), 0.25, rel=1e-12)
        check.is_true(w.inverse() is w.inverse())

    def test_power_cache_by_values(self):
        w = WeightField.constant(2.0, 1, 3)
        first = w.power(ExponentField.constant(2.0, 1, 3))
        check.is_true(w.power(ExponentField.constant(2.0, 1, 3)) is first)
        for i in range(POWER_CACHE_SIZE + 4):
            q = 1.5 + 0.25 * i
            # temporaries may reuse the address of an earlier field
            check.almost_equal(float(w.power(ExponentField.constant(q, 1, 3)).values[0]), 2.0**q, rel=1e-12)
            check.almost_equal(float(w.dual_power(ExponentField.constant(q, 1, 3)).values[0]), 2.0 ** (-q / (q - 1.0)), rel=1e-12)
        check.is_true(len(w._powers) <= POWER_CACHE_SIZE)
        check.is_true(len(w._dual_powers) <= POWER_CACHE_SIZE)
        check.is_false(w.power(ExponentField.constant(2.0, 1, 3)) is first)


class TestLuxemburgNorm:
    @settings(max_examples=50, deadline=None)
    @given(st.sampled_from([1.5, 2.0, 3.0, 4.0]), st.integers(min_value=0, max_value=10**6))
    def test_constant_exponent(self, q, seed):
        f = random_function(seed) * 10.0 ** ((seed % 7) - 3)
        exact = float(np.sum(f.values**q) * f.cell_volume) ** (1.0 / q)
        check.almost_equal(luxemburg_norm(f, ExponentField.constant(q, 1, 5)), exact, rel=1e-9)

    def test_unit_modular(self):
        p = exponent_preset("affine:1.5,1.5", 1, 5)
        f = random_function(4)
        lam = luxemburg_norm(f, p)
        check.almost_equal(modular(f / lam, p), 1.0, rel=1e-9)

    def test_zero(self):
        check.equal(luxemburg_norm(LatticeFunction.zeros(1, 3), ExponentField.constant(2.0, 1, 3)), 0.0)

    def test_homogeneous(self):
        p = exponent_preset("loghold:2,0.5", 2, 3)
        f = random_function(8, n=2, m=3)
        check.almost_equal(luxemburg_norm(3.0 * f, p), 3.0 * luxemburg_norm(f, p), rel=1e-9)

    def test_indicator_norm(self):
        # ||chi_Q||_{L^2} = |Q|^{1/2}
        p = ExponentField.constant(2.0, 1, 4)
        w = WeightField.constant(1.0, 1, 4)
        check.almost_equal(norm_of_indicator(Box((0.1,), 0.3), p, w), 0.3**0.5, rel=1e-9)

    def test_weighted(self):
        p = ExponentField.constant(2.0, 1, 4)
        w = WeightField.constant(3.0, 1, 4)
        f = random_function(2, m=4)
        check.almost_equal(weighted_norm(f, p, w), 3.0 * luxemburg_norm(f, p), rel=1e-9)

    def test_default_function_has_unit_norm(self):
        f = function_preset("indicator:0,0.25,2", 1, 8)
        check.almost_equal(luxemburg_norm(f, ExponentField.constant(2.0, 1, 8)), 1.0, rel=1e-9)


class TestChecks:
    @pytest.mark.parametrize("scale", [1.0e-3, 0.5, 1.0, 7.0, 1.0e3])
    def test_modular_norm_bounds(self, scale):
        p = exponent_preset("affine:1.2,2", 1, 5)
        report = check_modular_norm_bounds(random_function(1) * scale, p)
        check.is_true(report.passed)
        check.greater_equal(report.fitted["slack_lower"], 1.0 - 1e-9)

    def test_local_bounds(self):
        p = exponent_preset("affine:1.2,2", 1, 5)
        report = check_modular_norm_bounds(random_function(1), p, region=Box((0.25,), 0.5))
        check.is_true(report.passed)

    def test_holder(self):
        p = exponent_preset("affine:1.5,1", 1, 5)
        w = weight_preset("power-weight:0.3", 1, 5)
        report = holder_pairing_check(random_function(1), random_function(2), p, w)
        check.is_true(report.passed)
        check.less_equal(report.fitted["attained_ratio"], 2.0)

    def test_log_holder(self):
        p = exponent_preset("loghold:2,0.5", 1, 4)
        report = log_holder_check(p, 2.0, c=10.0)
        check.is_true(report.passed)
        check.greater(report.fitted["c_min"], 0.0)

    def test_constant_exponent_log_holder(self):
        report = log_holder_check(ExponentField.constant(2.0, 1, 3), 2.0)
        check.equal(report.fitted["c_min"], 0.0)

    def test_bfs_axiom(self):
        p = exponent_preset("affine:1.5,1", 1, 5)
        w = weight_preset("power-weight:0.3", 1, 5)
        report = bfs_axiom_check(random_function(6), p, w, Box((0.0,), 0.5))
        check.is_true(report.passed)


class TestPresets:
    def test_unknown(self):
        with pytest.raises(ValueError):
            exponent_preset("cubic:1", 1, 3)
        with pytest.raises(ValueError):
            weight_preset("const:1,2", 1, 3)
        with pytest.raises(ValueError):
            function_preset("indicator:0.5,0.25", 1, 3)

    def test_power_weight(self):
        w = weight_preset("power-weight:-0.9", 1, 6)
        check.greater(float(np.max(w.values)), 10.0)
        check.greater(float(np.min(w.values)), 0.0)
