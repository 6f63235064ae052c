import pytest
import pytest_check as check
import numpy as np
from hypothesis import given, settings, strategies as st
from maxdual.lattice import Box, LatticeFunction, ShiftedGrid, support_box
from maxdual.maximal import MaximalKind
from maxdual.presets import weight_preset
from maxdual.varlp import ExponentField
from maxdual.weights import (
    CubeFamily,
    SubsetSampler,
    a1_ratio,
    ainfty_absolute_continuity_check,
    ainfty_membership,
    ap_constant,
    ap_products,
    apvar_constant,
    converse_check,
    reverse_holder_probe,
    rubio_de_francia,
)
"""
Unit tests for the Muckenhoupt constants and the Rubio de Francia iteration.
"""


class TestCubeFamily:
    def test_all_lattice_aligned(self):
        family = CubeFamily.all_lattice_aligned(1, 2)
        check.equal(len(family), 10)
        check.almost_equal(float(np.max(family.sides)), 1.0)
        check.equal(len(CubeFamily.all_lattice_aligned(2, 1)), 5)

    def test_validation(self):
        with pytest.raises(ValueError):
            CubeFamily("outside", np.array([[1.5]]), np.array([1.0]))
        with pytest.raises(ValueError):
            CubeFamily("empty", np.zeros((0, 1)), np.zeros(0))
        with pytest.raises(ValueError):
            CubeFamily.all_lattice_aligned(1, 2, Box((0.0,), 0.3))

    def test_grid_cubes(self):
        family = CubeFamily.grid_cubes(ShiftedGrid((0,)), range(0, 3))
        check.equal(len(family), 1 + 2 + 4)

    def test_random_cubes_reproducible(self):
        a = CubeFamily.random_cubes(2, 5, 50)
        b = CubeFamily.random_cubes(2, 5, 50)
        check.equal(a.digest(), b.digest())
        check.is_true(np.all(a.lowers + a.sides[:, None] <= 1.0 + 1e-12))

    def test_union(self):
        a = CubeFamily.random_cubes(1, 1, 10)
        b = CubeFamily.grid_cubes(ShiftedGrid((0,)), [1])
        check.equal(len(a.union(b)), 12)


class TestMuckenhoupt:
    @pytest.fixture
    def make_family(self):
        return CubeFamily.random_cubes(1, 3, 200, min_side=2.0**-6)

    def test_constant_weight(self, make_family):
        v = LatticeFunction.constant(1.0, 1, 6)
        check.almost_equal(ap_constant(v, 2.0, make_family), 1.0, abs=1e-12)
        check.almost_equal(a1_ratio(v, MaximalKind.full()), 1.0, abs=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(min_value=0, max_value=10**6), st.sampled_from([1.5, 2.0, 3.0]))
    def test_products_at_least_one(self, seed, p):
        rng = np.random.default_rng(seed)
        v = LatticeFunction(rng.uniform(0.1, 10.0, size=48), 4, nonnegative=True)
        family = CubeFamily.random_cubes(1, seed, 50, min_side=2.0**-4)
        check.is_true(np.all(ap_products(v, p, family) >= 1.0 - 1e-12))

    def test_monotone_in_p(self, make_family):
        v = weight_preset("power-weight:0.5", 1, 6)
        a2 = ap_constant(v, 2.0, make_family)
        a3 = ap_constant(v, 3.0, make_family)
        check.less_equal(a3, a2 * (1.0 + 1e-12))

    def test_bad_exponent(self, make_family):
        with pytest.raises(ValueError):
            ap_constant(LatticeFunction.constant(1.0, 1, 6), 1.0, make_family)

    def test_bad_weight(self, make_family):
        with pytest.raises(ValueError):
            ap_constant(LatticeFunction.zeros(1, 6), 2.0, make_family)
        with pytest.raises(TypeError):
            ap_constant(np.ones(192), 2.0, make_family)

    def test_variable_constant_matches_classical(self, make_family):
        # with p = 2 the variable constant is the square root of [w^2]_{A_2}
        w = weight_preset("power-weight:0.3", 1, 6)
        p = ExponentField.constant(2.0, 1, 6)
        expected = ap_constant(w.field.power(2.0), 2.0, make_family) ** 0.5
        check.almost_equal(apvar_constant(p, w, make_family), expected, rel=1e-8)

    def test_ainfty_membership(self, make_family):
        s, a_s = ainfty_membership(weight_preset("power-weight:0.5", 1, 6), make_family)
        check.is_not_none(s)
        check.less_equal(a_s, 1.0e3)

    def test_reverse_holder(self, make_family):
        report = reverse_holder_probe(weight_preset("power-weight:0.5", 1, 6), make_family, (1.0, 1.5, 2.0))
        check.is_true(report.passed)
        check.almost_equal(report.fitted["c(1)"], 1.0, abs=1e-12)
        check.greater_equal(report.fitted["c(2)"], report.fitted["c(1.5)"])
        with pytest.raises(ValueError):
            reverse_holder_probe(weight_preset("const:1", 1, 6), make_family, (0.5,))

    def test_converse(self, make_family):
        v = weight_preset("power-weight:0.5", 1, 6)
        report = converse_check(v, 2.0, make_family, SubsetSampler(1, 500))
        check.is_true(report.passed)
        check.equal(report.trials, 500)

    def test_absolute_continuity(self, make_family):
        v = weight_preset("power-weight:-0.5", 1, 6)
        report = ainfty_absolute_continuity_check(v, make_family, SubsetSampler(2, 500))
        check.is_true(report.passed)
        check.greater(report.fitted["exponent"], 0.0)
        check.greater(report.fitted["c"], 0.0)


class TestRubioDeFrancia:
    @pytest.fixture
    def make_seed(self):
        rng = np.random.default_rng(4)
        support = LatticeFunction.indicator(support_box(1), 5).values
        return LatticeFunction(rng.exponential(size=96) * support, 5, nonnegative=True)

    def test_dyadic_run(self, make_seed):
        kind = MaximalKind.dyadic(ShiftedGrid((0,)))
        run = rubio_de_francia(make_seed, kind, 2.0)
        check.is_true(run.converged)
        check.equal(run.terms, 12)
        check.is_true(np.all(run.rg.values >= make_seed.values))
        check.almost_equal(run.ratio, 0.25, rel=1e-9)
        check.is_true(run.check(kind).passed)

    def test_arguments(self, make_seed):
        kind = MaximalKind.full()
        with pytest.raises(ValueError):
            rubio_de_francia(make_seed, kind, 0.0)
        with pytest.raises(ValueError):
            rubio_de_francia(make_seed, kind, 2.0, N=0)
        with pytest.raises(ValueError):
            rubio_de_francia(LatticeFunction(-np.ones(96), 5), kind, 2.0)

    def test_single_term(self, make_seed):
        kind = MaximalKind.full()
        run = rubio_de_francia(make_seed, kind, 2.0, N=1)
        check.equal(run.terms, 1)
        check.is_true(np.array_equal(run.rg.values, make_seed.values))
        check.is_true(run.converged)
        check.almost_equal(run.ratio, 0.25, rel=1e-12)
        check.almost_equal(run.tail_bound, np.max(make_seed.values) / 3.0, rel=1e-12)
        check.is_true(run.check(kind).passed)

        short = rubio_de_francia(make_seed, kind, 0.4, N=1)
        check.is_false(short.converged)
        check.equal(short.tail_bound, float("inf"))

    def test_divergent_tail(self, make_seed):
        run = rubio_de_francia(make_seed, MaximalKind.dyadic(ShiftedGrid((0,))), 0.4)
        check.is_false(run.converged)
        check.equal(run.tail_bound, float("inf"))
