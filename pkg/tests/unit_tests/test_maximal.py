import pytest
import pytest_check as check
import numpy as np
from hypothesis import given, settings, strategies as st
from maxdual.lattice import Box, LatticeFunction, ShiftedGrid, support_box
from maxdual.maximal import (
    CandidateFamily,
    MaximalKind,
    check_grid_comparison,
    maximal,
    operator_norm_lower_bound,
    thread_count,
)
from maxdual.varlp import ExponentField, WeightField
"""
Unit tests for the maximal operators and the norm estimates.
"""


def brute_force_full(values):
    """
    Maximal function over all windows of the 1D lattice.
    """
    N = values.size
    out = np.zeros(N)
    for lo in range(N):
        for hi in range(lo + 1, N + 1):
            avg = np.mean(np.abs(values[lo:hi]))
            out[lo:hi] = np.maximum(out[lo:hi], avg)
    return out


def brute_force_full_2d(values):
    N = values.shape[0]
    out = np.zeros(values.shape)
    for t in range(1, N + 1):
        for i in range(N - t + 1):
            for j in range(N - t + 1):
                avg = np.mean(np.abs(values[i:i + t, j:j + t]))
                block = out[i:i + t, j:j + t]
                np.maximum(block, avg, out=block)
    return out


class TestMaximalKind:
    def test_parse(self):
        check.equal(MaximalKind.parse("full", 1), MaximalKind.full())
        check.equal(MaximalKind.parse("grid:1", 2).grid, ShiftedGrid((1, 1)))
        check.equal(MaximalKind.parse("grid", 1).grid, ShiftedGrid((0,)))
        check.equal(MaximalKind.parse("local", 2).cube, support_box(2))
        with pytest.raises(ValueError):
            MaximalKind.parse("centred", 1)

    def test_local_cube_inside_box(self):
        with pytest.raises(ValueError):
            MaximalKind.local_dyadic(Box((1.5,), 1.0))

    def test_type_checked(self):
        with pytest.raises(TypeError):
            maximal(LatticeFunction.zeros(1, 2), "full")


class TestMaximal:
    @settings(max_examples=25, deadline=None)
    @given(st.integers(min_value=0, max_value=10**6))
    def test_full_matches_brute_force(self, seed):
        rng = np.random.default_rng(seed)
        f = LatticeFunction(rng.normal(size=24), 3)
        mf = maximal(f, MaximalKind.full())
        check.is_true(np.allclose(mf.values, brute_force_full(f.values), rtol=1e-12, atol=1e-14))

    def test_full_matches_brute_force_2d(self):
        rng = np.random.default_rng(2)
        f = LatticeFunction(rng.exponential(size=(12, 12)), 2, nonnegative=True)
        mf = maximal(f, MaximalKind.full())
        check.is_true(np.allclose(mf.values, brute_force_full_2d(f.values), rtol=1e-12, atol=1e-14))

    @pytest.mark.parametrize("kind", ["full", "grid", "local"])
    def test_dominates_function(self, kind):
        rng = np.random.default_rng(0)
        support = LatticeFunction.indicator(support_box(1), 4).values
        f = LatticeFunction(rng.normal(size=48) * support, 4)
        mf = maximal(f, MaximalKind.parse(kind, 1))
        check.is_true(np.all(mf.values >= np.abs(f.values) * (1.0 - 1e-12)))

    def test_constant(self):
        f = LatticeFunction.constant(2.0, 2, 3)
        check.is_true(np.allclose(maximal(f, MaximalKind.full()).values, 2.0))
        check.is_true(np.allclose(maximal(f, MaximalKind.parse("grid", 2)).values, 2.0))

    def test_local_vanishes_outside(self):
        f = LatticeFunction.constant(1.0, 1, 3)
        mf = maximal(f, MaximalKind.local_dyadic(support_box(1)))
        check.is_true(np.all(mf.values[:8] == 0.0))
        check.is_true(np.all(mf.values[16:] == 0.0))
        check.is_true(np.allclose(mf.values[8:16], 1.0))

    @settings(max_examples=25, deadline=None)
    @given(st.integers(min_value=0, max_value=10**6))
    def test_full_dominates_dyadic_1d(self, seed):
        rng = np.random.default_rng(seed)
        f = LatticeFunction(rng.exponential(size=48), 4, nonnegative=True)
        full = maximal(f, MaximalKind.full()).values
        dyadic = maximal(f, MaximalKind.parse("grid", 1)).values
        check.is_true(np.all(full >= dyadic * (1.0 - 1e-12)))

    @pytest.mark.parametrize("n, m", [(1, 5), (2, 3)])
    def test_grid_comparison(self, n, m):
        rng = np.random.default_rng(9)
        support = LatticeFunction.indicator(support_box(n), m).values
        f = LatticeFunction(rng.exponential(size=support.shape) * support, m, nonnegative=True)
        report = check_grid_comparison(f)
        check.is_true(report.passed)
        check.equal(report.fitted["violating_cells"], 0)


class TestNormEstimate:
    def test_lower_bound_at_least_one(self):
        p = ExponentField.constant(2.0, 1, 6)
        w = WeightField.constant(1.0, 1, 6)
        est = operator_norm_lower_bound(MaximalKind.full(), p, w, CandidateFamily().generate(1, 6))
        check.greater_equal(est.value, 1.0)
        check.is_not_none(est.argmax)
        check.equal(float(est), est.value)
        check.almost_equal(est.working_bound(), 1.5 * est.value, rel=1e-12)
        check.equal(est.working_bound(1.0), est.value)
        with pytest.raises(ValueError):
            est.working_bound(0.9)

    def test_threads_do_not_change_result(self, monkeypatch):
        p = ExponentField.constant(3.0, 1, 5)
        w = WeightField.constant(1.0, 1, 5)
        candidates = CandidateFamily(seed=4).generate(1, 5, 3.0)
        monkeypatch.setenv("MAXDUAL_THREADS", "1")
        serial = operator_norm_lower_bound(MaximalKind.full(), p, w, candidates)
        monkeypatch.setenv("MAXDUAL_THREADS", "3")
        threaded = operator_norm_lower_bound(MaximalKind.full(), p, w, candidates)
        check.equal(serial.value, threaded.value)
        check.equal(serial.ratios, threaded.ratios)

    def test_zero_candidates(self):
        p = ExponentField.constant(2.0, 1, 3)
        w = WeightField.constant(1.0, 1, 3)
        with pytest.raises(ValueError):
            operator_norm_lower_bound(MaximalKind.full(), p, w, [])
        with pytest.raises(ValueError):
            operator_norm_lower_bound(
                MaximalKind.full(), p, w, [("zero", LatticeFunction.zeros(1, 3))]
            )

    def test_thread_count(self, monkeypatch):
        monkeypatch.setenv("MAXDUAL_THREADS", "0")
        check.equal(thread_count(), 1)
        monkeypatch.setenv("MAXDUAL_THREADS", "four")
        with pytest.raises(ValueError):
            thread_count()

    def test_candidate_family(self):
        with pytest.raises(ValueError):
            CandidateFamily("everything")
        check.equal(CandidateFamily(seed=1).digest(1, 6), CandidateFamily(seed=1).digest(1, 6))
        check.not_equal(CandidateFamily(seed=1).digest(1, 6), CandidateFamily(seed=2).digest(1, 6))
