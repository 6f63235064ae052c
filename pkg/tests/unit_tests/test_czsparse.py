import pytest
import pytest_check as check
import numpy as np
from fractions import Fraction
from hypothesis import given, settings, strategies as st
from maxdual.czsparse import (
    ExceptionalSet,
    SparseEntry,
    SparseFamily,
    adjoint_split_check,
    adjoint_sparse_operator,
    choose_nu,
    cube_contains,
    cz_decompose,
    duality_check,
    sparse_from_maximal,
    sparse_operator,
)
from maxdual.lattice import Cube, LatticeFunction, ShiftedGrid, build_shifted_grids, support_box
"""
Unit tests for the Calderon-Zygmund decomposition and sparse families.
"""


def random_function(seed, n=1, m=6, density=0.5):
    rng = np.random.default_rng(seed)
    support = LatticeFunction.indicator(support_box(n), m).values
    vals = rng.exponential(size=support.shape) * (rng.random(support.shape) < density) * support
    vals.ravel()[int(np.flatnonzero(support.ravel())[0])] = 1.0
    return LatticeFunction(vals, m, nonnegative=True)


class TestDecomposition:
    def test_arguments(self):
        f = random_function(0)
        with pytest.raises(ValueError):
            cz_decompose(f, grid=ShiftedGrid((0,)), gamma=1.0)
        with pytest.raises(ValueError):
            cz_decompose(f)
        with pytest.raises(ValueError):
            cz_decompose(f, grid=ShiftedGrid((0, 0)))

    def test_zero_function(self):
        cz = cz_decompose(LatticeFunction.zeros(1, 4), grid=ShiftedGrid((0,)))
        check.equal(cz.k_range, [])

    @settings(max_examples=20, deadline=None)
    @given(
        st.integers(min_value=0, max_value=10**6),
        st.sampled_from([(0,), (1,), (2,)]),
        st.sampled_from([2.0, 4.0]),
    )
    def test_decay_and_maximality(self, seed, thirds, gamma):
        cz = cz_decompose(random_function(seed), grid=ShiftedGrid(thirds), gamma=gamma)
        check.is_true(cz.check_decay().passed)
        check.is_true(cz.check_maximality().passed)
        check.is_true(cz.check_nesting())
        check.is_true(cz.layer_identity(3))

    def test_decay_2d(self):
        f = random_function(3, n=2, m=4)
        for grid in build_shifted_grids(2)[:3]:
            cz = cz_decompose(f, grid=grid, gamma=8.0)
            check.is_true(cz.check_decay().passed)
            check.is_true(cz.check_maximality().passed)

    def test_local_variant(self):
        f = random_function(5)
        cz = cz_decompose(f, q0=support_box(1), gamma=4.0)
        check.equal(cz.variant, "local")
        check.equal(min(cz.k_range), 0)
        check.almost_equal(cz.scale, f.average(support_box(1)), rel=1e-12)
        check.is_true(cz.check_decay().passed)

    def test_levels_below_range(self):
        cz = cz_decompose(random_function(5), grid=ShiftedGrid((0,)))
        with pytest.raises(ValueError):
            cz.omega_mask(cz.k_range[0] - 1)


class TestSparseFamily:
    @pytest.fixture
    def make_cube(self):
        """
        The unit cube [0, 1) of the unshifted grid.
        """
        grid = ShiftedGrid((0,))
        return grid, grid.cube(0, (0,))

    def test_hole_outside(self, make_cube):
        grid, q = make_cube
        with pytest.raises(ValueError):
            ExceptionalSet(q, [grid.cube(0, (1,))])

    def test_exact_volume(self, make_cube):
        grid, q = make_cube
        e = ExceptionalSet(q, grid.children(q)[:1])
        check.equal(e.volume, Fraction(1, 2))
        check.is_true(cube_contains(q, grid.children(q)[1]))

    @pytest.mark.parametrize("eta, ok", [(0.5, True), (0.6, False)])
    def test_sparseness_checked(self, make_cube, eta, ok):
        grid, q = make_cube
        e = ExceptionalSet(q, grid.children(q)[:1])
        family = SparseFamily(eta, [SparseEntry(q, e, 0)], grid=grid)
        check.equal(family.verify().passed, ok)

    def test_overlap_detected(self, make_cube):
        grid, q = make_cube
        entries = [SparseEntry(q, ExceptionalSet(q)), SparseEntry(q, ExceptionalSet(q))]
        check.is_false(SparseFamily(0.5, entries, grid=grid).verify().passed)

    def test_nested_disjoint(self, make_cube):
        grid, q = make_cube
        left, right = grid.children(q)
        entries = [
            SparseEntry(q, ExceptionalSet(q, [left])),
            SparseEntry(left, ExceptionalSet(left)),
        ]
        family = SparseFamily(0.5, entries, grid=grid)
        check.is_true(family.verify().passed)
        check.equal(family.nested_pairs(), [(0, 1)])

    def test_partial_overlap_free_cubes(self):
        half = Fraction(1, 2)
        a, b = Cube((0,), 1), Cube((half,), 1)
        plain = [SparseEntry(a, ExceptionalSet(a)), SparseEntry(b, ExceptionalSet(b))]
        check.is_false(SparseFamily(0.5, plain).verify().passed)
        holed = [SparseEntry(a, ExceptionalSet(a, [Cube((half,), half)])), SparseEntry(b, ExceptionalSet(b))]
        check.is_true(SparseFamily(0.5, holed).verify().passed)

    @pytest.mark.parametrize("hole_side, ok", [(Fraction(1, 2), True), (Fraction(1, 4), False)])
    def test_partial_overlap_squares(self, hole_side, ok):
        half = Fraction(1, 2)
        a, b = Cube((0, 0), 1), Cube((half, half), 1)
        entries = [
            SparseEntry(a, ExceptionalSet(a, [Cube((half, half), hole_side)])),
            SparseEntry(b, ExceptionalSet(b)),
        ]
        check.equal(SparseFamily(0.5, entries).verify().passed, ok)

    def test_bad_eta(self, make_cube):
        with pytest.raises(ValueError):
            SparseFamily(1.0, [])

    def test_sparse_operator_of_constant(self, make_cube):
        grid, q = make_cube
        f = LatticeFunction.constant(3.0, 1, 4)
        family = SparseFamily(0.5, [SparseEntry(q, ExceptionalSet(q))], grid=grid)
        out = sparse_operator(family, f)
        check.is_true(np.allclose(out.values[16:32], 3.0))
        check.almost_equal(float(np.sum(out.values)) * f.cell_volume, 3.0, rel=1e-12)


class TestSparseDomination:
    @settings(max_examples=15, deadline=None)
    @given(st.integers(min_value=0, max_value=10**6), st.sampled_from([0.25, 0.5, 0.75]))
    def test_domination_certificate(self, seed, eta):
        f = random_function(seed)
        family, cert = sparse_from_maximal(f, ShiftedGrid((1,)), eta)
        check.is_true(cert.passed)
        check.is_true(family.verify().passed)
        check.equal(cert.fitted["family_size"], len(family))

    def test_domination_2d(self):
        f = random_function(2, n=2, m=4)
        family, cert = sparse_from_maximal(f, ShiftedGrid((0, 2)), 0.5)
        check.is_true(cert.passed)
        check.is_true(family.verify().passed)

    def test_arguments(self):
        f = random_function(1)
        with pytest.raises(ValueError):
            sparse_from_maximal(f, ShiftedGrid((0,)), 1.5)
        with pytest.raises(ValueError):
            sparse_from_maximal(-f, ShiftedGrid((0,)), 0.5)

    def test_duality(self):
        family, _ = sparse_from_maximal(random_function(4), ShiftedGrid((0,)), 0.5)
        report = duality_check(family, random_function(6), random_function(7))
        check.is_true(report.passed)

    def test_adjoint_positive(self):
        family, _ = sparse_from_maximal(random_function(4), ShiftedGrid((0,)), 0.5)
        out = adjoint_sparse_operator(family, random_function(8))
        check.is_true(np.all(out.values >= 0.0))

    @pytest.mark.parametrize("nu", [1, 2, 4])
    def test_adjoint_split(self, nu):
        f = random_function(9)
        family, _ = sparse_from_maximal(f, ShiftedGrid((0,)), 0.5)
        report = adjoint_split_check(family, f, nu)
        check.is_true(report.passed)
        check.equal(report.fitted["nu"], nu)

    def test_digest_deterministic(self):
        a, _ = sparse_from_maximal(random_function(4), ShiftedGrid((0,)), 0.5)
        b, _ = sparse_from_maximal(random_function(4), ShiftedGrid((0,)), 0.5)
        check.equal(a.digest(), b.digest())


class TestChooseNu:
    def test_known_value(self):
        check.equal(choose_nu(1.0, 0.5, 0.5, 1), 3)

    @settings(max_examples=100, deadline=None)
    @given(
        st.floats(min_value=0.1, max_value=100.0),
        st.floats(min_value=0.05, max_value=1.0),
        st.floats(min_value=0.05, max_value=0.95),
        st.sampled_from([1, 2]),
    )
    def test_smallest(self, c, delta, eta, n):
        nu = choose_nu(c, delta, eta, n)
        r = ((1.0 - eta) / 2.0**n) ** delta
        head = 2.0 ** (n * delta) * c / (1.0 - r)
        check.greater_equal(nu, 1)
        check.less_equal(head * r**nu, 0.5)
        if nu > 1:
            check.greater(head * r ** (nu - 1), 0.5)

    def test_arguments(self):
        with pytest.raises(ValueError):
            choose_nu(1.0, 0.0, 0.5, 1)
