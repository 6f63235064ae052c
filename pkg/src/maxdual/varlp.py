"""
Variable exponents, weights, modulars and Luxemburg norms.

For an exponent field :math:`p(\\cdot)` with :math:`1 < p_- \\le p_+ < \\infty`
the modular of a lattice function is

.. math::

    \\varrho(f) = \\int |f(x)|^{p(x)} \\, dx,

and the Luxemburg norm is the unique :math:`\\lambda > 0` with
:math:`\\varrho(f/\\lambda) = 1`. Because :math:`\\lambda \\mapsto \\varrho(f/\\lambda)`
is strictly decreasing and
:math:`\\min(\\varrho^{1/p_-}, \\varrho^{1/p_+}) \\le \\|f\\| \\le
\\max(\\varrho^{1/p_-}, \\varrho^{1/p_+})`, the norm is found by bisection
inside that bracket.
"""

import math
from collections import OrderedDict
from typing import Optional, Tuple, Union

import numpy as np
from scipy import optimize

from .lattice import Box, LatticeFunction
from .log import LogLevel, maxdual_log
from .report import ProbeReport, family_hash

P_MAX = 1.0e3
"""
Largest admissible value of an exponent field.
"""

NORM_RTOL = 1.0e-12
"""
Relative bracket width at which the Luxemburg bisection stops.
"""

POWER_CACHE_SIZE = 8
"""
Derived weight fields kept per weight and kind, least recently used dropped first.
"""

Region = Union[None, Box, np.ndarray]


class ExponentField:
    """
    Variable exponent :math:`p(\\cdot)` sampled on the lattice.

    Parameters
    ----------
    p : LatticeFunction
        Cell values of the exponent.

    Attributes
    ----------
    p_minus : float
        Essential infimum :math:`p_-`.
    p_plus : float
        Essential supremum :math:`p_+`.
    field : LatticeFunction
        The underlying lattice function.
    """

    def __init__(self, p: LatticeFunction):
        if not isinstance(p, LatticeFunction):
            raise TypeError("Exponent field must be built from a LatticeFunction.")
        self._p = p
        self._p_minus = float(np.min(p.values))
        self._p_plus = float(np.max(p.values))
        if self._p_minus <= 1.0 + 1.0e-9:
            raise ValueError("Exponent p_- must be > 1.")
        if self._p_plus >= P_MAX:
            raise ValueError("Exponent p_+ must be < {}.".format(P_MAX))

    @classmethod
    def constant(cls, q: float, n: int, m: int) -> "ExponentField":
        return cls(LatticeFunction.constant(q, n, m))

    @property
    def field(self) -> LatticeFunction:
        return self._p

    @property
    def values(self) -> np.ndarray:
        return self._p.values

    @property
    def n(self) -> int:
        return self._p.n

    @property
    def m(self) -> int:
        return self._p.m

    @property
    def p_minus(self) -> float:
        return self._p_minus

    @property
    def p_plus(self) -> float:
        return self._p_plus

    @property
    def is_constant(self) -> bool:
        return self._p_minus == self._p_plus

    def bounds_on(self, region: Box) -> Tuple[float, float]:
        """
        Infimum and supremum of the exponent over the cells meeting ``region``.
        """
        slices, weights = self._p.region_weights(region)
        vals = self._p.values[slices][weights > 0.0]
        if vals.size == 0:
            raise ValueError("Region does not meet the computational box.")
        return float(np.min(vals)), float(np.max(vals))

    def __repr__(self) -> str:
        return "ExponentField(p_-={:.6g}, p_+={:.6g})".format(self._p_minus, self._p_plus)


def conjugate(p: ExponentField) -> ExponentField:
    """
    Pointwise conjugate exponent :math:`p'(x) = p(x)/(p(x) - 1)`.
    """
    vals = p.values
    return ExponentField(p.field.with_values(vals / (vals - 1.0)))


class WeightField:
    """
    Weight :math:`w`, finite and strictly positive on every cell.

    The derived fields :math:`w^{p(\\cdot)}` and :math:`w^{-p'(\\cdot)}` are
    built on first use and cached by the values of the exponent field, at most
    :data:`POWER_CACHE_SIZE` of each kind.

    Parameters
    ----------
    w : LatticeFunction
        Cell values of the weight.
    """

    def __init__(self, w: LatticeFunction):
        if not isinstance(w, LatticeFunction):
            raise TypeError("Weight must be built from a LatticeFunction.")
        if np.any(w.values <= 0.0):
            raise ValueError("Weight must be strictly positive on every cell.")
        self._w = LatticeFunction(w.values, w.m, nonnegative=True)
        self._inverse: Optional["WeightField"] = None
        self._powers: "OrderedDict[str, LatticeFunction]" = OrderedDict()
        self._dual_powers: "OrderedDict[str, LatticeFunction]" = OrderedDict()

    @classmethod
    def constant(cls, c: float, n: int, m: int) -> "WeightField":
        return cls(LatticeFunction.constant(c, n, m))

    @property
    def field(self) -> LatticeFunction:
        return self._w

    @property
    def values(self) -> np.ndarray:
        return self._w.values

    @property
    def n(self) -> int:
        return self._w.n

    @property
    def m(self) -> int:
        return self._w.m

    def inverse(self) -> "WeightField":
        if self._inverse is None:
            self._inverse = WeightField(self._w.with_values(1.0 / self._w.values))
        return self._inverse

    def power(self, p: ExponentField) -> LatticeFunction:
        """
        The field :math:`w^{p(\\cdot)}`.
        """
        return self._lookup(self._powers, p, lambda: p.values)

    def dual_power(self, p: ExponentField) -> LatticeFunction:
        """
        The field :math:`w^{-p'(\\cdot)}`.
        """
        return self._lookup(self._dual_powers, p, lambda: -p.values / (p.values - 1.0))

    def _lookup(self, cache: "OrderedDict[str, LatticeFunction]", p: ExponentField, exponent) -> LatticeFunction:
        key = family_hash((p.field.m, p.values.shape, p.values))
        if key in cache:
            cache.move_to_end(key)
            return cache[key]
        cache[key] = self._cached_power(exponent())
        if len(cache) > POWER_CACHE_SIZE:
            cache.popitem(last=False)
        return cache[key]

    def _cached_power(self, exponent: np.ndarray) -> LatticeFunction:
        with np.errstate(over="ignore", divide="ignore"):
            vals = np.exp(exponent * np.log(self._w.values))
        if not np.all(np.isfinite(vals)):
            raise ValueError("Derived weight field overflows.")
        return LatticeFunction(vals, self._w.m, nonnegative=True)

    def __repr__(self) -> str:
        return "WeightField(min={:.6g}, max={:.6g})".format(
            float(np.min(self.values)), float(np.max(self.values))
        )


def _check_lattices(f: LatticeFunction, p: ExponentField) -> None:
    if not f.is_compatible(p.field):
        raise ValueError("Function and exponent live on different lattices.")


def _cell_data(f: LatticeFunction, p: ExponentField, region: Region):
    """
    Nonzero cell values, exponents and overlap volumes inside ``region``.
    ``region`` is None (whole box), a Box, or a boolean / fractional array of
    cell occupations.
    """
    _check_lattices(f, p)
    if region is None:
        a = np.abs(f.values).ravel()
        q = p.values.ravel()
        w = np.full(a.shape, f.cell_volume)
    elif isinstance(region, Box):
        slices, weights = f.region_weights(region)
        a = np.abs(f.values[slices]).ravel()
        q = p.values[slices].ravel()
        w = weights.ravel()
    else:
        occ = np.asarray(region, dtype=float)
        if occ.shape != f.shape:
            raise ValueError("Cell mask has the wrong shape.")
        a = np.abs(f.values).ravel()
        q = p.values.ravel()
        w = occ.ravel() * f.cell_volume
    keep = (a > 0.0) & (w > 0.0)
    return a[keep], q[keep], w[keep]


def _modular_sum(a: np.ndarray, q: np.ndarray, w: np.ndarray, lam: float) -> float:
    with np.errstate(over="ignore"):
        terms = w * np.exp(q * (np.log(a) - math.log(lam)))
    return float(np.sum(terms))


def modular(f: LatticeFunction, p: ExponentField, region: Region = None) -> float:
    """
    Modular :math:`\\int_R |f|^{p(\\cdot)}` over ``region`` (whole box by
    default).
    """
    a, q, w = _cell_data(f, p, region)
    if a.size == 0:
        return 0.0
    return _modular_sum(a, q, w, 1.0)


def luxemburg_norm(
    f: LatticeFunction, p: ExponentField, region: Region = None, rtol: float = NORM_RTOL
) -> float:
    """
    Luxemburg norm of ``f`` restricted to ``region``.

    Parameters
    ----------
    f : LatticeFunction
        Function to measure.
    p : ExponentField
        Exponent.
    region : Box or ndarray, optional
        Restriction of the integration domain. A Box is clipped exactly to
        the cells it overlaps.
    rtol : float
        Relative tolerance of the bisection.

    Returns
    -------
    float
        The norm. Zero for the zero function.
    """
    a, q, w = _cell_data(f, p, region)
    if a.size == 0:
        return 0.0

    rho = _modular_sum(a, q, w, 1.0)
    if not math.isfinite(rho):
        raise RuntimeError("Modular is not finite at the initial bracket.")
    pm, pp = float(np.min(q)), float(np.max(q))
    ends = (rho ** (1.0 / pm), rho ** (1.0 / pp))
    lo, hi = min(ends), max(ends)
    if hi - lo <= rtol * hi:
        return 0.5 * (lo + hi)

    def excess(lam: float) -> float:
        return _modular_sum(a, q, w, lam) - 1.0

    g_lo, g_hi = excess(lo), excess(hi)
    if not (math.isfinite(g_lo) and math.isfinite(g_hi)):
        raise RuntimeError("Modular is not finite at the initial bracket.")
    # rounding at the bracket ends
    if g_lo <= 0.0:
        return lo
    if g_hi >= 0.0:
        return hi
    return float(
        optimize.bisect(excess, lo, hi, xtol=np.finfo(float).tiny, rtol=rtol, maxiter=200)
    )


def weighted_norm(
    f: LatticeFunction, p: ExponentField, w: WeightField, region: Region = None
) -> float:
    """
    Norm in :math:`L^{p(\\cdot)}_w`, that is :math:`\\|f w\\|_{L^{p(\\cdot)}}`.
    """
    return luxemburg_norm(f * w.field, p, region)


def norm_of_indicator(q: Box, p: ExponentField, w: WeightField) -> float:
    """
    Exact norm :math:`\\|\\chi_Q\\|_{L^{p(\\cdot)}_w}` of the indicator of a
    cube, using the overlap volume of ``q`` with each cell.
    """
    return luxemburg_norm(w.field, p, region=q)


def check_modular_norm_bounds(
    f: LatticeFunction, p: ExponentField, region: Optional[Box] = None, tol: float = 1.0e-9
) -> ProbeReport:
    """
    Checks the two-sided bounds between the modular and the norm. With
    ``region`` given, the local form is checked, using the extremes of
    :math:`p` over the region.
    """
    report = ProbeReport("modular-norm-bounds", resolution=f.m)
    norm = luxemburg_norm(f, p, region)
    rho = modular(f, p, region)
    if region is None:
        pm, pp = p.p_minus, p.p_plus
    else:
        pm, pp = p.bounds_on(region)
    if rho == 0.0:
        report.record(norm == 0.0, 0.0, "zero function", norm=norm, modular=rho)
        return report
    ends = (rho ** (1.0 / pm), rho ** (1.0 / pp))
    lower, upper = min(ends), max(ends)
    ok = lower * (1.0 - tol) <= norm <= upper * (1.0 + tol)
    branch_ok = (norm > 1.0 + tol) <= (rho > 1.0) and (rho > 1.0 + tol) <= (norm > 1.0)
    report.record(
        ok and branch_ok,
        norm / upper,
        "region" if region is not None else "box",
        norm=norm,
        modular=rho,
        lower=lower,
        upper=upper,
        branch="norm>1" if norm > 1.0 else "norm<=1",
    )
    report.fitted["slack_lower"] = norm / lower
    report.fitted["slack_upper"] = upper / norm
    return report


def holder_pairing_check(
    f: LatticeFunction, g: LatticeFunction, p: ExponentField, w: WeightField, tol: float = 1.0e-9
) -> ProbeReport:
    """
    Checks :math:`\\int |f g| \\le 2 \\|f\\|_{L^{p}_w} \\|g\\|_{L^{p'}_{w^{-1}}}`.
    The reported ratio omits the factor 2, so extremal pairs approach 1.
    """
    report = ProbeReport("holder-pairing", resolution=f.m)
    lhs = float(np.sum(np.abs(f.values * g.values))) * f.cell_volume
    nf = weighted_norm(f, p, w)
    ng = weighted_norm(g, conjugate(p), w.inverse())
    if nf == 0.0 or ng == 0.0:
        report.record(lhs == 0.0, 0.0, "degenerate pair", lhs=lhs)
        return report
    ratio = lhs / (nf * ng)
    report.record(ratio <= 2.0 * (1.0 + tol), ratio, "pair", lhs=lhs, norm_f=nf, norm_g=ng)
    report.fitted["attained_ratio"] = ratio
    return report


def log_holder_check(
    p: ExponentField,
    p_inf: float,
    c: Optional[float] = None,
    max_pairs: int = 100000,
    seed: int = 0,
) -> ProbeReport:
    """
    Smallest constants in the local and decay log-Hölder conditions

    .. math::

        |p(x) - p(y)| \\log(e + 1/|x - y|) \\le c, \\qquad
        |p(x) - p_\\infty| \\log(e + |x|) \\le c,

    over cell centres. All pairs are used when there are at most
    ``max_pairs`` of them, otherwise ``max_pairs`` random pairs. Constants
    measured on a lattice are resolution dependent.

    Parameters
    ----------
    p : ExponentField
        Exponent to test.
    p_inf : float
        Limit value at infinity.
    c : float, optional
        Constant to check against.
    max_pairs : int
        Cap on the number of pairs.
    seed : int
        Seed of the pair sampler.
    """
    report = ProbeReport("log-holder", resolution=p.m, seed=seed)
    pts = np.stack([g.ravel() for g in p.field.center_grid()], axis=1)
    vals = p.values.ravel()
    K = vals.size
    total_pairs = K * (K - 1) // 2
    if total_pairs <= max_pairs:
        i, j = np.triu_indices(K, k=1)
    else:
        rng = np.random.default_rng(seed)
        i = rng.integers(0, K, size=max_pairs)
        j = rng.integers(0, K - 1, size=max_pairs)
        j = j + (j >= i)
        report.notes.append("{} of {} pairs sampled".format(max_pairs, total_pairs))
    dist = np.linalg.norm(pts[i] - pts[j], axis=1)
    local = np.abs(vals[i] - vals[j]) * np.log(np.e + 1.0 / dist)
    decay = np.abs(vals - p_inf) * np.log(np.e + np.linalg.norm(pts, axis=1))
    c_local = float(np.max(local)) if local.size else 0.0
    c_decay = float(np.max(decay))
    c_min = max(c_local, c_decay)
    report.fitted.update({"c_local": c_local, "c_decay": c_decay, "c_min": c_min})
    if c is not None:
        report.record(c_min <= c, c_min / c if c > 0 else math.inf, "log-holder constant")
    report.notes.append("constants measured at resolution m = {}".format(p.m))
    maxdual_log(LogLevel.Debug, "log-Holder constants : {} / {}".format(c_local, c_decay))
    return report


def bfs_axiom_check(
    f: LatticeFunction, p: ExponentField, w: WeightField, e: Box, tol: float = 1.0e-9
) -> ProbeReport:
    """
    Checks the local integrability axiom of a Banach function space,
    :math:`\\int_E |f| \\le c_E \\|f\\|_{L^p_w}` with
    :math:`c_E = 2 \\|w^{-1}\\chi_E\\|_{L^{p'}}`.
    """
    report = ProbeReport("bfs-local-integrability", resolution=f.m)
    lhs = f.abs().integrate(e)
    c_e = 2.0 * luxemburg_norm(w.inverse().field, conjugate(p), region=e)
    rhs = c_e * weighted_norm(f, p, w)
    ok = lhs <= rhs * (1.0 + tol)
    report.record(ok, lhs / rhs if rhs > 0 else 0.0, repr(e), lhs=lhs, rhs=rhs, c_E=c_e)
    report.fitted["c_E"] = c_e
    return report
