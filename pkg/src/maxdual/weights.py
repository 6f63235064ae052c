"""
Muckenhoupt-type constants and the Rubio de Francia iteration.

Suprema over "all cubes" are taken over an explicit :class:`CubeFamily`; the
family is part of every result so that estimates can be reproduced.
"""

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import stats

from .lattice import Box, LatticeFunction, ShiftedGrid, support_box
from .log import LogLevel, maxdual_log
from .maximal import MaximalKind, maximal
from .report import ProbeReport, family_hash
from .varlp import ExponentField, WeightField, conjugate, luxemburg_norm

WeightLike = Union[WeightField, LatticeFunction]


def _weight_function(v: WeightLike) -> LatticeFunction:
    if isinstance(v, WeightField):
        return v.field
    if isinstance(v, LatticeFunction):
        if np.any(v.values <= 0.0):
            raise ValueError("Weight must be strictly positive on every cell.")
        return v
    raise TypeError("Expected a WeightField or a LatticeFunction.")


class CubeFamily:
    """
    Finite family of cubes stored as arrays.

    Parameters
    ----------
    name : str
        Description of how the family was built.
    lowers : ndarray
        Lower corners, shape ``(K, n)``.
    sides : ndarray
        Side lengths, shape ``(K,)``.
    """

    def __init__(self, name: str, lowers: np.ndarray, sides: np.ndarray):
        lowers = np.atleast_2d(np.asarray(lowers, dtype=float))
        sides = np.asarray(sides, dtype=float).ravel()
        if lowers.shape[0] == 0:
            raise ValueError("Cube family must not be empty.")
        if lowers.shape[0] != sides.size:
            raise ValueError("Need one side length per lower corner.")
        if lowers.shape[1] not in (1, 2):
            raise ValueError("Cube family dimension must be 1 or 2.")
        if np.any(sides <= 0.0):
            raise ValueError("Cube sides must be > 0.")
        if np.any(lowers < -1.0) or np.any(lowers + sides[:, None] > 2.0):
            raise ValueError("Cubes must lie inside the computational box.")
        self._name = name
        self._lowers = lowers
        self._sides = sides

    @classmethod
    def all_lattice_aligned(cls, n: int, m_prime: int, region: Optional[Box] = None) -> "CubeFamily":
        """
        Every cube which is a union of cells of side :math:`2^{-m'}` and lies
        in ``region`` (default :math:`[0, 1)^n`). The region must be a union
        of such cells.
        """
        region = support_box(n) if region is None else region
        h = 2.0**-m_prime
        cells = int(round(region.side_f / h))
        if cells < 1 or abs(cells * h - region.side_f) > 1.0e-12:
            raise ValueError("Region is not a union of lattice cells.")
        lowers, sides = [], []
        for t in range(1, cells + 1):
            starts = np.arange(cells - t + 1)
            for idx in np.ndindex(*((starts.size,) * n)):
                lowers.append([region.lower_f[ax] + h * starts[i] for ax, i in enumerate(idx)])
                sides.append(t * h)
        return cls("all-lattice-aligned(m'={})".format(m_prime), np.array(lowers), np.array(sides))

    @classmethod
    def grid_cubes(
        cls, grid: ShiftedGrid, levels: Sequence[int], region: Optional[Box] = None
    ) -> "CubeFamily":
        """
        Cubes of a shifted grid at the given levels lying inside ``region``
        (default :math:`[0, 1)^n`).
        """
        region = support_box(grid.n) if region is None else region
        lowers, sides = [], []
        for level in levels:
            for cube in grid.cubes_meeting(level, region):
                if region.contains_box(cube):
                    lowers.append(cube.lower_f)
                    sides.append(cube.side_f)
        if not lowers:
            raise ValueError("No grid cube lies inside the region.")
        return cls("grid-cubes({})".format(grid.label), np.array(lowers), np.array(sides))

    @classmethod
    def random_cubes(
        cls, n: int, seed: int, count: int, region: Optional[Box] = None, min_side: float = 2.0**-10
    ) -> "CubeFamily":
        """
        Cubes with log-uniform side in ``[min_side, side(region)]`` placed
        uniformly inside ``region`` (default :math:`[0, 1)^n`).
        """
        if count < 1:
            raise ValueError("Need at least one random cube.")
        region = support_box(n) if region is None else region
        rng = np.random.default_rng(seed)
        top = region.side_f
        sides = np.exp(rng.uniform(math.log(min(min_side, top)), math.log(top), size=count))
        lowers = region.lower_f + rng.uniform(size=(count, n)) * (top - sides)[:, None]
        return cls("random-cubes(seed={},count={})".format(seed, count), lowers, sides)

    @classmethod
    def from_boxes(cls, name: str, boxes: Sequence[Box]) -> "CubeFamily":
        return cls(name, np.array([b.lower_f for b in boxes]), np.array([b.side_f for b in boxes]))

    @property
    def name(self) -> str:
        return self._name

    @property
    def n(self) -> int:
        return self._lowers.shape[1]

    @property
    def lowers(self) -> np.ndarray:
        return self._lowers

    @property
    def sides(self) -> np.ndarray:
        return self._sides

    @property
    def volumes(self) -> np.ndarray:
        return self._sides**self.n

    def __len__(self) -> int:
        return self._sides.size

    def box(self, i: int) -> Box:
        return Box(self._lowers[i], self._sides[i])

    def union(self, other: "CubeFamily") -> "CubeFamily":
        return CubeFamily(
            "{}+{}".format(self._name, other._name),
            np.vstack([self._lowers, other._lowers]),
            np.concatenate([self._sides, other._sides]),
        )

    def integrals(self, f: LatticeFunction) -> np.ndarray:
        if f.n != self.n:
            raise ValueError("Function and cube family have different dimensions.")
        return f.integrate_cubes(self._lowers, self._sides)

    def averages(self, f: LatticeFunction) -> np.ndarray:
        return self.integrals(f) / self.volumes

    def digest(self) -> str:
        return family_hash([self._name, self._lowers, self._sides])

    def label(self, i: int) -> str:
        lo = ",".join("{:.6g}".format(x) for x in self._lowers[i])
        return "[{}]+{:.6g}".format(lo, self._sides[i])


def ap_products(v: WeightLike, p: float, family: CubeFamily) -> np.ndarray:
    """
    :math:`\\langle v\\rangle_Q \\langle v^{-1/(p-1)}\\rangle_Q^{p-1}` for every
    cube of the family.
    """
    if p <= 1.0:
        raise ValueError("Muckenhoupt exponent p must be > 1.")
    vf = _weight_function(v)
    sigma = vf.power(-1.0 / (p - 1.0))
    with np.errstate(over="ignore", invalid="ignore"):
        prod = family.averages(vf) * family.averages(sigma) ** (p - 1.0)
    if not np.all(np.isfinite(prod)):
        raise ValueError("Muckenhoupt integrand is not finite.")
    return prod


def ap_constant(v: WeightLike, p: float, family: CubeFamily) -> float:
    """
    :math:`[v]_{A_p}` restricted to the cubes of ``family``.
    """
    return float(np.max(ap_products(v, p, family)))


def reverse_holder_probe(
    v: WeightLike, family: CubeFamily, r_grid: Sequence[float]
) -> ProbeReport:
    """
    Smallest constants :math:`c(r)` with
    :math:`\\langle v^r\\rangle_Q^{1/r} \\le c(r) \\langle v\\rangle_Q` over the
    family, for each exponent of ``r_grid``. Powers are taken of
    :math:`v / \\max v`, which leaves the ratios unchanged.
    """
    vf = _weight_function(v)
    report = ProbeReport("reverse-holder", resolution=vf.m, family_hash=family.digest())
    scaled = vf / float(np.max(vf.values))
    base = family.averages(scaled)
    previous = 0.0
    for r in sorted(r_grid):
        if r < 1.0:
            raise ValueError("Reverse Holder exponents must be >= 1.")
        with np.errstate(under="ignore"):
            top = family.averages(scaled.power(r)) ** (1.0 / r)
        ratios = top / base
        if not np.all(np.isfinite(ratios)) or np.any(top == 0.0):
            report.notes.append("underflow at r = {:g}".format(r))
            report.fitted["c({:g})".format(r)] = math.inf
            continue
        c = float(np.max(ratios))
        report.fitted["c({:g})".format(r)] = c
        # c(r) is nondecreasing in r
        report.record(c >= previous * (1.0 - 1.0e-12), c, "r={:g}".format(r), r=r, c=c)
        previous = c
    return report


@dataclass(frozen=True)
class SubsetSampler:
    """
    Draws pairs :math:`E \\subseteq Q` with :math:`Q` from a family and
    :math:`E` a subcube of relative side in :math:`[2^{-6}, 1]`. Every tenth
    sample takes :math:`E = Q`.

    Attributes
    ----------
    seed : int
        Seed of the sampler.
    count : int
        Number of pairs.
    """

    seed: int = 0
    count: int = 1000

    def sample(self, family: CubeFamily) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """
        Returns the indices of the cubes :math:`Q`, and the lower corners and
        sides of the subsets :math:`E`.
        """
        rng = np.random.default_rng(self.seed)
        q = rng.integers(0, len(family), size=self.count)
        ratio = np.exp(rng.uniform(math.log(2.0**-6), 0.0, size=self.count))
        ratio[:: 10] = 1.0
        sides = ratio * family.sides[q]
        shift = rng.uniform(size=(self.count, family.n)) * (family.sides[q] - sides)[:, None]
        return q, family.lowers[q] + shift, sides


def ainfty_absolute_continuity_check(
    v: WeightLike, family: CubeFamily, sampler: SubsetSampler
) -> ProbeReport:
    """
    Fits the envelope :math:`v(E)/v(Q) \\le c (|E|/|Q|)^{\\theta}` by log-log
    regression. :math:`\\theta` is the slope of the fit and :math:`c` the
    smallest constant making the envelope hold on every sample.
    """
    vf = _weight_function(v)
    report = ProbeReport("ainfty-absolute-continuity", resolution=vf.m, family_hash=family.digest(), seed=sampler.seed)
    q, e_lowers, e_sides = sampler.sample(family)
    w_q = family.integrals(vf)[q]
    w_e = vf.integrate_cubes(e_lowers, e_sides)
    x = family.n * np.log(e_sides / family.sides[q])
    y = np.log(w_e / w_q)
    if np.ptp(x) == 0.0:
        slope, intercept, rvalue = 1.0, float(np.mean(y - x)), 1.0
    else:
        fit = stats.linregress(x, y)
        slope, intercept, rvalue = float(fit.slope), float(fit.intercept), float(fit.rvalue)
    worst = float(np.max(y - (intercept + slope * x)))
    report.fitted.update(
        {
            "exponent": slope,
            "c": math.exp(intercept + worst),
            "r_squared": rvalue**2,
            "worst_residual": worst,
        }
    )
    report.record(0.0 < slope, slope, "fit")
    return report


def converse_check(
    v: WeightLike, p: float, family: CubeFamily, sampler: SubsetSampler, tol: float = 1.0e-12
) -> ProbeReport:
    """
    Checks :math:`v(Q)/v(E) \\le (|Q|/|E|)^p [v]_{A_p}` on sampled pairs.
    """
    vf = _weight_function(v)
    report = ProbeReport("ap-converse", resolution=vf.m, family_hash=family.digest(), seed=sampler.seed)
    a_p = ap_constant(vf, p, family)
    q, e_lowers, e_sides = sampler.sample(family)
    lhs = family.integrals(vf)[q] / vf.integrate_cubes(e_lowers, e_sides)
    rhs = (family.sides[q] / e_sides) ** (family.n * p) * a_p
    ratios = lhs / rhs
    worst = int(np.argmax(ratios))
    report.trials = int(ratios.size)
    report.violations = int(np.count_nonzero(ratios > 1.0 + tol))
    report.passed = report.violations == 0
    report.worst_ratio = float(ratios[worst])
    report.argmax = family.label(int(q[worst]))
    report.fitted["A_p"] = a_p
    return report


@dataclass
class RubioDeFrancia:
    """
    Truncated Rubio de Francia sum :math:`\\sum_{k<N} M^k g / (2A)^k`.

    Attributes
    ----------
    rg : LatticeFunction
        The truncated sum.
    A : float
        Norm bound used in the denominator.
    terms : int
        Number of terms summed.
    term_norms : list of float
        Maximum of each term.
    ratio : float
        Ratio of the last two term maxima, or :math:`1/(2A)` for a single
        term.
    tail_bound : float
        Geometric bound on the maximum of the omitted tail.
    converged : bool
        False if the ratio of the last terms is at least 1.
    """

    rg: LatticeFunction
    A: float
    terms: int
    term_norms: List[float] = field(default_factory=list)
    ratio: float = 0.0
    tail_bound: float = 0.0
    converged: bool = True

    def check(self, kind: MaximalKind, tol: float = 1.0e-12) -> ProbeReport:
        """
        Checks :math:`M(Rg) \\le 2A\\,Rg + 2A\\,\\text{tail}` at every cell.
        """
        report = ProbeReport("rubio-de-francia", resolution=self.rg.m, conditional=True)
        mrg = maximal(self.rg, kind).values
        rhs = 2.0 * self.A * (self.rg.values + self.tail_bound)
        scale = max(float(np.max(mrg)), 1.0e-300)
        ratios = mrg / np.maximum(rhs, 1.0e-300)
        bad = mrg > rhs * (1.0 + tol) + tol * scale
        worst = np.unravel_index(int(np.argmax(ratios)), ratios.shape)
        report.record(not np.any(bad), float(ratios[worst]), "cell {}".format(tuple(int(i) for i in worst)))
        report.fitted.update({"A": self.A, "tail_bound": self.tail_bound, "ratio": self.ratio})
        return report


def rubio_de_francia(
    g: LatticeFunction, kind: MaximalKind, A: float, N: int = 12
) -> RubioDeFrancia:
    """
    Runs the Rubio de Francia iteration.

    Parameters
    ----------
    g : LatticeFunction
        Nonnegative seed function.
    kind : MaximalKind
        Maximal operator iterated.
    A : float
        Upper bound for the norm of the operator on the space of interest.
    N : int
        Number of terms.
    """
    if A <= 0.0:
        raise ValueError("Norm bound A must be > 0.")
    if N < 1:
        raise ValueError("Need at least one term.")
    if np.any(g.values < 0.0):
        raise ValueError("Rubio de Francia iteration needs a nonnegative function.")
    term = g
    total = np.array(g.values)
    norms = [float(np.max(g.values))]
    for _ in range(1, N):
        term = maximal(term, kind) / (2.0 * A)
        total += term.values
        norms.append(float(np.max(term.values)))
    result = RubioDeFrancia(LatticeFunction(total, g.m, nonnegative=True), float(A), N, norms)
    if N == 1:
        # M does not increase the maximum, so each omitted term shrinks by 1/(2A)
        result.ratio = 1.0 / (2.0 * A)
    elif norms[-2] > 0.0:
        result.ratio = norms[-1] / norms[-2]
    if result.ratio >= 1.0:
        result.converged = False
        result.tail_bound = math.inf
        maxdual_log(LogLevel.Warning, "Rubio de Francia tail does not decay (ratio {:.4g}).".format(result.ratio))
    else:
        # the next term is the first one left out
        result.tail_bound = norms[-1] * result.ratio / (1.0 - result.ratio)
    return result


def a1_ratio(v: WeightLike, kind: MaximalKind) -> float:
    """
    :math:`\\max_x Mv(x)/v(x)`, the :math:`A_1` constant seen by ``kind``.
    """
    vf = _weight_function(v)
    return float(np.max(maximal(vf, kind).values / vf.values))


def apvar_products(p: ExponentField, w: WeightField, family: CubeFamily) -> np.ndarray:
    """
    :math:`|Q|^{-1}\\|\\chi_Q\\|_{L^{p}_w}\\|\\chi_Q\\|_{L^{p'}_{w^{-1}}}` for every cube.
    """
    pc = conjugate(p)
    w_inv = w.inverse()
    out = np.zeros(len(family))
    for i in range(len(family)):
        q = family.box(i)
        out[i] = luxemburg_norm(w.field, p, q) * luxemburg_norm(w_inv.field, pc, q) / q.volume_f
    return out


def apvar_constant(p: ExponentField, w: WeightField, family: CubeFamily) -> float:
    """
    Variable-exponent Muckenhoupt constant over the cubes of ``family``.
    """
    return float(np.max(apvar_products(p, w, family)))


def ainfty_membership(
    v: WeightLike,
    family: CubeFamily,
    s_grid: Sequence[float] = (1.5, 2.0, 3.0, 4.0, 8.0, 16.0),
    cap: float = 1.0e3,
) -> Tuple[Optional[float], float]:
    """
    Smallest :math:`s` of ``s_grid`` with :math:`[v]_{A_s} \\le` ``cap`` over
    the family, and that constant. Returns ``(None, inf)`` if none qualifies.
    """
    for s in sorted(s_grid):
        try:
            a = ap_constant(v, s, family)
        except ValueError:
            continue
        if a <= cap:
            return float(s), a
    return None, math.inf
