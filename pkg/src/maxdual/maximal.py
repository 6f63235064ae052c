"""
Hardy–Littlewood maximal operators on the lattice.

Three kinds are provided.

* :meth:`MaximalKind.full`: supremum of the averages of :math:`|f|` over all
  lattice-aligned cubes inside the computational box that contain the cell.
* :meth:`MaximalKind.dyadic`: supremum over the cubes of one shifted grid
  containing the cell centre, from side 8 down to the cell side.
* :meth:`MaximalKind.local_dyadic`: supremum over the dyadic subcubes of a
  fixed cube :math:`Q_0`, zero outside :math:`Q_0`.

All averages are exact integrals of the piecewise-constant data.
"""

import math
import os
import threading
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage

from .lattice import (
    Box,
    GridTree,
    LatticeFunction,
    LocalTree,
    ShiftedGrid,
    build_shifted_grids,
    computational_box,
    support_box,
    tree_level_averages,
)
from .log import LogLevel, maxdual_log
from .report import ProbeReport, family_hash
from .varlp import ExponentField, WeightField, weighted_norm


# multiplies empirical norm lower bounds wherever an upper bound is needed
DEFAULT_SAFETY = 1.5


def thread_count() -> int:
    """
    Number of worker threads, read from ``MAXDUAL_THREADS`` (default 1).
    """
    raw = os.environ.get("MAXDUAL_THREADS", "1")
    try:
        count = int(raw)
    except ValueError:
        raise ValueError("MAXDUAL_THREADS must be an integer, got '{}'.".format(raw))
    return max(1, count)


class MaximalKind:
    """
    Which family of cubes a maximal operator takes its supremum over.

    Use the constructors :meth:`full`, :meth:`dyadic` and
    :meth:`local_dyadic`.
    """

    FULL = "full"
    GRID = "grid"
    LOCAL = "local"

    def __init__(self, name: str, grid: Optional[ShiftedGrid] = None, cube: Optional[Box] = None):
        if name not in (self.FULL, self.GRID, self.LOCAL):
            raise ValueError("Unknown maximal operator kind '{}'.".format(name))
        if name == self.GRID and grid is None:
            raise ValueError("Dyadic maximal operator needs a grid.")
        if name == self.LOCAL and cube is None:
            raise ValueError("Local dyadic maximal operator needs a cube.")
        self._name = name
        self._grid = grid
        self._cube = cube

    @classmethod
    def full(cls) -> "MaximalKind":
        return cls(cls.FULL)

    @classmethod
    def dyadic(cls, grid: ShiftedGrid) -> "MaximalKind":
        return cls(cls.GRID, grid=grid)

    @classmethod
    def local_dyadic(cls, q0: Box) -> "MaximalKind":
        if not computational_box(q0.n).contains_box(q0):
            raise ValueError("Local cube must lie inside the computational box.")
        return cls(cls.LOCAL, cube=q0)

    @classmethod
    def parse(cls, text: str, n: int) -> "MaximalKind":
        """
        Parses ``full``, ``grid`` (unshifted), ``grid:a`` or ``grid:a,b``
        (shift in thirds) and ``local`` (the support box).
        """
        name, _, args = text.partition(":")
        if name == cls.FULL:
            return cls.full()
        if name == cls.GRID:
            thirds = [int(a) for a in args.split(",")] if args else [0] * n
            if len(thirds) == 1 and n == 2:
                thirds = thirds * 2
            return cls.dyadic(ShiftedGrid(thirds))
        if name == cls.LOCAL:
            return cls.local_dyadic(support_box(n))
        raise ValueError("Unknown maximal operator kind '{}'.".format(text))

    @property
    def name(self) -> str:
        return self._name

    @property
    def grid(self) -> Optional[ShiftedGrid]:
        return self._grid

    @property
    def cube(self) -> Optional[Box]:
        return self._cube

    @property
    def label(self) -> str:
        if self._name == self.GRID:
            return "grid[{}]".format(self._grid.label)
        if self._name == self.LOCAL:
            return "local[{}]".format(self._cube)
        return "full"

    def __eq__(self, other) -> bool:
        if not isinstance(other, MaximalKind):
            return NotImplemented
        return (self._name, self._grid, self._cube) == (other._name, other._grid, other._cube)

    def __hash__(self) -> int:
        return hash((self._name, self._grid, self._cube))

    def __repr__(self) -> str:
        return "MaximalKind({})".format(self.label)


def _window_maximum(avg: np.ndarray, t: int, N: int) -> np.ndarray:
    # avg[s] is the average over the window starting at cell s; the result at
    # cell i is the maximum over the windows containing i.
    n = avg.ndim
    padded = np.full((N + t - 1,) * n, -np.inf)
    padded[(slice(t - 1, N),) * n] = avg
    if t > 1:
        padded = ndimage.maximum_filter(padded, size=t, mode="constant", cval=-np.inf)
    off = t // 2 if t > 1 else 0
    return padded[(slice(off, off + N),) * n]


def _full_maximal(a: np.ndarray) -> np.ndarray:
    N = a.shape[0]
    out = a.copy()
    if a.ndim == 1:
        S = np.concatenate(([0.0], np.cumsum(a)))
        for t in range(2, N + 1):
            avg = (S[t:] - S[:-t]) / t
            np.maximum(out, _window_maximum(avg, t, N), out=out)
    else:
        S = np.zeros((N + 1, N + 1))
        S[1:, 1:] = np.cumsum(np.cumsum(a, axis=0), axis=1)
        for t in range(2, N + 1):
            sums = S[t:, t:] - S[:-t, t:] - S[t:, :-t] + S[:-t, :-t]
            np.maximum(out, _window_maximum(sums / t**2, t, N), out=out)
    return out


def _tree_maximal(a: LatticeFunction, tree) -> np.ndarray:
    centers = a.centers()
    out = np.zeros(a.shape)
    inside = [tree.axis_inside(centers, ax) for ax in range(a.n)]
    for level in tree.levels:
        avg = tree_level_averages(a, tree, level)
        pos = tree.locate_positions(level, centers)
        np.maximum(out, avg[np.ix_(*pos)], out=out)
    mask = inside[0] if a.n == 1 else np.multiply.outer(inside[0], inside[1])
    return np.where(mask, out, 0.0)


def maximal(f: LatticeFunction, kind: MaximalKind) -> LatticeFunction:
    """
    Evaluates a maximal operator at every cell.

    Parameters
    ----------
    f : LatticeFunction
        Input function.
    kind : MaximalKind
        Family of cubes.

    Returns
    -------
    LatticeFunction
        Nonnegative maximal function.
    """
    if not isinstance(kind, MaximalKind):
        raise TypeError("kind must be a MaximalKind.")
    a = f.abs()
    if kind.name == MaximalKind.FULL:
        vals = _full_maximal(np.asarray(a.values))
    elif kind.name == MaximalKind.GRID:
        if kind.grid.n != f.n:
            raise ValueError("Grid and function have different dimensions.")
        vals = _tree_maximal(a, GridTree(kind.grid, f.m))
    else:
        vals = _tree_maximal(a, LocalTree(kind.cube, f.m))
    return LatticeFunction(vals, f.m, nonnegative=True)


def check_grid_comparison(
    f: LatticeFunction, grids: Optional[Sequence[ShiftedGrid]] = None, tol: float = 1.0e-12
) -> ProbeReport:
    """
    Checks the pointwise comparison
    :math:`Mf \\le 6^n \\sum_\\alpha M^{\\mathcal{D}_\\alpha} f` at every cell.
    """
    if grids is None:
        grids = build_shifted_grids(f.n)
    report = ProbeReport("grid-comparison", resolution=f.m)
    lhs = maximal(f, MaximalKind.full()).values
    rhs = np.zeros(f.shape)
    for grid in grids:
        rhs += maximal(f, MaximalKind.dyadic(grid)).values
    rhs *= 6.0**f.n
    scale = max(float(np.max(lhs)), 1.0e-300)
    bad = lhs > rhs + tol * scale
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(rhs > 0.0, lhs / rhs, np.where(lhs > 0.0, np.inf, 0.0))
    worst = np.unravel_index(int(np.argmax(ratios)), ratios.shape)
    report.record(not np.any(bad), float(ratios[worst]), "cell {}".format(tuple(int(i) for i in worst)))
    report.fitted["violating_cells"] = int(np.count_nonzero(bad))
    return report


@dataclass(frozen=True)
class CandidateFamily:
    """
    Test functions used to bound operator norms from below.

    Attributes
    ----------
    name : str
        ``structured``, ``random`` or ``standard`` (both).
    seed : int
        Seed of the random members.
    random_count : int
        Number of random members.
    """

    name: str = "standard"
    seed: int = 0
    random_count: int = 8

    def __post_init__(self):
        if self.name not in ("structured", "random", "standard"):
            raise ValueError("Unknown candidate family '{}'.".format(self.name))
        if self.random_count < 0:
            raise ValueError("Number of random candidates must be >= 0.")

    def generate(self, n: int, m: int, p_plus: float = 2.0) -> List[Tuple[str, LatticeFunction]]:
        """
        Returns the labelled candidates on the lattice of resolution ``m``.
        """
        out: List[Tuple[str, LatticeFunction]] = []
        if self.name in ("structured", "standard"):
            out.extend(self._structured(n, m, p_plus))
        if self.name in ("random", "standard"):
            out.extend(self._random(n, m))
        return out

    def digest(self, n: int, m: int) -> str:
        return family_hash([self.name, self.seed, self.random_count, n, m])

    @staticmethod
    def _structured(n: int, m: int, p_plus: float) -> List[Tuple[str, LatticeFunction]]:
        out = [("const", LatticeFunction.indicator(support_box(n), m))]
        h = 2.0**-m
        for x in (0.0, 0.5 - h, 0.5):
            out.append(("cell@{:g}".format(x), LatticeFunction.indicator(Box((x,) * n, h), m)))
        top = 3 if n == 1 else 2
        for level in range(1, min(top, m) + 1):
            side = 2.0**-level
            for idx in np.ndindex(*((2**level,) * n)):
                lower = tuple(side * i for i in idx)
                label = "block{}@{}".format(level, ",".join(str(i) for i in idx))
                out.append((label, LatticeFunction.indicator(Box(lower, side), m)))
        if m < 3:
            return out
        # spikes sit on cell edges, never on a centre
        beta = 0.9 * n / p_plus
        support = LatticeFunction.indicator(support_box(n), m)
        grids = support.center_grid()
        for x0 in (0.5, 0.25):
            r = np.sqrt(sum((g - x0) ** 2 for g in grids))
            vals = np.where(support.values > 0.0, r ** (-beta), 0.0)
            out.append(("spike@{:g}".format(x0), LatticeFunction(vals, m, nonnegative=True)))
        return out

    def _random(self, n: int, m: int) -> List[Tuple[str, LatticeFunction]]:
        rng = np.random.default_rng(self.seed)
        support = LatticeFunction.indicator(support_box(n), m)
        out = []
        for c in range(self.random_count):
            if c % 2 == 0:
                vals = rng.exponential(size=support.shape) * support.values
            else:
                vals = np.zeros(support.shape)
                cells = np.flatnonzero(support.values.ravel() > 0.0)
                pick = rng.choice(cells, size=min(4, cells.size), replace=False)
                vals.ravel()[pick] = rng.exponential(size=pick.size) * 10.0
            out.append(("random{}".format(c), LatticeFunction(vals, m, nonnegative=True)))
        return out


@dataclass
class NormEstimate:
    """
    Lower bound for an operator norm, attained by one candidate.

    Attributes
    ----------
    value : float
        Largest ratio :math:`\\|Mf\\|/\\|f\\|` over the candidates.
    argmax : str
        Label of the maximizing candidate.
    ratios : dict
        Ratio of every evaluated candidate.
    skipped : list of str
        Candidates of zero norm.
    kind : str
        Label of the maximal operator.
    """

    value: float
    argmax: Optional[str]
    ratios: Dict[str, float] = field(default_factory=dict)
    skipped: List[str] = field(default_factory=list)
    kind: str = ""

    def __float__(self) -> float:
        return float(self.value)

    def working_bound(self, safety: float = DEFAULT_SAFETY) -> float:
        """
        Value used in place of the unknown norm by downstream probes: the
        lower bound times ``safety``, and never below 1. It remains an
        estimate.
        """
        if safety < 1.0:
            raise ValueError("Safety factor must be >= 1.")
        return max(1.0, self.value * safety)


def _run_threaded(jobs: List[Callable[[], object]]) -> List[object]:
    results: List[object] = [None] * len(jobs)
    errors: List[BaseException] = []
    nthreads = min(thread_count(), max(1, len(jobs)))

    def worker(start: int):
        for i in range(start, len(jobs), nthreads):
            try:
                results[i] = jobs[i]()
            except BaseException as err:  # re-raised in the calling thread
                errors.append(err)
                return

    if nthreads == 1:
        worker(0)
    else:
        threads = [threading.Thread(target=worker, args=(t,)) for t in range(nthreads)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
    if errors:
        raise errors[0]
    return results


def operator_norm_lower_bound(
    kind: MaximalKind,
    p: ExponentField,
    w: WeightField,
    candidates: Sequence[Tuple[str, LatticeFunction]],
) -> NormEstimate:
    """
    Lower bound for the norm of a maximal operator on :math:`L^{p(\\cdot)}_w`,
    the largest of :math:`\\|Mf\\|_{L^p_w} / \\|f\\|_{L^p_w}` over the
    candidates. Candidates of zero norm are skipped and logged.

    Work is spread over ``MAXDUAL_THREADS`` threads; results are collected
    in candidate order so the estimate does not depend on scheduling.
    """
    if len(candidates) == 0:
        raise ValueError("Need at least one candidate function.")

    def job(f: LatticeFunction):
        def run():
            nf = weighted_norm(f, p, w)
            if nf == 0.0:
                return None
            return weighted_norm(maximal(f, kind), p, w) / nf

        return run

    results = _run_threaded([job(f) for _, f in candidates])
    estimate = NormEstimate(value=0.0, argmax=None, kind=kind.label)
    for (label, _), ratio in zip(candidates, results):
        if ratio is None:
            estimate.skipped.append(label)
            maxdual_log(LogLevel.Warning, "Skipping candidate {} of zero norm.".format(label))
            continue
        estimate.ratios[label] = float(ratio)
        if ratio > estimate.value:
            estimate.value = float(ratio)
            estimate.argmax = label
    if estimate.argmax is None:
        raise ValueError("All candidate functions have zero norm.")
    return estimate
