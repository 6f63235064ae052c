"""
Calderón–Zygmund decompositions, sparse families and sparse operators.

For a threshold base :math:`\\gamma > 1` the level sets
:math:`\\Omega_k = \\{M^{\\mathcal{D}} f > \\gamma^k\\}` of a dyadic maximal
function are disjoint unions of maximal grid cubes
:math:`Q^k_j` with :math:`|f|_{Q^k_j} > \\gamma^k` and parent average at most
:math:`\\gamma^k`. With :math:`\\gamma = 2^n/(1 - \\eta)` the family
:math:`\\{Q^k_j\\}` is :math:`\\eta`-sparse with exceptional sets
:math:`E(Q^k_j) = Q^k_j \\setminus \\Omega_{k+1}`, and

.. math::

    M^{\\mathcal{D}} f(x) \\le \\gamma \\sum_{j,k} f_{Q^k_j} \\chi_{E(Q^k_j)}(x).

Exceptional sets are stored as a cube minus finitely many grid subcubes, so
their volumes are exact rationals.
"""

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .lattice import (
    Box,
    Cube,
    GridTree,
    LatticeFunction,
    LocalTree,
    ShiftedGrid,
    tree_level_averages,
)
from .log import LogLevel, maxdual_log
from .maximal import MaximalKind, maximal
from .report import ProbeReport, family_hash


def _largest_power_below(gamma: float, value: float, scale: float = 1.0) -> int:
    # largest k with scale * gamma**k < value
    k = math.ceil(math.log(value / scale) / math.log(gamma)) - 1
    while scale * gamma ** (k + 1) < value:
        k += 1
    while scale * gamma**k >= value:
        k -= 1
    return k


def cube_contains(outer: Cube, inner: Cube) -> bool:
    if (
        outer.grid is not None
        and outer.grid == inner.grid
        and outer.level is not None
        and inner.level is not None
    ):
        if outer.level > inner.level:
            return False
        anc = outer.grid.ancestor_index(inner.level, inner.index, outer.level)
        return anc == outer.index
    return outer.contains_box(inner)


class CZDecomposition:
    """
    Calderón–Zygmund cubes of a function for every threshold level.

    Instances are produced by :func:`cz_decompose`.

    Attributes
    ----------
    gamma : float
        Threshold base :math:`\\gamma`.
    variant : str
        ``global`` (thresholds :math:`\\gamma^k`, :math:`k \\in \\mathbb{Z}`) or
        ``local`` (thresholds :math:`\\gamma^k |f|_{Q_0}`, :math:`k \\ge 0`).
    scale : float
        1 for the global variant, :math:`|f|_{Q_0}` for the local one.
    k_range : list of int
        Levels with a nonempty set :math:`\\Omega_k`.
    """

    def __init__(
        self,
        f: LatticeFunction,
        tree,
        gamma: float,
        scale: float,
        variant: str,
        cubes: Dict[int, List[Cube]],
        averages: Dict[int, np.ndarray],
        parent_averages: Dict[int, np.ndarray],
        masks: Dict[int, np.ndarray],
    ):
        self._f = f
        self._tree = tree
        self._gamma = gamma
        self._scale = scale
        self._variant = variant
        self._cubes = cubes
        self._averages = averages
        self._parent_averages = parent_averages
        self._masks = masks
        self._maps: Dict[Tuple[int, int], np.ndarray] = {}

    @property
    def f(self) -> LatticeFunction:
        return self._f

    @property
    def tree(self):
        return self._tree

    @property
    def gamma(self) -> float:
        return self._gamma

    @property
    def scale(self) -> float:
        return self._scale

    @property
    def variant(self) -> str:
        return self._variant

    @property
    def k_range(self) -> List[int]:
        return sorted(self._cubes)

    @property
    def k_min(self) -> Optional[int]:
        return min(self._cubes) if self._cubes else None

    @property
    def k_max(self) -> Optional[int]:
        return max(self._cubes) if self._cubes else None

    def threshold(self, k: int) -> float:
        return self._scale * self._gamma**k

    def cubes(self, k: int) -> List[Cube]:
        return self._cubes.get(k, [])

    def averages(self, k: int) -> np.ndarray:
        return self._averages.get(k, np.zeros(0))

    def omega_mask(self, k: int) -> np.ndarray:
        """
        Cells whose centre lies in :math:`\\Omega_k`.
        """
        if self._cubes and k < self.k_min:
            raise ValueError("Level {} lies below the computed range.".format(k))
        if k not in self._masks:
            return np.zeros(self._f.shape, dtype=bool)
        return self._masks[k]

    def container_positions(self, k_child: int, k_parent: int) -> np.ndarray:
        """
        For every cube of level ``k_child``, the position in
        :meth:`cubes` ``(k_parent)`` of the cube containing it, or -1.
        """
        key = (k_child, k_parent)
        if key not in self._maps:
            self._maps[key] = self._container_map(self.cubes(k_child), self.cubes(k_parent))
        return self._maps[key]

    def _container_map(self, children: Sequence[Cube], parents: Sequence[Cube]) -> np.ndarray:
        out = np.full(len(children), -1, dtype=np.int64)
        if not parents:
            return out
        lookup = {(c.level, c.index): i for i, c in enumerate(parents)}
        plevels = {c.level for c in parents}
        lowest = min(plevels)
        for i, child in enumerate(children):
            level, index = child.level, child.index
            while level >= lowest:
                if level in plevels:
                    hit = lookup.get((level, index))
                    if hit is not None:
                        out[i] = hit
                        break
                if level == lowest:
                    break
                index = self._tree.ancestor_index(level, index, level - 1)
                level -= 1
        return out

    def omega_volume_within(self, k: int, l: int) -> List[Fraction]:
        """
        Exact volumes :math:`|Q \\cap \\Omega_{k+l}|` for the cubes of level
        ``k``. Cubes of level :math:`k + l` are either inside a cube of
        level :math:`k` or disjoint from it.
        """
        parents = self.cubes(k)
        vols = [Fraction(0)] * len(parents)
        if l == 0:
            return [q.volume for q in parents]
        for child, pos in zip(self.cubes(k + l), self.container_positions(k + l, k)):
            if pos >= 0:
                vols[pos] += child.volume
        return vols

    def check_decay(self, l_max: int = 6, tol: float = 1.0e-12) -> ProbeReport:
        """
        Checks :math:`|Q^k_j \\cap \\Omega_{k+l}| \\le 2^n \\gamma^{-l} |Q^k_j|`
        for :math:`0 \\le l \\le l_{max}`.
        """
        report = ProbeReport("cz-decay", resolution=self._f.m)
        n = self._f.n
        for k in self.k_range:
            for l in range(l_max + 1):
                vols = self.omega_volume_within(k, l)
                for q, vol in zip(self.cubes(k), vols):
                    bound = 2.0**n * self._gamma ** (-l) * float(q.volume)
                    ratio = float(vol) / bound
                    report.record(ratio <= 1.0 + tol, ratio, "k={}, l={}, {!r}".format(k, l, q))
        report.fitted["gamma"] = self._gamma
        return report

    def check_maximality(self, tol: float = 1.0e-12) -> ProbeReport:
        """
        Checks that every selected cube has average above its threshold and
        parent average at most the threshold.
        """
        report = ProbeReport("cz-maximality", resolution=self._f.m)
        for k in self.k_range:
            tau = self.threshold(k)
            for q, avg, pavg in zip(self.cubes(k), self._averages[k], self._parent_averages[k]):
                ok = avg > tau and pavg <= tau * (1.0 + tol)
                report.record(ok, pavg / tau, "k={}, {!r}".format(k, q))
        return report

    def check_nesting(self) -> bool:
        """
        True if :math:`\\Omega_{k+1} \\subseteq \\Omega_k` for all levels, both
        for the cubes and for the cell masks.
        """
        for k in self.k_range:
            if k + 1 not in self._cubes:
                continue
            if np.any(self.container_positions(k + 1, k) < 0):
                return False
            if np.any(self._masks[k + 1] & ~self._masks[k]):
                return False
        return True

    def layer_identity(self, nu: int) -> bool:
        """
        Checks
        :math:`\\Omega_k \\setminus \\Omega_{k+\\nu} =
        \\bigcup_{i<\\nu} \\Omega_{k+i} \\setminus \\Omega_{k+i+1}` on the cells.
        """
        if nu < 1:
            raise ValueError("nu must be >= 1.")
        for k in self.k_range:
            lhs = self.omega_mask(k) & ~self.omega_mask(k + nu)
            rhs = np.zeros_like(lhs)
            for i in range(nu):
                rhs |= self.omega_mask(k + i) & ~self.omega_mask(k + i + 1)
            if not np.array_equal(lhs, rhs):
                return False
        return True


def cz_decompose(
    f: LatticeFunction,
    grid: Optional[ShiftedGrid] = None,
    gamma: float = 2.0,
    q0: Optional[Box] = None,
) -> CZDecomposition:
    """
    Calderón–Zygmund decomposition of :math:`|f|`.

    Give ``grid`` for the global variant over a shifted grid, or ``q0`` for
    the local variant over the dyadic subcubes of :math:`Q_0`.

    In the global variant the levels run from the first one at which every
    cube meeting the support of :math:`f` lies in :math:`\\Omega_k` up to the
    last nonempty one. At the lowest levels the selected cubes may be
    ancestors of the generation-(-3) cubes; their averages are exact since
    such ancestors meet the computational box in the same set.

    Parameters
    ----------
    f : LatticeFunction
        Function to decompose.
    grid : ShiftedGrid, optional
        Grid of the global variant.
    gamma : float
        Threshold base, > 1.
    q0 : Box, optional
        Top cube of the local variant.

    Returns
    -------
    CZDecomposition
    """
    if gamma <= 1.0:
        raise ValueError("Threshold base gamma must be > 1.")
    if (grid is None) == (q0 is None):
        raise ValueError("Give either a grid or a local cube.")
    a = f.abs()
    n = f.n
    if grid is not None:
        if grid.n != n:
            raise ValueError("Grid and function have different dimensions.")
        tree = GridTree(grid, f.m)
        variant, scale = "global", 1.0
    else:
        tree = LocalTree(q0, f.m)
        variant = "local"
        scale = a.average(q0)
        if scale <= 0.0:
            raise ValueError("Local decomposition needs a positive average on Q0.")

    levels = list(tree.levels)
    avgs = {lev: tree_level_averages(a, tree, lev) for lev in levels}
    parents = {lev: tree.parent_positions(lev) for lev in levels[1:]}
    centers = f.centers()
    leaf_pos = tree.locate_positions(tree.leaf, centers)
    inside = [tree.axis_inside(centers, ax) for ax in range(n)]
    inside = inside[0] if n == 1 else np.multiply.outer(inside[0], inside[1])

    a_max = max(float(np.max(v)) for v in avgs.values())
    cubes: Dict[int, List[Cube]] = {}
    cube_avgs: Dict[int, np.ndarray] = {}
    parent_avgs: Dict[int, np.ndarray] = {}
    masks: Dict[int, np.ndarray] = {}
    if a_max <= 0.0:
        return CZDecomposition(f, tree, gamma, scale, variant, cubes, cube_avgs, parent_avgs, masks)

    top = tree.top
    if variant == "global":
        roots = avgs[top]
        k_min = min(_largest_power_below(gamma, float(r)) for r in roots[roots > 0.0])
    else:
        k_min = 0
    k_max = _largest_power_below(gamma, a_max, scale)

    for k in range(k_min, k_max + 1):
        tau = scale * gamma**k
        selected: List[Cube] = []
        sel_avg: List[float] = []
        sel_parent: List[float] = []
        if variant == "global":
            passdown = avgs[top] > tau
            for pos in np.argwhere(passdown):
                root_avg = float(avgs[top][tuple(pos)])
                j = 0
                while root_avg * 2.0 ** (-n * (j + 1)) > tau:
                    j += 1
                root = tree.cube(top, pos)
                if j == 0:
                    selected.append(root)
                else:
                    index = grid.ancestor_index(top, root.index, top - j)
                    selected.append(grid.cube(top - j, index))
                sel_avg.append(root_avg * 2.0 ** (-n * j))
                sel_parent.append(root_avg * 2.0 ** (-n * (j + 1)))
        else:
            passdown = np.zeros(tree.shape(top), dtype=bool)
        for lev in levels[1:]:
            covered = passdown[np.ix_(*parents[lev])]
            sel = (avgs[lev] > tau) & ~covered
            for pos in np.argwhere(sel):
                pos = tuple(pos)
                ppos = tuple(int(p[i]) for p, i in zip(parents[lev], pos))
                selected.append(tree.cube(lev, pos))
                sel_avg.append(float(avgs[lev][pos]))
                sel_parent.append(float(avgs[lev - 1][ppos]))
            passdown = covered | sel
        cubes[k] = selected
        cube_avgs[k] = np.array(sel_avg)
        parent_avgs[k] = np.array(sel_parent)
        masks[k] = passdown[np.ix_(*leaf_pos)] & inside

    maxdual_log(
        LogLevel.Debug,
        "CZ decomposition : levels {}..{}, {} cubes".format(
            k_min, k_max, sum(len(c) for c in cubes.values())
        ),
    )
    return CZDecomposition(f, tree, gamma, scale, variant, cubes, cube_avgs, parent_avgs, masks)


class ExceptionalSet:
    """
    Set :math:`E = Q \\setminus \\bigcup_i H_i` for a cube :math:`Q` and
    disjoint subcubes :math:`H_i`.

    Parameters
    ----------
    cube : Cube
        The cube :math:`Q`.
    holes : sequence of Cube
        Disjoint subcubes removed from :math:`Q`.
    """

    def __init__(self, cube: Cube, holes: Sequence[Cube] = ()):
        for hole in holes:
            if not cube_contains(cube, hole):
                raise ValueError("Hole {} is not inside {}.".format(hole, cube))
        self._cube = cube
        self._holes = tuple(holes)

    @property
    def cube(self) -> Cube:
        return self._cube

    @property
    def holes(self) -> Tuple[Cube, ...]:
        return self._holes

    @property
    def volume(self) -> Fraction:
        return self._cube.volume - sum((h.volume for h in self._holes), Fraction(0))

    def integrate(self, f: LatticeFunction) -> float:
        return f.integrate(self._cube) - sum(f.integrate(h) for h in self._holes)

    def center_mask(self, f: LatticeFunction) -> Tuple[Tuple[slice, ...], np.ndarray]:
        """
        Slices of the cells with centre in the cube, and which of those have
        their centre in :math:`E`.
        """
        slices = f.center_slices(self._cube)
        mask = np.ones(tuple(s.stop - s.start for s in slices), dtype=bool)
        for hole in self._holes:
            hs = f.center_slices(hole)
            local = tuple(
                slice(max(h.start - s.start, 0), max(h.stop - s.start, 0))
                for h, s in zip(hs, slices)
            )
            mask[local] = False
        return slices, mask

    def cell_weights(self, f: LatticeFunction) -> Tuple[Tuple[slice, ...], np.ndarray]:
        """
        Overlap volumes of :math:`E` with the cells meeting the cube.
        """
        slices, weights = f.region_weights(self._cube)
        weights = weights.copy()
        for hole in self._holes:
            hs, hw = f.region_weights(hole)
            if hw.size == 0:
                continue
            local = tuple(
                slice(h.start - s.start, h.start - s.start + (h.stop - h.start))
                for h, s in zip(hs, slices)
            )
            weights[local] -= hw
        return slices, np.clip(weights, 0.0, None)

    def to_dict(self) -> Dict:
        return {
            "cube": self._cube.to_dict(),
            "holes": [h.to_dict() for h in self._holes],
            "volume": float(self.volume),
        }


@dataclass(frozen=True)
class SparseEntry:
    """
    One cube of a sparse family with its exceptional set.

    Attributes
    ----------
    cube : Cube
        The cube :math:`Q`.
    exceptional : ExceptionalSet
        The set :math:`E(Q) \\subseteq Q`.
    k : int, optional
        Calderón–Zygmund level the cube was selected at.
    """

    cube: Cube
    exceptional: ExceptionalSet
    k: Optional[int] = None


def _union_volume(cubes: Sequence[Cube]) -> Fraction:
    # members of a nested-or-disjoint family: sum over the maximal ones
    total = Fraction(0)
    for i, c in enumerate(cubes):
        covered = False
        for j, d in enumerate(cubes):
            if i == j:
                continue
            if cube_contains(d, c) and (not cube_contains(c, d) or j < i):
                covered = True
                break
        if not covered:
            total += c.volume
    return total


def _exceptional_overlap(outer: ExceptionalSet, inner: ExceptionalSet) -> Fraction:
    # |E(outer) ∩ E(inner)| when inner.cube ⊆ outer.cube
    pieces = list(inner.holes)
    for hole in outer.holes:
        if cube_contains(hole, inner.cube):
            return Fraction(0)
        if cube_contains(inner.cube, hole):
            pieces.append(hole)
    return inner.cube.volume - _union_volume(pieces)


def _rect_union_volume(rects: Sequence[Tuple[Tuple[Fraction, ...], Tuple[Fraction, ...]]]) -> Fraction:
    # exact, for arbitrary overlapping rectangles given as (lower, upper)
    if not rects:
        return Fraction(0)
    n = len(rects[0][0])
    axes = [sorted({r[0][d] for r in rects} | {r[1][d] for r in rects}) for d in range(n)]
    total = Fraction(0)
    for cell in itertools.product(*(range(len(a) - 1) for a in axes)):
        lo = [axes[d][k] for d, k in enumerate(cell)]
        hi = [axes[d][k + 1] for d, k in enumerate(cell)]
        if any(all(r[0][d] <= lo[d] and hi[d] <= r[1][d] for d in range(n)) for r in rects):
            total += math.prod(h - l for l, h in zip(lo, hi))
    return total


def _exceptional_intersection(a: ExceptionalSet, b: ExceptionalSet) -> Fraction:
    """
    Exact :math:`|E_a \\cap E_b|` for exceptional sets of arbitrary cubes.
    """
    lower = tuple(max(x, y) for x, y in zip(a.cube.lower, b.cube.lower))
    upper = tuple(min(x, y) for x, y in zip(a.cube.upper, b.cube.upper))
    if any(lo >= hi for lo, hi in zip(lower, upper)):
        return Fraction(0)
    clipped = []
    for hole in a.holes + b.holes:
        lo = tuple(max(x, y) for x, y in zip(hole.lower, lower))
        hi = tuple(min(x, y) for x, y in zip(hole.upper, upper))
        if all(x < y for x, y in zip(lo, hi)):
            clipped.append((lo, hi))
    volume = math.prod(hi - lo for lo, hi in zip(lower, upper))
    return volume - _rect_union_volume(clipped)


class SparseFamily:
    """
    Family of cubes with pairwise disjoint exceptional sets
    :math:`E(Q) \\subseteq Q`, :math:`|E(Q)| \\ge \\eta |Q|`.

    Parameters
    ----------
    eta : float
        Sparseness constant in (0, 1).
    entries : sequence of SparseEntry
        Cubes and exceptional sets.
    grid : ShiftedGrid, optional
        Grid all cubes belong to.
    decomposition : CZDecomposition, optional
        Decomposition the family was built from.
    """

    def __init__(
        self,
        eta: float,
        entries: Sequence[SparseEntry],
        grid: Optional[ShiftedGrid] = None,
        decomposition: Optional[CZDecomposition] = None,
    ):
        if not 0.0 < eta < 1.0:
            raise ValueError("Sparseness constant eta must be in (0, 1).")
        self._eta = float(eta)
        self._entries = list(entries)
        self._grid = grid
        self._decomposition = decomposition

    @property
    def eta(self) -> float:
        return self._eta

    @property
    def entries(self) -> List[SparseEntry]:
        return self._entries

    @property
    def grid(self) -> Optional[ShiftedGrid]:
        return self._grid

    @property
    def decomposition(self) -> Optional[CZDecomposition]:
        return self._decomposition

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self):
        return iter(self._entries)

    def digest(self) -> str:
        return family_hash(
            [(e.cube.to_dict(), [h.to_dict() for h in e.exceptional.holes]) for e in self._entries]
        )

    def _addressed(self) -> bool:
        # cubes of one dyadic grid are nested or disjoint
        return bool(self._entries) and all(
            e.cube.grid is not None and e.cube.grid == self._grid for e in self._entries
        )

    def nested_pairs(self) -> List[Tuple[int, int]]:
        """
        Pairs ``(i, j)``, ``i != j``, with cube ``j`` contained in cube ``i``.
        """
        pairs = []
        by_address: Dict[Tuple, List[int]] = {}
        if self._addressed():
            for i, e in enumerate(self._entries):
                by_address.setdefault(e.cube.address, []).append(i)
            lowest = min(e.cube.level for e in self._entries)
            for j, e in enumerate(self._entries):
                level, index = e.cube.level, e.cube.index
                while level >= lowest:
                    for i in by_address.get((level, index), []):
                        if i != j:
                            pairs.append((i, j))
                    index = self._grid.parent_index(level, index)
                    level -= 1
        else:
            for i, a in enumerate(self._entries):
                for j, b in enumerate(self._entries):
                    if i != j and a.cube.contains_box(b.cube):
                        pairs.append((i, j))
        return pairs

    def verify(self) -> ProbeReport:
        """
        Exact check of :math:`|E(Q)| \\ge \\eta|Q|` and of the pairwise
        disjointness of the exceptional sets.
        """
        report = ProbeReport("sparse-family", family_hash=self.digest())
        eta = Fraction(self._eta)
        for i, e in enumerate(self._entries):
            ratio = e.exceptional.volume / e.cube.volume
            report.record(ratio >= eta, float(eta / ratio) if ratio > 0 else math.inf, "entry {}".format(i))
        if self._addressed():
            for i, j in self.nested_pairs():
                if i > j and self._entries[i].cube == self._entries[j].cube:
                    continue
                overlap = _exceptional_overlap(self._entries[i].exceptional, self._entries[j].exceptional)
                if overlap != 0:
                    report.fail("Exceptional sets of entries {} and {} overlap.".format(i, j))
        else:
            for i, a in enumerate(self._entries):
                for j in range(i + 1, len(self._entries)):
                    b = self._entries[j]
                    if not a.cube.intersects(b.cube):
                        continue
                    if cube_contains(a.cube, b.cube):
                        overlap = _exceptional_overlap(a.exceptional, b.exceptional)
                    elif cube_contains(b.cube, a.cube):
                        overlap = _exceptional_overlap(b.exceptional, a.exceptional)
                    else:
                        overlap = _exceptional_intersection(a.exceptional, b.exceptional)
                    if overlap != 0:
                        report.fail("Exceptional sets of entries {} and {} overlap.".format(i, j))
        report.fitted["size"] = len(self._entries)
        return report

    def center_sum(self, coefficients: Sequence[float], f: LatticeFunction) -> np.ndarray:
        """
        :math:`\\sum_Q c_Q \\chi_{E(Q)}` at the cell centres of the lattice of ``f``.
        """
        out = np.zeros(f.shape)
        for e, c in zip(self._entries, coefficients):
            slices, mask = e.exceptional.center_mask(f)
            view = out[slices]
            view[mask] += c
        return out

    def to_dict(self) -> Dict:
        return {
            "eta": self._eta,
            "grid": self._grid.label if self._grid is not None else None,
            "entries": [
                dict(e.exceptional.to_dict(), k=e.k) for e in self._entries
            ],
        }


def sparse_from_maximal(
    f: LatticeFunction, grid: ShiftedGrid, eta: float, tol: float = 1.0e-12
) -> Tuple[SparseFamily, ProbeReport]:
    """
    Builds the sparse family dominating the dyadic maximal function of
    ``f`` and certifies the domination at every cell centre.

    Parameters
    ----------
    f : LatticeFunction
        Nonnegative function.
    grid : ShiftedGrid
        Dyadic grid.
    eta : float
        Sparseness constant in (0, 1).

    Returns
    -------
    tuple of SparseFamily and ProbeReport
        The family and the domination certificate.
    """
    if np.any(f.values < 0.0):
        raise ValueError("Sparse domination needs a nonnegative function.")
    if not 0.0 < eta < 1.0:
        raise ValueError("Sparseness constant eta must be in (0, 1).")
    gamma = 2.0**f.n / (1.0 - eta)
    cz = cz_decompose(f, grid=grid, gamma=gamma)

    entries: List[SparseEntry] = []
    for k in cz.k_range:
        parents = cz.cubes(k)
        holes: List[List[Cube]] = [[] for _ in parents]
        for child, pos in zip(cz.cubes(k + 1), cz.container_positions(k + 1, k)):
            if pos < 0:
                raise RuntimeError("Level sets of the decomposition are not nested.")
            holes[pos].append(child)
        for q, hs in zip(parents, holes):
            entries.append(SparseEntry(q, ExceptionalSet(q, hs), k))
    family = SparseFamily(eta, entries, grid=grid, decomposition=cz)

    report = ProbeReport("sparse-domination", resolution=f.m, family_hash=family.digest())
    lhs = maximal(f, MaximalKind.dyadic(grid)).values
    rhs = gamma * family.center_sum([f.average(e.cube) for e in entries], f)
    scale = max(float(np.max(lhs)), 1.0e-300)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(rhs > 0.0, lhs / rhs, np.where(lhs > 0.0, np.inf, 0.0))
    bad = lhs > rhs * (1.0 + tol) + tol * scale
    worst = np.unravel_index(int(np.argmax(ratios)), ratios.shape)
    report.record(not np.any(bad), float(ratios[worst]), "cell {}".format(tuple(int(i) for i in worst)))
    report.fitted.update({"gamma": gamma, "eta": eta, "family_size": len(family)})
    return family, report


def sparse_operator(family: SparseFamily, f: LatticeFunction) -> LatticeFunction:
    """
    :math:`\\mathcal{M}_{\\mathcal{S}} f = \\sum_Q f_Q \\chi_{E(Q)}`, projected
    exactly onto the cells.
    """
    out = np.zeros(f.shape)
    for e in family:
        avg = f.average(e.cube)
        slices, weights = e.exceptional.cell_weights(f)
        out[slices] += avg * weights / f.cell_volume
    return f.with_values(out)


def adjoint_sparse_operator(family: SparseFamily, g: LatticeFunction) -> LatticeFunction:
    """
    :math:`\\mathcal{M}^\\star_{\\mathcal{S}} g =
    \\sum_Q \\big(|Q|^{-1}\\int_{E(Q)} g\\big) \\chi_Q`, projected exactly
    onto the cells.
    """
    out = np.zeros(g.shape)
    for e in family:
        coeff = e.exceptional.integrate(g) / float(e.cube.volume)
        slices, weights = g.region_weights(e.cube)
        if weights.size:
            out[slices] += coeff * weights / g.cell_volume
    return g.with_values(out)


def duality_check(
    family: SparseFamily, f: LatticeFunction, g: LatticeFunction, tol: float = 1.0e-10
) -> ProbeReport:
    """
    Checks :math:`\\int (\\mathcal{M}_{\\mathcal{S}} f) g = \\int f (\\mathcal{M}^\\star_{\\mathcal{S}} g)`.
    """
    report = ProbeReport("sparse-duality", resolution=f.m, family_hash=family.digest())
    lhs = float(np.sum(sparse_operator(family, f).values * g.values)) * f.cell_volume
    rhs = float(np.sum(f.values * adjoint_sparse_operator(family, g).values)) * f.cell_volume
    scale = max(abs(lhs), abs(rhs), 1.0e-300)
    report.record(abs(lhs - rhs) <= tol * scale, abs(lhs - rhs) / scale, "pair", lhs=lhs, rhs=rhs)
    return report


def choose_nu(c: float, delta: float, eta: float, n: int) -> int:
    """
    Smallest :math:`\\nu \\ge 1` with
    :math:`2^{n\\delta} c \\sum_{l \\ge \\nu} ((1-\\eta)/2^n)^{\\delta l} \\le 1/2`.
    """
    if c <= 0.0 or delta <= 0.0 or not 0.0 < eta < 1.0:
        raise ValueError("choose_nu needs c > 0, delta > 0 and eta in (0, 1).")
    r = ((1.0 - eta) / 2.0**n) ** delta
    head = 2.0 ** (n * delta) * c / (1.0 - r)
    nu = max(1, math.ceil(math.log(2.0 * head) / math.log(1.0 / r)))
    while nu > 1 and head * r ** (nu - 1) <= 0.5:
        nu -= 1
    while head * r**nu > 0.5:
        nu += 1
    return nu


def adjoint_split_check(
    family: SparseFamily, f: LatticeFunction, nu: int, tol: float = 1.0e-12
) -> ProbeReport:
    """
    Splits the adjoint of a Calderón–Zygmund sparse family into the part
    carried by :math:`Q \\setminus \\Omega_{k+\\nu}` and the part carried by
    :math:`Q \\cap \\Omega_{k+\\nu}`, and checks that the first part is at
    most :math:`\\nu M^{\\mathcal{D}} f` at every cell centre.
    """
    cz = family.decomposition
    if cz is None:
        raise ValueError("Family was not built from a Calderon-Zygmund decomposition.")
    if nu < 1:
        raise ValueError("nu must be >= 1.")
    report = ProbeReport("adjoint-split", resolution=f.m, family_hash=family.digest())
    near = np.zeros(f.shape)
    far = np.zeros(f.shape)
    for e in family:
        alpha = e.exceptional.integrate(f) / float(e.cube.volume)
        slices = f.center_slices(e.cube)
        outside = ~cz.omega_mask(e.k + nu)[slices]
        near[slices] += alpha * outside
        far[slices] += alpha * ~outside
    mf = maximal(f, MaximalKind.dyadic(family.grid)).values
    scale = max(float(np.max(mf)), 1.0e-300)
    bad = near > nu * mf * (1.0 + tol) + tol * scale
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(mf > 0.0, near / (nu * mf), np.where(near > 0.0, np.inf, 0.0))
    worst = np.unravel_index(int(np.argmax(ratios)), ratios.shape)
    report.record(not np.any(bad), float(ratios[worst]), "cell {}".format(tuple(int(i) for i in worst)))
    report.fitted.update(
        {"nu": nu, "near_max": float(np.max(near)), "far_max": float(np.max(far))}
    )
    return report
