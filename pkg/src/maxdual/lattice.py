"""
Lattice geometry, shifted dyadic grids and exact integration.

Every function handled by maxdual lives on the computational box
:math:`[-1, 2)^n` (:math:`n = 1, 2`), which is split into :math:`3 \\cdot 2^m`
cells of side :math:`h = 2^{-m}` per axis. Functions are piecewise constant on
the cells and vanish outside the box. The cells are aligned with the
unshifted dyadic grid, so every unshifted dyadic cube of side at least
:math:`h` is a union of cells.

Cube corners are held as :class:`fractions.Fraction` so that containment
between cubes of different shifted grids is decided exactly. Integrals are
exact for piecewise-constant data: the overlap of a cube with a cell is a
product of interval lengths.
"""

import csv
import io
import itertools
import json
import math
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple, Union

import h5py
import matplotlib.pyplot as plt
import numpy as np

Number = Union[int, float, Fraction]

ROOT_LEVEL = -3
"""
Coarsest level kept in a grid tree. Cubes of side 8 either contain the whole
computational box along an axis or split it at the origin.
"""


def _frac(x: Number) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, np.integer)):
        return Fraction(int(x))
    x = float(x)
    if not math.isfinite(x):
        raise ValueError("Coordinates must be finite.")
    return Fraction(x)


def _pow2(k: int) -> Fraction:
    return Fraction(2) ** k


class Box:
    """
    Half-open axis-aligned cube :math:`[a, a + \\ell)^n`.

    Parameters
    ----------
    lower : sequence of float or Fraction
        Lower corner :math:`a`. Its length fixes the dimension (1 or 2).
    side : float or Fraction
        Side length :math:`\\ell > 0`.

    Attributes
    ----------
    n : int
        Dimension.
    lower : tuple of Fraction
        Exact lower corner.
    upper : tuple of Fraction
        Exact upper corner.
    side : Fraction
        Exact side length.
    volume : Fraction
        Exact volume.
    """

    def __init__(self, lower: Sequence[Number], side: Number):
        lower = tuple(_frac(x) for x in lower)
        if len(lower) not in (1, 2):
            raise ValueError("Box dimension must be 1 or 2.")
        side = _frac(side)
        if side <= 0:
            raise ValueError("Box side length must be > 0.")
        self._lower = lower
        self._side = side

    @property
    def n(self) -> int:
        return len(self._lower)

    @property
    def lower(self) -> Tuple[Fraction, ...]:
        return self._lower

    @property
    def upper(self) -> Tuple[Fraction, ...]:
        return tuple(a + self._side for a in self._lower)

    @property
    def side(self) -> Fraction:
        return self._side

    @property
    def volume(self) -> Fraction:
        return self._side**self.n

    @property
    def lower_f(self) -> np.ndarray:
        return np.array([float(a) for a in self._lower])

    @property
    def side_f(self) -> float:
        return float(self._side)

    @property
    def volume_f(self) -> float:
        return float(self.volume)

    def contains_box(self, other: "Box") -> bool:
        """
        Returns True if ``other`` is a subset of this cube (exact).
        """
        if other.n != self.n:
            raise ValueError("Boxes have different dimensions.")
        for a, b, c, d in zip(self.lower, self.upper, other.lower, other.upper):
            if c < a or d > b:
                return False
        return True

    def contains_point(self, x: Sequence[Number]) -> bool:
        if len(x) != self.n:
            raise ValueError("Point has the wrong dimension.")
        return all(
            a <= _frac(xi) < b for a, b, xi in zip(self.lower, self.upper, x)
        )

    def intersects(self, other: "Box") -> bool:
        return all(
            max(a, c) < min(b, d)
            for a, b, c, d in zip(self.lower, self.upper, other.lower, other.upper)
        )

    def intersection_volume(self, other: "Box") -> Fraction:
        vol = Fraction(1)
        for a, b, c, d in zip(self.lower, self.upper, other.lower, other.upper):
            length = min(b, d) - max(a, c)
            if length <= 0:
                return Fraction(0)
            vol *= length
        return vol

    def to_dict(self) -> Dict:
        return {"lower": [float(a) for a in self.lower], "side": float(self.side)}

    def __eq__(self, other) -> bool:
        if not isinstance(other, Box):
            return NotImplemented
        return self._lower == other._lower and self._side == other._side

    def __hash__(self) -> int:
        return hash((self._lower, self._side))

    def __repr__(self) -> str:
        lo = ", ".join(str(a) for a in self._lower)
        return "Box(lower=({}), side={})".format(lo, self._side)


class Cube(Box):
    """
    A :class:`Box` which may carry its address in a dyadic family.

    Parameters
    ----------
    lower : sequence of float or Fraction
        Lower corner.
    side : float or Fraction
        Side length.
    grid : ShiftedGrid, optional
        Grid the cube belongs to. None for free cubes and for cubes of a
        local dyadic tree.
    level : int, optional
        Generation of the cube in its family.
    index : tuple of int, optional
        Integer index of the cube inside its generation.
    """

    def __init__(
        self,
        lower: Sequence[Number],
        side: Number,
        grid: Optional["ShiftedGrid"] = None,
        level: Optional[int] = None,
        index: Optional[Tuple[int, ...]] = None,
    ):
        super().__init__(lower, side)
        if (level is None) != (index is None):
            raise ValueError("Cube level and index must be given together.")
        self._grid = grid
        self._level = level
        self._index = None if index is None else tuple(int(j) for j in index)

    @property
    def grid(self) -> Optional["ShiftedGrid"]:
        return self._grid

    @property
    def level(self) -> Optional[int]:
        return self._level

    @property
    def index(self) -> Optional[Tuple[int, ...]]:
        return self._index

    @property
    def address(self) -> Optional[Tuple[int, Tuple[int, ...]]]:
        if self._level is None:
            return None
        return (self._level, self._index)

    def to_dict(self) -> Dict:
        out = super().to_dict()
        if self._grid is not None:
            out["grid"] = self._grid.label
        if self._level is not None:
            out["level"] = self._level
            out["index"] = list(self._index)
        return out

    def __repr__(self) -> str:
        if self._level is None:
            return super().__repr__().replace("Box", "Cube", 1)
        grid = self._grid.label if self._grid is not None else "local"
        return "Cube({}, level={}, index={})".format(grid, self._level, self._index)


def computational_box(n: int) -> Box:
    """
    The box :math:`[-1, 2)^n` carrying every lattice function.
    """
    return Box((-1,) * n, 3)


def support_box(n: int) -> Box:
    """
    The box :math:`[0, 1)^n` on which test functions are usually supported.
    """
    return Box((0,) * n, 1)


class ShiftedGrid:
    """
    Dyadic grid shifted by :math:`\\alpha \\in \\{0, 1/3, 2/3\\}^n`.

    The cubes of generation :math:`k` are
    :math:`2^{-k}([0, 1)^n + j + (-1)^k \\alpha)` for :math:`j \\in \\mathbb{Z}^n`.
    Every such family is nested: a cube of generation :math:`k+1` lies in
    exactly one cube of generation :math:`k`, and the latter is the union of
    its :math:`2^n` children.

    Parameters
    ----------
    thirds : sequence of int
        Shift in units of 1/3 along each axis, each entry in {0, 1, 2}.
    """

    def __init__(self, thirds: Sequence[int]):
        thirds = tuple(int(a) for a in thirds)
        if len(thirds) not in (1, 2):
            raise ValueError("Grid dimension must be 1 or 2.")
        for a in thirds:
            if a not in (0, 1, 2):
                raise ValueError("Grid shift must be 0, 1/3 or 2/3 along each axis.")
        self._thirds = thirds

    @property
    def n(self) -> int:
        return len(self._thirds)

    @property
    def thirds(self) -> Tuple[int, ...]:
        return self._thirds

    @property
    def shift(self) -> Tuple[Fraction, ...]:
        return tuple(Fraction(a, 3) for a in self._thirds)

    @property
    def label(self) -> str:
        parts = ["0" if a == 0 else "{}/3".format(a) for a in self._thirds]
        return "alpha=(" + ",".join(parts) + ")"

    @staticmethod
    def sign(level: int) -> int:
        return 1 if level % 2 == 0 else -1

    def side(self, level: int) -> Fraction:
        return _pow2(-level)

    def corner(self, level: int, index: Sequence[int]) -> Tuple[Fraction, ...]:
        s = self.sign(level)
        scale = _pow2(-level)
        return tuple(
            scale * (int(j) + s * Fraction(a, 3)) for j, a in zip(index, self._thirds)
        )

    def cube(self, level: int, index: Sequence[int]) -> Cube:
        return Cube(
            self.corner(level, index), self.side(level), grid=self, level=level,
            index=tuple(index),
        )

    def index_of_point(self, point: Sequence[Number], level: int) -> Tuple[int, ...]:
        """
        Index of the generation-``level`` cube containing ``point`` (exact).
        """
        s = self.sign(level)
        scale = _pow2(level)
        return tuple(
            math.floor(_frac(x) * scale - s * Fraction(a, 3))
            for x, a in zip(point, self._thirds)
        )

    def locate(self, coords: np.ndarray, level: int, axis: int) -> np.ndarray:
        """
        Indices along ``axis`` of the cubes containing the coordinates.
        Cell centres never lie on a grid boundary, so floating point
        evaluation is exact for them.
        """
        s = self.sign(level)
        a = self._thirds[axis] / 3.0
        return np.floor(np.asarray(coords) * 2.0**level - s * a).astype(np.int64)

    def parent_index(self, level: int, index: Sequence[int]) -> Tuple[int, ...]:
        """
        Index at generation ``level - 1`` of the parent of a cube.
        """
        s = self.sign(level - 1)
        return tuple((int(j) - s * a) // 2 for j, a in zip(index, self._thirds))

    def parent_indices(self, level: int, index: np.ndarray, axis: int) -> np.ndarray:
        s = self.sign(level - 1)
        return np.floor_divide(np.asarray(index) - s * self._thirds[axis], 2)

    def ancestor_index(
        self, level: int, index: Sequence[int], target: int
    ) -> Tuple[int, ...]:
        if target > level:
            raise ValueError("Ancestor generation must not exceed the cube generation.")
        index = tuple(index)
        for lev in range(level, target, -1):
            index = self.parent_index(lev, index)
        return index

    def parent(self, cube: Cube) -> Cube:
        self._check_member(cube)
        return self.cube(cube.level - 1, self.parent_index(cube.level, cube.index))

    def children(self, cube: Cube) -> List[Cube]:
        self._check_member(cube)
        s = self.sign(cube.level)
        base = [2 * j + s * a for j, a in zip(cube.index, self._thirds)]
        return [
            self.cube(cube.level + 1, [b + e for b, e in zip(base, offs)])
            for offs in itertools.product((0, 1), repeat=self.n)
        ]

    def index_range(self, level: int, lo: Number, hi: Number, axis: int) -> Tuple[int, int]:
        """
        Inclusive range of indices along ``axis`` of the generation-``level``
        cubes meeting the interval ``[lo, hi)``.
        """
        s = self.sign(level)
        a = Fraction(self._thirds[axis], 3)
        scale = _pow2(level)
        j_lo = math.floor(_frac(lo) * scale - s * a)
        j_hi = math.ceil(_frac(hi) * scale - s * a) - 1
        return j_lo, j_hi

    def cubes_meeting(self, level: int, box: Box) -> List[Cube]:
        ranges = []
        for ax, (lo, hi) in enumerate(zip(box.lower, box.upper)):
            j_lo, j_hi = self.index_range(level, lo, hi, ax)
            ranges.append(range(j_lo, j_hi + 1))
        return [self.cube(level, idx) for idx in itertools.product(*ranges)]

    def _check_member(self, cube: Cube) -> None:
        if cube.grid != self or cube.level is None:
            raise ValueError("Cube does not belong to this grid.")

    def __eq__(self, other) -> bool:
        if not isinstance(other, ShiftedGrid):
            return NotImplemented
        return self._thirds == other._thirds

    def __hash__(self) -> int:
        return hash(self._thirds)

    def __repr__(self) -> str:
        return "ShiftedGrid({})".format(self.label)


def build_shifted_grids(n: int) -> List[ShiftedGrid]:
    """
    Returns the :math:`3^n` shifted grids, the unshifted grid first.

    Parameters
    ----------
    n : int
        Dimension, 1 or 2.
    """
    if n not in (1, 2):
        raise ValueError("Only dimensions 1 and 2 are supported.")
    return [ShiftedGrid(t) for t in itertools.product((0, 1, 2), repeat=n)]


def _finest_level_not_below(length: Fraction) -> int:
    # largest k with 2^{-k} >= length
    k = -math.floor(math.log2(float(length)))
    while _pow2(-k) < length:
        k -= 1
    while _pow2(-(k + 1)) >= length:
        k += 1
    return k


def cover_cube(
    q: Box, grids: Optional[Sequence[ShiftedGrid]] = None
) -> Tuple[ShiftedGrid, Cube]:
    """
    Finds a shifted grid cube containing ``q`` with side at most
    :math:`6\\ell(q)`.

    Generations are scanned from the finest one whose side is at least
    :math:`\\ell(q)` upwards and the first hit is returned, so the result is
    the smallest covering cube. At the generation whose side lies in
    :math:`[3\\ell, 6\\ell)` the union of the grid boundaries along an axis has
    spacing at least :math:`\\ell`, hence at most one shift per axis cuts
    ``q`` and a covering cube always exists.

    Parameters
    ----------
    q : Box
        Cube to cover.
    grids : sequence of ShiftedGrid, optional
        Grids to use. Defaults to all :math:`3^n` shifted grids.

    Returns
    -------
    tuple of ShiftedGrid and Cube
        Grid and covering cube.
    """
    if grids is None:
        grids = build_shifted_grids(q.n)
    k_fine = _finest_level_not_below(q.side)
    k_guaranteed = _finest_level_not_below(3 * q.side)
    for level in range(k_fine, k_guaranteed - 1, -1):
        for grid in grids:
            cand = grid.cube(level, grid.index_of_point(q.lower, level))
            if cand.contains_box(q):
                return grid, cand
    raise AssertionError("No shifted grid cube covers {}.".format(q))


class LatticeFunction:
    """
    Piecewise-constant function on the cells of the computational lattice.

    Parameters
    ----------
    values : ndarray
        Cell values, of shape :math:`(3 \\cdot 2^m,)` or
        :math:`(3 \\cdot 2^m, 3 \\cdot 2^m)`, indexed from the lower corner of
        the computational box.
    m : int
        Resolution exponent, the cell side is :math:`2^{-m}`.
    nonnegative : bool
        If True, the values are checked to be nonnegative.

    Attributes
    ----------
    n : int
        Dimension.
    m : int
        Resolution exponent.
    h : float
        Cell side.
    num_cells : int
        Number of cells per axis.
    values : ndarray
        Read-only cell values.
    box : Box
        The computational box.
    """

    def __init__(self, values: np.ndarray, m: int, nonnegative: bool = False):
        values = np.array(values, dtype=float)
        if values.ndim not in (1, 2):
            raise ValueError("Lattice functions must be 1D or 2D.")
        if int(m) < 1:
            raise ValueError("Resolution exponent m must be >= 1.")
        m = int(m)
        N = 3 * 2**m
        if values.shape != (N,) * values.ndim:
            raise ValueError(
                "Values have shape {} but resolution m = {} needs {}.".format(
                    values.shape, m, (N,) * values.ndim
                )
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("Lattice function values must be finite.")
        if nonnegative and np.any(values < 0.0):
            raise ValueError("Lattice function was declared nonnegative.")
        values.setflags(write=False)
        self._values = values
        self._m = m
        self._nonnegative = bool(nonnegative)
        self._table: Optional[np.ndarray] = None

    # ------------------------------------------------------------------ #
    # Construction
    # ------------------------------------------------------------------ #
    @classmethod
    def zeros(cls, n: int, m: int) -> "LatticeFunction":
        N = 3 * 2**m
        return cls(np.zeros((N,) * n), m, nonnegative=True)

    @classmethod
    def constant(cls, c: float, n: int, m: int) -> "LatticeFunction":
        N = 3 * 2**m
        return cls(np.full((N,) * n, float(c)), m, nonnegative=c >= 0.0)

    @classmethod
    def from_callable(cls, fn, n: int, m: int, nonnegative: bool = False) -> "LatticeFunction":
        """
        Samples ``fn`` at the cell centres. ``fn`` receives one coordinate
        array per axis (``indexing="ij"``).
        """
        N = 3 * 2**m
        c = -1.0 + (np.arange(N) + 0.5) * 2.0**-m
        grids = np.meshgrid(*([c] * n), indexing="ij")
        return cls(np.broadcast_to(fn(*grids), (N,) * n), m, nonnegative)

    @classmethod
    def indicator(cls, region: Box, m: int, height: float = 1.0) -> "LatticeFunction":
        """
        Cell averages of ``height`` times the indicator of ``region``. The
        result is an exact indicator when ``region`` is a union of cells.
        """
        out = cls.zeros(region.n, m)
        slices, weights = out.region_weights(region)
        values = np.zeros(out.shape)
        values[slices] = height * weights / out.cell_volume
        return cls(values, m, nonnegative=height >= 0.0)

    def with_values(self, values: np.ndarray, nonnegative: bool = False) -> "LatticeFunction":
        return LatticeFunction(values, self._m, nonnegative)

    # ------------------------------------------------------------------ #
    # Properties
    # ------------------------------------------------------------------ #
    @property
    def n(self) -> int:
        return self._values.ndim

    @property
    def m(self) -> int:
        return self._m

    @property
    def h(self) -> float:
        return 2.0**-self._m

    @property
    def num_cells(self) -> int:
        return self._values.shape[0]

    @property
    def shape(self) -> Tuple[int, ...]:
        return self._values.shape

    @property
    def cell_volume(self) -> float:
        return self.h**self.n

    @property
    def values(self) -> np.ndarray:
        return self._values

    @property
    def nonnegative(self) -> bool:
        return self._nonnegative

    @property
    def box(self) -> Box:
        return computational_box(self.n)

    def centers(self) -> np.ndarray:
        """
        Cell centre coordinates along one axis.
        """
        return -1.0 + (np.arange(self.num_cells) + 0.5) * self.h

    def center_grid(self) -> Tuple[np.ndarray, ...]:
        c = self.centers()
        return tuple(np.meshgrid(*([c] * self.n), indexing="ij"))

    def is_compatible(self, other: "LatticeFunction") -> bool:
        return self.n == other.n and self.m == other.m

    def _check_compatible(self, other: "LatticeFunction") -> None:
        if not self.is_compatible(other):
            raise ValueError("Lattice functions live on different lattices.")

    # ------------------------------------------------------------------ #
    # Arithmetic
    # ------------------------------------------------------------------ #
    def _operand(self, other) -> Union[float, np.ndarray]:
        if isinstance(other, LatticeFunction):
            self._check_compatible(other)
            return other.values
        return float(other)

    def __add__(self, other) -> "LatticeFunction":
        return self.with_values(self._values + self._operand(other))

    __radd__ = __add__

    def __sub__(self, other) -> "LatticeFunction":
        return self.with_values(self._values - self._operand(other))

    def __mul__(self, other) -> "LatticeFunction":
        return self.with_values(self._values * self._operand(other))

    __rmul__ = __mul__

    def __truediv__(self, other) -> "LatticeFunction":
        return self.with_values(self._values / self._operand(other))

    def __neg__(self) -> "LatticeFunction":
        return self.with_values(-self._values)

    def abs(self) -> "LatticeFunction":
        return LatticeFunction(np.abs(self._values), self._m, nonnegative=True)

    def power(self, exponent) -> "LatticeFunction":
        """
        Cellwise power of a nonnegative function. ``exponent`` may be a
        scalar, an array of cell values or another lattice function.
        """
        if np.any(self._values < 0.0):
            raise ValueError("Powers are only defined for nonnegative functions.")
        if isinstance(exponent, LatticeFunction):
            self._check_compatible(exponent)
            exponent = exponent.values
        with np.errstate(over="ignore", divide="ignore"):
            out = np.power(self._values, exponent)
        if not np.all(np.isfinite(out)):
            raise ValueError("Power of lattice function is not finite.")
        return LatticeFunction(out, self._m, nonnegative=True)

    # ------------------------------------------------------------------ #
    # Integration
    # ------------------------------------------------------------------ #
    def _axis_overlap(self, lo: float, hi: float) -> Tuple[int, np.ndarray]:
        N = self.num_cells
        h = self.h
        lo = max(float(lo), -1.0)
        hi = min(float(hi), 2.0)
        if hi <= lo:
            return 0, np.zeros(0)
        i0 = min(max(int(math.floor((lo + 1.0) / h)), 0), N - 1)
        i1 = min(max(int(math.ceil((hi + 1.0) / h)), i0 + 1), N)
        edges = -1.0 + h * np.arange(i0, i1 + 1)
        w = np.minimum(hi, edges[1:]) - np.maximum(lo, edges[:-1])
        return i0, np.clip(w, 0.0, None)

    def region_weights(self, region: Box) -> Tuple[Tuple[slice, ...], np.ndarray]:
        """
        Overlap volumes between ``region`` and the cells it meets.

        Returns
        -------
        tuple of slices and ndarray
            Slices selecting the cells meeting ``region`` and the volume of
            each overlap.
        """
        if region.n != self.n:
            raise ValueError("Region has the wrong dimension.")
        slices = []
        weights = None
        for lo, hi in zip(region.lower, region.upper):
            i0, w = self._axis_overlap(lo, hi)
            slices.append(slice(i0, i0 + w.size))
            weights = w if weights is None else np.multiply.outer(weights, w)
        return tuple(slices), weights

    def center_slices(self, region: Box) -> Tuple[slice, ...]:
        """
        Slices selecting the cells whose centres lie in ``region``.
        """
        if region.n != self.n:
            raise ValueError("Region has the wrong dimension.")
        N = self.num_cells
        out = []
        for lo, hi in zip(region.lower, region.upper):
            i0 = math.ceil((float(lo) + 1.0) / self.h - 0.5)
            i1 = math.ceil((float(hi) + 1.0) / self.h - 0.5)
            i0 = min(max(i0, 0), N)
            out.append(slice(i0, min(max(i1, i0), N)))
        return tuple(out)

    def integrate(self, region: Box) -> float:
        """
        Exact integral over ``region``, clipped to the computational box.
        """
        slices, weights = self.region_weights(region)
        if weights.size == 0:
            return 0.0
        return float(np.sum(self._values[slices] * weights))

    def average(self, region: Box) -> float:
        """
        Mean value :math:`|Q|^{-1}\\int_Q f` over ``region``.
        """
        vol = region.volume_f
        if vol <= 0.0:
            raise ValueError("Cannot average over a set of zero volume.")
        return self.integrate(region) / vol

    def _cumulative_table(self) -> np.ndarray:
        if self._table is None:
            N = self.num_cells
            table = np.zeros((N + 1,) * self.n)
            inner = self._values * self.cell_volume
            for ax in range(self.n):
                inner = np.cumsum(inner, axis=ax)
            table[(slice(1, None),) * self.n] = inner
            self._table = table
        return self._table

    def _interp_coords(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        N = self.num_cells
        s = (np.clip(np.asarray(x, dtype=float), -1.0, 2.0) + 1.0) / self.h
        i = np.clip(np.floor(s).astype(np.int64), 0, N - 1)
        return i, s - i

    def antiderivative_on(self, points: Sequence[np.ndarray]) -> np.ndarray:
        """
        Values of :math:`G(x) = \\int_{[-1, x)} f` on the tensor grid spanned
        by one array of coordinates per axis. :math:`G` is multilinear on each
        cell, so interpolating the cumulative table is exact.
        """
        if len(points) != self.n:
            raise ValueError("Need one coordinate array per axis.")
        table = self._cumulative_table()
        i0, u0 = self._interp_coords(points[0])
        u0 = u0.reshape((-1,) + (1,) * (self.n - 1))
        rows = table[i0] + u0 * (table[i0 + 1] - table[i0])
        if self.n == 1:
            return rows
        i1, u1 = self._interp_coords(points[1])
        return rows[:, i1] + u1[None, :] * (rows[:, i1 + 1] - rows[:, i1])

    def antiderivative_at(self, points: np.ndarray) -> np.ndarray:
        """
        Values of the antiderivative at scattered points of shape ``(K, n)``.
        """
        points = np.atleast_2d(np.asarray(points, dtype=float))
        table = self._cumulative_table()
        if self.n == 1:
            i, u = self._interp_coords(points[:, 0])
            return table[i] + u * (table[i + 1] - table[i])
        i, u = self._interp_coords(points[:, 0])
        j, v = self._interp_coords(points[:, 1])
        return (
            (1.0 - u) * (1.0 - v) * table[i, j]
            + u * (1.0 - v) * table[i + 1, j]
            + (1.0 - u) * v * table[i, j + 1]
            + u * v * table[i + 1, j + 1]
        )

    def integrate_cubes(self, lowers: np.ndarray, sides: np.ndarray) -> np.ndarray:
        """
        Exact integrals over many cubes at once.

        Parameters
        ----------
        lowers : ndarray
            Lower corners, shape ``(K, n)``.
        sides : ndarray
            Side lengths, shape ``(K,)``.
        """
        lowers = np.atleast_2d(np.asarray(lowers, dtype=float))
        sides = np.asarray(sides, dtype=float)
        total = np.zeros(lowers.shape[0])
        for corner in itertools.product((0, 1), repeat=self.n):
            offs = np.array(corner, dtype=float)
            sign = (-1.0) ** (self.n - int(sum(corner)))
            total += sign * self.antiderivative_at(lowers + sides[:, None] * offs)
        return total

    # ------------------------------------------------------------------ #
    # Serialization
    # ------------------------------------------------------------------ #
    def to_dict(self) -> Dict:
        return {
            "n": self.n,
            "m": self.m,
            "box": self.box.to_dict(),
            "nonnegative": self.nonnegative,
            "values": self._values.ravel().tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "LatticeFunction":
        data = json.loads(text)
        try:
            n, m = int(data["n"]), int(data["m"])
            values = np.asarray(data["values"], dtype=float)
        except KeyError as err:
            raise ValueError("Missing field {} in lattice function JSON.".format(err))
        N = 3 * 2**m
        return cls(values.reshape((N,) * n), m, bool(data.get("nonnegative", False)))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        header = ["i{}".format(ax) for ax in range(self.n)] + ["value"]
        writer.writerow(header)
        for idx in np.ndindex(*self.shape):
            writer.writerow(list(idx) + [repr(float(self._values[idx]))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "LatticeFunction":
        rows = list(csv.reader(io.StringIO(text)))
        if not rows:
            raise ValueError("Empty lattice function CSV.")
        n = len(rows[0]) - 1
        body = rows[1:]
        N = round(len(body) ** (1.0 / n))
        m = round(math.log2(N / 3))
        if 3 * 2**m != N or N**n != len(body):
            raise ValueError("CSV does not describe a complete lattice.")
        values = np.zeros((N,) * n)
        for row in body:
            values[tuple(int(v) for v in row[:n])] = float(row[n])
        return cls(values, m)

    def to_hdf5(self, group: h5py.Group, name: str = "f") -> None:
        """
        Writes the function as a dataset of ``group``.
        """
        dset = group.create_dataset(name, data=np.asarray(self._values))
        dset.attrs["m"] = self.m
        dset.attrs["nonnegative"] = self.nonnegative
        dset.attrs["box_lower"] = np.full(self.n, -1.0)
        dset.attrs["box_side"] = 3.0

    @classmethod
    def from_hdf5(cls, group: h5py.Group, name: str = "f") -> "LatticeFunction":
        if name not in group:
            raise ValueError("No lattice function named {} in HDF5 group.".format(name))
        dset = group[name]
        return cls(
            dset[()], int(dset.attrs["m"]), bool(dset.attrs.get("nonnegative", False))
        )

    def plot(self, ax=None, **kwargs):
        """
        Plots the function: a step plot in 1D, an image in 2D.

        Returns
        -------
        tuple
            Matplotlib figure and axes.
        """
        if ax is None:
            fig, ax = plt.subplots()
        else:
            fig = ax.figure
        if self.n == 1:
            edges = -1.0 + self.h * np.arange(self.num_cells + 1)
            ax.stairs(self._values, edges, **kwargs)
            ax.set_xlabel("x")
        else:
            im = ax.imshow(
                self._values.T, origin="lower", extent=(-1.0, 2.0, -1.0, 2.0), **kwargs
            )
            fig.colorbar(im, ax=ax)
            ax.set_xlabel("x")
            ax.set_ylabel("y")
        return fig, ax

    def __repr__(self) -> str:
        return "LatticeFunction(n={}, m={})".format(self.n, self.m)


def integrate(f: LatticeFunction, region: Box) -> float:
    """
    Exact integral of ``f`` over ``region`` (clipped to the box).
    """
    return f.integrate(region)


def average(f: LatticeFunction, region: Box) -> float:
    """
    Mean value of ``f`` over ``region``.
    """
    return f.average(region)


class GridTree:
    """
    Finite window of a shifted grid: all cubes meeting the computational box
    from generation :data:`ROOT_LEVEL` down to the cell generation.

    Cubes of one generation are stored as a tensor of positions; position
    ``p`` along an axis stands for index ``p + offset`` of the grid.

    Parameters
    ----------
    grid : ShiftedGrid
        Grid to truncate.
    m : int
        Resolution exponent of the lattice. The finest generation is ``m``.
    """

    def __init__(self, grid: ShiftedGrid, m: int):
        self._grid = grid
        self._m = int(m)
        box = computational_box(grid.n)
        self._ranges = {}
        for level in self.levels:
            self._ranges[level] = [
                grid.index_range(level, lo, hi, ax)
                for ax, (lo, hi) in enumerate(zip(box.lower, box.upper))
            ]

    @property
    def grid(self) -> ShiftedGrid:
        return self._grid

    @property
    def n(self) -> int:
        return self._grid.n

    @property
    def levels(self) -> range:
        return range(ROOT_LEVEL, self._m + 1)

    @property
    def top(self) -> int:
        return ROOT_LEVEL

    @property
    def leaf(self) -> int:
        return self._m

    def side(self, level: int) -> float:
        return 2.0**-level

    def shape(self, level: int) -> Tuple[int, ...]:
        return tuple(hi - lo + 1 for lo, hi in self._ranges[level])

    def axis_corners(self, level: int) -> List[np.ndarray]:
        s = self._grid.sign(level)
        out = []
        for (lo, hi), a in zip(self._ranges[level], self._grid.thirds):
            j = np.arange(lo, hi + 1, dtype=float)
            out.append((j + s * a / 3.0) * 2.0**-level)
        return out

    def parent_positions(self, level: int) -> List[np.ndarray]:
        """
        Position of the parent of each cube of ``level``, per axis.
        """
        out = []
        for ax, ((lo, hi), (plo, _)) in enumerate(
            zip(self._ranges[level], self._ranges[level - 1])
        ):
            j = np.arange(lo, hi + 1)
            out.append(self._grid.parent_indices(level, j, ax) - plo)
        return out

    def locate_positions(self, level: int, coords: np.ndarray) -> List[np.ndarray]:
        out = []
        for ax, (lo, _) in enumerate(self._ranges[level]):
            out.append(self._grid.locate(coords, level, ax) - lo)
        return out

    def axis_inside(self, coords: np.ndarray, axis: int) -> np.ndarray:
        return np.ones(np.asarray(coords).shape, dtype=bool)

    def cube(self, level: int, position: Sequence[int]) -> Cube:
        index = [int(p) + lo for p, (lo, _) in zip(position, self._ranges[level])]
        return self._grid.cube(level, index)

    def ancestor_index(
        self, level: int, index: Sequence[int], target: int
    ) -> Tuple[int, ...]:
        return self._grid.ancestor_index(level, index, target)


class LocalTree:
    """
    Dyadic subcubes of a fixed cube :math:`Q_0`, generation ``d`` having side
    :math:`\\ell(Q_0) 2^{-d}`.

    Parameters
    ----------
    q0 : Box
        Top cube.
    m : int
        Resolution exponent. Subdivision stops at the last generation whose
        side is still at least the cell side.
    """

    def __init__(self, q0: Box, m: int):
        h = Fraction(1, 2**m)
        if q0.side < h:
            raise ValueError("Local cube must not be smaller than a cell.")
        depth = 0
        while q0.side / 2 ** (depth + 1) >= h:
            depth += 1
        self._q0 = q0
        self._depth = depth

    @property
    def q0(self) -> Box:
        return self._q0

    @property
    def n(self) -> int:
        return self._q0.n

    @property
    def levels(self) -> range:
        return range(0, self._depth + 1)

    @property
    def top(self) -> int:
        return 0

    @property
    def leaf(self) -> int:
        return self._depth

    def side(self, level: int) -> float:
        return self._q0.side_f / 2**level

    def shape(self, level: int) -> Tuple[int, ...]:
        return (2**level,) * self.n

    def axis_corners(self, level: int) -> List[np.ndarray]:
        s = self.side(level)
        return [a + s * np.arange(2**level) for a in self._q0.lower_f]

    def parent_positions(self, level: int) -> List[np.ndarray]:
        return [np.arange(2**level) // 2 for _ in range(self.n)]

    def locate_positions(self, level: int, coords: np.ndarray) -> List[np.ndarray]:
        s = self.side(level)
        out = []
        for a in self._q0.lower_f:
            pos = np.floor((np.asarray(coords) - a) / s).astype(np.int64)
            out.append(np.clip(pos, 0, 2**level - 1))
        return out

    def axis_inside(self, coords: np.ndarray, axis: int) -> np.ndarray:
        """
        Which coordinates along ``axis`` fall in the top cube.
        """
        a = self._q0.lower_f[axis]
        coords = np.asarray(coords)
        return (coords >= a) & (coords < a + self._q0.side_f)

    def cube(self, level: int, position: Sequence[int]) -> Cube:
        side = self._q0.side / 2**level
        lower = [a + int(p) * side for a, p in zip(self._q0.lower, position)]
        return Cube(lower, side, level=level, index=tuple(int(p) for p in position))

    def ancestor_index(
        self, level: int, index: Sequence[int], target: int
    ) -> Tuple[int, ...]:
        if target > level:
            raise ValueError("Ancestor generation must not exceed the cube generation.")
        return tuple(int(j) >> (level - target) for j in index)


def tree_level_averages(f: LatticeFunction, tree, level: int) -> np.ndarray:
    """
    Exact averages of ``f`` over every cube of one generation of a tree.
    """
    if f.n != tree.n:
        raise ValueError("Function and tree have different dimensions.")
    s = tree.side(level)
    points = [np.append(c, c[-1] + s) for c in tree.axis_corners(level)]
    integrals = f.antiderivative_on(points)
    for ax in range(f.n):
        integrals = np.diff(integrals, axis=ax)
    return integrals / s**f.n
