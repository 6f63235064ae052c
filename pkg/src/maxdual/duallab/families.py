"""
Random cube families shared by the lemma and condition probes.

All families live in the unshifted grid and inside :math:`[0, 1)^n`, so
every cube is a union of lattice cells once its level is at most the
resolution exponent.
"""

from typing import List, Optional

import numpy as np

from ..czsparse import ExceptionalSet, SparseEntry, SparseFamily, sparse_from_maximal
from ..lattice import Cube, LatticeFunction, ShiftedGrid, support_box
from ..log import LogLevel, logging_level, set_logging_level


def unshifted_grid(n: int) -> ShiftedGrid:
    return ShiftedGrid((0,) * n)


def unit_cube(n: int) -> Cube:
    return unshifted_grid(n).cube(0, (0,) * n)


def random_disjoint_family(
    n: int,
    m: int,
    rng: np.random.Generator,
    max_depth: Optional[int] = None,
    split: float = 0.6,
    keep: float = 0.7,
) -> List[Cube]:
    """
    Pairwise disjoint dyadic subcubes of :math:`[0, 1)^n`, obtained by random
    subdivision of the unit cube followed by a random selection of leaves.

    Parameters
    ----------
    n : int
        Dimension.
    m : int
        Resolution exponent, the deepest level used.
    rng : numpy.random.Generator
        Random source.
    max_depth : int, optional
        Deepest level, default ``min(m, 5)``.
    split : float
        Probability of subdividing a cube.
    keep : float
        Probability of keeping a leaf.
    """
    depth = min(m, 5) if max_depth is None else min(max_depth, m)
    grid = unshifted_grid(n)
    leaves: List[Cube] = []
    stack = [grid.cube(0, (0,) * n)]
    while stack:
        q = stack.pop()
        if q.level < depth and rng.random() < split:
            stack.extend(reversed(grid.children(q)))
        else:
            leaves.append(q)
    chosen = [q for q in leaves if rng.random() < keep]
    return chosen if chosen else [leaves[0]]


def dyadic_chain_family(n: int, m: int, rng: np.random.Generator, eta: float) -> SparseFamily:
    """
    Chain :math:`Q_0 \\supset Q_1 \\supset \\dots` of dyadic cubes, each the
    child of the previous one, with :math:`E(Q_i) = Q_i \\setminus Q_{i+1}`.
    The family is :math:`(1 - 2^{-n})`-sparse.
    """
    if eta > 1.0 - 2.0**-n:
        raise ValueError("A dyadic chain is at most (1 - 2^-n)-sparse.")
    grid = unshifted_grid(n)
    length = int(rng.integers(1, m + 1))
    chain = [grid.cube(0, (0,) * n)]
    for _ in range(length):
        kids = grid.children(chain[-1])
        chain.append(kids[int(rng.integers(len(kids)))])
    entries = []
    for i, q in enumerate(chain):
        holes = [chain[i + 1]] if i + 1 < len(chain) else []
        entries.append(SparseEntry(q, ExceptionalSet(q, holes), i))
    return SparseFamily(eta, entries, grid=grid)


def random_sparse_family(n: int, m: int, rng: np.random.Generator, eta: float) -> SparseFamily:
    """
    Calderón–Zygmund sparse family of a random nonnegative function on
    :math:`[0, 1)^n`, keeping the cubes inside :math:`[0, 1)^n`.
    """
    support = LatticeFunction.indicator(support_box(n), m)
    density = rng.uniform(0.05, 0.5)
    vals = rng.exponential(size=support.shape) * (rng.random(support.shape) < density)
    vals *= support.values
    if not np.any(vals > 0.0):
        vals.ravel()[int(np.flatnonzero(support.values.ravel())[0])] = 1.0
    f = LatticeFunction(vals, m, nonnegative=True)
    grid = unshifted_grid(n)

    previous = logging_level()
    set_logging_level(LogLevel.Warning)
    try:
        family, _ = sparse_from_maximal(f, grid, eta)
    finally:
        set_logging_level(previous)

    unit = support_box(n)
    entries = [e for e in family if unit.contains_box(e.cube)]
    if not entries:
        return dyadic_chain_family(n, m, rng, min(eta, 0.5))
    return SparseFamily(eta, entries, grid=grid)


def exceptional_cells(entry: SparseEntry, f: LatticeFunction) -> np.ndarray:
    """
    Flat indices of the lattice cells making up :math:`E(Q)`. Exact for
    grid cubes of level at most the resolution exponent.
    """
    slices, mask = entry.exceptional.center_mask(f)
    full = np.zeros(f.shape, dtype=bool)
    full[slices] = mask
    return np.flatnonzero(full.ravel())
