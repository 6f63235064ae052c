"""
Sparse condition probes.

For an :math:`\\eta`-sparse family :math:`\\mathcal{S}`, nonnegative
coefficients :math:`\\alpha_Q` and pairwise disjoint sets
:math:`G_Q \\subseteq E(Q)`, the condition

.. math::

    \\Big\\|\\sum_Q \\alpha_Q \\chi_{G_Q}\\Big\\|_X \\le
    c \\Big(\\max_Q \\frac{|G_Q|}{|Q|}\\Big)^{\\delta}
    \\Big\\|\\sum_Q \\alpha_Q \\chi_Q\\Big\\|_X

is probed by sweeping the density :math:`\\rho = \\max |G_Q|/|Q|` and
fitting :math:`\\log R` against :math:`\\log \\rho`. Random sampling can
only falsify such a condition, never certify it.
"""

import math
from typing import Dict, List, Sequence, Tuple

import numpy as np
from scipy import stats

from ..czsparse import ExceptionalSet, SparseEntry, SparseFamily, cube_contains
from ..lattice import LatticeFunction
from ..log import LogLevel, maxdual_log
from ..report import ProbeReport, family_hash
from .families import (
    dyadic_chain_family,
    exceptional_cells,
    random_sparse_family,
    unit_cube,
    unshifted_grid,
)
from .space import SpaceSpec

DEFAULT_DENSITIES = tuple(2.0**-j for j in range(1, 9))

MODES = ("mixed", "cz", "chain", "single")


def _single_cube_family(n: int, eta: float) -> SparseFamily:
    q = unit_cube(n)
    return SparseFamily(eta, [SparseEntry(q, ExceptionalSet(q), 0)], grid=unshifted_grid(n))


def _draw_family(space: SpaceSpec, mode: str, trial: int, eta: float, rng) -> SparseFamily:
    if mode == "single":
        return _single_cube_family(space.n, eta)
    if mode == "cz" or (mode == "mixed" and trial % 2 == 0):
        return random_sparse_family(space.n, space.m, rng, eta)
    return dyadic_chain_family(space.n, space.m, rng, min(eta, 1.0 - 2.0**-space.n))


def _sum_of_indicators(
    space: SpaceSpec, family: SparseFamily, alphas: np.ndarray
) -> LatticeFunction:
    vals = np.zeros(space.p.field.shape)
    ref = space.p.field
    for e, a in zip(family, alphas):
        vals[ref.center_slices(e.cube)] += a
    return LatticeFunction(vals, space.m, nonnegative=True)


def _random_subsets(
    space: SpaceSpec,
    family: SparseFamily,
    cells: List[np.ndarray],
    rho: float,
    rng,
) -> Tuple[List[np.ndarray], float]:
    # G_Q drawn from the cells of E(Q); returns the cell sets and the actual density
    ref = space.p.field
    subsets, actual = [], 0.0
    for e, pool in zip(family, cells):
        in_q = float(e.cube.volume) / ref.cell_volume
        count = min(int(math.floor(rho * in_q + 1.0e-9)), pool.size)
        pick = rng.choice(pool, size=count, replace=False) if count > 0 else pool[:0]
        subsets.append(np.sort(pick))
        actual = max(actual, count / in_q)
    return subsets, actual


def _subset_sum(space: SpaceSpec, subsets: List[np.ndarray], alphas: np.ndarray) -> LatticeFunction:
    vals = np.zeros(space.p.field.values.size)
    for cells, a in zip(subsets, alphas):
        vals[cells] += a
    return LatticeFunction(vals.reshape(space.p.field.shape), space.m, nonnegative=True)


def _fit_power_law(xs: Sequence[float], ys: Sequence[float]) -> Dict[str, float]:
    if len(xs) < 2:
        return {"delta": math.nan, "c": math.nan, "r_squared": math.nan}
    fit = stats.linregress(np.log(xs), np.log(ys))
    return {
        "delta": float(fit.slope),
        "c": float(math.exp(fit.intercept)),
        "r_squared": float(fit.rvalue**2),
    }


def condition_ii_probe(
    space: SpaceSpec,
    trials: int = 20,
    eta: float = 0.5,
    seed: int = 0,
    densities: Sequence[float] = DEFAULT_DENSITIES,
    mode: str = "mixed",
) -> ProbeReport:
    """
    Estimates :math:`(c, \\delta)` of the sparse condition on :math:`X`.

    Parameters
    ----------
    space : SpaceSpec
        Function space :math:`X`.
    trials : int
        Number of random families.
    eta : float
        Sparseness constant.
    seed : int
        Seed of families, coefficients and subsets.
    densities : sequence of float
        Target densities :math:`\\rho` in (0, 1].
    mode : str
        ``cz`` (Calderón–Zygmund families of random functions), ``chain``
        (dyadic chains), ``mixed`` (alternating) or ``single`` (the unit cube
        alone with :math:`E(Q) = Q`).

    Returns
    -------
    ProbeReport
        Fitted ``delta``, ``c`` and ``r_squared``, one row per trial and
        density. A ratio above 1 at density 1 would contradict monotonicity
        of the norm and is recorded as a violation.
    """
    if mode not in MODES:
        raise ValueError("Unknown family mode '{}'.".format(mode))
    for rho in densities:
        if not 0.0 < rho <= 1.0:
            raise ValueError("Densities must lie in (0, 1].")
    rng = np.random.default_rng(seed)
    report = ProbeReport("sparse-condition", seed=seed, resolution=space.m)
    ref = space.p.field
    worst: Dict[float, float] = {}
    reached: Dict[float, float] = {}
    digests = []

    for trial in range(trials):
        family = _draw_family(space, mode, trial, eta, rng)
        digests.append(family.digest())
        alphas = np.ones(len(family)) if mode == "single" else rng.exponential(size=len(family))
        full = space.x_norm(_sum_of_indicators(space, family, alphas))
        if full == 0.0:
            continue
        cells = [exceptional_cells(e, ref) for e in family]
        for rho in densities:
            subsets, actual = _random_subsets(space, family, cells, rho, rng)
            if actual == 0.0:
                maxdual_log(LogLevel.Debug, "Trial {} : all G_Q empty at rho = {:g}.".format(trial, rho))
                continue
            ratio = space.x_norm(_subset_sum(space, subsets, alphas)) / full
            worst[rho] = max(worst.get(rho, 0.0), ratio)
            reached[rho] = max(reached.get(rho, 0.0), actual)
            report.record(
                ratio <= 1.0 + 1.0e-9, ratio, "trial {}, rho={:g}".format(trial, rho),
                trial=trial, rho=rho, density=actual, cubes=len(family),
            )

    bins = sorted(worst)
    report.fitted.update(_fit_power_law([reached[b] for b in bins], [worst[b] for b in bins]))
    report.fitted["worst_by_density"] = {"{:g}".format(b): worst[b] for b in bins}
    report.family_hash = family_hash(digests)
    report.provenance.update({"mode": mode, "eta": eta})
    return report


def _stratum(alpha: float) -> int:
    # 2^-k <= alpha < 2^-k+1
    return int(math.ceil(-math.log2(alpha)))


def suff_probe(
    space: SpaceSpec,
    trials: int = 20,
    seed: int = 0,
    densities: Sequence[float] = DEFAULT_DENSITIES,
    eta: float = 0.5,
) -> ProbeReport:
    """
    Probes the modular form

    .. math::

        \\sum_Q \\int_{G_Q} (\\alpha_Q w)^{p} \\le
        c \\Big(\\max_Q \\frac{|G_Q|}{|Q|}\\Big)^{\\delta}

    on random :math:`\\eta`-sparse families normalized by
    :math:`\\|\\sum_Q \\alpha_Q \\chi_Q\\|_X = 1`.

    The families are split into strata
    :math:`\\mathcal{S}_k = \\{Q : 2^{-k} \\le \\alpha_Q < 2^{-k+1}\\}` with
    maximal cubes :math:`Q^k_i`. For each stratum the report checks

    * :math:`\\sum_{Q \\in \\mathcal{S}_k} \\int_{G_Q} (\\alpha_Q w)^{p} \\le
      2^{p_+} \\sum_i \\int_{Q^k_i} (\\alpha_{Q^k_i} w)^{p} \\psi_{Q^k_i}`,
    * :math:`\\int \\psi_{Q^k_i} \\le \\rho |Q^k_i| / \\eta`,

    where :math:`\\psi_{Q^k_i}` is the indicator of the union of the
    :math:`G_Q` with :math:`Q \\in \\mathcal{S}_k`, :math:`Q \\subseteq Q^k_i`.
    """
    rng = np.random.default_rng(seed)
    report = ProbeReport("sparse-modular", seed=seed, resolution=space.m)
    ref = space.p.field
    p_plus = space.p.p_plus
    worst: Dict[float, float] = {}
    reached: Dict[float, float] = {}
    digests = []
    strata_checks = 0

    for trial in range(trials):
        family = _draw_family(space, "mixed", trial, eta, rng)
        digests.append(family.digest())
        alphas = rng.exponential(size=len(family))
        alphas /= space.x_norm(_sum_of_indicators(space, family, alphas))
        cells = [exceptional_cells(e, ref) for e in family]
        entries = list(family)
        for rho in densities:
            subsets, actual = _random_subsets(space, family, cells, rho, rng)
            if actual == 0.0:
                continue
            lhs = space.modular(_subset_sum(space, subsets, alphas))
            worst[rho] = max(worst.get(rho, 0.0), lhs)
            reached[rho] = max(reached.get(rho, 0.0), actual)
            report.rows.append(
                {"label": "trial {}, rho={:g}".format(trial, rho), "trial": trial,
                 "rho": rho, "density": actual, "modular": lhs}
            )
            strata_checks += _check_strata(
                report, space, entries, alphas, subsets, actual, family.eta, p_plus, trial, rho
            )

    bins = sorted(worst)
    report.fitted.update(_fit_power_law([reached[b] for b in bins], [worst[b] for b in bins]))
    report.fitted["worst_by_density"] = {"{:g}".format(b): worst[b] for b in bins}
    report.fitted["strata_checks"] = strata_checks
    report.family_hash = family_hash(digests)
    report.provenance.update({"eta": eta, "normalization": "norm of sum alpha_Q chi_Q equals 1"})
    return report


def _check_strata(
    report: ProbeReport,
    space: SpaceSpec,
    entries: Sequence[SparseEntry],
    alphas: np.ndarray,
    subsets: List[np.ndarray],
    rho: float,
    eta: float,
    p_plus: float,
    trial: int,
    target: float,
) -> int:
    ref = space.p.field
    strata: Dict[int, List[int]] = {}
    for i, a in enumerate(alphas):
        if 0.0 < a < 1.0:
            strata.setdefault(_stratum(a), []).append(i)

    checks = 0
    for k in sorted(strata):
        members = strata[k]
        tops = [
            i for i in members
            if not any(
                j != i and cube_contains(entries[j].cube, entries[i].cube)
                and (not cube_contains(entries[i].cube, entries[j].cube) or j < i)
                for j in members
            )
        ]
        left = space.modular(_subset_sum(space, [subsets[i] for i in members], alphas[members]))
        right = 0.0
        for top in tops:
            inside = [
                i for i in members if cube_contains(entries[top].cube, entries[i].cube)
            ]
            union = np.unique(np.concatenate([subsets[i] for i in inside]))
            psi = np.zeros(ref.values.size)
            psi[union] = alphas[top]
            right += space.modular(LatticeFunction(psi.reshape(ref.shape), space.m))
            mass = union.size * ref.cell_volume
            bound = rho / eta * float(entries[top].cube.volume)
            report.record(
                mass <= bound * (1.0 + 1.0e-12), mass / bound if bound > 0.0 else 0.0,
                "trial {}, rho={:g}, stratum {} carleson".format(trial, target, k),
            )
            checks += 1
        bound = 2.0**p_plus * right
        report.record(
            left <= bound * (1.0 + 1.0e-12), left / bound if bound > 0.0 else 0.0,
            "trial {}, rho={:g}, stratum {} modular".format(trial, target, k),
        )
        checks += 1
    return checks
