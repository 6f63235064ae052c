"""
The invariant suite run by ``maxdual selftest``.

Every property of the toolkit with a closed form or an exact certificate is
checked on seeded random data; the suite fails if any of them records a
violation.
"""

from typing import Callable, List, Optional

import numpy as np

from .czsparse import cz_decompose, duality_check, sparse_from_maximal
from .duallab import (
    SpaceSpec,
    build_constants,
    condition_ii_probe,
    key_lemma_check,
    lemma52_check,
    lemma53_check,
)
from .lattice import Box, LatticeFunction, build_shifted_grids, cover_cube, support_box
from .log import LogLevel, logging_level, maxdual_log, set_logging_level
from .maximal import MaximalKind, check_grid_comparison
from .report import ProbeReport, merge_reports
from .varlp import ExponentField, WeightField, check_modular_norm_bounds, luxemburg_norm
from .weights import (
    CubeFamily,
    SubsetSampler,
    ap_constant,
    converse_check,
    reverse_holder_probe,
    rubio_de_francia,
)


CALIBRATION_COUNT = 100
MODULAR_COUNT = 1000
COVERING_COUNT = 10000
RDF_COUNT = 100
FAMILY_COUNT = 100
SAMPLE_COUNT = 1000
SUBSET_COUNT = 10000

RANDOM_COUNT = {1: 1000, 2: 100}
"""
Random functions per randomized property, by dimension.
"""


def _random_function(rng: np.random.Generator, n: int, m: int) -> LatticeFunction:
    support = LatticeFunction.indicator(support_box(n), m).values
    vals = rng.exponential(size=support.shape) * (rng.random(support.shape) < 0.5) * support
    if not np.any(vals > 0.0):
        vals.ravel()[int(np.flatnonzero(support.ravel())[0])] = 1.0
    return LatticeFunction(vals, m, nonnegative=True)


def luxemburg_calibration(n: int, m: int, seed: int, count: int = CALIBRATION_COUNT) -> ProbeReport:
    """
    Luxemburg norms with constant exponent against the classical norm.
    """
    rng = np.random.default_rng(seed)
    report = ProbeReport("luxemburg-calibration", seed=seed, resolution=m)
    for q in (1.5, 2.0, 3.0, 4.0):
        p = ExponentField.constant(q, n, m)
        for i in range(count):
            f = _random_function(rng, n, m) * float(10.0 ** rng.uniform(-3.0, 3.0))
            exact = float(np.sum(f.values**q) * f.cell_volume) ** (1.0 / q)
            err = abs(luxemburg_norm(f, p) - exact) / exact
            report.record(err <= 1.0e-8, err, "q={:g}, f{}".format(q, i))
    return report


def modular_norm_suite(n: int, m: int, seed: int, count: int = MODULAR_COUNT) -> ProbeReport:
    """
    Both modular-norm chains on random pairs (f, p), globally and on a fixed
    subcube. Each side of :math:`\\|f\\| = 1` must be hit by at least a tenth
    of the global checks.
    """
    rng = np.random.default_rng(seed)
    reports = []
    branches = []
    for _ in range(count):
        a = rng.uniform(1.2, 3.0)
        slope = rng.uniform(0.0, 2.0)
        x = np.clip(LatticeFunction.zeros(n, m).center_grid()[0], 0.0, 1.0)
        p = ExponentField(LatticeFunction(a + slope * x, m))
        f = _random_function(rng, n, m) * float(10.0 ** rng.uniform(-2.0, 2.0))
        full = check_modular_norm_bounds(f, p)
        branches.append(full.rows[0].get("branch") if full.rows else None)
        reports.append(full)
        reports.append(check_modular_norm_bounds(f, p, region=Box((0.25,) * n, 0.5)))
    out = merge_reports("modular-norm-bounds", reports, seed=seed, resolution=m)
    out.rows = []
    needed = count // 10
    for branch in ("norm>1", "norm<=1"):
        hits = branches.count(branch)
        out.fitted[branch] = hits
        out.record(hits >= needed, needed / max(hits, 1), "branch {}".format(branch))
    return out


def covering_suite(n: int, seed: int, count: int = COVERING_COUNT) -> ProbeReport:
    """
    Every cube is covered by a shifted grid cube of side at most six times
    its own.
    """
    rng = np.random.default_rng(seed)
    report = ProbeReport("grid-covering", seed=seed)
    report.fitted["n"] = n
    grids = build_shifted_grids(n)
    for i in range(count):
        side = 2.0 ** rng.uniform(-10.0, -1.0)
        lower = rng.uniform(0.0, 1.0 - side, size=n)
        q = Box(tuple(lower), side)
        try:
            _, cube = cover_cube(q, grids)
        except AssertionError as err:
            report.fail(str(err))
            continue
        ratio = float(cube.volume / q.volume) / 6.0**n
        report.record(ratio <= 1.0 and cube.contains_box(q), ratio, "cube {}".format(i))
    return report


def _repeat(name: str, seed: int, m: int, count: int, make: Callable[[np.random.Generator], ProbeReport]) -> ProbeReport:
    rng = np.random.default_rng(seed)
    return merge_reports(name, [make(rng) for _ in range(count)], seed=seed, resolution=m)


def run_selftest(n: int = 1, m: int = 8, seed: int = 7, trials: Optional[int] = None) -> List[ProbeReport]:
    """
    Runs the invariant suite.

    Parameters
    ----------
    n : int
        Dimension.
    m : int
        Resolution exponent.
    seed : int
        Seed of every random draw.
    trials : int, optional
        Replaces every sample size of the suite. By default each property
        runs at its acceptance size: 100 functions per exponent for the
        Luxemburg calibration, 1000 pairs for the modular bounds, 10000 cubes
        per dimension for the covering, :data:`RANDOM_COUNT` functions for the
        grid comparison, decay, domination and duality properties, 100 seeds
        for the Rubio de Francia iteration and 100 families for the measure b.

    Returns
    -------
    list of ProbeReport
        One report per property.
    """
    count = RANDOM_COUNT[n] if trials is None else trials

    def size(default: int) -> int:
        return default if trials is None else trials

    grids = build_shifted_grids(n)
    reports: List[ProbeReport] = []

    maxdual_log(LogLevel.Info, "-" * 60)
    maxdual_log(LogLevel.Info, "Self test")
    maxdual_log(LogLevel.Info, "Lattice : n = {}, m = {}, seed = {}".format(n, m, seed))
    maxdual_log(LogLevel.Info, "-" * 60)

    previous = logging_level()
    set_logging_level(LogLevel.Warning)
    try:
        reports.append(luxemburg_calibration(n, m, seed, size(CALIBRATION_COUNT)))
        reports.append(modular_norm_suite(n, m, seed, size(MODULAR_COUNT)))
        for dim in (1, 2):
            reports.append(covering_suite(dim, seed, size(COVERING_COUNT)))
        reports.append(
            _repeat("grid-comparison", seed, m, count,
                    lambda rng: check_grid_comparison(_random_function(rng, n, m), grids))
        )

        def decay(rng):
            f = _random_function(rng, n, m)
            gamma = 2.0 if rng.random() < 0.5 else 2.0 ** (n + 1)
            grid = grids[int(rng.integers(len(grids)))]
            cz = cz_decompose(f, grid=grid, gamma=gamma)
            return merge_reports("cz", [cz.check_decay(), cz.check_maximality()])

        reports.append(_repeat("cz-decay", seed, m, count, decay))

        def domination(rng):
            f = _random_function(rng, n, m)
            eta = (0.25, 0.5, 0.75)[int(rng.integers(3))]
            family, cert = sparse_from_maximal(f, grids[0], eta)
            return merge_reports("sparse", [cert, family.verify()])

        reports.append(_repeat("sparse-domination", seed, m, count, domination))

        def duality(rng):
            f = _random_function(rng, n, m)
            family, _ = sparse_from_maximal(f, grids[0], 0.5)
            return duality_check(family, _random_function(rng, n, m), _random_function(rng, n, m))

        reports.append(_repeat("sparse-duality", seed, m, count, duality))
        reports.append(_weights_suite(n, m, seed, size(SUBSET_COUNT)))
        reports.append(_rdf_suite(n, m, seed, size(RDF_COUNT)))

        single = []
        for q in (2.0, 3.0, 4.0):
            space = SpaceSpec(ExponentField.constant(q, n, m), WeightField.constant(1.0, n, m))
            probe = condition_ii_probe(space, trials=1, seed=seed, mode="single")
            err = abs(probe.fitted["delta"] - 1.0 / q)
            check = ProbeReport("delta q={:g}".format(q))
            check.record(err <= 0.02, err, "single cube, q={:g}".format(q))
            single.append(check)
        reports.append(merge_reports("sparse-condition-calibration", single, seed=seed, resolution=m))

        space = SpaceSpec.named("calibration", n, m)
        constants = build_constants(space, trials=size(50), seed=seed)
        reports.append(
            lemma52_check(space, constants, samples=size(SAMPLE_COUNT), seed=seed, count=size(FAMILY_COUNT))
        )
        cubes = CubeFamily.grid_cubes(grids[0], range(0, min(m, 4) + 1))
        boxes = [cubes.box(i) for i in range(len(cubes))]
        reports.append(lemma53_check(space, constants, boxes))
        reports.append(key_lemma_check(space, constants, boxes[:1]))
    finally:
        set_logging_level(previous)

    for r in reports:
        maxdual_log(LogLevel.Info if r.passed else LogLevel.Error, r.summary().splitlines()[0])
    return reports


def _weights_suite(n: int, m: int, seed: int, subsets: int) -> ProbeReport:
    family = CubeFamily.random_cubes(n, seed, 200, min_side=2.0**-m)
    one = ProbeReport("ap-constant-of-one")
    a = ap_constant(LatticeFunction.constant(1.0, n, m), 2.0, family)
    one.record(abs(a - 1.0) <= 1.0e-12, a, "v = 1")

    grids = LatticeFunction.zeros(n, m).center_grid()
    r = np.sqrt(sum((g - 0.5) ** 2 for g in grids))
    v = LatticeFunction(r**0.5, m, nonnegative=True)
    converse = converse_check(v, 2.0, family, SubsetSampler(seed, subsets))
    rh = reverse_holder_probe(v, family, (1.0, 1.5, 2.0, 3.0))
    c1 = ProbeReport("reverse-holder-at-one")
    c1.record(abs(rh.fitted["c(1)"] - 1.0) <= 1.0e-12, abs(rh.fitted["c(1)"] - 1.0), "c(1)")
    return merge_reports("weights", [one, converse, rh, c1], seed=seed, resolution=m)


def _rdf_suite(n: int, m: int, seed: int, count: int) -> ProbeReport:
    rng = np.random.default_rng(seed)
    kind = MaximalKind.dyadic(build_shifted_grids(n)[0])
    p = ExponentField.constant(2.0, n, m)
    reports = []
    for i in range(count):
        g = _random_function(rng, n, m)
        run = rubio_de_francia(g, kind, 2.0)
        report = run.check(kind)
        report.record(bool(np.all(run.rg.values >= g.values)), 0.0, "g <= Rg, g{}".format(i))
        ratio = luxemburg_norm(run.rg, p) / (2.0 * luxemburg_norm(g, p))
        report.record(ratio <= 1.0 + 1.0e-12, ratio, "norm of Rg, g{}".format(i))
        reports.append(report)
    return merge_reports("rubio-de-francia", reports, seed=seed, resolution=m, conditional=True)


def selftest_passed(reports: List[ProbeReport]) -> bool:
    return all(r.passed for r in reports)
