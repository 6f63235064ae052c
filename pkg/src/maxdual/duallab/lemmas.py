"""
Probes of the cube-local estimates behind the duality theorem.

For a disjoint family :math:`\\pi` and scalars :math:`t_Q` with
:math:`\\sum_Q \\int_Q (t_Q w)^{p} \\le 1`, the averaged sums

.. math::

    \\sum_{Q \\in \\pi} |Q| \\Big(\\frac{1}{|Q|}\\int_Q (t_Q w)^{r p}\\Big)^{1/r}

stay bounded for some :math:`r > 1`. From this bound the measure
:math:`b(Q) = \\mathrm{rh}_r(t_Q)` is built on the largest :math:`t_Q` with
:math:`\\mathrm{rh}_r(t_Q) > k \\int_Q (t_Q w)^{p}`, and every cube-local
reverse Hölder estimate is split into a modular part and a :math:`b` part.
"""

import math
from dataclasses import dataclass
from typing import Dict, Optional, Sequence

import numpy as np
from scipy import optimize

from ..czsparse import cz_decompose
from ..lattice import Box, LatticeFunction
from ..log import LogLevel, logging_level, maxdual_log, set_logging_level
from ..report import ProbeReport, family_hash
from ..weights import CubeFamily, ainfty_membership, ap_constant, reverse_holder_probe
from .families import random_disjoint_family, unshifted_grid
from .space import CubeProfile, LemmaConstants, SpaceSpec, unit_multiplier

MAX_GRID_POINTS = 1024
"""
Largest scan of :func:`compute_tQ_bQ` before it gives up.
"""


def _cube_digest(cubes: Sequence[Box]) -> str:
    return family_hash([(tuple(c.lower), c.side) for c in cubes])


def _normalized_scalars(profiles: Sequence[CubeProfile], t: np.ndarray) -> np.ndarray:
    # rescales t so that the modular sum over the family is exactly 1
    if not np.any(t > 0.0):
        return t
    pm = min(pr.p_minus for pr in profiles)
    pp = max(pr.p_plus for pr in profiles)

    def total(lam: float) -> float:
        return sum(pr.mod(lam * tq) for pr, tq in zip(profiles, t))

    return t * unit_multiplier(total, pm, pp)


def _random_scalars(rng: np.random.Generator, count: int) -> np.ndarray:
    t = rng.exponential(size=count) * np.exp(rng.normal(scale=2.0, size=count))
    t[rng.random(count) < 0.1] = 0.0
    return t


def lemma51_probe(
    space: SpaceSpec,
    r_grid: Sequence[float] = (1.1, 1.25, 1.5, 2.0),
    trials: int = 100,
    seed: int = 0,
    compare_resolutions: Sequence[int] = (),
    blowup: float = 1.5,
) -> ProbeReport:
    """
    Empirical curve :math:`r \\mapsto \\hat{c}(r)` of the averaged sums over
    random disjoint families with modular sum normalized to 1.

    Jensen's inequality makes every averaged sum at least 1; a smaller sum is
    recorded as a violation.

    Parameters
    ----------
    space : SpaceSpec
        Function space.
    r_grid : sequence of float
        Exponents :math:`r > 1`.
    trials : int
        Number of random families.
    seed : int
        Seed of the families and scalars.
    compare_resolutions : sequence of int
        Further resolutions at which the same families are evaluated. An
        exponent whose :math:`\\hat{c}` changes by more than ``blowup``
        between resolutions is listed under ``unstable_r``.
    """
    for r in r_grid:
        if r <= 1.0:
            raise ValueError("Exponents r must be > 1.")
    report = ProbeReport("averaged-sums", seed=seed, resolution=space.m)
    curve = _lemma51_curve(space, r_grid, trials, seed, report)
    for r, c in curve.items():
        report.fitted["c_hat(r={:g})".format(r)] = c

    unstable = []
    for m in compare_resolutions:
        other = _lemma51_curve(space.at_resolution(m), r_grid, trials, seed, None)
        for r in r_grid:
            lo, hi = sorted((curve[r], other[r]))
            if not math.isfinite(hi) or hi > blowup * lo:
                unstable.append(r)
            report.rows.append({"label": "resolution m={}".format(m), "r": r, "c_hat": other[r]})
    if compare_resolutions:
        report.fitted["unstable_r"] = sorted(set(unstable))
    report.notes.append("hypothesis modular sum normalized to 1 in every trial")
    return report


def _lemma51_curve(
    space: SpaceSpec,
    r_grid: Sequence[float],
    trials: int,
    seed: int,
    report: Optional[ProbeReport],
) -> Dict[float, float]:
    rng = np.random.default_rng(seed)
    curve = {float(r): 0.0 for r in r_grid}
    digests = []
    for trial in range(trials):
        cubes = random_disjoint_family(space.n, space.m, rng)
        digests.append(_cube_digest(cubes))
        profiles = [CubeProfile(space, q) for q in cubes]
        t = _normalized_scalars(profiles, _random_scalars(rng, len(cubes)))
        for r in r_grid:
            total = sum(pr.rh(tq, r) for pr, tq in zip(profiles, t))
            curve[float(r)] = max(curve[float(r)], total)
            if report is not None:
                ok = math.isfinite(total) and (total >= 1.0 - 1.0e-9 or not np.any(t > 0.0))
                report.record(
                    ok, total, "trial {}, r={:g}".format(trial, r),
                    trial=trial, r=r, cubes=len(cubes), sum=total,
                )
    if report is not None:
        report.family_hash = family_hash(digests)
    return curve


@dataclass(frozen=True)
class TQBQ:
    """
    Outcome of :func:`compute_tQ_bQ`.

    Attributes
    ----------
    t_q : float
        :math:`t_Q = \\sup A(Q)`, zero when :math:`A(Q)` is empty.
    b_q : float
        :math:`b(Q) = \\mathrm{rh}_r(t_Q)`.
    t_max : float
        Largest :math:`t` with :math:`\\int_Q (t w)^{p} \\le 1`.
    qleft1_residual : float
        Relative residual of :math:`\\mathrm{rh}_r(t_Q) = k \\int_Q (t_Q w)^{p}`.
    impcond : bool
        Whether :math:`\\int_Q (t_Q w)^{p} < 1` holds strictly.
    grid_points : int
        Size of the scan that located :math:`t_Q`.
    """

    t_q: float
    b_q: float
    t_max: float
    qleft1_residual: float
    impcond: bool
    grid_points: int

    @property
    def empty(self) -> bool:
        return self.t_q == 0.0


def compute_tQ_bQ(
    q: Box,
    space: SpaceSpec,
    constants: LemmaConstants,
    grid_points: int = 32,
    decades: float = 12.0,
    profile: Optional[CubeProfile] = None,
) -> TQBQ:
    """
    Computes :math:`t_Q` and :math:`b(Q)` for one cube.

    The ratio
    :math:`G(t) = \\mathrm{rh}_r(t) / (k \\int_Q (t w)^{p})` is scanned on a
    descending logarithmic grid of ``grid_points`` values spanning
    ``decades`` decades below :math:`t_{max}`. The first grid value with
    :math:`G > 1` brackets the crossing :math:`G = 1`, which is refined by
    Brent's method. A scan whose largest ratio is within :math:`10^{-3}` of 1
    without exceeding it is repeated on a grid twice as fine, up to
    :data:`MAX_GRID_POINTS` values.

    Raises
    ------
    RuntimeError
        When the finest scan still cannot decide whether the crossing exists.
    """
    if grid_points < 2:
        raise ValueError("Need at least two grid points.")
    prof = CubeProfile(space, q) if profile is None else profile
    r, k = constants.r, constants.k
    t_max = prof.unit_scale()

    def ratio(t: float) -> float:
        return prof.rh(t, r) / (k * prof.mod(t))

    def result(t_q: float, points: int) -> TQBQ:
        if t_q == 0.0:
            return TQBQ(0.0, 0.0, t_max, 0.0, True, points)
        b = prof.rh(t_q, r)
        target = k * prof.mod(t_q)
        return TQBQ(t_q, b, t_max, abs(b - target) / target, prof.mod(t_q) < 1.0, points)

    points = grid_points
    while True:
        ts = t_max * 10.0 ** (-decades * np.arange(points) / (points - 1))
        gs = np.array([ratio(t) for t in ts])
        above = np.flatnonzero(gs > 1.0)
        if above.size:
            i = int(above[0])
            if i == 0:
                return result(t_max, points)
            s = optimize.brentq(
                lambda x: math.log(ratio(math.exp(x))),
                math.log(ts[i]), math.log(ts[i - 1]), xtol=1.0e-14, rtol=1.0e-14,
            )
            return result(math.exp(s), points)
        flat = float(np.max(gs) - np.min(gs)) <= 1.0e-12 * float(np.max(gs))
        if flat or float(np.max(gs)) < 1.0 - 1.0e-3:
            return result(0.0, points)
        if points >= MAX_GRID_POINTS:
            raise RuntimeError(
                "Scan of {} points is too coarse to bracket the crossing on {}.".format(points, q)
            )
        points = min(2 * points, MAX_GRID_POINTS)


def lemma52_check(
    space: SpaceSpec,
    constants: LemmaConstants,
    families: Optional[Sequence[Sequence[Box]]] = None,
    samples: int = 1000,
    seed: int = 0,
    count: int = 100,
) -> ProbeReport:
    """
    Checks, for the measure :math:`b`,

    * :math:`\\sum_{Q \\in \\pi} b(Q) \\le 2k` on every family,
    * :math:`\\int_Q (t_Q w)^{p} < 1` and
      :math:`\\mathrm{rh}_r(t_Q) = k \\int_Q (t_Q w)^{p}` whenever
      :math:`t_Q > 0`,
    * :math:`\\mathrm{rh}_r(t) \\le k \\int_Q (t w)^{p} + b(Q)` on sampled
      pairs :math:`(Q, t)` with :math:`\\int_Q (t w)^{p} \\le 1`.

    Without ``families``, ``count`` random disjoint families are drawn.
    """
    rng = np.random.default_rng(seed)
    if families is None:
        families = [random_disjoint_family(space.n, space.m, rng) for _ in range(count)]
    report = ProbeReport("b-measure", seed=seed, resolution=space.m, conditional=True)
    report.provenance["constants"] = constants.to_dict()
    report.family_hash = family_hash([_cube_digest(f) for f in families])
    k = constants.k

    cache: Dict[Box, TQBQ] = {}
    profiles: Dict[Box, CubeProfile] = {}
    for i, family in enumerate(families):
        total = 0.0
        for q in family:
            if q not in cache:
                profiles[q] = CubeProfile(space, q)
                cache[q] = compute_tQ_bQ(q, space, constants, profile=profiles[q])
                res = cache[q]
                if not res.empty:
                    report.record(
                        res.impcond, res.t_q / res.t_max, "impcond {!r}".format(q),
                        check="impcond", t_q=res.t_q, t_max=res.t_max,
                    )
                    report.record(
                        res.qleft1_residual <= 1.0e-6, res.qleft1_residual,
                        "qleft1 {!r}".format(q), check="qleft1", residual=res.qleft1_residual,
                    )
            total += cache[q].b_q
        report.record(
            total <= 2.0 * k, total / (2.0 * k), "family {}".format(i),
            check="family-sum", cubes=len(family), sum_b=total, bound=2.0 * k,
        )

    cubes = list(cache)
    worst_eqb = 0.0
    for j in range(samples):
        q = cubes[int(rng.integers(len(cubes)))]
        res, prof = cache[q], profiles[q]
        t = res.t_max * 10.0 ** (-rng.uniform(0.0, 6.0))
        lhs = prof.rh(t, constants.r)
        rhs = k * prof.mod(t) + res.b_q
        worst_eqb = max(worst_eqb, lhs / rhs)
        report.record(lhs <= rhs * (1.0 + 1.0e-9), lhs / rhs, "eqb sample {} {!r}".format(j, q))
    report.fitted.update(
        {
            "k": k,
            "max_family_sum": max(
                (sum(cache[q].b_q for q in f) for f in families), default=0.0
            ),
            "eqb_worst": worst_eqb,
            "nonempty_cubes": sum(1 for res in cache.values() if not res.empty),
        }
    )
    return report


def _window(norm: float, epsilon: float, points: int) -> np.ndarray:
    edge = norm ** (-(1.0 + epsilon))
    lo, hi = min(1.0, edge), max(1.0, edge)
    if hi <= lo * (1.0 + 1.0e-14):
        return np.array([1.0])
    return np.geomspace(lo, hi, points)


def _window_ratios(prof: CubeProfile, gamma: float, epsilon: float, points: int):
    ts = _window(1.0 / prof.unit_scale(), epsilon, points)
    return ts, np.array([prof.revhol_ratio(t, gamma) for t in ts])


def lemma53_check(
    space: SpaceSpec,
    constants: LemmaConstants,
    cubes: Sequence[Box],
    t_points: int = 32,
) -> ProbeReport:
    """
    Reverse Hölder ratio
    :math:`\\langle (t w)^{\\gamma p}\\rangle_Q^{1/\\gamma} / \\langle (t w)^{p}\\rangle_Q`
    swept over the scale window between 1 and
    :math:`\\|\\chi_Q\\|^{-(1+\\epsilon)}_{L^{p(\\cdot)}_w}`, with the median
    exponent split of every cube.
    """
    report = ProbeReport("scale-window-reverse-holder", resolution=space.m, conditional=True)
    report.family_hash = _cube_digest(cubes)
    report.provenance["constants"] = constants.to_dict()
    gamma, eps = constants.gamma, constants.epsilon
    c_hat = 0.0
    for q in cubes:
        prof = CubeProfile(space, q)
        norm = 1.0 / prof.unit_scale()
        ts, ratios = _window_ratios(prof, gamma, eps, t_points)
        if ts.size == 1:
            report.notes.append("window of {!r} is the single point t = 1".format(q))
        c_q = float(np.max(ratios))
        c_hat = max(c_hat, c_q)
        report.record(
            bool(np.all(np.isfinite(ratios))), c_q, "window {!r}".format(q),
            check="window", norm=norm, t_lo=float(ts[0]), t_hi=float(ts[-1]), c=c_q,
        )

        median = prof.median_exponent()
        lower, upper = prof.level_volumes(median)
        half = 0.5 * prof.volume
        smallest = min(lower, upper)
        report.record(
            smallest >= half * (1.0 - 1.0e-12), half / smallest if smallest > 0.0 else math.inf,
            "median {!r}".format(q),
            check="median", median=median, e1=lower, e2=upper, volume=prof.volume,
        )
    report.fitted.update({"c_hat": c_hat, "gamma": gamma, "epsilon": eps})
    return report


def _default_sweep(unit: float, window: np.ndarray) -> np.ndarray:
    # six decades below the unit scale; the part at t >= 1 follows the window grid
    if unit <= 1.0:
        return np.geomspace(unit * 1.0e-6, unit, 24)
    small = np.geomspace(min(unit * 1.0e-6, 0.5), 1.0, 24, endpoint=False)
    return np.concatenate([small, window[window <= unit]])


def key_lemma_check(
    space: SpaceSpec,
    constants: LemmaConstants,
    cubes: Sequence[Box],
    t_sweep: Optional[Sequence[float]] = None,
    a_s: Optional[float] = None,
    t_points: int = 32,
    tol: float = 1.0e-9,
) -> ProbeReport:
    """
    Smallest constant :math:`c` with

    .. math::

        |Q| \\langle (t w)^{\\gamma p}\\rangle_Q^{1/\\gamma}
        \\le c \\int_Q (t w)^{p} + 2 t^{\\eta} b(Q) \\chi_{(0,1)}(t)

    over ``t_sweep``, where :math:`\\eta = \\epsilon p_- / (1 + \\epsilon)`.
    Every swept :math:`t` must satisfy :math:`t \\|\\chi_Q\\| \\le 1`. By
    default each cube gets 24 values spanning six decades below
    :math:`\\min(1, 1/\\|\\chi_Q\\|)`, and when :math:`\\|\\chi_Q\\| < 1` the
    points of the :func:`lemma53_check` window grid (``t_points`` of them)
    up to :math:`1/\\|\\chi_Q\\|`.

    At :math:`t \\ge 1` the second term vanishes and the constant needed is
    the reverse Hölder ratio of the scale window. For every cube swept there,
    a ``t>=1`` row checks that the constant equals that ratio at each
    point and stays below the window constant ``c_window`` of
    :func:`lemma53_check` on the same cube, both to relative ``tol``. With
    the default sweep ``c_window`` is the very value :func:`lemma53_check`
    reports for the cube; a custom sweep adds its own points at
    :math:`t \\ge 1` to the window grid.

    The report also carries the constant
    :math:`A = \\max((2k)^{1+\\epsilon} [w^{p}]_{A_s}^{\\epsilon}, c_{RH})`,
    with :math:`c_{RH}` the largest ratio seen at :math:`t \\ge 1`.

    Raises
    ------
    ValueError
        If a swept :math:`t` violates :math:`t \\|\\chi_Q\\| \\le 1`.
    """
    report = ProbeReport("key-estimate", resolution=space.m, conditional=True)
    report.family_hash = _cube_digest(cubes)
    report.provenance["constants"] = constants.to_dict()
    report.provenance["eta"] = "epsilon * p_minus / (1 + epsilon), from the small-t branch"
    eta = constants.key_exponent
    gamma = constants.gamma

    c_hat, c_rh, total_b = 0.0, 0.0, 0.0
    for q in cubes:
        prof = CubeProfile(space, q)
        unit = prof.unit_scale()
        window, window_ratios = _window_ratios(prof, gamma, constants.epsilon, t_points)
        if t_sweep is None:
            ts = _default_sweep(unit, window)
        else:
            ts = np.asarray(t_sweep, float)
        if np.any(ts > unit * (1.0 + 1.0e-12)):
            raise ValueError("Swept t must satisfy t * norm(chi_Q) <= 1 on {!r}.".format(q))
        b = compute_tQ_bQ(q, space, constants, profile=prof).b_q
        total_b += b
        needed, large, large_ratios = [], [], []
        for t in ts:
            lhs = prof.rh(t, gamma)
            extra = 2.0 * t**eta * b if t < 1.0 else 0.0
            needed.append(max(lhs - extra, 0.0) / prof.mod(t))
            if t >= 1.0:
                large.append(needed[-1])
                large_ratios.append(prof.revhol_ratio(t, gamma))
        needed = np.array(needed)
        c_q = float(np.max(needed))
        c_hat = max(c_hat, c_q)
        order = np.argsort(ts)
        monotone = bool(np.all(np.diff(needed[order]) >= -1.0e-12 * c_q))
        report.record(
            math.isfinite(c_q), c_q, "sweep {!r}".format(q),
            check="sweep", b=b, c=c_q, monotone_in_t=monotone,
        )
        if not large:
            continue

        large = np.array(large)
        large_ratios = np.array(large_ratios)
        c_large = float(np.max(large))
        c_rh = max(c_rh, float(np.max(large_ratios)))
        c_window = float(np.max(window_ratios))
        if t_sweep is not None:
            inside = ts[(ts >= 1.0) & (ts <= window[-1])]
            if inside.size:
                c_window = max(c_window, max(prof.revhol_ratio(t, gamma) for t in inside))
        reduces = bool(np.all(np.abs(large - large_ratios) <= tol * large_ratios))
        report.record(
            reduces and c_large <= c_window * (1.0 + tol), c_large / c_window,
            "t >= 1 {!r}".format(q),
            check="t>=1", c=c_large, c_window=c_window, points=int(large.size),
        )

    k = constants.k
    report.record(
        total_b <= 2.0 * k, total_b / (2.0 * k), "family sum of b",
        check="family-sum", sum_b=total_b, bound=2.0 * k,
    )
    if a_s is None:
        try:
            a_s = ap_constant(space.weight_power(), constants.s, CubeFamily.from_boxes("key", cubes))
        except ValueError:
            a_s = math.inf
    big_a = max((2.0 * k) ** (1.0 + constants.epsilon) * a_s**constants.epsilon, c_rh)
    report.fitted.update(
        {"c_hat": c_hat, "eta": eta, "c_rh": c_rh, "A_s": a_s, "A": big_a, "sum_b": total_b}
    )
    return report


def lemma51_decay_probe(
    space: SpaceSpec,
    cubes: Sequence[Box],
    norm_m: float,
    t: Optional[Sequence[float]] = None,
    seed: int = 0,
    tol: float = 1.0e-9,
) -> ProbeReport:
    """
    Geometric decay of the stopping sets
    :math:`\\Omega_k(Q) = \\{M^{d}_Q v_Q > (2^{n+1})^k \\langle v_Q\\rangle_Q\\}`,
    :math:`v_Q = (t_Q w)^{p}`:

    .. math::

        \\sum_Q \\int_{\\Omega_k(Q)} v_Q \\le \\beta^{p_-(k-1)}, \\qquad
        \\beta = (1 - (2\\|M\\|)^{-p_+})^{1/p_+}.

    Without ``t``, random scalars normalized to a modular sum of 1 are used.

    Parameters
    ----------
    norm_m : float
        Norm, or an estimate of it, of the maximal operator on the space.
    """
    if norm_m < 1.0:
        raise ValueError("A maximal operator norm is at least 1.")
    cubes = list(cubes)
    profiles = [CubeProfile(space, q) for q in cubes]
    if t is None:
        rng = np.random.default_rng(seed)
        t = _normalized_scalars(profiles, rng.exponential(size=len(cubes)))
    t = np.asarray(t, dtype=float)
    if t.size != len(cubes):
        raise ValueError("Need one scalar per cube.")

    p_minus, p_plus = space.p.p_minus, space.p.p_plus
    beta = (1.0 - (2.0 * norm_m) ** (-p_plus)) ** (1.0 / p_plus)
    gamma = 2.0 ** (space.n + 1)
    report = ProbeReport("stopping-set-decay", seed=seed, resolution=space.m, conditional=True)
    report.family_hash = _cube_digest(cubes)
    report.provenance["norm_m"] = norm_m

    wp = space.weight_power().values
    sums: Dict[int, float] = {}
    previous = logging_level()
    set_logging_level(LogLevel.Warning)
    try:
        for q, tq in zip(cubes, t):
            if tq <= 0.0:
                continue
            v = LatticeFunction(np.exp(space.p.values * math.log(tq)) * wp, space.m, nonnegative=True)
            cz = cz_decompose(v, gamma=gamma, q0=q)
            for k in cz.k_range:
                if k < 1:
                    continue
                sums[k] = sums.get(k, 0.0) + sum(v.integrate(c) for c in cz.cubes(k))
    finally:
        set_logging_level(previous)

    for k in sorted(sums):
        bound = beta ** (p_minus * (k - 1))
        report.record(
            sums[k] <= bound * (1.0 + tol), sums[k] / bound, "k={}".format(k),
            k=k, mass=sums[k], bound=bound,
        )
    if not sums:
        report.notes.append("no stopping set above level 0")
    report.fitted.update({"beta": beta, "gamma": gamma})
    return report


def build_constants(
    space: SpaceSpec,
    r: float = 1.25,
    trials: int = 50,
    seed: int = 0,
    eta: float = 0.5,
    overrides: Optional[Dict[str, float]] = None,
    rh_cap: float = 10.0,
) -> LemmaConstants:
    """
    Chooses the lemma constants from probes of the space.

    * :math:`c = \\max(1, 2\\hat{c}(r))` from :func:`lemma51_probe`;
    * :math:`s` the smallest Muckenhoupt class index found for
      :math:`w^{p}` by :func:`maxdual.weights.ainfty_membership`;
    * :math:`\\nu` the largest tested reverse Hölder exponent with constant
      at most ``rh_cap``;
    * :math:`\\gamma = (1 + \\min(\\nu, r)) / 2`.

    Entries of ``overrides`` (keys ``r``, ``c``, ``s``, ``nu``, ``gamma``,
    ``eta``, ``k``) replace the probed values.
    """
    overrides = dict(overrides or {})
    unknown = set(overrides) - {"r", "c", "s", "nu", "gamma", "eta", "k"}
    if unknown:
        raise ValueError("Unknown constant override(s): {}.".format(", ".join(sorted(unknown))))
    r = float(overrides.get("r", r))
    provenance: Dict[str, object] = {}

    previous = logging_level()
    set_logging_level(LogLevel.Warning)
    try:
        if "c" in overrides:
            c = float(overrides["c"])
            provenance["c"] = "override"
        else:
            probe = lemma51_probe(space, [r], trials, seed)
            c_hat = probe.fitted["c_hat(r={:g})".format(r)]
            c = max(1.0, 2.0 * c_hat)
            provenance["c"] = "2 * c_hat(r={:g}) = 2 * {:.6g}".format(r, c_hat)

        vp = space.weight_power()
        family = CubeFamily.random_cubes(space.n, seed, 200, min_side=2.0**-space.m).union(
            CubeFamily.grid_cubes(unshifted_grid(space.n), range(0, min(space.m, 5) + 1))
        )
        if "s" in overrides:
            s = float(overrides["s"])
            provenance["s"] = "override"
        else:
            s, a_s = ainfty_membership(vp, family)
            if s is None:
                s = 16.0
                maxdual_log(LogLevel.Warning, "No A_s class found for w^p, using s = 16.")
                provenance["s"] = "fallback 16"
            else:
                provenance["s"] = "A_s probe, [w^p]_A_s = {:.6g}".format(a_s)

        if "nu" in overrides:
            nu = float(overrides["nu"])
            provenance["nu"] = "override"
        else:
            r_grid = (1.05, 1.1, 1.25, 1.5, 2.0, 3.0)
            rh = reverse_holder_probe(vp, family, r_grid)
            good = [x for x in r_grid if rh.fitted["c({:g})".format(x)] <= rh_cap]
            nu = max(good) if good else 1.05
            provenance["nu"] = "reverse Holder probe with cap {:g}".format(rh_cap)
    finally:
        set_logging_level(previous)

    gamma = float(overrides.get("gamma", 0.5 * (1.0 + min(nu, r))))
    provenance["gamma"] = "override" if "gamma" in overrides else "(1 + min(nu, r)) / 2"
    constants = LemmaConstants(
        r=r,
        c=c,
        p_minus=space.p.p_minus,
        p_plus=space.p.p_plus,
        s=s,
        nu=nu,
        gamma=gamma,
        eta=float(overrides.get("eta", eta)),
        k_override=overrides.get("k"),
        provenance=provenance,
    )
    maxdual_log(
        LogLevel.Info,
        "Constants : r = {:.4g}, c = {:.4g}, k = {:.4g}, s = {:.4g}, nu = {:.4g}, gamma = {:.4g}".format(
            constants.r, constants.c, constants.k, constants.s, constants.nu, constants.gamma
        ),
    )
    return constants
