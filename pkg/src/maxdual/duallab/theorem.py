"""
End-to-end duality experiment.

The experiment estimates the norm of the maximal operator on
:math:`X = L^{p(\\cdot)}_w` and on :math:`X' = L^{p'(\\cdot)}_{w^{-1}}` over a
range of resolutions, runs the sparse condition probes on :math:`X`, and
writes a verdict. Norm estimates are lower bounds obtained from finitely many
candidates, so the verdict describes trends only.
"""

import math
from typing import Dict, List, Optional, Sequence

import numpy as np

from ..czsparse import adjoint_sparse_operator, choose_nu, sparse_from_maximal
from ..lattice import LatticeFunction, support_box
from ..log import LogLevel, logging_level, maxdual_log, set_logging_level
from ..maximal import CandidateFamily, MaximalKind, operator_norm_lower_bound
from ..report import ProbeReport, family_hash
from ..weights import CubeFamily, ainfty_membership
from .condition import condition_ii_probe, suff_probe
from .families import unshifted_grid
from .space import SpaceSpec

VERDICT_CONSISTENT = "consistent with the duality theorem"
VERDICT_HYPOTHESIS_FAILS = "hypothesis fails"
VERDICT_CONTRADICTION = "bounded on X but growing on X' (contradicts the duality theorem)"
VERDICT_INSUFFICIENT = "insufficient resolutions"


def _stable(estimates: Dict[int, float], stability: float) -> Optional[bool]:
    # finest estimate against the finest coarser one
    if len(estimates) < 2:
        return None
    levels = sorted(estimates)
    finest, reference = estimates[levels[-1]], estimates[levels[-2]]
    return finest <= stability * reference


def theorem11_experiment(
    space: SpaceSpec,
    candidates: Optional[CandidateFamily] = None,
    resolutions: Sequence[int] = (6, 8, 10, 12),
    trials: int = 10,
    seed: int = 0,
    stability: float = 1.5,
    eta: float = 0.5,
) -> ProbeReport:
    """
    Runs the duality experiment.

    Parameters
    ----------
    space : SpaceSpec
        The space :math:`X`, built from presets so that it can be resampled.
    candidates : CandidateFamily, optional
        Test functions of the norm estimates.
    resolutions : sequence of int
        Resolution exponents.
    trials : int
        Number of families of the sparse condition probes.
    seed : int
        Seed of the probes.
    stability : float
        An estimate is stable when the value at the finest resolution is at
        most ``stability`` times the value at the next coarser one.
    eta : float
        Sparseness constant of the condition probes.

    Returns
    -------
    ProbeReport
        One row per space and resolution, the fitted growth factors and the
        verdict.
    """
    if not resolutions:
        raise ValueError("Need at least one resolution.")
    candidates = CandidateFamily(seed=seed) if candidates is None else candidates
    resolutions = sorted(set(int(m) for m in resolutions))
    report = ProbeReport("duality-experiment", seed=seed, resolution=resolutions[-1])
    report.provenance.update(
        {"space": space.label, "resolutions": resolutions, "stability": stability,
         "candidates": candidates.name}
    )

    maxdual_log(LogLevel.Info, "-" * 60)
    maxdual_log(LogLevel.Info, "Duality experiment")
    maxdual_log(LogLevel.Info, "Space       : {}".format(space.label))
    maxdual_log(LogLevel.Info, "Resolutions : {}".format(", ".join(str(m) for m in resolutions)))
    maxdual_log(LogLevel.Info, "-" * 60)

    full = MaximalKind.full()
    on_x: Dict[int, float] = {}
    on_xp: Dict[int, float] = {}
    digests = []
    previous = logging_level()
    for m in resolutions:
        sp = space if m == space.m else space.at_resolution(m)
        set_logging_level(LogLevel.Warning)
        try:
            est = operator_norm_lower_bound(
                full, sp.p, sp.w, candidates.generate(sp.n, m, sp.p.p_plus)
            )
            est_p = operator_norm_lower_bound(
                full, sp.p_conj, sp.w_inv, candidates.generate(sp.n, m, sp.p_conj.p_plus)
            )
        finally:
            set_logging_level(previous)
        on_x[m], on_xp[m] = est.value, est_p.value
        digests.append(candidates.digest(sp.n, m))
        report.rows.append(
            {"label": "m={}".format(m), "m": m, "norm_x": est.value, "argmax_x": est.argmax,
             "norm_xprime": est_p.value, "argmax_xprime": est_p.argmax}
        )
        maxdual_log(
            LogLevel.Info,
            "m = {:2d} : |M|_X >= {:.6g} ({}), |M|_X' >= {:.6g} ({})".format(
                m, est.value, est.argmax, est_p.value, est_p.argmax
            ),
        )
    report.family_hash = family_hash(digests)

    vp = space.weight_power()
    s, a_s = ainfty_membership(
        vp, CubeFamily.grid_cubes(unshifted_grid(space.n), range(0, min(space.m, 5) + 1))
    )
    report.provenance["ainfty"] = {"s": s, "A_s": a_s}
    if s is None:
        report.notes.append("w^p failed the A_infinity probe on dyadic cubes")

    set_logging_level(LogLevel.Warning)
    try:
        cond = condition_ii_probe(space, trials=trials, eta=eta, seed=seed)
        suff = suff_probe(space, trials=trials, seed=seed, eta=eta)
    finally:
        set_logging_level(previous)
    if not cond.passed or not suff.passed:
        report.fail("sparse condition probes recorded violations")

    growth_x = on_x[resolutions[-1]] / on_x[resolutions[0]]
    growth_xp = on_xp[resolutions[-1]] / on_xp[resolutions[0]]
    stable_x = _stable(on_x, stability)
    stable_xp = _stable(on_xp, stability)
    report.fitted.update(
        {
            "growth_x": growth_x,
            "growth_xprime": growth_xp,
            "stable_x": stable_x,
            "stable_xprime": stable_xp,
            "condition_delta": cond.fitted["delta"],
            "condition_r_squared": cond.fitted["r_squared"],
            "modular_delta": suff.fitted["delta"],
        }
    )

    if stable_x is None:
        report.verdict = VERDICT_INSUFFICIENT
    elif not stable_x:
        report.verdict = "{}: the X estimate grows by {:.3g} from m={} to m={}".format(
            VERDICT_HYPOTHESIS_FAILS, growth_x, resolutions[0], resolutions[-1]
        )
    elif stable_xp:
        report.verdict = "{}: both estimates stable, condition delta = {:.3g}".format(
            VERDICT_CONSISTENT, cond.fitted["delta"]
        )
    else:
        report.verdict = VERDICT_CONTRADICTION
        report.fail(VERDICT_CONTRADICTION)
    report.record(stable_x is not True or stable_xp is not False, growth_xp, "duality")
    report.notes.append("trend check on lower-bound estimates, not a certified bound")

    maxdual_log(LogLevel.Info, "Verdict     : {}".format(report.verdict))
    maxdual_log(LogLevel.Info, "-" * 60)
    return report


def adjoint_bound_probe(
    space: SpaceSpec,
    norm_m: float,
    c: float,
    delta: float,
    eta: float = 0.5,
    trials: int = 10,
    seed: int = 0,
) -> ProbeReport:
    """
    Ratios :math:`\\|\\mathcal{M}^\\star_{\\mathcal{S}} h\\|_X / \\|h\\|_X` for
    Calderón–Zygmund sparse families of random functions, against the bound
    :math:`2\\nu\\|M\\|_X` with :math:`\\nu` from
    :func:`maxdual.czsparse.choose_nu`.

    Parameters
    ----------
    norm_m : float
        Norm estimate of the maximal operator on :math:`X`.
    c, delta : float
        Constants of the sparse condition.
    """
    nu = choose_nu(c, delta, eta, space.n)
    bound = 2.0 * nu * norm_m
    rng = np.random.default_rng(seed)
    report = ProbeReport("adjoint-bound", seed=seed, resolution=space.m, conditional=True)
    report.provenance.update({"norm_m": norm_m, "c": c, "delta": delta, "nu": nu})
    support = LatticeFunction.indicator(support_box(space.n), space.m).values
    grid = unshifted_grid(space.n)
    digests: List[str] = []

    previous = logging_level()
    set_logging_level(LogLevel.Warning)
    try:
        for trial in range(trials):
            f = LatticeFunction(rng.exponential(size=support.shape) * support, space.m, nonnegative=True)
            h = LatticeFunction(rng.exponential(size=support.shape) * support, space.m, nonnegative=True)
            family, _ = sparse_from_maximal(f, grid, eta)
            digests.append(family.digest())
            ratio = space.x_norm(adjoint_sparse_operator(family, h)) / space.x_norm(h)
            report.record(
                ratio <= bound, ratio / bound, "trial {}".format(trial),
                trial=trial, ratio=ratio, bound=bound, cubes=len(family),
            )
    finally:
        set_logging_level(previous)
    report.family_hash = family_hash(digests)
    report.fitted.update({"nu": nu, "bound": bound})
    if math.isnan(report.worst_ratio):
        report.notes.append("no trial run")
    return report
