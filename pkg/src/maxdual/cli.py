"""
Command-line interface.

Every subcommand writes ``<command>.json``, ``<command>.csv`` and
``<command>.txt`` into the output directory. The exit status is 0 when every
probe passed, 1 when a probe recorded a violation and 2 for an invalid
configuration.
"""

import argparse
import math
import os
import sys
from typing import List, Optional, Tuple

import h5py
import numpy as np

from . import __version__
from .config import COMMANDS, ConfigError, ExperimentConfig
from .czsparse import (
    adjoint_split_check,
    choose_nu,
    duality_check,
    sparse_from_maximal,
)
from .duallab import (
    SpaceSpec,
    adjoint_bound_probe,
    build_constants,
    key_lemma_check,
    lemma51_decay_probe,
    lemma51_probe,
    lemma52_check,
    lemma53_check,
    random_disjoint_family,
    theorem11_experiment,
    unshifted_grid,
)
from .lattice import LatticeFunction, support_box
from .log import LogLevel, maxdual_log, set_logging_level, set_output_file
from .maximal import (
    CandidateFamily,
    MaximalKind,
    check_grid_comparison,
    maximal,
    operator_norm_lower_bound,
)
from .presets import function_preset
from .report import ProbeReport, write_reports
from .selftest import run_selftest
from .varlp import check_modular_norm_bounds, holder_pairing_check
from .weights import (
    CubeFamily,
    SubsetSampler,
    a1_ratio,
    ainfty_absolute_continuity_check,
    ainfty_membership,
    ap_constant,
    apvar_constant,
    converse_check,
    reverse_holder_probe,
    rubio_de_francia,
)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2


def _space(config: ExperimentConfig) -> SpaceSpec:
    exponent, weight = config.space_presets
    return SpaceSpec.from_presets(exponent, weight, config.dim, config.m)


def _function(config: ExperimentConfig):
    return function_preset(config.function, config.dim, config.m)


def run_norm(config: ExperimentConfig) -> List[ProbeReport]:
    space = _space(config)
    f = _function(config)
    value = space.x_norm(f)
    print("{:.12g}".format(value))
    report = ProbeReport("norm", resolution=config.m)
    report.fitted.update(
        {"norm": value, "modular": space.modular(f), "function": config.function,
         "space": space.label}
    )
    bounds = check_modular_norm_bounds(f * space.w.field, space.p)
    pair = holder_pairing_check(f, f.abs(), space.p, space.w)
    return [report, bounds, pair]


def run_maximal(config: ExperimentConfig) -> List[ProbeReport]:
    f = _function(config)
    kind = MaximalKind.parse(config.kind, config.dim)
    mf = maximal(f, kind)
    path = os.path.join(config.out_dir, "maximal.h5")
    with h5py.File(path, "w") as h5:
        h5.attrs["kind"] = kind.label
        h5.attrs["function"] = config.function
        f.to_hdf5(h5, "f")
        mf.to_hdf5(h5, "Mf")
    report = ProbeReport("maximal", resolution=config.m)
    report.fitted.update(
        {"kind": kind.label, "max_f": float(np.max(f.values)), "max_Mf": float(np.max(mf.values))}
    )
    report.provenance["hdf5"] = os.path.basename(path)
    if kind.name == MaximalKind.FULL:
        # every cell is a window of its own
        ok = bool(np.all(mf.values >= np.abs(f.values) * (1.0 - 1.0e-12)))
        report.record(ok, 0.0, "Mf >= |f|")
    return [report, check_grid_comparison(f.abs())]


def run_sparse(config: ExperimentConfig) -> List[ProbeReport]:
    f = _function(config).abs()
    grid = unshifted_grid(config.dim)
    family, cert = sparse_from_maximal(f, grid, config.eta)
    reports = [cert, family.verify(), family.decomposition.check_decay()]
    rng = np.random.default_rng(config.seed)
    support = LatticeFunction.indicator(support_box(config.dim), config.m).values
    g = f.with_values(rng.exponential(size=f.shape) * support, nonnegative=True)
    reports.append(duality_check(family, f, g))
    nu = choose_nu(1.0, 0.5, config.eta, config.dim)
    reports.append(adjoint_split_check(family, f, nu))
    reports[0].provenance["family"] = family.to_dict()
    return reports


def run_apconst(config: ExperimentConfig) -> List[ProbeReport]:
    space = _space(config)
    vp = space.weight_power()
    family = CubeFamily.random_cubes(config.dim, config.seed, 200, min_side=2.0**-config.m).union(
        CubeFamily.grid_cubes(unshifted_grid(config.dim), range(0, min(config.m, 5) + 1))
    )
    report = ProbeReport("apconst", resolution=config.m, family_hash=family.digest(), seed=config.seed)
    report.fitted["A_p(.)"] = apvar_constant(space.p, space.w, family)
    if space.p.is_constant:
        report.fitted["A_p"] = ap_constant(vp, space.p.p_minus, family)
    s, a_s = ainfty_membership(vp, family)
    report.fitted.update({"s": s, "A_s": a_s})
    report.fitted["A_1(dyadic)"] = a1_ratio(vp, MaximalKind.dyadic(unshifted_grid(config.dim)))
    reports = [report, reverse_holder_probe(vp, family, (1.0, 1.1, 1.25, 1.5, 2.0, 3.0))]
    sampler = SubsetSampler(config.seed, 1000)
    reports.append(ainfty_absolute_continuity_check(vp, family, sampler))
    if s is not None:
        reports.append(converse_check(vp, s, family, sampler))
    return reports


def _rdf_bound(config: ExperimentConfig, kind: MaximalKind) -> Tuple[float, bool]:
    """
    Norm bound of ``kind`` on the associate space and whether it is certified.
    Only a grid or local operator on a constant exponent with a constant
    weight has a certified bound, the conjugate exponent.
    """
    if config.rdf_bound is not None:
        return config.rdf_bound, False
    xp = _space(config).associate()
    w = xp.w.values
    if kind.name != MaximalKind.FULL and xp.p.is_constant and np.all(w == w.flat[0]):
        q = xp.p.p_minus
        return q / (q - 1.0), True
    candidates = CandidateFamily(config.candidates, config.seed)
    estimate = operator_norm_lower_bound(
        kind, xp.p, xp.w, candidates.generate(config.dim, config.m, xp.p.p_plus)
    )
    return estimate.working_bound(config.safety), False


def run_rdf(config: ExperimentConfig) -> List[ProbeReport]:
    g = _function(config).abs()
    kind = MaximalKind.parse(config.kind, config.dim)
    bound, certified = _rdf_bound(config, kind)
    run = rubio_de_francia(g, kind, bound)
    report = run.check(kind)
    report.fitted["certified"] = certified
    report.conditional = not certified
    report.record(bool(np.all(run.rg.values >= g.values)), 0.0, "g <= Rg")
    report.fitted.update({"terms": run.terms, "converged": run.converged})
    report.rows.extend(
        {"label": "term {}".format(i), "term": i, "max": v} for i, v in enumerate(run.term_norms)
    )
    return [report]


def run_lemmas(config: ExperimentConfig) -> List[ProbeReport]:
    space = _space(config)
    constants = build_constants(
        space, trials=config.trial_count, seed=config.seed, eta=config.eta, overrides=config.constants
    )
    reports = [
        lemma51_probe(space, trials=config.trial_count, seed=config.seed),
        lemma52_check(space, constants, seed=config.seed, count=config.trial_count),
    ]
    cubes = CubeFamily.grid_cubes(unshifted_grid(config.dim), range(0, min(config.m, 4) + 1))
    boxes = [cubes.box(i) for i in range(len(cubes))]
    reports.append(lemma53_check(space, constants, boxes))
    reports.append(key_lemma_check(space, constants, boxes))

    candidates = CandidateFamily(config.candidates, config.seed)
    estimate = operator_norm_lower_bound(
        MaximalKind.full(), space.p, space.w, candidates.generate(config.dim, config.m, space.p.p_plus)
    )
    family = random_disjoint_family(config.dim, config.m, np.random.default_rng(config.seed))
    bound = estimate.working_bound(config.safety)
    decay = lemma51_decay_probe(space, family, bound, seed=config.seed)
    decay.notes.append(
        "norm of M is an estimate: lower bound {:.6g} from {} times safety {:g}".format(
            estimate.value, estimate.argmax, config.safety
        )
    )
    reports.append(decay)
    return reports


def run_duality(config: ExperimentConfig) -> List[ProbeReport]:
    space = _space(config)
    candidates = CandidateFamily(config.candidates, config.seed)
    report = theorem11_experiment(
        space, candidates, config.resolutions, trials=config.trial_count, seed=config.seed,
        stability=config.stability, eta=config.eta,
    )
    reports = [report]
    delta = report.fitted.get("condition_delta", math.nan)
    norm = next((r["norm_x"] for r in report.rows if r.get("m") == config.m), None)
    if norm is not None and math.isfinite(delta) and delta > 0.0:
        bound = max(1.0, norm * config.safety)
        adjoint = adjoint_bound_probe(space, bound, 1.0, delta, config.eta, config.trial_count, config.seed)
        adjoint.notes.append("norm of M is an estimate times safety {:g}".format(config.safety))
        reports.append(adjoint)
    return reports


def run_selftest_command(config: ExperimentConfig) -> List[ProbeReport]:
    return run_selftest(config.dim, config.m, config.seed, config.trials)


RUNNERS = {
    "norm": run_norm,
    "maximal": run_maximal,
    "sparse": run_sparse,
    "apconst": run_apconst,
    "rdf": run_rdf,
    "lemmas": run_lemmas,
    "duality": run_duality,
    "selftest": run_selftest_command,
}


def run(config: ExperimentConfig) -> int:
    """
    Runs one configured command, writes its reports and returns the exit
    status.
    """
    os.makedirs(config.out_dir, exist_ok=True)
    reports = RUNNERS[config.command](config)
    paths = write_reports(reports, config.out_dir, config.command)
    failed = [r for r in reports if not r.passed]
    for r in failed:
        maxdual_log(LogLevel.Error, "Failed : {}".format(r.inequality))
        print("FAILED {}".format(r.inequality), file=sys.stderr)
    maxdual_log(LogLevel.Info, "Reports : {}".format(", ".join(paths)))
    return EXIT_FAILURE if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML experiment file")
    common.add_argument("--seed", type=int, help="seed of every random draw")
    common.add_argument("--out-dir", dest="out_dir", help="directory of the report files")
    common.add_argument("--m", type=int, help="resolution exponent")
    common.add_argument("--dim", type=int, help="dimension, 1 or 2")
    common.add_argument("--preset", help="named space")
    common.add_argument("--function", help="function preset")
    common.add_argument("--trials", type=int, help="random trials per probe")
    common.add_argument("--log-file", dest="log_file", help="copy of the log output")
    common.add_argument("--quiet", action="store_true", help="only print warnings and errors")

    parser = argparse.ArgumentParser(
        prog="maxdual",
        description="Probes of maximal operators on weighted variable Lebesgue spaces.",
    )
    parser.add_argument("--version", action="version", version="%(prog)s " + __version__)
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "norm": "norm of a function preset",
        "maximal": "maximal function of a function preset",
        "sparse": "Calderon-Zygmund sparse family with certificates",
        "apconst": "Muckenhoupt and reverse Holder probes",
        "rdf": "Rubio de Francia iteration",
        "lemmas": "probes of the cube-local estimates",
        "duality": "end-to-end duality experiment",
        "selftest": "full invariant suite",
    }
    for command in COMMANDS:
        sub.add_parser(command, parents=[common], help=helps[command])
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.quiet:
        set_logging_level(LogLevel.Warning)
    if args.log_file:
        set_output_file(args.log_file)
    try:
        config = ExperimentConfig.from_toml(args.config) if args.config else ExperimentConfig()
        config = config.with_overrides(
            command=args.command,
            seed=args.seed,
            out_dir=args.out_dir,
            m=args.m,
            dim=args.dim,
            preset=args.preset,
            function=args.function,
            trials=args.trials,
        )
    except ConfigError as err:
        print("maxdual: error: {}".format(err), file=sys.stderr)
        return EXIT_CONFIG
    return run(config)
