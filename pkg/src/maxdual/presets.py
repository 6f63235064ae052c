"""
Named exponents, weights and test functions.

Presets are written ``kind:arg1,arg2,...``. They are defined on the support
box :math:`[0, 1)^n`; exponents are extended to the rest of the
computational box by their value at the nearest point of the support box,
weights are evaluated directly.

Exponents
    ``const:q``, ``affine:a,b`` (:math:`a + b x_1`),
    ``loghold:a,c[,x0]`` (:math:`a + c/\\log(e + 1/|x_1 - x_0|)`).
Weights
    ``const:c``, ``power-weight:a[,x0]`` (:math:`|x - x_0|^a`, :math:`x_0 = 1/2`
    by default).
Functions
    ``indicator:a,b[,height]``, ``const:c``, ``spike:x0,beta``,
    ``random:seed``.
"""

from typing import Dict, List, Tuple

import numpy as np

from .lattice import Box, LatticeFunction, support_box
from .varlp import ExponentField, WeightField

SPACE_PRESETS: Dict[str, Tuple[str, str]] = {
    "calibration": ("const:2", "const:1"),
    "loghold": ("loghold:2,0.5", "power-weight:0.125"),
    "adversarial": ("const:2", "power-weight:-0.9"),
}
"""
Exponent and weight of the named function spaces used by the experiments.
"""


def _split(name: str) -> Tuple[str, List[float]]:
    if not isinstance(name, str):
        raise TypeError("Preset name must be a string.")
    kind, _, args = name.partition(":")
    kind = kind.strip()
    try:
        values = [float(a) for a in args.split(",")] if args.strip() else []
    except ValueError:
        raise ValueError("Preset '{}' has non numeric arguments.".format(name))
    return kind, values


def _nargs(name: str, values: List[float], low: int, high: int) -> None:
    if not low <= len(values) <= high:
        raise ValueError("Preset '{}' expects {} to {} arguments.".format(name, low, high))


def _first_coordinate_on_support(n: int, m: int) -> np.ndarray:
    f = LatticeFunction.zeros(n, m)
    return np.clip(f.center_grid()[0], 0.0, 1.0)


def exponent_preset(name: str, n: int, m: int) -> ExponentField:
    """
    Builds a named exponent field.
    """
    kind, args = _split(name)
    if kind == "const":
        _nargs(name, args, 1, 1)
        return ExponentField.constant(args[0], n, m)
    if kind == "affine":
        _nargs(name, args, 2, 2)
        x = _first_coordinate_on_support(n, m)
        return ExponentField(LatticeFunction(args[0] + args[1] * x, m))
    if kind == "loghold":
        _nargs(name, args, 2, 3)
        x0 = args[2] if len(args) == 3 else 0.0
        x = _first_coordinate_on_support(n, m)
        with np.errstate(divide="ignore"):
            vals = args[0] + args[1] / np.log(np.e + 1.0 / np.abs(x - x0))
        return ExponentField(LatticeFunction(vals, m))
    raise ValueError("Unknown exponent preset '{}'.".format(name))


def weight_preset(name: str, n: int, m: int) -> WeightField:
    """
    Builds a named weight.
    """
    kind, args = _split(name)
    if kind == "const":
        _nargs(name, args, 1, 1)
        return WeightField.constant(args[0], n, m)
    if kind == "power-weight":
        _nargs(name, args, 1, 2)
        x0 = args[1] if len(args) == 2 else 0.5
        grids = LatticeFunction.zeros(n, m).center_grid()
        r = np.sqrt(sum((g - x0) ** 2 for g in grids))
        return WeightField(LatticeFunction(r ** args[0], m))
    raise ValueError("Unknown weight preset '{}'.".format(name))


def function_preset(name: str, n: int, m: int) -> LatticeFunction:
    """
    Builds a named test function supported in :math:`[0, 1)^n`.
    """
    kind, args = _split(name)
    support = LatticeFunction.indicator(support_box(n), m)
    if kind == "indicator":
        _nargs(name, args, 2, 3)
        a, b = args[0], args[1]
        if b <= a:
            raise ValueError("Indicator preset needs a < b.")
        height = args[2] if len(args) == 3 else 1.0
        return LatticeFunction.indicator(Box((a,) * n, b - a), m, height)
    if kind == "const":
        _nargs(name, args, 1, 1)
        return support * args[0]
    if kind == "spike":
        _nargs(name, args, 2, 2)
        x0, beta = args
        grids = support.center_grid()
        r = np.sqrt(sum((g - x0) ** 2 for g in grids))
        vals = np.where(support.values > 0.0, r ** (-beta), 0.0)
        return LatticeFunction(vals, m, nonnegative=True)
    if kind == "random":
        _nargs(name, args, 1, 1)
        rng = np.random.default_rng(int(args[0]))
        vals = rng.exponential(size=support.shape) * support.values
        return LatticeFunction(vals, m, nonnegative=True)
    raise ValueError("Unknown function preset '{}'.".format(name))


def space_preset(name: str) -> Tuple[str, str]:
    """
    Exponent and weight preset names of a named space.
    """
    if name not in SPACE_PRESETS:
        raise ValueError(
            "Unknown space preset '{}'. Choose one of {}.".format(
                name, ", ".join(sorted(SPACE_PRESETS))
            )
        )
    return SPACE_PRESETS[name]
