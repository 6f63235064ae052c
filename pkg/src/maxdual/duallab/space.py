"""
Function spaces and cube-local quantities shared by the probes.
"""

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Optional, Tuple

import numpy as np
from scipy import optimize

from ..lattice import Box, LatticeFunction
from ..presets import exponent_preset, space_preset, weight_preset
from ..varlp import (
    ExponentField,
    WeightField,
    conjugate,
    luxemburg_norm,
    modular,
    weighted_norm,
)


def unit_multiplier(fn: Callable[[float], float], p_minus: float, p_plus: float) -> float:
    """
    The :math:`\\lambda > 0` with ``fn(lambda) == 1`` for a modular-like map
    satisfying :math:`\\lambda^{p_+} \\varrho \\le fn(\\lambda) \\le
    \\lambda^{p_-} \\varrho` for :math:`\\lambda \\le 1` (reversed above 1),
    where :math:`\\varrho` = ``fn(1)``.
    """
    rho = fn(1.0)
    if not rho > 0.0 or not math.isfinite(rho):
        raise ValueError("Modular at scale 1 must be positive and finite.")
    ends = (rho ** (-1.0 / p_minus), rho ** (-1.0 / p_plus))
    lo, hi = min(ends), max(ends)
    if hi <= lo * (1.0 + 1.0e-14):
        return 0.5 * (lo + hi)

    def excess(s: float) -> float:
        return math.log(fn(math.exp(s)))

    s_lo, s_hi = math.log(lo), math.log(hi)
    if excess(s_lo) >= 0.0:
        return lo
    if excess(s_hi) <= 0.0:
        return hi
    return math.exp(optimize.brentq(excess, s_lo, s_hi, xtol=1.0e-15, rtol=1.0e-14))


class SpaceSpec:
    """
    The weighted variable Lebesgue space :math:`X = L^{p(\\cdot)}_w` and its
    associate space :math:`X' = L^{p'(\\cdot)}_{w^{-1}}`.

    Parameters
    ----------
    p : ExponentField
        Exponent.
    w : WeightField
        Weight.
    presets : tuple of str, optional
        Preset names of ``p`` and ``w``. Needed by :meth:`at_resolution`.

    Attributes
    ----------
    n : int
        Dimension.
    m : int
        Resolution exponent.
    p_conj : ExponentField
        Conjugate exponent :math:`p'`.
    w_inv : WeightField
        Inverse weight :math:`w^{-1}`.
    """

    def __init__(self, p: ExponentField, w: WeightField, presets: Optional[Tuple[str, str]] = None):
        if not isinstance(p, ExponentField):
            raise TypeError("p must be an ExponentField.")
        if not isinstance(w, WeightField):
            raise TypeError("w must be a WeightField.")
        if not p.field.is_compatible(w.field):
            raise ValueError("Exponent and weight live on different lattices.")
        self._p = p
        self._w = w
        self._presets = presets
        self._p_conj: Optional[ExponentField] = None

    @classmethod
    def from_presets(cls, exponent: str, weight: str, n: int, m: int) -> "SpaceSpec":
        return cls(exponent_preset(exponent, n, m), weight_preset(weight, n, m), (exponent, weight))

    @classmethod
    def named(cls, name: str, n: int, m: int) -> "SpaceSpec":
        """
        One of the named spaces of :data:`maxdual.presets.SPACE_PRESETS`.
        """
        exponent, weight = space_preset(name)
        return cls.from_presets(exponent, weight, n, m)

    @property
    def p(self) -> ExponentField:
        return self._p

    @property
    def w(self) -> WeightField:
        return self._w

    @property
    def n(self) -> int:
        return self._p.n

    @property
    def m(self) -> int:
        return self._p.m

    @property
    def presets(self) -> Optional[Tuple[str, str]]:
        return self._presets

    @property
    def p_conj(self) -> ExponentField:
        if self._p_conj is None:
            self._p_conj = conjugate(self._p)
        return self._p_conj

    @property
    def w_inv(self) -> WeightField:
        return self._w.inverse()

    @property
    def label(self) -> str:
        if self._presets is not None:
            return "p={}, w={}".format(*self._presets)
        return "p in [{:.4g}, {:.4g}]".format(self._p.p_minus, self._p.p_plus)

    def associate(self) -> "SpaceSpec":
        """
        The associate space :math:`X'` as a space of its own.
        """
        return SpaceSpec(self.p_conj, self.w_inv)

    def at_resolution(self, m: int) -> "SpaceSpec":
        """
        The same space sampled at another resolution.
        """
        if self._presets is None:
            raise ValueError("Only spaces built from presets can change resolution.")
        return SpaceSpec.from_presets(self._presets[0], self._presets[1], self.n, m)

    def x_norm(self, f: LatticeFunction) -> float:
        return weighted_norm(f, self._p, self._w)

    def xprime_norm(self, f: LatticeFunction) -> float:
        return weighted_norm(f, self.p_conj, self.w_inv)

    def indicator_norm(self, q: Box) -> float:
        """
        :math:`\\|\\chi_Q\\|_X`.
        """
        return luxemburg_norm(self._w.field, self._p, region=q)

    def modular(self, f: LatticeFunction, region=None) -> float:
        """
        :math:`\\int_R |f w|^{p(\\cdot)}`.
        """
        return modular(f * self._w.field, self._p, region)

    def weight_power(self) -> LatticeFunction:
        """
        The weight :math:`w^{p(\\cdot)}`.
        """
        return self._w.power(self._p)

    def __repr__(self) -> str:
        return "SpaceSpec({}, n={}, m={})".format(self.label, self.n, self.m)


class CubeProfile:
    """
    Values of :math:`p` and :math:`w` on the cells meeting a cube, with their
    overlap volumes, for fast evaluation of the cube-local quantities

    .. math::

        \\mathrm{mod}(t) = \\int_Q (t w)^{p}, \\qquad
        \\mathrm{rh}_r(t) = |Q| \\Big(\\frac{1}{|Q|}\\int_Q (t w)^{r p}\\Big)^{1/r}.

    Parameters
    ----------
    space : SpaceSpec
        Function space.
    cube : Box
        The cube :math:`Q`.
    """

    def __init__(self, space: SpaceSpec, cube: Box):
        slices, weights = space.p.field.region_weights(cube)
        keep = weights > 0.0
        if not np.any(keep):
            raise ValueError("Cube does not meet the computational box.")
        self._cube = cube
        self._vol = cube.volume_f
        self._weights = weights[keep]
        self._p = space.p.values[slices][keep]
        self._logw = np.log(space.w.values[slices][keep])

    @property
    def cube(self) -> Box:
        return self._cube

    @property
    def volume(self) -> float:
        return self._vol

    @property
    def p_minus(self) -> float:
        return float(np.min(self._p))

    @property
    def p_plus(self) -> float:
        return float(np.max(self._p))

    def _integral(self, t: float, factor: float, mask: Optional[np.ndarray] = None) -> float:
        with np.errstate(over="ignore", under="ignore"):
            terms = self._weights * np.exp(factor * self._p * (np.log(t) + self._logw))
        if mask is not None:
            terms = terms[mask]
        return float(np.sum(terms))

    def mod(self, t: float) -> float:
        if t <= 0.0:
            return 0.0
        return self._integral(t, 1.0)

    def rh(self, t: float, r: float) -> float:
        if t <= 0.0:
            return 0.0
        return self._vol * (self._integral(t, r) / self._vol) ** (1.0 / r)

    def unit_scale(self) -> float:
        """
        The :math:`t` with :math:`\\int_Q (t w)^{p} = 1`, that is
        :math:`1 / \\|\\chi_Q\\|_{L^{p(\\cdot)}_w}`.
        """
        return unit_multiplier(self.mod, self.p_minus, self.p_plus)

    def revhol_ratio(self, t: float, gamma: float) -> float:
        """
        :math:`\\langle (t w)^{\\gamma p}\\rangle_Q^{1/\\gamma} / \\langle (t w)^{p}\\rangle_Q`.
        """
        return self.rh(t, gamma) / self.mod(t)

    def median_exponent(self) -> float:
        """
        Lower median of :math:`p` on the cube, weighted by overlap volume.
        """
        order = np.argsort(self._p, kind="stable")
        cum = np.cumsum(self._weights[order])
        pos = int(np.searchsorted(cum, 0.5 * cum[-1] * (1.0 - 1.0e-12)))
        return float(self._p[order][min(pos, order.size - 1)])

    def level_volumes(self, threshold: float) -> Tuple[float, float]:
        """
        Volumes of :math:`\\{p \\le m\\} \\cap Q` and :math:`\\{p \\ge m\\} \\cap Q`.
        """
        lower = float(np.sum(self._weights[self._p <= threshold]))
        upper = float(np.sum(self._weights[self._p >= threshold]))
        return lower, upper


@dataclass(frozen=True)
class LemmaConstants:
    """
    Constants threaded through the lemma probes.

    Attributes
    ----------
    r : float
        Exponent of the averaged sums, > 1.
    c : float
        Bound of the averaged sums, >= 1.
    p_minus, p_plus : float
        Extremes of the exponent.
    s : float
        Muckenhoupt class index of :math:`w^{p}`, > 1.
    nu : float
        Reverse Hölder exponent of :math:`w^{p}`, > 1.
    gamma : float
        Intermediate exponent, :math:`1 < \\gamma < \\min(\\nu, r)`.
    eta : float
        Sparseness constant in (0, 1).
    k_override : float, optional
        Replaces :math:`k = 2^{p_+/p_- + 1} c`.
    provenance : dict
        Where each constant came from.
    """

    r: float
    c: float
    p_minus: float
    p_plus: float
    s: float
    nu: float
    gamma: float
    eta: float = 0.5
    k_override: Optional[float] = None
    provenance: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.r <= 1.0:
            raise ValueError("Constant r must be > 1.")
        if self.c < 1.0:
            raise ValueError("Constant c must be >= 1.")
        if self.s <= 1.0:
            raise ValueError("Constant s must be > 1.")
        if self.nu <= 1.0:
            raise ValueError("Constant nu must be > 1.")
        if not 1.0 < self.gamma < min(self.nu, self.r):
            raise ValueError("Constant gamma must lie in (1, min(nu, r)).")
        if not 0.0 < self.eta < 1.0:
            raise ValueError("Constant eta must be in (0, 1).")
        if self.k_override is not None and self.k_override <= 0.0:
            raise ValueError("Constant k must be > 0.")

    @property
    def k(self) -> float:
        if self.k_override is not None:
            return self.k_override
        return 2.0 ** (self.p_plus / self.p_minus + 1.0) * self.c

    @property
    def epsilon(self) -> float:
        return (self.r - self.gamma) / (self.gamma * (1.0 + (self.s - 1.0) * self.r))

    @property
    def q(self) -> float:
        return (1.0 + self.r * (self.s - 1.0)) / (1.0 + self.gamma * (self.s - 1.0))

    @property
    def key_exponent(self) -> float:
        """
        Exponent of :math:`t` in the small-:math:`t` branch of the key estimate.
        """
        return self.epsilon / (1.0 + self.epsilon) * self.p_minus

    def to_dict(self) -> Dict[str, Any]:
        return {
            "r": self.r,
            "c": self.c,
            "k": self.k,
            "s": self.s,
            "nu": self.nu,
            "gamma": self.gamma,
            "eta": self.eta,
            "epsilon": self.epsilon,
            "q": self.q,
            "key_exponent": self.key_exponent,
            "provenance": dict(self.provenance),
        }
