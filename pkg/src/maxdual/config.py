"""
Experiment configuration.

A configuration file is TOML with the tables below; every key is optional.

.. code-block:: toml

    [lattice]
    dim = 1
    m = 8

    [space]
    preset = "calibration"     # or give exponent and weight
    exponent = "const:2"
    weight = "const:1"

    [run]
    command = "selftest"
    seed = 7
    trials = 20
    resolutions = [6, 8, 10, 12]
    function = "indicator:0,0.25,2"
    kind = "full"
    eta = 0.5
    candidates = "standard"
    rdf_bound = 2.0            # omit to derive it from the space
    safety = 1.5
    stability = 1.5

    [constants]
    r = 1.25

    [output]
    out_dir = "maxdual-out"
"""

import sys
from dataclasses import dataclass, field, replace
from typing import Any, Dict, Optional, Tuple

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .maximal import DEFAULT_SAFETY
from .presets import SPACE_PRESETS, exponent_preset, function_preset, weight_preset

COMMANDS = ("norm", "maximal", "sparse", "apconst", "rdf", "lemmas", "duality", "selftest")

MAX_RESOLUTION = {1: 12, 2: 6}
"""
Largest resolution exponent for each dimension.
"""

DEFAULT_TRIALS = 20

CONSTANT_KEYS = ("r", "c", "s", "nu", "gamma", "eta", "k")


class ConfigError(ValueError):
    """
    Invalid experiment configuration.
    """


@dataclass(frozen=True)
class ExperimentConfig:
    """
    Everything a run needs.

    Attributes
    ----------
    command : str
        One of :data:`COMMANDS`.
    dim : int
        Dimension, 1 or 2.
    m : int
        Resolution exponent.
    preset : str, optional
        Named space; when given it replaces ``exponent`` and ``weight``.
    exponent, weight : str
        Exponent and weight presets.
    seed : int
        Seed of every random family.
    trials : int, optional
        Number of random trials of each probe, 20 when omitted. The
        selftest runs its full acceptance sizes unless it is given.
    resolutions : tuple of int
        Resolutions of the duality experiment.
    function : str
        Function preset of the ``norm`` and ``maximal`` commands.
    kind : str
        Maximal operator, see :meth:`maxdual.maximal.MaximalKind.parse`.
    eta : float
        Sparseness constant.
    candidates : str
        Candidate family of the norm estimates.
    rdf_bound : float, optional
        Norm bound used by the Rubio de Francia iteration. Derived from the
        associate space when omitted.
    safety : float
        Factor applied to empirical norm lower bounds where a probe needs an
        upper bound.
    stability : float
        Largest growth of the norm estimates between the two finest
        resolutions still reported as stable.
    constants : dict
        Overrides of the lemma constants.
    out_dir : str
        Directory of the report files.
    """

    command: str = "selftest"
    dim: int = 1
    m: int = 8
    preset: Optional[str] = None
    exponent: str = "const:2"
    weight: str = "const:1"
    seed: int = 0
    trials: Optional[int] = None
    resolutions: Tuple[int, ...] = (6, 8, 10, 12)
    function: str = "indicator:0,0.25,2"
    kind: str = "full"
    eta: float = 0.5
    candidates: str = "standard"
    rdf_bound: Optional[float] = None
    safety: float = DEFAULT_SAFETY
    stability: float = 1.5
    constants: Dict[str, float] = field(default_factory=dict)
    out_dir: str = "maxdual-out"

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ExperimentConfig":
        """
        Builds a configuration from the parsed TOML tables.
        """
        known = {"lattice", "space", "run", "constants", "output"}
        unknown = set(data) - known
        if unknown:
            raise ConfigError("Unknown table(s): {}.".format(", ".join(sorted(unknown))))
        flat: Dict[str, Any] = {}
        tables = {
            "lattice": ("dim", "m"),
            "space": ("preset", "exponent", "weight"),
            "run": (
                "command", "seed", "trials", "resolutions", "function", "kind", "eta",
                "candidates", "rdf_bound", "safety", "stability",
            ),
            "output": ("out_dir",),
        }
        for table, keys in tables.items():
            section = data.get(table, {})
            if not isinstance(section, dict):
                raise ConfigError("[{}] must be a table.".format(table))
            extra = set(section) - set(keys)
            if extra:
                raise ConfigError(
                    "Unknown key(s) in [{}]: {}.".format(table, ", ".join(sorted(extra)))
                )
            flat.update(section)
        constants = data.get("constants", {})
        if not isinstance(constants, dict):
            raise ConfigError("[constants] must be a table.")
        flat["constants"] = constants
        if "resolutions" in flat:
            flat["resolutions"] = tuple(flat["resolutions"])
        try:
            return cls(**flat).validated()
        except TypeError as err:
            raise ConfigError("Config value of the wrong type: {}.".format(err))

    @classmethod
    def from_toml(cls, path: str) -> "ExperimentConfig":
        try:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        except OSError as err:
            raise ConfigError("Cannot read config file '{}': {}.".format(path, err))
        except tomllib.TOMLDecodeError as err:
            raise ConfigError("Config file '{}' is not valid TOML: {}.".format(path, err))
        return cls.from_dict(data)

    def with_overrides(self, **values) -> "ExperimentConfig":
        """
        Copy with the given fields replaced; ``None`` values are ignored.
        """
        values = {k: v for k, v in values.items() if v is not None}
        if "resolutions" in values:
            values["resolutions"] = tuple(values["resolutions"])
        return replace(self, **values).validated()

    def validated(self) -> "ExperimentConfig":
        """
        Returns the configuration itself after checking every field.

        Raises
        ------
        ConfigError
            On the first invalid field.
        """
        if self.command not in COMMANDS:
            raise ConfigError("Unknown command '{}'.".format(self.command))
        if self.dim not in MAX_RESOLUTION:
            raise ConfigError("Dimension must be 1 or 2.")
        # the resolution sweep only matters to the duality experiment
        sweep = tuple(self.resolutions) if self.command == "duality" else ()
        for m in (self.m,) + sweep:
            if not isinstance(m, int) or not 1 <= m <= MAX_RESOLUTION[self.dim]:
                raise ConfigError(
                    "Resolution m = {} outside 1..{} for dim = {}.".format(
                        m, MAX_RESOLUTION[self.dim], self.dim
                    )
                )
        if not self.resolutions:
            raise ConfigError("Need at least one resolution.")
        if self.trials is not None and self.trials < 1:
            raise ConfigError("Number of trials must be >= 1.")
        if not 0.0 < self.eta < 1.0:
            raise ConfigError("Sparseness constant eta must be in (0, 1).")
        if self.rdf_bound is not None and self.rdf_bound <= 0.0:
            raise ConfigError("Rubio de Francia bound must be > 0.")
        if self.safety < 1.0:
            raise ConfigError("Safety factor must be >= 1.")
        if self.stability <= 1.0:
            raise ConfigError("Stability threshold must be > 1.")
        if self.candidates not in ("standard", "structured", "random"):
            raise ConfigError("Unknown candidate family '{}'.".format(self.candidates))
        if self.preset is not None and self.preset not in SPACE_PRESETS:
            raise ConfigError(
                "Unknown space preset '{}'. Choose one of {}.".format(
                    self.preset, ", ".join(sorted(SPACE_PRESETS))
                )
            )
        unknown = set(self.constants) - set(CONSTANT_KEYS)
        if unknown:
            raise ConfigError("Unknown constant(s): {}.".format(", ".join(sorted(unknown))))
        # presets are checked on the coarsest lattice
        try:
            exponent, weight = self.space_presets
            exponent_preset(exponent, self.dim, 1)
            weight_preset(weight, self.dim, 1)
            function_preset(self.function, self.dim, 1)
        except (TypeError, ValueError) as err:
            raise ConfigError(str(err))
        return self

    @property
    def trial_count(self) -> int:
        return DEFAULT_TRIALS if self.trials is None else self.trials

    @property
    def space_presets(self) -> Tuple[str, str]:
        if self.preset is not None:
            return SPACE_PRESETS[self.preset]
        return self.exponent, self.weight
