__author__ = "maxdual developers"
__copyright__ = "Copyright 2026, maxdual developers"
__license__ = "GPL-3.0-or-later"
__version__ = "0.1.0"

from .log import LogLevel, maxdual_log, set_logging_level, logging_level, set_output_file
from .lattice import Box, Cube, ShiftedGrid, LatticeFunction, build_shifted_grids, cover_cube
from .varlp import ExponentField, WeightField, luxemburg_norm, weighted_norm, modular
from .maximal import MaximalKind, CandidateFamily, NormEstimate, operator_norm_lower_bound
from .czsparse import CZDecomposition, SparseFamily, cz_decompose, sparse_from_maximal
from .weights import CubeFamily, ap_constant, apvar_constant, rubio_de_francia
from .report import ProbeReport, write_reports
from .config import ExperimentConfig, ConfigError
from . import duallab
