"""E-values: calibration, merging, e-processes, multiple testing, confidence sets and backtests."""

from . import (
    confset,
    core,
    eprocess,
    errors,
    evariables,
    merging,
    multitest,
    risk,
    sets,
    thresholds,
    universal,
)
from ._kernels import backend
from .core import Calibrator, calibrate_e_to_p, calibrate_p_to_e
from .errors import DegenerateSampleError, DomainError, EmptyInputError, InfeasibleError, NoFeasibleDecisionError
from .merging import merge_e, merge_p
from .multitest import DiscoverySet, ebh
from .sets import UncertaintySet

__version__ = "0.1.0"
