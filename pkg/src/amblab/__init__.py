"""Ambiguity-function concentration toolkit.

Discrete STFT and ambiguity transforms on periodic grids, concentration
objectives over time-frequency domains, optimizers for them, and a set of
numerical checks.
"""

__version__ = "0.1.0"

from .domains import (
    Annulus,
    Ball,
    Difference,
    DomainMask,
    Interval,
    MaskFile,
    Rect,
    Union_,
    rasterize,
    rasterize_time,
)
from .errors import AmblabError
from .functionals import (
    AmbiguityLinf,
    AmbiguityLp,
    FixedWindowLp,
    GaborLattice,
    MqNormalizedLp,
    TimeCorrelationLp,
    evaluate,
    gradient,
)
from .optimizers import OptimizerConfig, RunReport, gaussian_family_scan, power_iteration, proj_grad_ascent
from .tf import PhasePoint, Signal, TFArray, TimeGrid, ambiguity, gaussian, stft, timefreq_shift
from .verify import CheckReport
