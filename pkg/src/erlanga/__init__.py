"""Erlang A (M/M/m+M) transient analysis.

Laplace transforms of the transient state probabilities and of level
hitting times, their numerical inversion, the special cases without
abandonment, with infinitely many servers and without waiting room, and the
square-root staffing diffusion limits.  Independent oracles (uniformization,
absorbing chains, simulation) are included for checking.
"""

from .diffusion import HwScaling, hw_fpt_erlang_a, hw_fpt_mmm, pcf_D, pcf_D_prime
from .errors import (AccuracyError, BranchAmbiguityError, ErlangAError, ParameterError, PoleError,
                     TruncationError, UnstableQueueError)
from .inversion import InversionConfig, InversionResult, invert, invert_mean
from .model import (ModelParams, Pmf, birth_rate, death_rate, default_nmax, normalizing_constant,
                    steady_state)
from .oracle import (McResult, OracleConfig, fpt_oracle, mc_simulate, transform_oracle,
                     transient_grid, transient_oracle)
from .passage import FptSpec, mean_fpt, mean_fpt_recurrence, qhat, qhat_mm_inf, qhat_mmm
from .special import F, G, H, I, ContourConfig
from .transient import (TransformHandle, blocking_transform, busy_transform, jagerman_blocking,
                        p_mm_inf_closed, p_mm_inf_spectral, phat, phat_loss, phat_mm_inf, phat_mmm)
from .validation import run_checks

__version__ = "0.1.0"

__all__ = [
    "ModelParams", "Pmf", "birth_rate", "death_rate", "default_nmax", "normalizing_constant",
    "steady_state",
    "ContourConfig", "F", "G", "H", "I",
    "TransformHandle", "phat", "phat_mm_inf", "p_mm_inf_closed", "p_mm_inf_spectral", "phat_mmm",
    "phat_loss", "blocking_transform", "jagerman_blocking", "busy_transform",
    "FptSpec", "qhat", "qhat_mm_inf", "qhat_mmm", "mean_fpt", "mean_fpt_recurrence",
    "InversionConfig", "InversionResult", "invert", "invert_mean",
    "HwScaling", "pcf_D", "pcf_D_prime", "hw_fpt_mmm", "hw_fpt_erlang_a",
    "OracleConfig", "McResult", "transient_grid", "transient_oracle", "transform_oracle",
    "fpt_oracle", "mc_simulate",
    "run_checks",
    "ErlangAError", "ParameterError", "UnstableQueueError", "PoleError", "BranchAmbiguityError",
    "AccuracyError", "TruncationError",
]
