"""Recovery algorithms for pulse streams."""
from .alternating import InnerResult, am_exhaustive, am_inner
from .anchor import (
    AnchorResult,
    anchor_pulse_closed_form,
    anchor_pulse_fixed_point,
    anchor_residual,
    pulse_stream_from_shapes,
)
from .baselines import block_cosamp, block_energy, cosamp, select_blocks
from .common import HALTING, STATUSES, RecoveryConfig, RecoveryResult
from .support_estimation import iterative_support_estimation, oracle_decoder

__all__ = [
    "AnchorResult",
    "HALTING",
    "InnerResult",
    "RecoveryConfig",
    "RecoveryResult",
    "STATUSES",
    "am_exhaustive",
    "am_inner",
    "anchor_pulse_closed_form",
    "anchor_pulse_fixed_point",
    "anchor_residual",
    "block_cosamp",
    "block_energy",
    "cosamp",
    "iterative_support_estimation",
    "oracle_decoder",
    "pulse_stream_from_shapes",
    "select_blocks",
]
