"""Equation learning with division units.

A small numpy library for identifying analytical equations (including
divisions) from noisy data with a structured network, selecting the right
equation among trained candidates, and using learned dynamics for
random-shooting model-predictive control of a cart-pole swing-up.
"""

from .kernels import (
    EVAL_THRESHOLD,
    AdamState,
    adam_init,
    adam_update,
    bound_penalty,
    div_forward,
    div_penalty,
    grad_check,
    linear_forward,
    unit_forward,
)
from .network import Architecture, Network, build, forward, loss, penalty_loss
from .training import Candidate, Schedule, evaluate, make_schedule, run_grid, train
from .selection import SelectionWeights, VINT_EX, VINT_S, normalize, select

__all__ = [
    "EVAL_THRESHOLD",
    "AdamState",
    "adam_init",
    "adam_update",
    "bound_penalty",
    "div_forward",
    "div_penalty",
    "grad_check",
    "linear_forward",
    "unit_forward",
    "Architecture",
    "Network",
    "build",
    "forward",
    "loss",
    "penalty_loss",
    "Candidate",
    "Schedule",
    "evaluate",
    "make_schedule",
    "run_grid",
    "train",
    "SelectionWeights",
    "VINT_EX",
    "VINT_S",
    "normalize",
    "select",
]
