"""Random walks on affine Hecke pairs over local fields."""

from .algebra import CosetKey, FieldContext, GroupElem, XiElem, coset_of, decompose, lambda_orbit
from .balls import Ball, BallMeasure, PreconditionError
from .characters import CharacterSpec, CycloValue, decouple_integral, eval_character, verify_decoupled_grid
from .entropy import conv_power_entropy, extrapolated_rate, furstenberg_entropy
from .measures import (
    CosetMeasure,
    SparseMeasure,
    absorb_lift,
    act_ball,
    affine_step_measure,
    commuting_average,
    convolve,
    coset_convolve,
    e_bs,
    e_lamp,
    is_absorbing,
    pushforward_coset,
    theta_of,
    z_drift,
)
from .spectrum import plan_spectrum, spectrum_set, spectrum_value
from .subsum import Beta, subsum_classify, subsum_enumerate, subsum_member
from .walk import (
    BudgetError,
    Guard,
    contraction_stat,
    coupling_moment,
    empirical_stationary,
    invariance_stats,
    sample_boundary,
    sample_path,
    stationarity_residual,
)

__all__ = [
    "Ball", "BallMeasure", "Beta", "BudgetError", "CharacterSpec", "CosetKey", "CosetMeasure",
    "CycloValue", "FieldContext", "GroupElem", "Guard", "PreconditionError", "SparseMeasure", "XiElem",
    "absorb_lift", "act_ball", "affine_step_measure", "commuting_average", "contraction_stat",
    "conv_power_entropy", "convolve", "coset_convolve", "coset_of", "coupling_moment", "decompose",
    "decouple_integral", "e_bs", "e_lamp", "empirical_stationary", "eval_character", "extrapolated_rate",
    "furstenberg_entropy", "invariance_stats", "is_absorbing", "lambda_orbit", "plan_spectrum",
    "pushforward_coset", "sample_boundary", "sample_path", "spectrum_set", "spectrum_value",
    "stationarity_residual", "subsum_classify", "subsum_enumerate", "subsum_member", "theta_of",
    "verify_decoupled_grid", "z_drift",
]
