"""Problem definitions with residual operators, exact solutions and presets."""
from .base import FAMILIES, ProblemSpec, Residuals
from .composite_heat import CompositeHeat, composite_heat_spec
from .conditioning import condition_number, condition_number_norm, convection_diffusion_condition
from .convection_diffusion import ConvectionDiffusion, convection_diffusion_spec
from .poisson import Poisson1D, poisson1d_spec
from .reaction_diffusion import (ReactionDiffusion, ReferenceField, gaussian_bump,
                                 reaction_diffusion_spec, reference_reaction_diffusion)

__all__ = [
    "FAMILIES", "ProblemSpec", "Residuals",
    "CompositeHeat", "composite_heat_spec",
    "ConvectionDiffusion", "convection_diffusion_spec",
    "Poisson1D", "poisson1d_spec",
    "ReactionDiffusion", "ReferenceField", "gaussian_bump", "reaction_diffusion_spec",
    "reference_reaction_diffusion",
    "condition_number", "condition_number_norm", "convection_diffusion_condition",
    "get_problem", "PROBLEMS",
]

PROBLEMS = {
    "poisson1d": poisson1d_spec,
    "composite_heat": composite_heat_spec,
    "convection_diffusion": convection_diffusion_spec,
    "reaction_diffusion": reaction_diffusion_spec,
}


def get_problem(name: str, **kwargs) -> ProblemSpec:
    """Look up a problem by name; dashes and underscores are interchangeable."""
    key = name.replace("-", "_")
    if key not in PROBLEMS:
        raise KeyError(f"unknown problem {name!r}; choose from {sorted(PROBLEMS)}")
    return PROBLEMS[key](**kwargs)
