"""Condition number of the convection-diffusion solution map as the diffusivity shrinks."""
import numpy as np

from pecann.problems import convection_diffusion_condition

for alpha in np.logspace(0, -4, 9):
    r = convection_diffusion_condition(alpha)
    print(f"alpha={alpha:9.2e}  kappa={r['kappa_norm']:11.4e}  pointwise max={r['kappa_max_pointwise']:11.4e}")
