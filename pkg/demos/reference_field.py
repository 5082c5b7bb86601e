"""Build the reaction-diffusion reference field and check it against its own PDE."""
import numpy as np

from pecann.problems import reaction_diffusion_spec, reference_reaction_diffusion
from pecann.problems.base import interior_points

ref = reference_reaction_diffusion()
print(f"grid {ref.x.size} x {ref.t.size}, provenance {ref.provenance}")
coarse = reference_reaction_diffusion(512, 5000)
print(f"doubling dt changes u(x, 1) by {np.max(np.abs(ref.values[-1] - coarse.values[-1])):.2e}")

spec = reaction_diffusion_spec()
X = interior_points(spec.bounds, 200)
j = ref.evaluate(X, first=(0, 1), second=(0,))
u = j.out(0)
res = j.d(0, 1) - 6.0 * j.dd(0, 0) - 5.0 * u * (1 - u)
print(f"max |u_t - nu u_xx - rho u(1-u)| at 200 points: {np.max(np.abs(res)):.2e}")
