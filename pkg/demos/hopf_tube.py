"""
A tube around a circular limit cycle
====================================

The circle ``r = r_c`` attracts at rate ``lam r_c`` and noise of amplitude
2D pushes orbits off it.  Integrating the covariance equation once around the
cycle gives a Gaussian tube whose width should be ``sqrt(D / lam)``.
"""
import numpy as np

import stochtube as st

spec = st.SystemSpec.hopf(lam=1.0, r_c=1.0, omega=1.0)
noise = st.NoiseSpec(two_d=0.1)

# locate the cycle from a point near the (unstable) origin
cycle = st.find_limit_cycle(spec, (0.1, 0.0))
print(f"period {cycle.period:.6f}  (2 pi = {2 * np.pi:.6f})")

# ten periods of the Lyapunov equation, starting from a point mass
tube = st.tube_profile(spec, cycle, noise, n_periods=10)
print(f"sigma {tube.sigmas.mean():.5f}  vs sqrt(D/lam) = {np.sqrt(noise.D):.5f}")
print(f"transverse eigenvalue of Q^-1/2: {tube.lambda1.mean():.4f}")

# the tangent variance keeps growing like 2D t, so this one only decays slowly
print(f"tangent eigenvalue after 10 periods: {tube.lambda2[-1]:.4f}")

# piece the tube into a planar density and compare with the radial Gaussian
box = (-2.0, 2.0, -2.0, 2.0)
grid = st.assemble_tube_density(tube, box, 400, 400)
ref = st.analytic_circle_density(1.0, 1.0, noise.D, box, 400, 400)
print("tube vs analytic:", {k: f"{v:.2e}" for k, v in st.compare(grid, ref).items()})
st.emit_pgm(grid, "hopf_tube.pgm")
