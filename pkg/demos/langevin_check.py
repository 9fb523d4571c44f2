"""
Checking the tube against brute-force Langevin runs
===================================================

The tube is a linearization.  An Euler-Maruyama ensemble sees the full
nonlinear drift, so the two agree only as the noise gets weak.  Here the
per-section transverse variance of both is compared at two noise levels.
This takes a minute or two.
"""
import numpy as np

import stochtube as st

spec = st.SystemSpec.van_der_pol(0.2)
cycle = st.find_limit_cycle(spec, (0.1, 0.0))
starts = cycle.samples.states[np.linspace(0, len(cycle.samples) - 2, 500).astype(int)]

for two_d in (0.1, 0.01):
    noise = st.NoiseSpec(two_d)
    tube = st.tube_profile(spec, cycle, noise)
    cfg = st.EnsembleConfig(spec, noise, n_traj=500, t_end=200.0, dt=1e-3, burn_in=50.0,
                            seed=1, starts=starts, thin=100)
    sec = st.section_statistics(st.simulate_ensemble(cfg).samples, cycle, n_sections=16)
    ratio = sec.variance / st.binned_tube_variance(tube, 16)
    print(f"2D={two_d:<5} ensemble/tube per section:", np.array2string(ratio, precision=3))
    print(f"         worst deviation {np.abs(ratio - 1).max():.3f}")
