"""
Tube widths on Van der Pol and Rayleigh cycles
==============================================

For eccentric cycles the width is no longer constant: it pinches where the
flow contracts strongly and swells where it lingers.  The peak-to-trough
ratio grows with the nonlinearity.
"""
import numpy as np

import stochtube as st

noise = st.NoiseSpec(0.1)
systems = {
    "Van der Pol mu=0.03": st.SystemSpec.van_der_pol(0.03),
    "Van der Pol mu=0.2": st.SystemSpec.van_der_pol(0.2),
    "Rayleigh mu=0.3": st.SystemSpec.rayleigh(0.3),
    "Rayleigh mu=0.8": st.SystemSpec.rayleigh(0.8),
}

print(f"{'system':<22}{'period':>9}{'sigma min':>11}{'sigma max':>11}{'ratio':>8}")
for name, spec in systems.items():
    cycle = st.find_limit_cycle(spec, (0.1, 0.0))
    tube = st.tube_profile(spec, cycle, noise)
    s = tube.sigmas
    print(f"{name:<22}{cycle.period:>9.4f}{s.min():>11.4f}{s.max():>11.4f}{s.max() / s.min():>8.3f}")

# where is the Rayleigh tube narrowest?
spec = systems["Rayleigh mu=0.8"]
cycle = st.find_limit_cycle(spec, (0.1, 0.0))
tube = st.tube_profile(spec, cycle, noise)
i = np.argmin(tube.sigmas)
print("narrowest at", tube.states[i].round(3), "velocity", cycle.velocities()[i].round(3))
