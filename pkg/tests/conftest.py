import numpy as np
import pytest
from scipy.integrate import solve_ivp

from stochtube import NoiseSpec, SystemSpec, find_limit_cycle, tube_profile

OSC_SETS = {
    "vdp-0.03": SystemSpec.van_der_pol(0.03),
    "vdp-0.2": SystemSpec.van_der_pol(0.2),
    "rayleigh-0.3": SystemSpec.rayleigh(0.3),
    "rayleigh-0.8": SystemSpec.rayleigh(0.8),
}
HOPF = SystemSpec.hopf(1.0, 1.0, 1.0)
NOISE = NoiseSpec(0.1)


def scipy_field(spec):
    """Plain-numpy drift used by the independent solve_ivp oracles."""
    def f(t, s):
        x, y = s
        if spec.kind == 0:
            r = np.hypot(x, y)
            g = spec.lam * (spec.r_c - r)
            return [g * x - spec.omega * y, g * y + spec.omega * x]
        if spec.kind == 1:
            return [y, -spec.mu * (x * x - spec.b) * y - spec.omega0 ** 2 * x]
        return [y - spec.mu * (x ** 3 / 3 - spec.b * x), -spec.omega0 ** 2 * x]
    return f


def scipy_period(spec, s0=(0.1, 0.0), transient=400.0):
    """Period from successive upward zero crossings of y (x > 0), via solve_ivp events."""
    f = scipy_field(spec)
    s = solve_ivp(f, (0, transient), s0, rtol=1e-12, atol=1e-12).y[:, -1]
    ev = lambda t, s: s[0]
    ev.direction = -1 if spec.kind != 0 else 1
    sol = solve_ivp(f, (0, 60), s, events=ev, rtol=1e-12, atol=1e-12)
    t = sol.t_events[0]
    return float(np.diff(t)[-3:].mean())


@pytest.fixture(scope="session")
def cycles():
    out = {"hopf": find_limit_cycle(HOPF, (0.1, 0.0))}
    for name, spec in OSC_SETS.items():
        out[name] = find_limit_cycle(spec, (0.1, 0.0))
    return out


@pytest.fixture(scope="session")
def tubes(cycles):
    specs = dict(OSC_SETS, hopf=HOPF)
    return {name: tube_profile(specs[name], cyc, NOISE) for name, cyc in cycles.items()}


def pytest_terminal_summary(terminalreporter):
    rows = []
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            if "test_acceptance.py::test_criterion_" in rep.nodeid and rep.when == "call":
                detail = dict(rep.user_properties).get("detail", "")
                rows.append((rep.nodeid.split("test_criterion_")[1],
                             "PASS" if outcome == "passed" else "FAIL", detail))
    if rows:
        terminalreporter.section("acceptance criteria")
        for name, verdict, detail in sorted(rows, key=lambda r: int(r[0].split("_")[0])):
            num, _, label = name.partition("_")
            terminalreporter.write_line(f"criterion {num:>2} {verdict}  {label}: {detail}")
