import numpy as np
import pytest

from stochtube import OriginSingularity, SystemKind, SystemSpec
from stochtube.dynamics import reversed_velocity, variation_matrix, velocity

ALL_SPECS = [
    SystemSpec.hopf(1.0, 1.0, 1.0),
    SystemSpec.hopf(0.7, 1.5, -2.0),
    SystemSpec.van_der_pol(0.03),
    SystemSpec.van_der_pol(0.2),
    SystemSpec.rayleigh(0.3),
    SystemSpec.rayleigh(0.8, b=2.0, omega0=1.3),
    SystemSpec.linear([[-1.0, 2.0], [0.5, -0.3]]),
]


def fd_jacobian(spec, s, h=1e-6):
    J = np.empty((2, 2))
    for k in range(2):
        e = np.zeros(2)
        e[k] = h
        J[:, k] = (velocity(spec, s + e) - velocity(spec, s - e)) / (2 * h)
    return J


def test_velocity_examples():
    np.testing.assert_array_equal(velocity(SystemSpec.van_der_pol(0.2), (0, 0)), [0, 0])
    np.testing.assert_allclose(velocity(SystemSpec.hopf(), (1, 0)), [0, 1], atol=1e-15)
    np.testing.assert_allclose(velocity(SystemSpec.rayleigh(0.3), (1, 0)), [0.8, -1], rtol=1e-14)


def test_variation_matrix_examples():
    np.testing.assert_allclose(variation_matrix(SystemSpec.van_der_pol(0.2), (0, 0)),
                               [[0, 1], [-1, 0.6]], atol=1e-15)
    np.testing.assert_allclose(variation_matrix(SystemSpec.hopf(), (1, 0)),
                               [[-1, -1], [1, 0]], atol=1e-15)
    rng = np.random.default_rng(3)
    for s in rng.normal(size=(20, 2)) * 3:
        A = variation_matrix(SystemSpec.rayleigh(0.8, omega0=1.7), s)
        assert A[1, 0] == -1.7 ** 2 and A[1, 1] == 0.0


def test_hopf_origin_is_singular():
    with pytest.raises(OriginSingularity):
        variation_matrix(SystemSpec.hopf(), (0.0, 0.0))


@pytest.mark.parametrize("spec", ALL_SPECS, ids=lambda s: f"{s.kind.name}-{s.lam}-{s.mu}")
def test_jacobian_matches_finite_differences(spec):
    rng = np.random.default_rng(int(spec.kind) + 11)
    states = rng.uniform(-1.5, 1.5, size=(120, 2))
    worst = 0.0
    for s in states:
        A = variation_matrix(spec, s)
        F = fd_jacobian(spec, s)
        scale = max(np.abs(A).max(), 1.0)
        worst = max(worst, np.abs(A - F).max() / scale)
    assert worst < 1e-6


def test_reversed_velocity():
    np.testing.assert_allclose(reversed_velocity(SystemSpec.hopf(), (1, 0)), [0, -1], atol=1e-15)
    np.testing.assert_array_equal(reversed_velocity(SystemSpec.van_der_pol(0.03), (2, 0)), [0, 2])
    assert not np.any(reversed_velocity(SystemSpec.rayleigh(0.3), (0, 0)))
    rng = np.random.default_rng(5)
    for spec in ALL_SPECS:
        for s in rng.normal(size=(10, 2)):
            np.testing.assert_array_equal(reversed_velocity(spec, s), -velocity(spec, s))
            np.testing.assert_array_equal(variation_matrix(spec.reversed(), s),
                                          -variation_matrix(spec, s))


def test_hopf_on_cycle_velocity_is_tangential():
    spec = SystemSpec.hopf(2.0, 1.5, 0.7)
    for th in np.linspace(0, 2 * np.pi, 37):
        s = 1.5 * np.array([np.cos(th), np.sin(th)])
        v = velocity(spec, s)
        assert abs(v @ s) / 1.5 < 1e-14


@pytest.mark.parametrize("kwargs", [dict(kind=SystemKind.HOPF, lam=0.0),
                                    dict(kind=SystemKind.HOPF, r_c=-1.0),
                                    dict(kind=SystemKind.HOPF, omega=0.0),
                                    dict(kind=SystemKind.VAN_DER_POL, mu=0.0),
                                    dict(kind=SystemKind.RAYLEIGH, mu=0.2, b=-1.0),
                                    dict(kind=SystemKind.RAYLEIGH, mu=0.2, omega0=0.0)])
def test_invalid_specs_rejected(kwargs):
    with pytest.raises(ValueError):
        SystemSpec(**kwargs)
