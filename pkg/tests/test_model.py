"""States, mass matrices, potentials, Hamiltonian energies."""

import numpy as np
import pytest

from glangevin import (DimensionMismatchError, DoubleWell, HamiltonianSystem,
                       Harmonic, InvalidParameterError, MassMatrix, PhaseState,
                       Polynomial, gibbs_log_density_unnormalized,
                       hamiltonian_energy, potential_by_name)
from glangevin.model import gradient_check


def _sys(potential, n=1, m=1.0):
    return HamiltonianSystem(MassMatrix.scalar(m, n), potential)


def test_phase_state_basics():
    x = PhaseState([1.0, 2.0], [3.0, 4.0])
    assert x.dim == 2
    with pytest.raises(AttributeError):
        x.q = np.zeros(2)
    with pytest.raises(ValueError):
        x.q[0] = 9.0  # read-only buffer
    with pytest.raises(DimensionMismatchError):
        PhaseState([1.0], [1.0, 2.0])
    assert x.flip_momentum().p[1] == -4.0
    assert not PhaseState([np.inf], [0.0]).is_finite()


def test_hamiltonian_energy_examples():
    harm = _sys(Harmonic())
    assert hamiltonian_energy(harm, PhaseState([0.0], [0.0])) == 0.0
    assert hamiltonian_energy(harm, PhaseState([1.0], [1.0])) == 1.0
    dw = _sys(DoubleWell())
    assert hamiltonian_energy(dw, PhaseState([1.0], [0.0])) == pytest.approx(-0.25, abs=1e-15)
    with pytest.raises(DimensionMismatchError):
        hamiltonian_energy(_sys(Harmonic(), n=2), PhaseState([1.0], [0.0]))


def test_gibbs_log_density_examples():
    harm = _sys(Harmonic())
    assert gibbs_log_density_unnormalized(harm, 2.0, PhaseState([0.0], [0.0])) == 0.0
    assert gibbs_log_density_unnormalized(harm, 2.0, PhaseState([1.0], [0.0])) == -1.0
    dw = _sys(DoubleWell())
    assert gibbs_log_density_unnormalized(dw, 1.0, PhaseState([1.0], [0.0])) == \
        pytest.approx(0.25, abs=1e-15)
    with pytest.raises(InvalidParameterError):
        gibbs_log_density_unnormalized(harm, 0.0, PhaseState([0.0], [0.0]))


def test_momentum_flip_symmetry():
    rng = np.random.default_rng(0)
    for system in [_sys(Harmonic(), n=3),
                   HamiltonianSystem(MassMatrix.diagonal([1.0, 2.0, 0.5]), Harmonic()),
                   _sys(DoubleWell())]:
        for _ in range(20):
            x = PhaseState(rng.normal(size=system.n), rng.normal(size=system.n))
            assert system.hamiltonian_energy(x) == system.hamiltonian_energy(x.flip_momentum())


def test_gradients_match_finite_differences():
    rng = np.random.default_rng(1)
    potentials = [(Harmonic(), 4), (DoubleWell(), 1),
                  (Polynomial([0.0, 0.0, 0.5]), 1),
                  (Polynomial([1.0, -2.0, 0.25, 0.0, 0.125]), 1)]
    for potential, n in potentials:
        for _ in range(100):
            q = rng.uniform(-10, 10, size=n)
            assert gradient_check(potential, q) <= 1e-6


def test_polynomial_potential_values():
    p = Polynomial([1.0, 2.0, 3.0])  # 1 + 2q + 3q^2
    assert p.value(np.array([2.0])) == 1.0 + 4.0 + 12.0
    assert p.gradient(np.array([2.0]))[0] == 2.0 + 12.0
    with pytest.raises(InvalidParameterError):
        Polynomial([np.nan])


def test_mass_matrix_classes_agree():
    m_s = MassMatrix.scalar(2.0, 3)
    m_d = MassMatrix.diagonal([2.0, 2.0, 2.0])
    m_f = MassMatrix.dense(2.0 * np.eye(3))
    p = np.array([1.0, -2.0, 3.0])
    for m in (m_s, m_d, m_f):
        np.testing.assert_allclose(m.apply_inverse(p), p / 2.0, rtol=1e-14)
        assert m.inverse_quadratic(p) == pytest.approx(7.0, rel=1e-14)
    np.testing.assert_allclose(m_s.as_matrix(), m_f.as_matrix())


def test_mass_matrix_rejects_non_spd():
    rng = np.random.default_rng(2)
    with pytest.raises(InvalidParameterError):
        MassMatrix.scalar(0.0, 1)
    with pytest.raises(InvalidParameterError):
        MassMatrix.diagonal([1.0, -1.0])
    with pytest.raises(InvalidParameterError):
        MassMatrix.dense([[1.0, 2.0], [0.0, 1.0]])  # asymmetric
    for _ in range(50):
        a = rng.normal(size=(4, 4))
        sym = 0.5 * (a + a.T)
        w, v = np.linalg.eigh(sym)
        w[0] = -abs(w[0]) - 0.1  # force indefinite
        indefinite = (v * w) @ v.T
        with pytest.raises(InvalidParameterError):
            MassMatrix.dense(indefinite)


def test_energy_above_potential_minimum_at_zero_momentum():
    rng = np.random.default_rng(3)
    for system, umin in [(_sys(Harmonic(), n=2), 0.0), (_sys(DoubleWell()), -0.25)]:
        for _ in range(50):
            q = rng.uniform(-3, 3, size=system.n)
            x = PhaseState(q, np.zeros(system.n))
            assert system.hamiltonian_energy(x) >= umin - 1e-12


def test_potential_registry():
    assert potential_by_name("harmonic").name == "harmonic"
    assert potential_by_name("double-well").dim == 1
    assert potential_by_name("polynomial", [0.0, 1.0]).value(np.array([3.0])) == 3.0
    with pytest.raises(InvalidParameterError):
        potential_by_name("lennard-jones")
