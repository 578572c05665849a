import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sqvac.errors import CutoffError, ValidationError
from sqvac.fockspace import (
    DEFAULT_TOLERANCES,
    FockOperator,
    FockVector,
    ToleranceConfig,
    annihilation,
    creation,
    expm,
    fidelity,
    identity,
    number_operator,
    suggest_cutoff,
    tail_mass,
)
from sqvac.gaussian import SqueezeParams, squeezed_vacuum_fock

# frozen from an independent 40-digit mpmath evaluation of the Fock series
SINH2_15 = 4.533830997888882921


def test_annihilation_matrix_small():
    a = annihilation(2).matrix
    expected = np.array([[0, 1, 0], [0, 0, math.sqrt(2)], [0, 0, 0]])
    assert np.array_equal(a, expected)


def test_annihilation_kills_vacuum():
    out = annihilation(5) @ FockVector.vacuum(5)
    assert np.all(out.amplitudes == 0)


@pytest.mark.parametrize("n", range(8))
def test_number_operator_eigenbasis(n):
    v = FockVector.basis(n, 7)
    out = (creation(7) @ annihilation(7)) @ v
    assert np.allclose(out.amplitudes, n * v.amplitudes, atol=1e-14)


def test_number_operator_diag():
    assert np.array_equal(number_operator(3).matrix, np.diag([0, 1, 2, 3]))
    n_max = 12
    ada = (creation(n_max) @ annihilation(n_max)).matrix
    assert np.allclose(number_operator(n_max).matrix, ada, atol=1e-13)


def test_commutator_exact_below_edge():
    n_max = 30
    a, ad = annihilation(n_max).matrix, creation(n_max).matrix
    comm = a @ ad - ad @ a
    assert np.allclose(comm[:n_max, :n_max], np.eye(n_max), atol=1e-12)
    # the truncation edge breaks it: <n_max|[a, a^dag]|n_max> = -n_max
    assert comm[n_max, n_max] == pytest.approx(-n_max)


def test_squeezed_vacuum_mean_photon_number():
    n_max = suggest_cutoff(1.5)
    v = squeezed_vacuum_fock(SqueezeParams(1.5), n_max)
    assert v.mean_photon_number() == pytest.approx(SINH2_15, abs=1e-10)
    assert v.expectation(number_operator(n_max)).real == pytest.approx(SINH2_15, abs=1e-10)


def test_expm_zero_is_identity():
    out = expm(FockOperator(np.zeros((6, 6))))
    assert np.array_equal(out.matrix, np.eye(6))


@pytest.mark.parametrize("k", [0, 1, 5, 9])
def test_expm_diagonal_generator(k):
    theta = 0.37
    u = expm(number_operator(9) * 1j * theta)
    out = u @ FockVector.basis(k, 9)
    assert out.amplitudes[k] == pytest.approx(np.exp(1j * theta * k), abs=1e-14)
    assert np.sum(np.abs(out.amplitudes)) == pytest.approx(1.0, abs=1e-14)


def test_expm_squeeze_generator_matches_series():
    r, n_max = 1.0, 120
    a, ad = annihilation(n_max).matrix, creation(n_max).matrix
    # zeta = -r for an ellipse along theta = 0
    gen = 0.5 * (-r * (a @ a) + r * (ad @ ad))
    out = expm(FockOperator(gen)) @ FockVector.vacuum(n_max)
    ref = squeezed_vacuum_fock(SqueezeParams(r), n_max)
    # truncation corrupts the top levels; compare below the guard band
    keep = n_max + 1 - DEFAULT_TOLERANCES.guard_band
    assert np.max(np.abs(out.amplitudes[:keep] - ref.amplitudes[:keep])) < 1e-8
    assert fidelity(out, ref) == pytest.approx(1.0, abs=1e-12)
    assert out.amplitudes[0].real == pytest.approx(0.80501818219459204931, abs=1e-12)


@pytest.mark.parametrize("scale", [0.3, 1.0, 2.0])
def test_expm_inverse(scale):
    n_max = 60
    a, ad = annihilation(n_max).matrix, creation(n_max).matrix
    gen = scale * 0.5 * ((a @ a) - (ad @ ad)) + 0.2j * scale * (a + ad)
    u = expm(FockOperator(gen)).matrix
    v = expm(FockOperator(-gen)).matrix
    assert np.max(np.abs(u @ v - np.eye(n_max + 1))) < 1e-10


def test_expm_rejects_nonfinite():
    bad = np.zeros((3, 3))
    bad[0, 1] = np.nan
    with pytest.raises(ValidationError):
        expm(FockOperator(bad))


def test_fidelity_basics():
    v = FockVector(np.array([0.6, 0.8j, 0]))
    assert fidelity(v, v) == pytest.approx(1.0)
    assert fidelity(FockVector.basis(0, 3), FockVector.basis(1, 3)) == 0.0
    with pytest.raises(ValidationError):
        fidelity(FockVector.basis(0, 3), FockVector.basis(0, 4))


def test_tail_mass():
    v = FockVector(np.sqrt(np.array([0.5, 0.25, 0.125, 0.125])))
    assert tail_mass(v, 0) == 0.0
    assert tail_mass(v, 1) == pytest.approx(0.125)
    assert v.tail_mass(2) == pytest.approx(0.25)
    with pytest.raises(ValidationError):
        tail_mass(v, -1)


def test_vector_validation():
    with pytest.raises(ValidationError):
        FockVector(np.array([]))
    with pytest.raises(ValidationError):
        FockVector(np.array([1.0, np.inf]))
    with pytest.raises(ValidationError):
        FockVector.basis(5, 3)
    with pytest.raises(ValidationError):
        FockVector(np.zeros(3)).normalized()


def test_vector_is_immutable():
    v = FockVector.vacuum(3)
    with pytest.raises(ValueError):
        v.amplitudes[0] = 2.0


def test_operator_validation():
    with pytest.raises(ValidationError):
        FockOperator(np.zeros((2, 3)))
    with pytest.raises(ValidationError):
        identity(3) @ FockVector.vacuum(4)


def test_phase_convention():
    v = FockVector(np.array([1e-9, -0.6j, 0.8]))
    w = v.with_phase_convention()
    assert w.amplitudes[1].real > 0 and abs(w.amplitudes[1].imag) < 1e-15
    assert fidelity(v, w) == pytest.approx(1.0)


def test_resized_pads_and_refuses_truncating_mass():
    v = FockVector(np.array([0.6, 0.8]))
    assert v.resized(4).amplitudes.tolist() == [0.6, 0.8, 0, 0, 0]
    with pytest.raises((ValidationError, CutoffError)):
        v.resized(0)


def test_tolerance_config_validation():
    with pytest.raises(ValidationError):
        ToleranceConfig(norm_tol=0)
    with pytest.raises(CutoffError):
        DEFAULT_TOLERANCES.check_cutoff(5)


@pytest.mark.parametrize("r,expected", [(0.0, 20), (0.5, 50), (1.0, 140), (1.5, 383), (2.0, 1043)])
def test_suggest_cutoff_golden(r, expected):
    assert suggest_cutoff(r) == expected


@pytest.mark.parametrize("r", [0.25, 0.5, 1.0, 1.5, 2.0])
def test_suggest_cutoff_tail(r):
    n_max = suggest_cutoff(r, safety=1.0)
    big = squeezed_vacuum_fock(SqueezeParams(r), 4 * n_max + 50)
    tail = float(np.sum(big.probabilities()[n_max + 1:]))
    assert tail <= DEFAULT_TOLERANCES.tail_tol
    # one even level fewer would fail, unless the floor of 20 levels dominates
    if n_max > 20:
        assert float(np.sum(big.probabilities()[n_max - 1:])) > DEFAULT_TOLERANCES.tail_tol


def test_suggest_cutoff_validation():
    with pytest.raises(ValidationError):
        suggest_cutoff(-1.0)
    with pytest.raises(ValidationError):
        suggest_cutoff(1.0, safety=0.5)


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=12, max_value=40),
       st.lists(st.floats(-1, 1), min_size=2, max_size=40))
def test_unitary_preserves_norm(n_max, re):
    amps = np.zeros(n_max + 1, dtype=complex)
    k = min(len(re), n_max + 1 - DEFAULT_TOLERANCES.guard_band)
    amps[:k] = re[:k]
    if np.linalg.norm(amps) < 1e-100:
        amps[0] = 1.0
    v = FockVector(amps).normalized()
    u = expm(number_operator(n_max) * 0.7j)
    assert u.is_unitary()
    assert abs((u @ v).norm() - 1.0) <= 10 * DEFAULT_TOLERANCES.norm_tol


@settings(max_examples=30, deadline=None)
@given(st.lists(st.complex_numbers(max_magnitude=2, allow_nan=False, allow_infinity=False),
                min_size=1, max_size=20),
       st.floats(0, 2 * math.pi))
def test_fidelity_phase_invariant(amps, phase):
    if np.linalg.norm(amps) < 1e-100:
        amps = [1.0] + list(amps[1:])
    v = FockVector(np.array(amps)).normalized()
    w = v * np.exp(1j * phase)
    assert fidelity(v, w) == pytest.approx(1.0, abs=1e-12)
