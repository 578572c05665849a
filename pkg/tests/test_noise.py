import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sqvac.codewords import CodeSpec, Family, build_pair, cat_pair
from sqvac.errors import KrausCapExceeded, ValidationError
from sqvac.fockspace import DEFAULT_TOLERANCES, FockVector, annihilation, identity, number_operator
from sqvac.noise import (
    ChannelKind,
    ChannelSpec,
    KrausSet,
    dephasing_defect,
    dephasing_kraus,
    kl_matrix_element,
    loss_kraus,
    make_kraus,
)


def loss(gamma, n_max):
    return loss_kraus(ChannelSpec(ChannelKind.LOSS, gamma, n_max))


def dephasing(gamma, n_max, eps=1e-12):
    return dephasing_kraus(ChannelSpec(ChannelKind.DEPHASING, gamma, n_max, eps))


def test_channel_spec_validation():
    with pytest.raises(ValidationError):
        ChannelSpec(ChannelKind.LOSS, 1.0, 10)
    with pytest.raises(ValidationError):
        ChannelSpec(ChannelKind.DEPHASING, -0.1, 10)
    with pytest.raises(ValidationError):
        ChannelSpec("bitflip", 0.1, 10)
    with pytest.raises(ValidationError):
        ChannelSpec(ChannelKind.LOSS, 0.1, 0)
    assert ChannelSpec("loss", 0.1, 10).kind is ChannelKind.LOSS


def test_loss_gamma_zero_identity():
    ks = loss(0.0, 20)
    assert ks.size == 1
    assert np.array_equal(ks.operator(0).matrix, np.eye(21))


def test_loss_single_photon_element():
    g = 0.1
    k1 = loss(g, 10).operator(1)
    out = k1 @ FockVector.basis(2, 10)
    # damping acts after the annihilation: sqrt(2 g) (1 - g)^(1/2) |1>
    assert out.amplitudes[1].real == pytest.approx(math.sqrt(2 * g) * math.sqrt(1 - g), rel=1e-14)
    assert np.count_nonzero(out.amplitudes) == 1


def test_loss_matches_operator_formula():
    g, n_max = 0.2, 12
    ks = loss(g, n_max)
    a = annihilation(n_max).matrix
    damp = np.diag((1 - g) ** (np.arange(n_max + 1) / 2))
    for j in range(ks.size):
        ref = math.sqrt(g ** j / math.factorial(j)) * damp @ np.linalg.matrix_power(a, j)
        assert np.allclose(ks.operator(j).matrix, ref, atol=1e-14)


def test_loss_alternative_ordering_is_not_complete():
    g, n_max = 0.2, 12
    a = annihilation(n_max).matrix
    damp = np.diag((1 - g) ** (np.arange(n_max + 1) / 2))
    total = sum(
        (math.sqrt(g ** j / math.factorial(j)) * np.linalg.matrix_power(a, j) @ damp).T
        @ (math.sqrt(g ** j / math.factorial(j)) * np.linalg.matrix_power(a, j) @ damp)
        for j in range(n_max + 1))
    assert np.max(np.abs(total - np.eye(n_max + 1))) > 0.1


@pytest.mark.parametrize("gamma", [0.01, 0.05, 0.1, 0.2])
@pytest.mark.parametrize("n_max", [60, 100])
def test_loss_completeness(gamma, n_max):
    ks = loss(gamma, n_max)
    assert ks.completeness_defect <= 10 * DEFAULT_TOLERANCES.norm_tol
    assert ks.certified


def test_loss_completeness_dense_check():
    ks = loss(0.1, 30)
    total = sum(k.dagger().matrix @ k.matrix for k in ks.operators)
    assert np.max(np.abs(total - np.eye(31))) <= 1e-12


def test_dephasing_gamma_zero():
    ks = dephasing(0.0, 30)
    assert ks.j_max == 0 and ks.completeness_defect == 0.0
    assert np.array_equal(ks.operator(0).matrix, np.eye(31))


def test_dephasing_completeness_gamma01():
    ks = dephasing(0.1, 100)
    assert ks.completeness_defect <= 1e-12
    assert ks.j_max > 0


def test_dephasing_defect_partial_sums():
    g, n_max = 0.05, 60
    ks = dephasing(g, n_max)
    assert ks.completeness_defect <= 1e-12
    # direct per-level partial sums of the squared diagonals
    total = np.zeros(n_max + 1)
    defects = []
    for j in range(ks.size):
        total += ks.diagonal(j) ** 2
        defects.append(float(np.max(1 - total)))
    assert all(a >= b - 1e-15 for a, b in zip(defects, defects[1:]))
    assert defects[-1] <= 1e-12 + 1e-14
    assert dephasing_defect(g, n_max, ks.j_max - 1) > 1e-12


def test_dephasing_jmax_monotone():
    js = [dephasing(g, 60).j_max for g in (0.01, 0.02, 0.05, 0.1, 0.2)]
    assert js == sorted(js)
    js = [dephasing(0.05, n).j_max for n in (20, 40, 60, 100)]
    assert js == sorted(js)


def test_dephasing_cap():
    with pytest.raises(KrausCapExceeded) as err:
        dephasing_kraus(ChannelSpec(ChannelKind.DEPHASING, 0.2, 200), cap=500)
    assert err.value.achieved_defect > 1e-12


def test_dephasing_operators_commute_and_diagonal():
    ks = dephasing(0.05, 20)
    n = number_operator(20).matrix
    ops = ks.operators
    for k in ops[:6]:
        assert np.count_nonzero(k.matrix - np.diag(np.diag(k.matrix))) == 0
        assert np.array_equal(k.matrix @ n, n @ k.matrix)
    assert np.array_equal(ops[1].matrix @ ops[2].matrix, ops[2].matrix @ ops[1].matrix)


def test_dephasing_offdiagonal_vanishes_on_disjoint_support():
    pair = build_pair(CodeSpec(Family.SQUEEZED, 2, 1.0))
    ks = dephasing(0.05, pair.spec.n_max)
    for a, b in [(0, 0), (0, 3), (2, 5)]:
        assert kl_matrix_element(pair.zero_L, ks.operator(a), ks.operator(b), pair.one_L) == 0


def test_matrix_element_identity():
    u = FockVector(np.array([0.6, 0.8j, 0]))
    v = FockVector(np.array([0, 1.0, 0]))
    eye = identity(2)
    assert kl_matrix_element(u, eye, eye, v) == pytest.approx(u.inner(v))


def test_loss_k0_k1_squeezed_pair_vanishes():
    pair = build_pair(CodeSpec(Family.SQUEEZED, 2, 1.0))
    ks = loss(0.1, pair.spec.n_max)
    assert kl_matrix_element(pair.zero_L, ks.operator(0), ks.operator(1), pair.one_L) == 0


def test_loss_k0_k1_cat_pair_nonzero():
    pair = cat_pair(2, math.sqrt(2))
    ks = loss(0.1, pair.spec.n_max)
    assert abs(kl_matrix_element(pair.zero_L, ks.operator(0), ks.operator(1), pair.one_L)) > 0.1


def test_stack_rows_match_operators():
    v = build_pair(CodeSpec(Family.SQUEEZED, 2, 0.5, 60)).zero_L
    for ks in (loss(0.15, 60), dephasing(0.02, 60)):
        st_ = ks.stack(v)
        for j in range(0, ks.size, max(1, ks.size // 7)):
            assert np.allclose(st_[j], (ks.operator(j) @ v).amplitudes, atol=1e-15)
        assert np.allclose(ks.stack(v, slice(2, 5)), st_[2:5])


def test_explicit_family():
    k0 = np.diag([1.0, 0.8, 0.8])
    k1 = 0.6 * (np.eye(3, k=1))
    ks = KrausSet.from_operators([k0, k1])
    assert ks.size == 2 and ks.completeness_defect <= 1e-15 and ks.certified
    with pytest.raises(ValidationError):
        KrausSet.from_operators([np.eye(2), np.eye(3)])


def test_make_kraus_dispatch():
    assert make_kraus(ChannelSpec("loss", 0.1, 10)).kind == "loss"
    assert make_kraus(ChannelSpec("dephasing", 0.1, 10)).kind == "dephasing"


def test_index_checked():
    ks = loss(0.1, 10)
    with pytest.raises(ValidationError):
        ks.operator(11)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.0, 0.9), st.integers(2, 40))
def test_loss_completeness_property(gamma, n_max):
    ks = loss(gamma, n_max)
    assert np.max(np.abs(ks.completeness_profile())) <= 1e-12


@settings(max_examples=30, deadline=None)
@given(st.floats(0.001, 0.5), st.integers(2, 60))
def test_dephasing_minimal_jmax_property(gamma, n_max):
    ks = dephasing(gamma, n_max)
    assert ks.completeness_defect <= 1e-12
    if ks.j_max > 0:
        assert dephasing_defect(gamma, n_max, ks.j_max - 1) > 1e-12
