import json

import numpy as np
import pytest

from conftest import dephasing_kraus, identity_kraus
from fishcoh.errors import (
    DimensionMismatch,
    Incomplete,
    IncompleteAtTheta,
    IncompleteAtTheta0,
    InvalidKraus,
    StateIncoherent,
)
from fishcoh.fisher import classical_fi
from fishcoh.iochannel import (
    IncoherentKraus,
    ParametrizedIO,
    apply_io,
    compose,
    io_from_json,
    io_to_json,
    kraus_completeness_residual,
    postmeasurement_ensemble,
    postselect_distribution,
    random_incoherent_kraus,
    random_io,
    random_rank1_io,
    rank1_flags,
    refine_to_rank1,
    validate_io,
    witness_io,
)
from fishcoh.qcore import (
    DensityMatrix,
    random_incoherent_state,
    random_mixed_state,
    random_pure_state,
)
from fishcoh.repro import build_counterexample_io


def fi(io, rho):
    return classical_fi(postselect_distribution(io, rho))


def qubit_witness_proof_io(theta0=0.0, gamma=0.3):
    """The three operators of the positivity argument, on a qubit (E3 is empty)."""
    s = 1 / np.sqrt(2)
    ph = np.exp(1j * (theta0 + gamma))
    return ParametrizedIO(2, (
        IncoherentKraus([0, 0], [s * ph, s], [1, 0]),
        IncoherentKraus([1, 1], [-s * ph, s], [1, 0]),
    ), theta0)


def test_kraus_rejects_bad_rates():
    with pytest.raises(InvalidKraus):
        IncoherentKraus([0, 1], [1, 1], [0.5, 1.5])
    with pytest.raises(InvalidKraus):
        IncoherentKraus([0, 1], [1, 1], [0.5])


def test_kraus_matrix_form():
    k = IncoherentKraus([1, 1, 0], [1, 2j, 3], [1, 0, 0.5])
    m = k.matrix(theta=0.2)
    expect = np.zeros((2, 3), dtype=complex)
    expect[1, 0] = np.exp(0.2j)
    expect[1, 1] = 2j
    expect[0, 2] = 3 * np.exp(0.1j)
    np.testing.assert_allclose(m, expect)
    # each column has exactly one nonzero: basis vectors go to basis vectors
    assert np.all((np.abs(m) > 0).sum(axis=0) == 1)
    np.testing.assert_allclose(k.gram(0.2), m.conj().T @ m, atol=1e-14)


def test_validate_qubit_witness_io():
    rep = validate_io(qubit_witness_proof_io())
    assert rep.valid and rep.certificate == "group-diagonal"
    assert len(rep.groups) == 1
    assert rep.residual_theta0 <= 1e-15


def test_validate_counterexample_three_groups():
    rep = validate_io(build_counterexample_io())
    assert rep.certificate == "group-diagonal"
    sums = [np.real(np.diag(g["sum"])) for g in rep.groups]
    # oracle: direct summation of |A^x|^2 over each block of three rows
    np.testing.assert_allclose(sums, [[0, 0.4, 0.6], [0.4, 0.6, 0], [0.6, 0, 0.4]], atol=1e-12)
    assert [g["members"] for g in rep.groups] == [[0, 1, 2], [3, 4, 5], [6, 7, 8]]


def test_validate_identity():
    rep = validate_io(ParametrizedIO(3, (identity_kraus(3),)))
    assert rep.valid


def test_validate_incomplete_at_theta0():
    io = ParametrizedIO(2, (IncoherentKraus([0, 1], [1, 0.5], [0, 0]),))
    with pytest.raises(IncompleteAtTheta0) as e:
        validate_io(io)
    assert e.value.report.failure == "IncompleteAtTheta0"


def test_validate_detects_theta_dependent_incompleteness():
    # both operators map everything to |0>; complete at theta0 only by interference
    s = 1 / np.sqrt(2)
    io = ParametrizedIO(2, (
        IncoherentKraus([0, 0], [s, s], [1, 0]),
        IncoherentKraus([1, 1], [s, -s], [0, 0]),
    ))
    with pytest.raises(IncompleteAtTheta) as e:
        validate_io(io)
    assert e.value.residual > 1e-8


def test_grid_fallback_certifies_composed_family():
    io = random_io(3, 4)
    kraus = random_incoherent_kraus(3, 5, n_ops=3)
    rep = validate_io(compose(io, kraus))
    assert rep.valid


@pytest.mark.parametrize("seed", range(10))
def test_composition_closure(seed):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(2, 5))
    io = random_io(d, rng)
    kraus = random_incoherent_kraus(d, rng)
    assert validate_io(compose(io, kraus)).valid


def test_apply_identity():
    io = ParametrizedIO(2, (identity_kraus(2),))
    rho = random_mixed_state(2, 0)
    for theta in (0.0, 0.4, -2.0):
        np.testing.assert_allclose(apply_io(io, rho, theta).mat, rho.mat, atol=1e-14)
    # a phase rate makes it a rotation that is the identity at theta0 only
    rot = ParametrizedIO(2, (identity_kraus(2, rate=[1, 0]),))
    np.testing.assert_allclose(apply_io(rot, rho).mat, rho.mat, atol=1e-14)


def test_apply_dephasing():
    io = ParametrizedIO(3, tuple(dephasing_kraus(3)))
    rho = random_mixed_state(3, 2)
    np.testing.assert_allclose(apply_io(io, rho).mat, np.diag(np.diag(rho.mat)), atol=1e-14)


@pytest.mark.parametrize("seed", range(10))
def test_incoherent_input_output_theta_independent(seed):
    io = random_io(3, seed)
    rho = random_incoherent_state(3, seed)
    a = apply_io(io, rho, io.theta0).mat
    b = apply_io(io, rho, io.theta0 + 0.3).mat
    assert np.abs(a - b).max() <= 1e-10


def test_apply_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        apply_io(ParametrizedIO(3, (identity_kraus(3),)), random_mixed_state(2, 0))


def test_postselect_identity():
    fd = postselect_distribution(ParametrizedIO(2, (identity_kraus(2),)), random_mixed_state(2, 1))
    np.testing.assert_allclose(fd.p, [1.0])
    np.testing.assert_allclose(fd.d, [0.0])


def test_postselect_counterexample_against_closed_forms(phi3):
    io = build_counterexample_io()
    fd = postselect_distribution(io, phi3)
    a = np.array([k.c for k in io.kraus])
    h = np.array([k.r for k in io.kraus])
    rho = phi3.mat
    # P(x|0) = sum_n rho_nn |a_n|^2 + 2 Re[rho_12 a_1 a_2^* + rho_23 a_2 a_3^* + rho_31 a_3 a_1^*]
    p_ref = (np.abs(a) ** 2 @ np.real(np.diag(rho))
             + 2 * np.real(rho[0, 1] * a[:, 0] * a[:, 1].conj() + rho[1, 2] * a[:, 1] * a[:, 2].conj()
                           + rho[2, 0] * a[:, 2] * a[:, 0].conj()))
    np.testing.assert_allclose(fd.p, p_ref, atol=1e-14)
    # derivative of the same expression with a_n -> a_n e^{i h_n theta}
    dp_ref = 2 * np.imag(rho[0, 1] * a[:, 0] * a[:, 1].conj() * (h[:, 0] - h[:, 1])
                         + rho[1, 2] * a[:, 1] * a[:, 2].conj() * (h[:, 1] - h[:, 2])
                         + rho[2, 0] * a[:, 2] * a[:, 0].conj() * (h[:, 2] - h[:, 0]))
    np.testing.assert_allclose(np.abs(fd.d), np.abs(dp_ref), atol=1e-14)
    np.testing.assert_allclose(fd.d, -dp_ref, atol=1e-14)


def test_postselect_derivative_matches_finite_difference():
    for seed in range(10):
        io = random_io(3, seed)
        rho = random_mixed_state(3, seed + 100)
        fd = postselect_distribution(io, rho)
        eps = 1e-5
        plus_ = [np.trace(e @ rho.mat @ e.conj().T).real for e in io.matrices(io.theta0 + eps)]
        minus_ = [np.trace(e @ rho.mat @ e.conj().T).real for e in io.matrices(io.theta0 - eps)]
        np.testing.assert_allclose(fd.d, (np.array(plus_) - np.array(minus_)) / (2 * eps), atol=1e-8)


@pytest.mark.parametrize("seed", range(20))
def test_postselect_sums(seed):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(2, 5))
    fd = postselect_distribution(random_io(d, rng), random_mixed_state(d, rng))
    assert abs(fd.p.sum() - 1) <= 1e-10
    assert abs(fd.d.sum()) <= 1e-10


@pytest.mark.parametrize("seed", range(20))
def test_incoherent_state_zero_derivative(seed):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(2, 5))
    fd = postselect_distribution(random_io(d, rng), random_incoherent_state(d, rng))
    assert np.abs(fd.d).max() <= 1e-10


def test_ensemble_dephasing_on_plus(plus):
    ens = postmeasurement_ensemble(dephasing_kraus(2), plus)
    np.testing.assert_allclose(ens.weights, [0.5, 0.5])
    np.testing.assert_allclose(ens.states[0].mat, np.diag([1, 0]), atol=1e-15)
    np.testing.assert_allclose(ens.states[1].mat, np.diag([0, 1]), atol=1e-15)


def test_ensemble_identity():
    rho = random_mixed_state(2, 4)
    ens = postmeasurement_ensemble([identity_kraus(2)], rho)
    assert len(ens) == 1
    assert ens.weights[0] == pytest.approx(1.0)
    np.testing.assert_allclose(ens.states[0].mat, rho.mat, atol=1e-14)


@pytest.mark.parametrize("seed", range(10))
def test_ensemble_random_pair(seed):
    kraus = random_incoherent_kraus(2, seed, n_ops=1)
    rho = random_mixed_state(2, seed)
    ens = postmeasurement_ensemble(kraus, rho)
    assert abs(ens.weights.sum() - 1) <= 1e-10
    recon = sum(t * s.mat for t, s in ens.members)
    out = sum(k.matrix(out_dim=2) @ rho.mat @ k.matrix(out_dim=2).conj().T for k in kraus)
    np.testing.assert_allclose(recon, out, atol=1e-12)
    for s in ens.states:
        assert np.linalg.eigvalsh(s.mat).min() >= -1e-10


def test_ensemble_rejects_incomplete():
    with pytest.raises(Incomplete):
        postmeasurement_ensemble([IncoherentKraus([0, 1], [1, 0.3], [0, 0])], random_mixed_state(2, 0))


def test_random_kraus_is_complete():
    for s in range(20):
        assert kraus_completeness_residual(random_incoherent_kraus(3, s)) <= 1e-10


def test_refine_identity_gives_projectors():
    io = refine_to_rank1(ParametrizedIO(3, (identity_kraus(3),)))
    assert len(io) == 3
    for n, k in enumerate(io.kraus):
        np.testing.assert_allclose(k.gram(), np.diag(np.eye(3)[n]), atol=1e-14)
        assert set(k.g) == {n}


def test_refine_fixed_point_on_rank1():
    io = random_rank1_io(3, 8)
    assert all(rank1_flags(io))
    ref = refine_to_rank1(io)
    assert len(ref) == len(io)
    for a, b in zip(io.kraus, ref.kraus):
        np.testing.assert_allclose(a.gram(), b.gram(), atol=1e-12)
    for s in range(5):
        rho = random_mixed_state(3, s)
        assert fi(ref, rho) == pytest.approx(fi(io, rho), abs=1e-12)


@pytest.mark.parametrize("seed", range(30))
def test_refine_never_decreases_fi(seed):
    io = random_io(3, seed)
    rho = random_pure_state(3, seed + 1000)
    ref = refine_to_rank1(io)
    assert validate_io(ref).valid
    assert all(rank1_flags(ref))
    assert fi(ref, rho) - fi(io, rho) >= -1e-12


def test_refine_labels_are_fresh():
    ref = refine_to_rank1(random_io(3, 1))
    labels = [k.g[0] for k in ref.kraus]
    assert labels == list(range(len(ref)))


def test_witness_on_plus(plus):
    io = witness_io(plus)
    assert validate_io(io).valid
    # p = (1 +- cos(pi/4))/2, |dp| = sin(pi/4)/2, so FI = (1/8)/(p1 p2) * (p1 + p2) = 1
    assert fi(io, plus) > 0.4
    assert fi(io, plus) == pytest.approx(1.0, abs=1e-12)


def test_witness_rejects_incoherent():
    with pytest.raises(StateIncoherent):
        witness_io(DensityMatrix(np.diag([0.3, 0.7])))


@pytest.mark.parametrize("seed", range(10))
def test_witness_positive_on_qutrits(seed):
    rho = random_mixed_state(3, seed)
    for theta0 in (0.0, 1.3):
        io = witness_io(rho, theta0)
        assert io.dim == 3 and validate_io(io).valid
        assert fi(io, rho) > 0


def test_witness_phase_condition():
    rho = random_mixed_state(3, 2)
    io = witness_io(rho, theta0=0.5)
    m = np.abs(rho.mat - np.diag(np.diag(rho.mat)))
    j, k = np.unravel_index(np.argmax(np.triu(m, 1)), m.shape)
    e1 = io.kraus[0]
    alpha = np.angle(rho.mat[j, k])
    # e^{i(theta0 + gamma)} sits on |j><j| of E1 together with 1/sqrt(2)
    assert e1.c[j] * np.sqrt(2) * np.exp(1j * alpha) == pytest.approx(np.exp(1j * np.pi / 4))


def test_io_json_roundtrip():
    io = random_io(3, 2)
    back = io_from_json(json.loads(json.dumps(io_to_json(io))))
    assert back.theta0 == io.theta0
    for a, b in zip(io.kraus, back.kraus):
        assert a.g == b.g
        np.testing.assert_array_equal(a.c, b.c)
        np.testing.assert_array_equal(a.r, b.r)


def test_weightless_kraus_dropped():
    io = ParametrizedIO(2, (identity_kraus(2), IncoherentKraus([0, 0], [1e-8, 0], [0, 0])))
    assert len(io) == 1
