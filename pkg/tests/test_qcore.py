import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from csb import qcore
from csb.exceptions import ValidationError
from csb.noise import make_damping_channels

seeds = st.integers(0, 2**32 - 1)


def test_pauli_basis_is_orthonormal():
    b = qcore.pauli_basis(2)
    gram = np.einsum("iab,jab->ij", b.conj(), b)
    assert np.allclose(gram, np.eye(16))
    assert qcore.pauli_strings(1) == ("I", "X", "Y", "Z")


def test_ptm_of_pauli_x():
    assert np.allclose(qcore.unitary_to_ptm(qcore.X), np.diag([1, 1, -1, -1]))


def test_ptm_of_hadamard_swaps_x_and_z():
    h = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
    expected = np.array([[1, 0, 0, 0], [0, 0, 0, 1], [0, 0, -1, 0], [0, 1, 0, 0]])
    assert np.allclose(qcore.unitary_to_ptm(h), expected)


def test_amplitude_then_phase_damping_ptm():
    # x and y contract by sqrt(1-g)sqrt(1-l), z by 1-g with offset g
    p = 0.1
    expected = np.array([[1, 0, 0, 0], [0, 1 - p, 0, 0], [0, 0, 1 - p, 0], [p, 0, 0, 1 - p]])
    assert np.allclose(qcore.kraus_to_ptm(make_damping_channels(p)), expected, atol=1e-14)


def test_depolarizing_fidelities():
    p = 0.2
    ptm = qcore.depolarizing_ptm(p)
    assert qcore.process_fidelity(np.eye(4), ptm) == pytest.approx(1 - 3 * p / 4)
    assert qcore.average_gate_fidelity(1 - 3 * p / 4, 2) == pytest.approx(1 - p / 2)


def test_stochastic_fidelity_of_unitary_is_one():
    u = qcore.random_unitary(4, np.random.default_rng(1))
    assert qcore.stochastic_fidelity_exact(qcore.unitary_to_ptm(u)) == pytest.approx(1.0)


def test_embed_operator_ordering():
    # qubit 0 is the most significant bit
    op = qcore.embed_operator(qcore.X, (0,), 2)
    assert np.allclose(op, np.kron(qcore.X, np.eye(2)))
    cx = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]])
    rev = qcore.embed_operator(cx, (1, 0), 2)
    assert np.allclose(rev @ np.array([0, 1, 0, 0]), [0, 0, 0, 1])


def test_phase_multiplicities_and_wrap():
    # pi and -pi are the same phase
    assert sorted(qcore.phase_multiplicities([0.0, np.pi, -np.pi, 1.0])) == [1, 1, 2]
    assert qcore.wrap_phase(3 * np.pi) == pytest.approx(np.pi)
    assert qcore.wrap_phase(-np.pi) == pytest.approx(np.pi)


def test_invalid_dimension_rejected():
    with pytest.raises(ValidationError):
        qcore.unitary_to_ptm(np.eye(3))


@settings(max_examples=40, deadline=None)
@given(seeds, st.integers(1, 2))
def test_unitary_ptm_is_orthogonal_and_trace_preserving(seed, n):
    u = qcore.random_unitary(2**n, np.random.default_rng(seed))
    r = qcore.unitary_to_ptm(u)
    assert np.allclose(r.imag if np.iscomplexobj(r) else 0, 0)
    assert np.allclose(r @ r.T, np.eye(4**n), atol=1e-10)
    assert np.allclose(r[0], np.eye(4**n)[0], atol=1e-10)


@settings(max_examples=40, deadline=None)
@given(seeds)
def test_liouville_ptm_round_trip(seed):
    rng = np.random.default_rng(seed)
    u = qcore.random_unitary(4, rng)
    kraus = [np.sqrt(0.7) * u, np.sqrt(0.3) * np.eye(4)]
    sup = qcore.kraus_to_liouville(kraus)
    assert np.allclose(qcore.ptm_to_liouville(qcore.liouville_to_ptm(sup)), sup, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(seeds, st.floats(0.0, 0.5))
def test_channel_spectrum_in_unit_disc_and_conjugate_closed(seed, p):
    rng = np.random.default_rng(seed)
    u = qcore.random_unitary(2, rng)
    kraus = [k @ u for k in make_damping_channels(p)]
    ev = qcore.channel_eigenvalues(qcore.kraus_to_ptm(kraus))
    assert np.all(np.abs(ev) <= 1 + 1e-8)
    assert np.allclose(np.sort_complex(ev), np.sort_complex(ev.conj()), atol=1e-8)


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_state_pauli_vector_round_trip(seed):
    rng = np.random.default_rng(seed)
    psi = qcore.random_unitary(4, rng)[:, 0]
    rho = np.outer(psi, psi.conj())
    v = qcore.state_to_pauli_vector(rho)
    assert np.allclose(qcore.pauli_vector_to_state(v), rho)
    assert v[0] == pytest.approx(0.5)


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_eig_unitary_reconstructs(seed):
    u = qcore.random_unitary(4, np.random.default_rng(seed))
    pairs = qcore.eig_unitary(u)
    v = np.stack([p.vector for p in pairs], axis=1)
    d = np.exp(1j * np.array([p.phase for p in pairs]))
    assert np.allclose(v @ np.diag(d) @ v.conj().T, u, atol=1e-9)


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_process_fidelity_matches_kraus_trace_formula(seed):
    rng = np.random.default_rng(seed)
    u = qcore.random_unitary(2, rng)
    err = qcore.random_unitary(2, rng)
    kraus = [err @ k @ u for k in make_damping_channels(0.05)]
    expected = sum(abs(np.trace(u.conj().T @ k)) ** 2 for k in kraus) / 4
    got = qcore.process_fidelity(qcore.unitary_to_ptm(u), qcore.kraus_to_ptm(kraus))
    assert got == pytest.approx(expected, abs=1e-12)
