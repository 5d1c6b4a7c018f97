"""Dense linear algebra for states, unitaries, Kraus channels and Pauli transfer matrices.

Conventions used everywhere in the package:

* Qubit 0 is the most significant bit of a computational-basis index.
* Operators are vectorised row-major, so ``vec(A X B) = (A kron B^T) vec(X)``.
* Pauli transfer matrices (PTMs) are taken in the normalised basis ``P / sqrt(d)``
  with Pauli strings ordered base-4 (I, X, Y, Z), qubit 0 most significant.
  In that basis the PTM of a unitary channel is a real orthogonal matrix and the
  process fidelity is the plain matrix inner product ``tr(R_ideal^T R_noisy) / d^2``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg

from ._validation import check_kraus, check_ptm, check_unitary, n_qubits_of_dim
from .exceptions import ValidationError

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = (I2, X, Y, Z)
PAULI_LABELS = "IXYZ"

#: Eigenvalue clustering tolerance (radians) used to detect degenerate phases.
PHASE_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class EigenPair:
    """An eigenphase ``phase`` in (-pi, pi] and its unit eigenvector."""

    phase: float
    vector: np.ndarray


def wrap_phase(x):
    """Wrap angles to (-pi, pi]."""
    w = np.mod(np.asarray(x, dtype=float) + np.pi, 2 * np.pi) - np.pi
    w = np.where(w <= -np.pi + 1e-15, np.pi, w)
    return float(w) if np.ndim(w) == 0 else w


def kron_all(mats) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for m in mats:
        out = np.kron(out, m)
    return out


@lru_cache(maxsize=None)
def pauli_strings(n: int) -> tuple[str, ...]:
    return tuple("".join(p) for p in itertools.product(PAULI_LABELS, repeat=n))


@lru_cache(maxsize=None)
def pauli_basis(n: int) -> np.ndarray:
    """Normalised Pauli operators ``P / sqrt(2^n)`` stacked as ``(4^n, 2^n, 2^n)``."""
    d = 2**n
    mats = [kron_all(PAULIS[PAULI_LABELS.index(c)] for c in s) for s in pauli_strings(n)]
    basis = np.array(mats) / np.sqrt(d)
    basis.setflags(write=False)
    return basis


@lru_cache(maxsize=None)
def _pauli_change_of_basis(n: int) -> np.ndarray:
    # columns are row-major vectorisations of the normalised Pauli operators
    b = pauli_basis(n)
    t = b.reshape(len(b), -1).T.copy()
    t.setflags(write=False)
    return t


@lru_cache(maxsize=None)
def pauli_commutation_signs(n: int) -> np.ndarray:
    """``S[p, q] = +1`` if Pauli strings ``p`` and ``q`` commute, ``-1`` otherwise.

    Row ``p`` is the diagonal of the PTM of conjugation by Pauli ``p``.
    """
    strings = pauli_strings(n)
    m = len(strings)
    anti = np.zeros((m, m), dtype=int)
    for i, s in enumerate(strings):
        for j, t in enumerate(strings):
            anti[i, j] = sum(a != "I" and b != "I" and a != b for a, b in zip(s, t)) % 2
    signs = 1.0 - 2.0 * anti
    signs.setflags(write=False)
    return signs


def embed_operator(op: np.ndarray, qubits, n: int) -> np.ndarray:
    """Embed a ``k``-qubit operator acting on ``qubits`` into the ``n``-qubit space."""
    qubits = tuple(qubits)
    k = len(qubits)
    op = np.asarray(op, dtype=complex)
    if op.shape != (2**k, 2**k):
        raise ValidationError(f"operator shape {op.shape} does not match {k} qubits")
    if qubits == tuple(range(n)):
        return op
    rest = [q for q in range(n) if q not in qubits]
    full = np.kron(op, np.eye(2 ** len(rest)))
    # full acts on ordering (qubits..., rest...); permute back to 0..n-1
    order = list(qubits) + rest
    perm = np.argsort(order)
    t = full.reshape([2] * (2 * n))
    t = t.transpose(list(perm) + [n + p for p in perm])
    return t.reshape(2**n, 2**n)


def kraus_to_liouville(kraus) -> np.ndarray:
    """Row-major Liouville superoperator ``sum_k E_k kron conj(E_k)``."""
    return sum(np.kron(k, k.conj()) for k in kraus)


def liouville_to_ptm(sup: np.ndarray) -> np.ndarray:
    d2 = sup.shape[0]
    n = n_qubits_of_dim(int(round(np.sqrt(d2))))
    t = _pauli_change_of_basis(n)
    r = t.conj().T @ sup @ t
    if np.max(np.abs(r.imag)) > 1e-9:
        raise ValidationError("superoperator is not Hermiticity preserving")
    return np.ascontiguousarray(r.real)


def ptm_to_liouville(ptm: np.ndarray) -> np.ndarray:
    d2 = ptm.shape[0]
    n = n_qubits_of_dim(int(round(np.sqrt(d2))))
    t = _pauli_change_of_basis(n)
    return t @ ptm @ t.conj().T


def kraus_to_ptm(kraus) -> np.ndarray:
    """PTM of the channel ``rho -> sum_k E_k rho E_k^dagger``."""
    ops = check_kraus(kraus)
    return liouville_to_ptm(kraus_to_liouville(ops))


def unitary_to_ptm(u) -> np.ndarray:
    u = np.asarray(u, dtype=complex)
    return liouville_to_ptm(np.kron(u, u.conj()))


def state_to_pauli_vector(rho) -> np.ndarray:
    """Coordinates ``tr(P_j rho) / sqrt(d)`` of an operator in the normalised Pauli basis."""
    rho = np.asarray(rho, dtype=complex)
    n = n_qubits_of_dim(rho.shape[0])
    v = np.einsum("kij,ji->k", pauli_basis(n), rho)
    return v.real


def pauli_vector_to_state(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    n = n_qubits_of_dim(int(round(np.sqrt(len(v)))))
    return np.einsum("k,kij->ij", v, pauli_basis(n))


def _orthonormal_basis(vecs: np.ndarray, m: int) -> np.ndarray:
    """Deterministic orthonormal basis of ``span(vecs)`` (``m`` vectors).

    Gram-Schmidt is run over the columns of the subspace projector, in index
    order, and each vector's first non-negligible entry is made real positive.
    """
    proj = vecs @ vecs.conj().T
    basis: list[np.ndarray] = []
    for j in range(proj.shape[1]):
        v = proj[:, j].copy()
        for _ in range(2):
            for b in basis:
                v -= b * (b.conj() @ v)
        nrm = np.linalg.norm(v)
        if nrm > 1e-6:
            basis.append(v / nrm)
        if len(basis) == m:
            break
    out = []
    for v in basis:
        k = int(np.argmax(np.abs(v) > 1e-8))
        out.append(v * np.exp(-1j * np.angle(v[k])))
    return np.array(out).T


def eig_unitary(u) -> list[EigenPair]:
    """Eigenphases and an orthonormal eigenbasis of a unitary matrix.

    Phases lie in (-pi, pi] and are sorted ascending. Degenerate eigenspaces
    (phases within ``PHASE_TOL``) receive a deterministic orthonormal basis, so the
    result is reproducible for a fixed input.

    Raises:
        ValidationError: if ``u`` deviates from unitarity by more than 1e-8.
    """
    u = check_unitary(u)
    t, zmat = scipy.linalg.schur(u, output="complex")
    phases = wrap_phase(np.angle(np.diag(t)))
    phases = np.atleast_1d(phases)
    order = np.argsort(phases, kind="stable")
    clusters: list[list[int]] = []
    for i in order:
        if clusters and abs(wrap_phase(phases[i] - phases[clusters[-1][0]])) < PHASE_TOL:
            clusters[-1].append(i)
        else:
            clusters.append([i])
    if len(clusters) > 1 and abs(wrap_phase(phases[clusters[0][0]] - phases[clusters[-1][0]])) < PHASE_TOL:
        clusters[-1].extend(clusters.pop(0))
    keyed: list[tuple[float, EigenPair]] = []
    for cl in clusters:
        basis = _orthonormal_basis(zmat[:, cl], len(cl))
        members = []
        for j in range(basis.shape[1]):
            v = basis[:, j]
            members.append(EigenPair(phase=wrap_phase(np.angle(v.conj() @ u @ v)), vector=v))
        key = members[0].phase
        keyed.extend((key, m) for m in members)
    # stable sort keeps the Gram-Schmidt order inside a degenerate cluster
    keyed.sort(key=lambda kv: kv[0])
    return [m for _, m in keyed]


def phase_multiplicities(phases, tol: float = PHASE_TOL) -> list[int]:
    """Multiplicities of distinct eigenphases (circular comparison)."""
    ph = np.sort(wrap_phase(np.asarray(phases, dtype=float)))
    ph = np.atleast_1d(ph)
    counts: list[int] = []
    last = None
    for p in ph:
        if last is not None and abs(wrap_phase(p - last)) < tol:
            counts[-1] += 1
        else:
            counts.append(1)
            last = p
    if len(counts) > 1 and abs(wrap_phase(ph[0] - ph[-1])) < tol:
        counts[0] += counts.pop()
    return counts


def channel_eigenvalues(ptm) -> np.ndarray:
    """All ``d^2`` eigenvalues of a channel given as a PTM.

    The PTM is real, so non-real eigenvalues come in exact conjugate pairs.
    """
    m = check_ptm(ptm, atol=1e-8)
    return np.linalg.eigvals(m)


def process_fidelity(ideal, noisy) -> float:
    """``tr(ideal^dagger noisy) / d^2`` for two PTMs of equal size, clipped to [0, 1]."""
    a = np.asarray(ideal)
    b = np.asarray(noisy)
    if a.shape != b.shape:
        raise ValidationError(f"PTM shapes differ: {a.shape} vs {b.shape}")
    val = np.trace(a.conj().T @ b) / a.shape[0]
    if abs(np.imag(val)) > 1e-9:
        raise ValidationError(f"process fidelity has imaginary residue {np.imag(val):.2e}")
    return float(np.clip(np.real(val), 0.0, 1.0))


def average_gate_fidelity(f: float, d: int) -> float:
    """Average gate fidelity ``(d F + 1) / (d + 1)`` from process fidelity ``F``."""
    if not 0.0 <= f <= 1.0:
        raise ValidationError(f"process fidelity {f} outside [0, 1]")
    if d < 2:
        raise ValidationError(f"dimension must be at least 2, got {d}")
    return (d * f + 1.0) / (d + 1.0)


def stochastic_fidelity_exact(noisy) -> float:
    """Root mean square of the moduli of all channel eigenvalues."""
    z = channel_eigenvalues(noisy)
    return float(np.sqrt(np.mean(np.abs(z) ** 2)))


def depolarizing_ptm(p: float, n: int = 1) -> np.ndarray:
    """Global depolarizing PTM ``diag(1, 1-p, ..., 1-p)``."""
    r = np.eye(4**n) * (1.0 - p)
    r[0, 0] = 1.0
    return r


def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary via QR of a complex Ginibre matrix."""
    g = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(g)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def global_phase_distance(u, v) -> float:
    """Max-norm distance between ``u`` and ``v`` after optimal global phase alignment."""
    u = np.asarray(u, dtype=complex)
    v = np.asarray(v, dtype=complex)
    ov = np.vdot(v, u)
    ph = ov / abs(ov) if abs(ov) > 1e-15 else 1.0
    return float(np.max(np.abs(u - ph * v)))
