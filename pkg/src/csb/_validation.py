"""Input validation helpers shared by the estimators and the simulator."""

from __future__ import annotations

import numpy as np

from .exceptions import ValidationError


def n_qubits_of_dim(dim: int) -> int:
    n = int(round(np.log2(dim))) if dim > 0 else -1
    if n < 0 or 2**n != dim:
        raise ValidationError(f"dimension {dim} is not a power of two")
    return n


def check_square(a, name: str = "matrix") -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValidationError(f"{name} must be square, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValidationError(f"{name} contains non-finite entries")
    return a


def check_unitary(u, atol: float = 1e-8) -> np.ndarray:
    """Return ``u`` as a complex array after checking ``u u^dagger = I``."""
    u = check_square(u, "unitary")
    n_qubits_of_dim(u.shape[0])
    dev = np.max(np.abs(u @ u.conj().T - np.eye(u.shape[0])))
    if dev > atol:
        raise ValidationError(f"matrix is not unitary (deviation {dev:.2e} > {atol:.0e})")
    return u


def check_density_matrix(rho, atol: float = 1e-9) -> np.ndarray:
    rho = check_square(rho, "density matrix")
    if np.max(np.abs(rho - rho.conj().T)) > atol:
        raise ValidationError("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1) > atol:
        raise ValidationError(f"density matrix has trace {np.trace(rho).real:.12f}")
    if np.min(np.linalg.eigvalsh(rho)) < -atol:
        raise ValidationError("density matrix has a negative eigenvalue")
    return rho


def check_kraus(kraus, atol: float = 1e-10) -> list[np.ndarray]:
    ops = [check_square(k, "Kraus operator") for k in kraus]
    if not ops:
        raise ValidationError("empty Kraus set")
    dim = ops[0].shape[0]
    if any(k.shape != (dim, dim) for k in ops):
        raise ValidationError("Kraus operators have mismatched shapes")
    total = sum(k.conj().T @ k for k in ops)
    dev = np.max(np.abs(total - np.eye(dim)))
    if dev > atol:
        raise ValidationError(f"Kraus set is not trace preserving (deviation {dev:.2e})")
    return ops


def check_ptm(ptm, atol: float = 1e-10) -> np.ndarray:
    """Check a Pauli transfer matrix: real, d^2 x d^2, first row (1, 0, ..., 0)."""
    m = np.asarray(ptm)
    if np.iscomplexobj(m):
        if np.max(np.abs(m.imag), initial=0.0) > 1e-9:
            raise ValidationError("PTM has a non-negligible imaginary part")
        m = m.real
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValidationError(f"PTM must be square, got shape {m.shape}")
    d = int(round(np.sqrt(m.shape[0])))
    if d * d != m.shape[0]:
        raise ValidationError("PTM size is not a perfect square")
    n_qubits_of_dim(d)
    first = np.zeros(m.shape[0])
    first[0] = 1.0
    if np.max(np.abs(m[0] - first)) > atol:
        raise ValidationError("PTM first row is not (1, 0, ..., 0); channel is not trace preserving")
    return m


def check_signal_values(values, min_length: int = 8) -> np.ndarray:
    v = np.asarray(values)
    if v.ndim != 1:
        raise ValidationError(f"signal must be one dimensional, got shape {v.shape}")
    if len(v) < min_length:
        raise ValidationError(f"signal needs at least {min_length} points, got {len(v)}")
    if not np.all(np.isfinite(v)):
        raise ValidationError("signal contains non-finite values")
    return v


def check_probability(p: float, name: str, lo: float = 0.0, hi: float = 1.0) -> float:
    p = float(p)
    if not (lo <= p <= hi) or not np.isfinite(p):
        raise ValidationError(f"{name}={p} outside [{lo}, {hi}]")
    return p
