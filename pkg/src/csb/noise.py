"""Gate-level noise models and ground-truth fidelities.

Every non-virtual gate is followed by amplitude-then-phase damping on each
qubit it touches. Two-qubit gates additionally suffer a coherent
``fsim(theta2, phi2)`` error after the damping. Parametrised rotations
(``rx``/``ry``/``rz``) are implemented with their angle shifted by
``rotation_overshoot``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Literal

import numpy as np

from . import qcore
from ._validation import check_kraus
from .circuits import ROTATION_GATES, Circuit, Gate, fsim_matrix, rz_matrix
from .exceptions import ValidationError

__all__ = [
    "NoiseModel",
    "GroundTruth",
    "make_damping_channels",
    "make_coherent_error",
    "noisify_circuit",
    "NoisyCircuit",
    "oracle_fidelities",
]


@dataclass(frozen=True)
class NoiseModel:
    """Noise parameters, all angles in radians.

    Attributes:
        p1: damping probability after single-qubit gates.
        p2: damping probability applied to each qubit of a two-qubit gate.
        theta2, phi2: coherent ``fsim`` error after two-qubit gates.
        rotation_overshoot: angle added to every ``rx``/``ry``/``rz`` gate.
    """

    p1: float = 0.0
    p2: float = 0.0
    theta2: float = 0.0
    phi2: float = 0.0
    rotation_overshoot: float = 0.0

    def __post_init__(self):
        for name in ("p1", "p2"):
            v = float(getattr(self, name))
            if not np.isfinite(v) or not 0.0 <= v <= 0.5:
                raise ValidationError(f"{name}={v} outside [0, 0.5]")
        for name in ("theta2", "phi2", "rotation_overshoot"):
            v = float(getattr(self, name))
            if not np.isfinite(v) or abs(v) >= np.pi / 2:
                raise ValidationError(f"|{name}|={abs(v)} must be below pi/2")

    @classmethod
    def uniform(cls, p: float, theta2: float = 0.0, phi2: float = 0.0, rotation_overshoot: float = 0.0):
        """Same damping probability on one- and two-qubit gates."""
        return cls(p, p, theta2, phi2, rotation_overshoot)

    @property
    def is_noiseless(self) -> bool:
        return not any((self.p1, self.p2, self.theta2, self.phi2, self.rotation_overshoot))

    @property
    def has_coherent_error(self) -> bool:
        return bool(self.theta2 or self.phi2 or self.rotation_overshoot)

    def without_coherent_error(self) -> "NoiseModel":
        return replace(self, theta2=0.0, phi2=0.0, rotation_overshoot=0.0)


def make_damping_channels(p: float) -> list[np.ndarray]:
    """Kraus operators of amplitude damping (``gamma = p``) followed by phase damping (``lambda = p``)."""
    p = float(p)
    if not np.isfinite(p) or not 0.0 <= p <= 0.5:
        raise ValidationError(f"damping probability {p} outside [0, 0.5]")
    amp = [np.array([[1, 0], [0, np.sqrt(1 - p)]], dtype=complex), np.array([[0, np.sqrt(p)], [0, 0]], dtype=complex)]
    phase = [np.array([[1, 0], [0, np.sqrt(1 - p)]], dtype=complex), np.array([[0, 0], [0, np.sqrt(p)]], dtype=complex)]
    kraus = [b @ a for b in phase for a in amp]
    kraus = [k for k in kraus if np.any(np.abs(k) > 0)]
    return check_kraus(kraus)


def make_coherent_error(kind: Literal["rz", "fsim"], theta: float, phi: float = 0.0) -> np.ndarray:
    """``Rz(theta)`` or ``fsim(theta, phi)`` error unitary."""
    if not (np.isfinite(theta) and np.isfinite(phi)):
        raise ValidationError("error angles must be finite")
    if kind == "rz":
        return rz_matrix(theta)
    if kind == "fsim":
        return fsim_matrix(theta, phi)
    raise ValidationError(f"unknown coherent error kind {kind!r}")


def implemented_gate(gate: Gate, model: NoiseModel) -> Gate:
    """The gate actually executed, i.e. with the rotation overshoot applied."""
    if model.rotation_overshoot and gate.name in ROTATION_GATES and not gate.frame:
        return gate.with_params(gate.params[0] + model.rotation_overshoot)
    return gate


def gate_kraus(gate: Gate, model: NoiseModel | None) -> list[np.ndarray]:
    """Kraus operators of the noisy gate on its own qubits (qubit order as in ``gate.qubits``)."""
    if model is None or gate.frame:
        return [gate.matrix()]
    return list(_gate_kraus_cached(gate.name, gate.params, gate.arity, model))


@lru_cache(maxsize=4096)
def _gate_kraus_cached(name: str, params: tuple, arity: int, model: NoiseModel) -> tuple[np.ndarray, ...]:
    gate = implemented_gate(Gate(name, tuple(range(arity)), params), model)
    u = gate.matrix()
    p = model.p1 if arity == 1 else model.p2
    if arity > 2:
        raise ValidationError("noise is defined for one- and two-qubit gates only")
    damp = make_damping_channels(p) if p > 0 else [np.eye(2, dtype=complex)]
    if arity == 1:
        ops = [k @ u for k in damp]
    else:
        coh = fsim_matrix(model.theta2, model.phi2)
        ops = [coh @ np.kron(a, b) @ u for a in damp for b in damp]
    return tuple(ops)


@lru_cache(maxsize=4096)
def _gate_liouville_cached(name: str, params: tuple, arity: int, model: NoiseModel | None) -> np.ndarray:
    if model is None:
        u = Gate(name, tuple(range(arity)), params).matrix()
        s = np.kron(u, u.conj())
    else:
        s = qcore.kraus_to_liouville(_gate_kraus_cached(name, params, arity, model))
    s.setflags(write=False)
    return s


def gate_liouville(gate: Gate, model: NoiseModel | None) -> np.ndarray:
    """Row-major Liouville superoperator of the noisy gate on its own qubits."""
    if gate.frame:
        model = None
    return _gate_liouville_cached(gate.name, gate.params, gate.arity, model)


@dataclass(frozen=True)
class NoisyCircuit:
    """A circuit paired with the noise model that defines its physical semantics."""

    circuit: Circuit
    model: NoiseModel

    @property
    def ideal(self) -> Circuit:
        return self.circuit

    def kraus_by_gate(self) -> list[tuple[Gate, list[np.ndarray]]]:
        return [(g, gate_kraus(g, self.model)) for g in self.circuit.gates()]


def noisify_circuit(circ: Circuit, model: NoiseModel) -> NoisyCircuit:
    """Attach ``model`` to ``circ``; the ideal circuit stays available as ``.ideal``."""
    if not isinstance(model, NoiseModel):
        raise ValidationError("model must be a NoiseModel")
    return NoisyCircuit(circ, model)


@dataclass(frozen=True)
class GroundTruth:
    process_fidelity: float
    stochastic_fidelity: float
    method: Literal["exact-channel", "product-of-components"]

    @property
    def process_infidelity(self) -> float:
        return 1.0 - self.process_fidelity

    @property
    def stochastic_infidelity(self) -> float:
        return 1.0 - self.stochastic_fidelity


def oracle_fidelities(target: Circuit, model: NoiseModel | None, max_exact_qubits: int = 3) -> GroundTruth:
    """Exact fidelities from the composed channel, or a per-gate product above ``max_exact_qubits``.

    Virtual frame gates are ignored by the product method since they carry no noise.
    """
    from .simulator import ptm_of_circuit

    if target.n_qubits <= max_exact_qubits:
        ideal = ptm_of_circuit(target, None, max_qubits=max_exact_qubits)
        noisy = ptm_of_circuit(target, model, max_qubits=max_exact_qubits)
        return GroundTruth(
            qcore.process_fidelity(ideal, noisy),
            qcore.stochastic_fidelity_exact(noisy),
            "exact-channel",
        )
    f_proc = 1.0
    f_sto = 1.0
    for g in target.gates():
        if g.frame or model is None:
            continue
        local = Gate(g.name, tuple(range(g.arity)), g.params)
        ideal = qcore.unitary_to_ptm(local.matrix())
        noisy = qcore.liouville_to_ptm(gate_liouville(local, model))
        f_proc *= qcore.process_fidelity(ideal, noisy)
        f_sto *= qcore.stochastic_fidelity_exact(noisy)
    return GroundTruth(f_proc, f_sto, "product-of-components")
