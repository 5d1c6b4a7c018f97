"""Circuit data model, target builders and circuit transformations.

A :class:`Circuit` is an immutable sequence of layers. A layer is *easy* when
it only holds single-qubit gates and *hard* when it holds multi-qubit gates;
randomized compiling relies on that split.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from . import qcore
from .exceptions import UnsupportedCycleError, ValidationError


# ---------------------------------------------------------------------------
# gate matrices


def rz_matrix(theta: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])


def rx_matrix(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -1j * s], [-1j * s, c]])


def ry_matrix(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def u3_matrix(theta: float, phi: float, lam: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array(
        [[c, -np.exp(1j * lam) * s], [np.exp(1j * phi) * s, np.exp(1j * (phi + lam)) * c]]
    )


def fsim_matrix(theta: float, phi: float) -> np.ndarray:
    """Fermionic simulation gate with iswap angle ``theta`` and controlled phase ``phi``."""
    c, s = np.cos(theta), np.sin(theta)
    return np.array(
        [
            [1, 0, 0, 0],
            [0, c, -1j * s, 0],
            [0, -1j * s, c, 0],
            [0, 0, 0, np.exp(1j * phi)],
        ],
        dtype=complex,
    )


def zz_matrix(theta: float) -> np.ndarray:
    """``exp(-i theta/2 Z kron Z)``."""
    return np.diag(np.exp(-0.5j * theta * np.array([1, -1, -1, 1])))


_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
_S = np.diag([1, 1j])
_T = np.diag([1, np.exp(0.25j * np.pi)])
_CX = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)
_CZ = np.diag([1, 1, 1, -1]).astype(complex)
TOFFOLI = np.eye(8, dtype=complex)
TOFFOLI[6:, 6:] = [[0, 1], [1, 0]]

# name -> (number of qubits, number of parameters, matrix builder)
GATES = {
    "id": (1, 0, lambda: np.eye(2, dtype=complex)),
    "x": (1, 0, lambda: qcore.X),
    "y": (1, 0, lambda: qcore.Y),
    "z": (1, 0, lambda: qcore.Z),
    "h": (1, 0, lambda: _H),
    "s": (1, 0, lambda: _S),
    "sdg": (1, 0, lambda: _S.conj()),
    "t": (1, 0, lambda: _T),
    "tdg": (1, 0, lambda: _T.conj()),
    "rx": (1, 1, rx_matrix),
    "ry": (1, 1, ry_matrix),
    "rz": (1, 1, rz_matrix),
    "u3": (1, 3, u3_matrix),
    "cx": (2, 0, lambda: _CX),
    "cz": (2, 0, lambda: _CZ),
    "zz": (2, 1, zz_matrix),
    "fsim": (2, 2, fsim_matrix),
}

#: single-qubit gates that are diagonal, with their equivalent Z-rotation angle
_Z_ANGLE = {"id": 0.0, "z": np.pi, "s": np.pi / 2, "sdg": -np.pi / 2, "t": np.pi / 4, "tdg": -np.pi / 4}
#: parametrised rotations that a rotation over/under-shoot applies to
ROTATION_GATES = frozenset({"rx", "ry", "rz"})
_DIAGONAL = frozenset(_Z_ANGLE) | {"rz", "zz", "cz"}


@dataclass(frozen=True)
class Gate:
    """A gate applied to ``qubits``.

    ``frame`` marks a Pauli-frame gate inserted by randomized compiling into an
    otherwise idle slot; such gates are treated as virtual and carry no noise.
    """

    name: str
    qubits: tuple[int, ...]
    params: tuple[float, ...] = ()
    frame: bool = False

    def __post_init__(self):
        if self.name not in GATES:
            raise ValidationError(f"unknown gate {self.name!r}")
        nq, npar, _ = GATES[self.name]
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        if len(self.qubits) != nq:
            raise ValidationError(f"gate {self.name} acts on {nq} qubits, got {self.qubits}")
        if len(set(self.qubits)) != nq:
            raise ValidationError(f"gate {self.name} has repeated qubits {self.qubits}")
        if len(self.params) != npar:
            raise ValidationError(f"gate {self.name} takes {npar} parameters, got {self.params}")

    @property
    def arity(self) -> int:
        return len(self.qubits)

    @property
    def is_diagonal(self) -> bool:
        return self.name in _DIAGONAL

    def matrix(self) -> np.ndarray:
        return np.asarray(GATES[self.name][2](*self.params), dtype=complex)

    def with_params(self, *params: float) -> "Gate":
        return replace(self, params=tuple(params))


Layer = tuple[Gate, ...]


def _layer_is_hard(layer: Sequence[Gate]) -> bool:
    return any(g.arity > 1 for g in layer)


@dataclass(frozen=True)
class Circuit:
    """Ordered layers of gates on ``n_qubits`` qubits.

    Within a layer the gates act on disjoint qubits. ``kind`` records which
    target builder produced the circuit (metadata only).
    """

    n_qubits: int
    layers: tuple[Layer, ...] = ()
    kind: str = ""

    def __post_init__(self):
        if self.n_qubits < 1:
            raise ValidationError("a circuit needs at least one qubit")
        layers = tuple(tuple(layer) for layer in self.layers)
        for layer in layers:
            used: set[int] = set()
            for g in layer:
                if not isinstance(g, Gate):
                    raise ValidationError(f"layer entry {g!r} is not a Gate")
                if any(q < 0 or q >= self.n_qubits for q in g.qubits):
                    raise ValidationError(f"gate {g} outside a {self.n_qubits}-qubit circuit")
                if used & set(g.qubits):
                    raise ValidationError(f"layer has overlapping gates: {layer}")
                used |= set(g.qubits)
        object.__setattr__(self, "layers", layers)

    @classmethod
    def from_gates(cls, n_qubits: int, gates: Iterable[Gate], kind: str = "") -> "Circuit":
        """Pack gates in the given order into easy/hard layers without reordering."""
        layers: list[list[Gate]] = []
        used: set[int] = set()
        for g in gates:
            hard = g.arity > 1
            if (
                not layers
                or used & set(g.qubits)
                or _layer_is_hard(layers[-1]) != hard
            ):
                layers.append([])
                used = set()
            layers[-1].append(g)
            used |= set(g.qubits)
        return cls(n_qubits, tuple(tuple(layer) for layer in layers), kind)

    def gates(self) -> list[Gate]:
        return [g for layer in self.layers for g in layer]

    @property
    def depth(self) -> int:
        return len(self.layers)

    def layer_kinds(self) -> list[str]:
        return ["hard" if _layer_is_hard(layer) else "easy" for layer in self.layers]

    @property
    def n_hard_layers(self) -> int:
        return sum(k == "hard" for k in self.layer_kinds())

    def is_diagonal(self) -> bool:
        return all(g.is_diagonal for g in self.gates())

    def __add__(self, other: "Circuit") -> "Circuit":
        if other.n_qubits != self.n_qubits:
            raise ValidationError("cannot concatenate circuits of different widths")
        return Circuit(self.n_qubits, self.layers + other.layers, self.kind or other.kind)

    def normalized(self) -> "Circuit":
        """Split layers that mix single- and multi-qubit gates (easy part first)."""
        out: list[Layer] = []
        for layer in self.layers:
            easy = tuple(g for g in layer if g.arity == 1)
            hard = tuple(g for g in layer if g.arity > 1)
            out.extend(part for part in (easy, hard) if part)
        return Circuit(self.n_qubits, tuple(out), self.kind)

    def apply_to_state(self, psi: np.ndarray) -> np.ndarray:
        """Statevector simulation of the ideal circuit."""
        n = self.n_qubits
        t = np.asarray(psi, dtype=complex).reshape([2] * n)
        for g in self.gates():
            t = _apply_to_tensor(t, g.matrix(), g.qubits)
        return t.reshape(-1)

    def unitary(self, max_qubits: int = 10) -> np.ndarray:
        """Dense unitary of the ideal circuit."""
        if self.n_qubits > max_qubits:
            raise ValidationError(f"dense unitary capped at {max_qubits} qubits")
        d = 2**self.n_qubits
        cols = np.eye(d, dtype=complex).reshape([d] + [2] * self.n_qubits)
        t = cols
        for g in self.gates():
            t = _apply_to_tensor(t, g.matrix(), tuple(q + 1 for q in g.qubits))
        return t.reshape(d, d).T

    def diagonal_phases(self, bitstrings: np.ndarray) -> np.ndarray:
        """Eigenphases ``arg <x|U|x>`` of a diagonal circuit for rows of 0/1 ``bitstrings``."""
        if not self.is_diagonal():
            raise ValidationError("circuit is not diagonal")
        bits = np.atleast_2d(np.asarray(bitstrings, dtype=int))
        phase = np.zeros(len(bits))
        for g in self.gates():
            diag = np.diag(g.matrix())
            idx = np.zeros(len(bits), dtype=int)
            for q in g.qubits:
                idx = 2 * idx + bits[:, q]
            phase += np.angle(diag[idx])
        return qcore.wrap_phase(phase)


def _apply_to_tensor(t: np.ndarray, mat: np.ndarray, axes: tuple[int, ...]) -> np.ndarray:
    k = len(axes)
    op = mat.reshape([2] * (2 * k))
    t = np.tensordot(op, t, axes=(list(range(k, 2 * k)), list(axes)))
    return np.moveaxis(t, list(range(k)), list(axes))


# ---------------------------------------------------------------------------
# target builders


def ring_edges(n: int) -> list[tuple[int, int]]:
    if n < 2:
        raise ValidationError("an Ising ring needs at least two qubits")
    if n == 2:
        return [(0, 1)]
    return [(i, (i + 1) % n) for i in range(n)]


def _edge_layers(edges: Sequence[tuple[int, int]], weights) -> list[Layer]:
    layers: list[list[Gate]] = []
    used: list[set[int]] = []
    for (a, b), w in zip(edges, weights):
        for layer, u in zip(layers, used):
            if a not in u and b not in u:
                layer.append(Gate("zz", (a, b), (w,)))
                u |= {a, b}
                break
        else:
            layers.append([Gate("zz", (a, b), (w,))])
            used.append({a, b})
    return [tuple(layer) for layer in layers]


def ising_energy(bits, h, couplings, edges) -> np.ndarray:
    """Classical energy of ``sum h_i Z_i + sum J_e Z_a Z_b`` for rows of 0/1 ``bits``."""
    s = 1 - 2 * np.atleast_2d(np.asarray(bits, dtype=int))
    e = s @ np.asarray(h, dtype=float)
    for (a, b), j in zip(edges, couplings):
        e = e + j * s[:, a] * s[:, b]
    return e


def _toffoli_layers() -> list[Layer]:
    # qelib1 ccx with ``h c`` and ``t a`` commuted to the end so that the
    # final easy layer touches both qubit 0 and qubit 2
    return [
        (Gate("h", (2,)),),
        (Gate("cx", (1, 2)),),
        (Gate("tdg", (2,)),),
        (Gate("cx", (0, 2)),),
        (Gate("t", (2,)),),
        (Gate("cx", (1, 2)),),
        (Gate("tdg", (2,)),),
        (Gate("cx", (0, 2)),),
        (Gate("t", (1,)), Gate("t", (2,))),
        (Gate("cx", (0, 1)),),
        (Gate("tdg", (1,)),),
        (Gate("cx", (0, 1)),),
        (Gate("t", (0,)), Gate("h", (2,))),
    ]


def build_target(kind: str, **params) -> Circuit:
    """Build a benchmark target.

    Args:
        kind: ``"rz"`` (param ``theta``), ``"fsim"`` (``theta``, ``phi``),
            ``"toffoli"`` (no params) or ``"ising"`` (``h``, ``J``, ``dt``; ``J``
            may be a scalar or one coupling per ring edge).

    Returns:
        Circuit: the target with ``kind`` metadata set.
    """
    if kind == "rz":
        theta = float(params.pop("theta", np.pi / 4))
        _no_extra(params)
        return Circuit(1, ((Gate("rz", (0,), (theta,)),),), "rz")
    if kind == "fsim":
        theta = float(params.pop("theta", np.pi / 4))
        phi = float(params.pop("phi", np.pi / 2))
        _no_extra(params)
        return Circuit(2, ((Gate("fsim", (0, 1), (theta, phi)),),), "fsim")
    if kind == "toffoli":
        _no_extra(params)
        return Circuit(3, tuple(_toffoli_layers()), "toffoli")
    if kind == "ising":
        h = np.asarray(params.pop("h"), dtype=float)
        n = len(h)
        edges = ring_edges(n)
        couplings = np.broadcast_to(np.asarray(params.pop("J"), dtype=float), (len(edges),))
        dt = float(params.pop("dt", 1.0))
        _no_extra(params)
        if not (np.all(np.isfinite(h)) and np.all(np.isfinite(couplings)) and np.isfinite(dt)):
            raise ValidationError("Ising parameters must be finite")
        easy = tuple(Gate("rz", (i,), (2 * h[i] * dt,)) for i in range(n))
        hard = _edge_layers(edges, 2 * couplings * dt)
        return Circuit(n, (easy, *hard), "ising")
    raise ValidationError(f"unknown target kind {kind!r}")


def _no_extra(params: dict):
    if params:
        raise ValidationError(f"unexpected parameters {sorted(params)}")


def random_ising_params(n: int, rng: np.random.Generator, scale: float = 1.0) -> dict:
    """Fields and ring couplings drawn uniformly from ``[-scale, scale]``."""
    return {
        "h": rng.uniform(-scale, scale, n),
        "J": rng.uniform(-scale, scale, len(ring_edges(n))),
    }


# ---------------------------------------------------------------------------
# state preparation


def _bits(x, n: int | None = None) -> tuple[int, ...]:
    if isinstance(x, str):
        out = tuple(int(c) for c in x)
    else:
        out = tuple(int(c) for c in x)
    if any(b not in (0, 1) for b in out) or (n is not None and len(out) != n):
        raise ValidationError(f"invalid bitstring {x!r}")
    return out


def prepare_pair_state(x, y) -> Circuit:
    """Circuit mapping ``|0...0>`` to ``(|x> + |y>) / sqrt(2)``.

    ``X`` on qubits where both strings are 1, ``H`` on the first differing
    qubit, a CNOT chain over the remaining differing qubits and ``X``
    corrections. When ``x == y`` the basis state ``|x>`` is prepared.
    """
    xb, yb = _bits(x), _bits(y)
    n = len(xb)
    if len(yb) != n or n == 0:
        raise ValidationError("bitstrings must be non-empty and of equal length")
    diff = [i for i in range(n) if xb[i] != yb[i]]
    # the branch reached from |0...0> on the differing qubits should need the fewest flips
    if sum(xb[i] for i in diff) > sum(yb[i] for i in diff):
        xb, yb = yb, xb
    first = [Gate("x", (i,)) for i in range(n) if xb[i] == yb[i] == 1]
    if not diff:
        return Circuit.from_gates(n, first, "prep")
    gates = first + [Gate("h", (diff[0],))]
    gates += [Gate("cx", (a, b)) for a, b in zip(diff, diff[1:])]
    gates += [Gate("x", (i,)) for i in diff if xb[i] == 1]
    return Circuit.from_gates(n, gates, "prep")


def _ucr(axis: str, angles: np.ndarray, controls: tuple[int, ...], target: int, tol: float) -> list[Gate]:
    # uniformly controlled rotation; angles indexed by control value, controls[0] most significant
    if not controls:
        return [Gate(axis, (target,), (float(angles[0]),))] if abs(angles[0]) > tol else []
    half = len(angles) // 2
    a0, a1 = angles[:half], angles[half:]
    mean, diff = (a0 + a1) / 2, (a0 - a1) / 2
    c, rest = controls[0], controls[1:]
    inner = _ucr(axis, diff, rest, target, tol)
    out = []
    if inner:
        out = [Gate("cx", (c, target)), *inner, Gate("cx", (c, target))]
    return out + _ucr(axis, mean, rest, target, tol)


def synthesize_state(psi, tol: float = 1e-12, max_qubits: int = 3) -> Circuit:
    """Exact preparation circuit (``ry``, ``rz``, ``cx``) for an arbitrary state, up to global phase.

    Qubits are disentangled from the last one upwards with uniformly controlled
    rotations; the preparation is the inverse sequence.
    """
    psi = np.asarray(psi, dtype=complex)
    n = int(round(np.log2(len(psi))))
    if 2**n != len(psi) or n < 1:
        raise ValidationError("state length must be a power of two")
    if n > max_qubits:
        raise ValidationError(f"exact state synthesis is capped at {max_qubits} qubits")
    amps = psi / np.linalg.norm(psi)
    steps = []
    for j in reversed(range(n)):
        pairs = amps.reshape(-1, 2)
        a0, a1 = pairs[:, 0], pairs[:, 1]
        r = np.sqrt(np.abs(a0) ** 2 + np.abs(a1) ** 2)
        theta = 2 * np.arctan2(np.abs(a1), np.abs(a0))
        ph0 = np.where(np.abs(a0) > tol, np.angle(a0), 0.0)
        ph1 = np.where(np.abs(a1) > tol, np.angle(a1), ph0)
        ph0 = np.where(np.abs(a0) > tol, ph0, ph1)
        steps.append((j, theta, ph1 - ph0))
        amps = r * np.exp(0.5j * (ph0 + ph1))
    gates: list[Gate] = []
    for j, theta, phi in reversed(steps):
        controls = tuple(range(j))
        gates += _ucr("ry", theta, controls, j, 1e-12)
        gates += _ucr("rz", phi, controls, j, 1e-12)
    return Circuit.from_gates(n, gates, "prep")


def basis_state(bits) -> np.ndarray:
    b = _bits(bits)
    v = np.zeros(2 ** len(b), dtype=complex)
    v[int("".join(map(str, b)), 2) if b else 0] = 1.0
    return v


# ---------------------------------------------------------------------------
# transformations


def u3_from_matrix(u: np.ndarray) -> tuple[float, float, float]:
    """Angles ``(theta, phi, lam)`` with ``u = e^{i g} u3(theta, phi, lam)``."""
    u = np.asarray(u, dtype=complex)
    theta = 2 * math.atan2(abs(u[1, 0]), abs(u[0, 0]))
    if abs(u[0, 0]) > 1e-12:
        g = np.angle(u[0, 0])
        phi = np.angle(u[1, 0] * np.exp(-1j * g)) if abs(u[1, 0]) > 1e-12 else 0.0
        if abs(u[0, 1]) > 1e-12:
            lam = np.angle(-u[0, 1] * np.exp(-1j * g))
        else:
            lam = np.angle(u[1, 1] * np.exp(-1j * g)) - phi
    else:
        g = np.angle(u[1, 0])
        phi = 0.0
        lam = np.angle(-u[0, 1] * np.exp(-1j * g))
    return float(theta), float(phi), float(lam)


def merge_single_qubit(first: Gate, second: Gate, frame: bool = False) -> Gate:
    """One gate equivalent (up to global phase) to ``first`` followed by ``second``."""
    if first.qubits != second.qubits or first.arity != 1:
        raise ValidationError("can only merge single-qubit gates on the same qubit")
    q = first.qubits
    za = _z_angle(first)
    zb = _z_angle(second)
    if za is not None and zb is not None:
        return Gate("rz", q, (za + zb,), frame)
    if first.name == second.name == "rx":
        return Gate("rx", q, (first.params[0] + second.params[0],), frame)
    return Gate("u3", q, u3_from_matrix(second.matrix() @ first.matrix()), frame)


def _z_angle(g: Gate) -> float | None:
    if g.name == "rz":
        return g.params[0]
    return _Z_ANGLE.get(g.name)


TOFFOLI_LIFT_LAYER = (
    Gate("rz", (0,), (np.pi / 2,)),
    Gate("rz", (1,), (2 * np.pi / 3,)),
    Gate("rx", (2,), (4 * np.pi / 5,)),
)


def lift_degeneracy(target: Circuit, layer: Sequence[Gate] | None = None) -> Circuit:
    """Merge a layer of single-qubit gates into the final layer of ``target``.

    With ``layer=None`` a Toffoli target receives ``Rz(pi/2) x Rz(2pi/3) x Rx(4pi/5)``.
    """
    if layer is None:
        if target.kind != "toffoli":
            raise ValidationError("a default lifting layer is only defined for toffoli targets")
        layer = TOFFOLI_LIFT_LAYER
    layer = tuple(layer)
    if any(g.arity != 1 for g in layer):
        raise ValidationError("the lifting layer must contain single-qubit gates only")
    if len({g.qubits for g in layer}) != len(layer):
        raise ValidationError("the lifting layer has overlapping gates")
    layers = list(target.layers)
    if layers and not _layer_is_hard(layers[-1]):
        last = {g.qubits[0]: g for g in layers[-1]}
        for g in layer:
            q = g.qubits[0]
            last[q] = merge_single_qubit(last[q], g) if q in last else g
        layers[-1] = tuple(last[q] for q in sorted(last))
    else:
        layers.append(tuple(sorted(layer, key=lambda g: g.qubits)))
    return Circuit(target.n_qubits, tuple(layers), target.kind)


def repeat_target(circ: Circuit, n_rep: int) -> Circuit:
    """``circ`` concatenated ``n_rep`` times, kept as a single target unit."""
    if int(n_rep) < 1:
        raise ValidationError("n_rep must be at least 1")
    return Circuit(circ.n_qubits, circ.layers * int(n_rep), circ.kind)


# ---------------------------------------------------------------------------
# randomized compiling


def _pauli_matrix(label: str) -> np.ndarray:
    return qcore.kron_all(qcore.PAULIS[qcore.PAULI_LABELS.index(c)] for c in label)


@lru_cache(maxsize=None)
def _twirl_table(name: str, params: tuple[float, ...]) -> tuple[tuple[str, str], ...]:
    """Pauli pairs ``(P, Q)`` with ``G P = Q G`` up to phase, for the gate ``name(params)``."""
    g = Gate(name, tuple(range(GATES[name][0])), params)
    mat = g.matrix()
    k = g.arity
    labels = qcore.pauli_strings(k)
    mats = {lab: _pauli_matrix(lab) for lab in labels}
    out = []
    for p in labels:
        conj = mat @ mats[p] @ mat.conj().T
        for q in labels:
            if abs(abs(np.trace(mats[q] @ conj)) / 2**k - 1) < 1e-9:
                out.append((p, q))
                break
    return tuple(out)


def twirl_set(gate: Gate) -> tuple[tuple[str, str], ...]:
    """Pauli pairs ``(P, Q)`` such that ``gate . P = Q . gate`` up to phase.

    Clifford gates admit all ``4^k`` Paulis; ``zz`` and ``fsim`` gates admit the
    subgroup that maps to Paulis under conjugation.
    """
    rounded = tuple(round(p, 12) for p in gate.params)
    return _twirl_table(gate.name, rounded)


def _single_pauli(label: str) -> np.ndarray:
    return qcore.PAULIS[qcore.PAULI_LABELS.index(label)]


def _pauli_product(first: str, second: str) -> str:
    """Label of ``second . first`` up to phase (single qubit)."""
    m = _single_pauli(second) @ _single_pauli(first)
    for lab in qcore.PAULI_LABELS:
        if abs(abs(np.trace(_single_pauli(lab) @ m)) / 2 - 1) < 1e-9:
            return lab
    raise AssertionError("Pauli group not closed")


@dataclass(frozen=True)
class FrameSlots:
    """Layer skeleton used by randomized compiling.

    ``layers`` is the circuit with an empty easy layer inserted wherever a hard
    layer is not flanked by easy layers. ``hard_index`` lists the positions of the
    hard layers in that skeleton.
    """

    n_qubits: int
    layers: tuple[Layer, ...]
    hard_index: tuple[int, ...] = field(default=())


def frame_skeleton(circ: Circuit) -> FrameSlots:
    layers = list(circ.normalized().layers)
    out: list[Layer] = []
    for layer in layers:
        if _layer_is_hard(layer) and (not out or _layer_is_hard(out[-1])):
            out.append(())
        out.append(layer)
    if out and _layer_is_hard(out[-1]):
        out.append(())
    hard = tuple(i for i, layer in enumerate(out) if _layer_is_hard(layer))
    return FrameSlots(circ.n_qubits, tuple(out), hard)


def sample_frames(skeleton: FrameSlots, rng: np.random.Generator) -> list[tuple[str, str]]:
    """Draw one twirl per hard layer.

    Returns, for each hard layer, the ``n``-qubit Pauli labels ``(P, Q)`` applied
    immediately before and after it (identity on qubits the layer does not touch).

    Raises:
        UnsupportedCycleError: if a hard gate admits no non-identity Pauli frame.
    """
    n = skeleton.n_qubits
    out = []
    for i in skeleton.hard_index:
        pre = ["I"] * n
        post = ["I"] * n
        for g in skeleton.layers[i]:
            table = twirl_set(g)
            if len(table) < 2:
                raise UnsupportedCycleError(f"gate {g.name}{g.params} normalises no Pauli frame")
            p, q = table[int(rng.integers(len(table)))]
            for qubit, a, b in zip(g.qubits, p, q):
                pre[qubit] = a
                post[qubit] = b
        out.append(("".join(pre), "".join(post)))
    return out


def easy_layer_frames(skeleton: FrameSlots, frames: Sequence[tuple[str, str]]):
    """For every skeleton layer, the Pauli merged before / after its gates (easy layers only)."""
    n = skeleton.n_qubits
    before = ["I" * n] * len(skeleton.layers)
    after = ["I" * n] * len(skeleton.layers)
    for (p, q), i in zip(frames, skeleton.hard_index):
        before[i + 1] = q
        after[i - 1] = p
    return before, after


def apply_frames(skeleton: FrameSlots, frames: Sequence[tuple[str, str]], kind: str = "") -> Circuit:
    """Materialise a randomized circuit from a skeleton and sampled frames."""
    n = skeleton.n_qubits
    before, after = easy_layer_frames(skeleton, frames)
    layers: list[Layer] = []
    for i, layer in enumerate(skeleton.layers):
        if _layer_is_hard(layer):
            layers.append(layer)
            continue
        gates = {g.qubits[0]: g for g in layer}
        new: list[Gate] = []
        for q in range(n):
            b, a = before[i][q], after[i][q]
            g = gates.get(q)
            if g is None:
                lab = _pauli_product(b, a)
                if lab != "I":
                    new.append(Gate(lab.lower(), (q,), frame=True))
                continue
            if b != "I":
                g = merge_single_qubit(Gate(b.lower(), (q,)), g)
            if a != "I":
                g = merge_single_qubit(g, Gate(a.lower(), (q,)))
            new.append(g)
        if new:
            layers.append(tuple(new))
    return Circuit(n, tuple(layers), kind)


def randomized_compile(circ: Circuit, n_r: int, seed=None) -> list[Circuit]:
    """``n_r`` randomly compiled copies of ``circ``.

    A random Pauli from each hard gate's twirl set is inserted before the gate
    and its image under the gate after it; both are merged into the adjacent
    easy layers. Slots with no easy gate receive a virtual frame gate. Every
    output has the same unitary as ``circ`` up to global phase and the same
    number of hard layers.
    """
    rng = np.random.default_rng(seed)
    skeleton = frame_skeleton(circ)
    if not skeleton.hard_index:
        return [circ for _ in range(int(n_r))]
    return [apply_frames(skeleton, sample_frames(skeleton, rng), circ.kind) for _ in range(int(n_r))]
