"""Noisy circuit simulation.

Two independent paths are provided:

* dense Pauli transfer matrices (``ptm_of_circuit``) for up to three qubits,
  built from embedded Kraus operators;
* density-matrix evolution by k-local superoperator contraction
  (``evolve_and_measure``), which never forms an ``n``-qubit superoperator.

On top of them sit the signal engines used by the protocol, which return the
ideal-measurement probabilities of ``prep + target^L`` for every ``L``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import qcore
from ._validation import check_density_matrix
from .circuits import Circuit, FrameSlots, apply_frames, frame_skeleton, twirl_set
from .exceptions import CapacityError, ValidationError
from .noise import NoiseModel, gate_kraus, gate_liouville, implemented_gate, make_damping_channels

DEFAULT_PTM_CAP = 3


# ---------------------------------------------------------------------------
# dense PTM path


def _embedded_liouville(kraus, qubits, n: int) -> np.ndarray:
    ops = [qcore.embed_operator(k, qubits, n) for k in kraus]
    return qcore.kraus_to_liouville(ops)


def ptm_of_circuit(circ: Circuit, noise: NoiseModel | None = None, max_qubits: int = DEFAULT_PTM_CAP) -> np.ndarray:
    """PTM of the (noisy) circuit, composed in time order.

    Raises:
        CapacityError: if the circuit is wider than ``max_qubits``.
    """
    n = circ.n_qubits
    if n > max_qubits:
        raise CapacityError(f"dense PTM capped at {max_qubits} qubits, circuit has {n}")
    sup = np.eye(4**n, dtype=complex)
    for g in circ.gates():
        sup = _embedded_liouville(gate_kraus(g, noise), g.qubits, n) @ sup
    return qcore.liouville_to_ptm(sup)


# ---------------------------------------------------------------------------
# tensor path


def apply_superop(rho_t: np.ndarray, sup: np.ndarray, qubits, n: int) -> np.ndarray:
    """Apply a k-local row-major Liouville superoperator to a ``[2]*2n`` density tensor."""
    qubits = list(qubits)
    k = len(qubits)
    op = sup.reshape([2] * (4 * k))
    axes = qubits + [n + q for q in qubits]
    out = np.tensordot(op, rho_t, axes=(list(range(2 * k, 4 * k)), axes))
    return np.moveaxis(out, list(range(2 * k)), axes)


def evolve(rho: np.ndarray, circ: Circuit, noise: NoiseModel | None = None) -> np.ndarray:
    """Final density matrix of the (noisy) circuit acting on ``rho``."""
    n = circ.n_qubits
    d = 2**n
    t = np.asarray(rho, dtype=complex).reshape([2] * (2 * n))
    for g in circ.gates():
        t = apply_superop(t, gate_liouville(g, noise), g.qubits, n)
    return t.reshape(d, d)


def evolve_and_measure(rho, circ: Circuit, noise: NoiseModel | None, observable) -> float:
    """``tr(O . C(rho))`` for a projector ``O``, clipped to ``[0, 1]``."""
    rho = check_density_matrix(rho)
    obs = np.asarray(observable, dtype=complex)
    d = 2**circ.n_qubits
    if rho.shape != (d, d) or obs.shape != (d, d):
        raise ValidationError(f"state/observable dimension does not match a {circ.n_qubits}-qubit circuit")
    out = evolve(rho, circ, noise)
    p = float(np.real(np.trace(obs @ out)))
    return _clip_probability(p)


def _clip_probability(p):
    return np.clip(p, 0.0, 1.0)


def zero_state(n: int) -> np.ndarray:
    rho = np.zeros((2**n, 2**n), dtype=complex)
    rho[0, 0] = 1.0
    return rho


# ---------------------------------------------------------------------------
# signal engines


@dataclass(frozen=True)
class _RCPlan:
    """Per-rep layer data for the PTM engine under randomized compiling."""

    skeleton: FrameSlots
    # per skeleton layer: ("hard", ptm) or ("easy", unitary_ptm, damping_ptm)
    layers: tuple
    # per hard layer: (pre_index_table, post_index_table, per-gate table sizes)
    frame_tables: tuple


def _pauli_index(label: str) -> int:
    idx = 0
    for c in label:
        idx = 4 * idx + qcore.PAULI_LABELS.index(c)
    return idx


def _hard_frame_tables(skeleton: FrameSlots):
    n = skeleton.n_qubits
    tables = []
    for i in skeleton.hard_index:
        per_gate = []
        for g in skeleton.layers[i]:
            pairs = twirl_set(g)
            if len(pairs) < 2:
                from .exceptions import UnsupportedCycleError

                raise UnsupportedCycleError(f"gate {g.name}{g.params} normalises no Pauli frame")
            pre = np.zeros(len(pairs), dtype=np.int64)
            post = np.zeros(len(pairs), dtype=np.int64)
            for t, (p, q) in enumerate(pairs):
                for qubit, a, b in zip(g.qubits, p, q):
                    w = 4 ** (n - 1 - qubit)
                    pre[t] += w * qcore.PAULI_LABELS.index(a)
                    post[t] += w * qcore.PAULI_LABELS.index(b)
            per_gate.append((pre, post, pairs))
        tables.append(per_gate)
    return tuple(tables)


def _rc_plan(target: Circuit, noise: NoiseModel | None) -> _RCPlan:
    skeleton = frame_skeleton(target)
    n = target.n_qubits
    layers = []
    for i, layer in enumerate(skeleton.layers):
        sub = Circuit(n, (layer,))
        if i in skeleton.hard_index:
            layers.append(("hard", ptm_of_circuit(sub, noise)))
            continue
        ideal = Circuit(n, (tuple(implemented_gate(g, noise) if noise else g for g in layer),))
        unitary = ptm_of_circuit(ideal, None)
        sup = np.eye(4**n, dtype=complex)
        if noise is not None and noise.p1 > 0:
            damp = make_damping_channels(noise.p1)
            for g in layer:
                if not g.frame:
                    sup = _embedded_liouville(damp, g.qubits, n) @ sup
        layers.append(("easy", unitary, qcore.liouville_to_ptm(sup)))
    return _RCPlan(skeleton, tuple(layers), _hard_frame_tables(skeleton))


def sample_rc_frames(plan_or_target, n_traj: int, n_reps: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Frame choices, one integer array ``(n_traj, n_reps, n_gates)`` per hard layer."""
    tables = plan_or_target.frame_tables if isinstance(plan_or_target, _RCPlan) else _hard_frame_tables(
        frame_skeleton(plan_or_target)
    )
    out = []
    for per_gate in tables:
        sizes = [len(pre) for pre, _, _ in per_gate]
        out.append(np.stack([rng.integers(s, size=(n_traj, n_reps)) for s in sizes], axis=-1))
    return out


def frames_as_labels(target: Circuit, choices: list[np.ndarray], traj: int, rep: int) -> list[tuple[str, str]]:
    """Translate sampled frame indices of one trajectory/rep into ``(P, Q)`` labels per hard layer."""
    skeleton = frame_skeleton(target)
    tables = _hard_frame_tables(skeleton)
    n = target.n_qubits
    out = []
    for per_gate, ch in zip(tables, choices):
        pre = ["I"] * n
        post = ["I"] * n
        for (_, _, pairs), g, t in zip(per_gate, _hard_layer_gates(skeleton, len(out)), ch[traj, rep]):
            p, q = pairs[int(t)]
            for qubit, a, b in zip(g.qubits, p, q):
                pre[qubit], post[qubit] = a, b
        out.append(("".join(pre), "".join(post)))
    return out


def _hard_layer_gates(skeleton: FrameSlots, k: int):
    return skeleton.layers[skeleton.hard_index[k]]


def _ptm_signal(prep: Circuit, target: Circuit, psi: np.ndarray, L_max: int, noise) -> np.ndarray:
    n = target.n_qubits
    v = ptm_of_circuit(prep, noise) @ qcore.state_to_pauli_vector(zero_state(n))
    o = qcore.state_to_pauli_vector(np.outer(psi, psi.conj()))
    r = ptm_of_circuit(target, noise)
    out = np.empty(L_max + 1)
    for L in range(L_max + 1):
        out[L] = o @ v
        v = r @ v
    return _clip_probability(out)


def _ptm_signal_rc(prep, target, psi, L_max, noise, n_r, rng, choices=None) -> np.ndarray:
    """Lockstep simulation of independent RC trajectories, one per ``(r, L)``."""
    n = target.n_qubits
    plan = _rc_plan(target, noise)
    signs = qcore.pauli_commutation_signs(n)
    v0 = ptm_of_circuit(prep, noise) @ qcore.state_to_pauli_vector(zero_state(n))
    o = qcore.state_to_pauli_vector(np.outer(psi, psi.conj()))
    n_cols = n_r * (L_max + 1)
    lengths = np.tile(np.arange(L_max + 1), n_r)
    if choices is None:
        choices = sample_rc_frames(plan, n_cols, L_max, rng)
    x = np.repeat(v0[:, None], n_cols, axis=1)
    out = np.empty(n_cols)
    out[lengths == 0] = o @ v0
    n_layers = len(plan.layers)
    for rep in range(L_max):
        active = np.nonzero(lengths > rep)[0]
        xa = x[:, active]
        before = np.zeros((n_layers, len(active)), dtype=np.int64)
        after = np.zeros((n_layers, len(active)), dtype=np.int64)
        for k, i in enumerate(plan.skeleton.hard_index):
            ch = choices[k][active, rep]
            for gi, (pre, post, _) in enumerate(plan.frame_tables[k]):
                after[i - 1] += pre[ch[:, gi]]
                before[i + 1] += post[ch[:, gi]]
        for i, entry in enumerate(plan.layers):
            if entry[0] == "hard":
                xa = entry[1] @ xa
            else:
                _, unitary, damp = entry
                xa = xa * signs[before[i]].T
                xa = unitary @ xa
                xa = xa * signs[after[i]].T
                xa = damp @ xa
        x[:, active] = xa
        done = active[lengths[active] == rep + 1]
        out[done] = o @ x[:, done]
    return _clip_probability(out.reshape(n_r, L_max + 1))


def _tensor_signal(prep, target, psi, L_max, noise, n_r=None, rng=None) -> np.ndarray:
    """Incremental density-matrix evolution; one measurement after every target repetition.

    With ``n_r`` trajectories each repetition of the target receives fresh frames, so
    the circuits measured at successive ``L`` of one trajectory share their prefix.
    """
    n = target.n_qubits
    d = 2**n
    rho0 = evolve(zero_state(n), prep, noise)
    psi = np.asarray(psi, dtype=complex)

    def measure(rho):
        return float(np.real(psi.conj() @ rho @ psi))

    if n_r is None:
        out = np.empty(L_max + 1)
        rho = rho0
        out[0] = measure(rho)
        for L in range(1, L_max + 1):
            rho = evolve(rho, target, noise)
            out[L] = measure(rho)
        return _clip_probability(out)
    skeleton = frame_skeleton(target)
    choices = sample_rc_frames(target, n_r, L_max, rng)
    out = np.empty((n_r, L_max + 1))
    for r in range(n_r):
        rho = rho0
        out[r, 0] = measure(rho)
        for L in range(1, L_max + 1):
            frames = frames_as_labels(target, choices, r, L - 1)
            rho = evolve(rho.reshape(d, d), apply_frames(skeleton, frames), noise)
            out[r, L] = measure(rho)
    return _clip_probability(out)


def signal_probabilities(
    prep: Circuit,
    target: Circuit,
    psi,
    L_max: int,
    noise: NoiseModel | None = None,
    n_r: int | None = None,
    rng: np.random.Generator | None = None,
    method: str = "auto",
    max_ptm_qubits: int = DEFAULT_PTM_CAP,
) -> np.ndarray:
    """Probabilities ``<psi| C_L(|0><0|) |psi>`` for ``C_L = prep + target^L``, ``L = 0..L_max``.

    Returns an array of shape ``(L_max + 1,)``, or ``(n_r, L_max + 1)`` when randomized
    compiling is requested with ``n_r`` trajectories.

    ``method`` selects ``"ptm"`` (dense, up to ``max_ptm_qubits``), ``"tensor"`` or ``"auto"``.
    """
    if prep.n_qubits != target.n_qubits:
        raise ValidationError("preparation and target widths differ")
    psi = np.asarray(psi, dtype=complex)
    if psi.shape != (2**target.n_qubits,):
        raise ValidationError("measurement state has the wrong dimension")
    if method == "auto":
        method = "ptm" if target.n_qubits <= max_ptm_qubits else "tensor"
    if n_r is not None:
        if noise is not None and noise.rotation_overshoot:
            raise ValidationError("randomized compiling is not defined together with a rotation overshoot")
        rng = np.random.default_rng(rng)
    if method == "ptm":
        if target.n_qubits > max_ptm_qubits:
            raise CapacityError(f"dense PTM capped at {max_ptm_qubits} qubits")
        if n_r is None:
            return _ptm_signal(prep, target, psi, L_max, noise)
        return _ptm_signal_rc(prep, target, psi, L_max, noise, n_r, rng)
    if method == "tensor":
        return _tensor_signal(prep, target, psi, L_max, noise, n_r, rng)
    raise ValidationError(f"unknown simulation method {method!r}")
