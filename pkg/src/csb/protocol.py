"""Channel spectrum benchmarking: from a target circuit to fidelity estimates.

The workflow is

1. diagonalise the ideal target and pick pairs of eigenstates with distinct
   eigenphases (:func:`sample_eigenpairs`);
2. for each pair, measure the overlap of ``prep + target^L`` with the prepared
   state for ``L = 0..L_max`` (:func:`acquire_signal`);
3. extract the damped modes of every signal, match them to the ideal channel
   eigenvalues and turn them into diagonal entries of the pure-noise channel
   (:func:`match_modes`, :func:`compute_diagonal_entries`);
4. average the entries per subspace (:func:`estimate_fidelities`).

:class:`ChannelSpectrumBenchmark` bundles the steps as an estimator.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Literal, Sequence

import numpy as np
from sklearn.base import BaseEstimator

from . import qcore
from .circuits import (
    Circuit,
    apply_frames,
    basis_state,
    frame_skeleton,
    prepare_pair_state,
    repeat_target,
    sample_frames,
    synthesize_state,
)
from .exceptions import DegeneracyError, ValidationError
from .noise import GroundTruth, NoiseModel, oracle_fidelities
from .pencil import ModeSet, Signal, estimate_modes
from .simulator import signal_probabilities

Subspace = Literal["trivial", "non-trivial", "excess"]

#: above this many candidate pairs the sampler stops enumerating and draws directly
_ENUMERATION_LIMIT = 200_000


# ---------------------------------------------------------------------------
# eigensystem


@dataclass(frozen=True)
class SubspaceDims:
    d_ts: int
    d_ns: int

    def __post_init__(self):
        if self.d_ts < 1 or self.d_ns < 0:
            raise ValidationError("invalid subspace dimensions")

    @property
    def d2(self) -> int:
        return self.d_ts + self.d_ns


@dataclass(frozen=True, eq=False)
class Eigensystem:
    """Eigenphases of an ideal target with their eigenvectors.

    For diagonal targets the eigenvector of index ``i`` is the computational basis
    state ``|i>`` and ``vectors`` is ``None``.
    """

    n_qubits: int
    phases: np.ndarray
    vectors: np.ndarray | None = None

    @property
    def diagonal(self) -> bool:
        return self.vectors is None

    @property
    def dim(self) -> int:
        return 2**self.n_qubits

    def vector(self, i: int) -> np.ndarray:
        if self.vectors is None:
            v = np.zeros(self.dim, dtype=complex)
            v[i] = 1.0
            return v
        return self.vectors[:, i]

    def bits(self, i: int) -> str:
        return format(i, f"0{self.n_qubits}b")

    def multiplicities(self) -> list[int]:
        return qcore.phase_multiplicities(self.phases)

    def subspace_dims(self) -> SubspaceDims:
        d_ts = int(sum(m * m for m in self.multiplicities()))
        return SubspaceDims(d_ts, self.dim**2 - d_ts)

    def hamming_weight(self, i: int) -> float:
        """Expected number of ones when measuring eigenvector ``i``."""
        if self.vectors is None:
            return float(self.bits(i).count("1"))
        probs = np.abs(self.vectors[:, i]) ** 2
        weights = np.array([bin(x).count("1") for x in range(self.dim)])
        return float(probs @ weights)


def eigensystem(target: Circuit, max_dense_qubits: int = 10) -> Eigensystem:
    """Eigen-decomposition of the ideal target; diagonal circuits are handled classically."""
    n = target.n_qubits
    if target.is_diagonal():
        bits = (np.arange(2**n)[:, None] >> np.arange(n - 1, -1, -1)[None, :]) & 1
        return Eigensystem(n, target.diagonal_phases(bits))
    if n > max_dense_qubits:
        raise ValidationError(f"dense diagonalisation capped at {max_dense_qubits} qubits")
    pairs = qcore.eig_unitary(target.unitary())
    return Eigensystem(n, np.array([p.phase for p in pairs]), np.stack([p.vector for p in pairs], axis=1))


# ---------------------------------------------------------------------------
# initial states


@dataclass(frozen=True, eq=False)
class InitialStateSpec:
    """Preparation of ``c_a |phi_a> + c_b |phi_b>``.

    ``a == b`` denotes a single eigenstate. ``group`` indexes the signal the
    circuit contributes to; circuits sharing a group have their probabilities
    summed per ``L``.
    """

    a: int
    b: int
    prep: Circuit
    state: np.ndarray
    delta: float
    c_a: complex = 1 / np.sqrt(2)
    c_b: complex = 1 / np.sqrt(2)
    group: int = 0

    def __post_init__(self):
        if self.a != self.b and abs(abs(self.c_a) ** 2 + abs(self.c_b) ** 2 - 1) > 1e-9:
            raise ValidationError("superposition coefficients are not normalised")

    @property
    def is_superposition(self) -> bool:
        return self.a != self.b

    def describe(self, es: Eigensystem | None = None) -> dict:
        out = {"a": int(self.a), "b": int(self.b), "delta": float(self.delta), "group": int(self.group)}
        if es is not None and es.diagonal:
            out["x"], out["y"] = es.bits(self.a), es.bits(self.b)
        return out


def make_spec(es: Eigensystem, a: int, b: int, group: int = 0, check: bool = True) -> InitialStateSpec:
    """Build the preparation circuit for eigenstates ``a`` and ``b`` (``a == b`` for one eigenstate)."""
    if es.diagonal:
        prep = prepare_pair_state(es.bits(a), es.bits(b))
    else:
        v = es.vector(a) if a == b else (es.vector(a) + es.vector(b)) / np.sqrt(2)
        prep = synthesize_state(v)
    state = prep.apply_to_state(basis_state("0" * es.n_qubits))
    if check:
        target = es.vector(a) if a == b else (es.vector(a) + es.vector(b)) / np.sqrt(2)
        if abs(abs(np.vdot(target, state)) - 1) > 1e-9:
            raise AssertionError("state preparation does not reach the requested state")
    delta = 0.0 if a == b else float(qcore.wrap_phase(es.phases[a] - es.phases[b]))
    return InitialStateSpec(a, b, prep, state, delta, group=group)


def _distinct(es: Eigensystem, a: int, b: int) -> bool:
    return abs(qcore.wrap_phase(es.phases[a] - es.phases[b])) > qcore.PHASE_TOL


def _candidate_pairs(es: Eigensystem, k: int, rng: np.random.Generator) -> list[tuple[int, int]]:
    m = len(es.phases)
    if m * (m - 1) // 2 <= _ENUMERATION_LIMIT:
        pairs = [(a, b) for a in range(m) for b in range(a + 1, m) if _distinct(es, a, b)]
        if not pairs:
            raise DegeneracyError("every eigenphase is equal; append a layer of single-qubit gates (lift_degeneracy)")
        if len(pairs) <= k:
            return pairs
        idx = rng.choice(len(pairs), size=k, replace=False)
        return [pairs[i] for i in sorted(idx)]
    chosen: set[tuple[int, int]] = set()
    attempts = 0
    while len(chosen) < k:
        attempts += 1
        if attempts > 1000 * k:
            raise DegeneracyError("could not find enough pairs with distinct eigenphases")
        a, b = sorted(int(x) for x in rng.choice(m, size=2, replace=False))
        if _distinct(es, a, b):
            chosen.add((a, b))
    return sorted(chosen)


def sample_eigenpairs(
    es: Eigensystem, K: int, rng=None, include_eigenstate: bool | None = None
) -> list[InitialStateSpec]:
    """Draw ``K`` unordered eigenstate pairs with distinct phases.

    All qualifying pairs are used when there are at most ``K`` of them. For
    single-qubit targets (or ``include_eigenstate=True``) the eigenstate of
    largest Hamming weight is added to the first signal group, so that its
    decay towards the fixed point is observed as well.

    Raises:
        DegeneracyError: if no pair of distinct eigenphases exists.
    """
    if int(K) < 1:
        raise ValidationError("K must be at least 1")
    rng = np.random.default_rng(rng)
    if include_eigenstate is None:
        include_eigenstate = es.n_qubits == 1
    n_pairs = int(K) - 1 if include_eigenstate and K > 1 else int(K)
    pairs = _candidate_pairs(es, n_pairs, rng)
    specs = [make_spec(es, a, b, group=i) for i, (a, b) in enumerate(pairs)]
    if include_eigenstate:
        weights = [es.hamming_weight(i) for i in range(len(es.phases))]
        e = int(np.argmax(weights))
        specs.append(make_spec(es, e, e, group=0))
    return specs


def signal_groups(specs: Sequence[InitialStateSpec]) -> list[list[int]]:
    groups: dict[int, list[int]] = {}
    for i, s in enumerate(specs):
        groups.setdefault(s.group, []).append(i)
    return [groups[g] for g in sorted(groups)]


# ---------------------------------------------------------------------------
# benchmark circuits and acquisition


@dataclass(frozen=True)
class BenchmarkCircuit:
    spec_index: int
    L: int
    circuit: Circuit
    randomization: int = 0


def generate_benchmark_suite(
    specs: Sequence[InitialStateSpec],
    target: Circuit,
    L_max: int,
    n_r: int | None = None,
    seed=None,
) -> list[BenchmarkCircuit]:
    """``prep + target^L`` for every spec and ``L = 0..L_max``.

    With ``n_r`` randomizations every target copy of every circuit receives
    independent Pauli frames, giving ``n_r * K * (L_max + 1)`` circuits.
    """
    if int(L_max) < 0:
        raise ValidationError("L_max must be non-negative")
    out = []
    if n_r is None:
        for i, spec in enumerate(specs):
            for L in range(L_max + 1):
                body = repeat_target(target, L) if L else Circuit(target.n_qubits)
                out.append(BenchmarkCircuit(i, L, spec.prep + body))
        return out
    rng = np.random.default_rng(seed)
    skeleton = frame_skeleton(target)
    for r in range(int(n_r)):
        for i, spec in enumerate(specs):
            for L in range(L_max + 1):
                circ = spec.prep
                for _ in range(L):
                    circ = circ + apply_frames(skeleton, sample_frames(skeleton, rng), target.kind)
                out.append(BenchmarkCircuit(i, L, circ, r))
    return out


def _split_shots(total: int, parts: int) -> np.ndarray:
    base = np.full(parts, total // parts)
    base[: total % parts] += 1
    return base


def acquire_signal(
    specs: Sequence[InitialStateSpec],
    target: Circuit,
    noise: NoiseModel | None,
    L_max: int,
    shots: int | None = 10_000,
    rng=None,
    n_r: int | None = None,
    cache: dict | None = None,
) -> Signal:
    """Simulated signal of one group of circuits.

    Each circuit's ideal-measurement probability is sampled with ``shots``
    binomial draws (split evenly across the ``n_r`` randomizations), and the
    frequencies of the circuits in the group are summed per ``L``.
    ``shots=None`` returns the exact probabilities.
    """
    rng = np.random.default_rng(rng)
    comps = []
    var = np.zeros(L_max + 1)
    for spec in specs:
        key = (target, noise, spec.a, spec.b, L_max)
        probs = None if (cache is None or n_r is not None) else cache.get(key)
        if probs is None:
            probs = signal_probabilities(spec.prep, target, spec.state, L_max, noise, n_r=n_r, rng=rng)
            if cache is not None and n_r is None:
                cache[key] = probs
        if n_r is None:
            p = probs
            if shots is not None:
                freq = rng.binomial(int(shots), p) / shots
            else:
                freq = p
        else:
            p = probs.mean(axis=0)
            if shots is not None:
                per = _split_shots(int(shots), int(n_r))
                counts = rng.binomial(per[:, None], probs)
                freq = counts.sum(axis=0) / shots
            else:
                freq = p
        comps.append(np.clip(freq, 0.0, 1.0))
        if shots is not None:
            var += freq * (1 - freq) / shots
    comps = np.array(comps)
    total = np.clip(comps.sum(axis=0), 0, len(specs))
    return Signal(total, shots, var if shots is not None else None, len(specs), comps)


# ---------------------------------------------------------------------------
# matching and estimation


@dataclass(frozen=True)
class MatchedEigenvalue:
    """A measured mode matched to an ideal channel eigenvalue ``e^{i ideal_phase}``."""

    z: complex
    ideal_phase: float
    phase_error: float
    subspace: Subspace
    coefficient: complex = 0.0
    ambiguous: bool = False
    entry: complex | None = None

    @property
    def g(self) -> float:
        """Damping factor ``|z|`` clipped to ``[0, 1]``."""
        return float(min(abs(self.z), 1.0))

    def to_dict(self) -> dict:
        out = {
            "z": [float(np.real(self.z)), float(np.imag(self.z))],
            "ideal_phase": float(self.ideal_phase),
            "phase_error": float(self.phase_error),
            "subspace": self.subspace,
            "coefficient": [float(np.real(self.coefficient)), float(np.imag(self.coefficient))],
            "ambiguous": bool(self.ambiguous),
        }
        if self.entry is not None:
            out["entry"] = [float(np.real(self.entry)), float(np.imag(self.entry))]
        return out


def _dist(a, b):
    return np.abs(qcore.wrap_phase(np.asarray(a) - b))


def match_modes(m: ModeSet, delta: float, tol: float = 1e-6) -> list[MatchedEigenvalue]:
    """Match modes to the ideal eigenvalues ``e^{i delta}``, ``e^{-i delta}`` and ``1``.

    The modes nearest in phase to ``delta`` and ``-delta`` become the
    non-trivial matches (the same mode serves both when ``delta`` is ``pi``).
    Each remaining mode is trivial if its phase is closer to ``0`` than to
    ``+-delta`` and ``excess`` otherwise. A non-trivial match is ``ambiguous``
    when its phase error reaches half of ``|delta|``.
    """
    if len(m) == 0:
        raise ValidationError("no modes to match")
    z = m.z
    c = m.c
    ph = np.angle(z)
    delta = float(qcore.wrap_phase(delta))
    if abs(delta) <= tol:
        return [MatchedEigenvalue(complex(zi), 0.0, float(p), "trivial", complex(ci)) for zi, p, ci in zip(z, ph, c)]
    half_gap = abs(delta) / 2
    d_plus, d_minus, d_zero = _dist(ph, delta), _dist(ph, -delta), _dist(ph, 0.0)
    i_plus = int(np.argmin(d_plus))
    # a conjugate pair near -1 may be resolved as a single real mode; it then serves both
    others = [j for j in range(len(z)) if j != i_plus and d_minus[j] < d_zero[j]]
    if abs(qcore.wrap_phase(2 * delta)) <= tol or not others:
        i_minus = i_plus
    else:
        i_minus = min(others, key=lambda j: d_minus[j])
    out = []
    for i, target in ((i_plus, delta), (i_minus, -delta)):
        err = float(qcore.wrap_phase(ph[i] - target))
        out.append(MatchedEigenvalue(complex(z[i]), target, err, "non-trivial", complex(c[i]), abs(err) >= half_gap))
    for i in range(len(z)):
        if i in (i_plus, i_minus):
            continue
        kind: Subspace = "trivial" if d_zero[i] <= min(d_plus[i], d_minus[i]) else "excess"
        ideal = 0.0 if kind == "trivial" else (delta if d_plus[i] <= d_minus[i] else -delta)
        out.append(MatchedEigenvalue(complex(z[i]), ideal, float(qcore.wrap_phase(ph[i] - ideal)), kind, complex(c[i])))
    return out


def compute_diagonal_entries(matches: Sequence[MatchedEigenvalue]) -> list[MatchedEigenvalue]:
    """``E_ab,ab = g e^{i delta_lambda}`` for every match (``g`` clipped to 1)."""
    return [replace(mt, entry=mt.g * np.exp(1j * mt.phase_error)) for mt in matches]


FixedPointPolicy = Literal["replace", "include", "none"]


@dataclass(frozen=True)
class FidelityEstimate:
    process_fidelity: float
    stochastic_fidelity: float
    trivial_mean: float
    nontrivial_mean: float
    n_trivial: int
    n_nontrivial: int
    imag_residue: float


def _split_fixed_point(signal_matches, policy: FixedPointPolicy):
    trivial: list[MatchedEigenvalue] = []
    nontrivial: list[MatchedEigenvalue] = []
    for matches in signal_matches:
        triv = [mt for mt in matches if mt.subspace == "trivial"]
        nontrivial += [mt for mt in matches if mt.subspace == "non-trivial"]
        if policy != "none" and triv:
            # the mode closest to 1 is this signal's estimate of the fixed point
            k = int(np.argmin([abs(1 - mt.z) for mt in triv]))
            triv = triv[:k] + triv[k + 1 :]
        trivial += triv
    return trivial, nontrivial


def estimate_fidelities(
    signal_matches: Sequence[Sequence[MatchedEigenvalue]],
    dims: SubspaceDims,
    fixed_point: FixedPointPolicy = "none",
) -> FidelityEstimate:
    """Process and stochastic fidelity from per-signal matched entries.

    ``signal_matches`` holds one list of matches per signal. The channel's
    fixed point (eigenvalue exactly 1) enters the trivial subspace once:

    * ``"replace"``: each signal's trivial mode nearest to 1 is dropped and the
      trivial mean becomes ``(1 + (d_ts - 1) * mean(rest)) / d_ts``;
    * ``"include"``: those modes are dropped and a single exact 1 is added to
      the sample;
    * ``"none"``: every trivial mode is used as measured; an exact 1 is used
      only if no trivial mode was found at all.

    The fixed point only shows up in signals whose prepared state overlaps
    the channel's steady state, so per-signal removal discards genuine
    samples; ``"none"`` is the default.

    Raises:
        ValidationError: if a subspace has no entries.
    """
    matches = [compute_diagonal_entries(ms) if any(mt.entry is None for mt in ms) else list(ms) for ms in signal_matches]
    trivial, nontrivial = _split_fixed_point(matches, fixed_point)
    if dims.d_ns and not nontrivial:
        raise ValidationError("no entry in the non-trivial subspace")
    e_ns = np.array([mt.entry for mt in nontrivial], dtype=complex)
    g_ns = np.array([mt.g for mt in nontrivial])
    e_ts = np.array([mt.entry for mt in trivial], dtype=complex)
    g_ts = np.array([mt.g for mt in trivial])
    if fixed_point == "replace":
        if len(e_ts):
            w = (dims.d_ts - 1) / dims.d_ts
            mean_t = 1 / dims.d_ts + w * np.mean(e_ts.real)
            mean_t2 = 1 / dims.d_ts + w * np.mean(g_ts**2)
        else:
            mean_t = mean_t2 = 1.0
    else:
        if fixed_point == "include" or not len(e_ts):
            e_ts = np.append(e_ts, 1.0)
            g_ts = np.append(g_ts, 1.0)
        if not len(e_ts):
            raise ValidationError("no entry in the trivial subspace")
        mean_t = float(np.mean(e_ts.real))
        mean_t2 = float(np.mean(g_ts**2))
    mean_n = float(np.mean(e_ns.real)) if len(e_ns) else 0.0
    mean_n2 = float(np.mean(g_ns**2)) if len(g_ns) else 0.0
    d2 = dims.d2
    f = (dims.d_ts * mean_t + dims.d_ns * mean_n) / d2
    f_sto = math.sqrt(max((dims.d_ts * mean_t2 + dims.d_ns * mean_n2) / d2, 0.0))
    imag = float(abs(np.mean(e_ns.imag))) if len(e_ns) else 0.0
    return FidelityEstimate(
        float(np.clip(f, 0, 1)),
        float(np.clip(f_sto, 0, 1)),
        float(mean_t),
        mean_n,
        len(e_ts),
        len(e_ns),
        imag,
    )


def _canonical_index(es: Eigensystem, vec: np.ndarray) -> int:
    """Index of the eigenvector with the largest overlap with ``vec``."""
    overlaps = [abs(np.vdot(es.vector(i), vec)) for i in range(len(es.phases))]
    return int(np.argmax(overlaps))


def _pair_phase_error(specs, matches_by_spec, a: int, b: int) -> float | None:
    """Phase error of the eigenvalue ``e^{i(lambda_a - lambda_b)}``, if measured."""
    for spec, matches in zip(specs, matches_by_spec):
        if {spec.a, spec.b} != {a, b} or spec.a == spec.b:
            continue
        sign = 1.0 if (spec.a, spec.b) == (a, b) else -1.0
        for mt in matches:
            if mt.subspace == "non-trivial" and np.isclose(mt.ideal_phase, spec.delta):
                return sign * mt.phase_error
    return None


def estimate_unitary_params(
    specs: Sequence[InitialStateSpec],
    matches_by_spec: Sequence[Sequence[MatchedEigenvalue]],
    es: Eigensystem,
    target: Circuit,
    n_rep: int = 1,
) -> dict[str, float]:
    """Angles of the implemented gate for ``rz`` and ``fsim`` targets.

    ``rz``: the ``|0><1|`` eigenvalue has phase ``-theta``. ``fsim``: the
    ``(s+, s-)`` eigenvalue has phase ``-2 theta`` and ``(|00>, |11>)`` has
    ``-phi``, with ``s+- = (|01> +- |10>) / sqrt(2)``.

    Raises:
        ValidationError: if the pair needed for the target kind was not measured.
    """
    kind = target.kind
    gate = target.gates()[0] if target.gates() else None
    if kind == "rz":
        i0 = _canonical_index(es, basis_state("0"))
        i1 = _canonical_index(es, basis_state("1"))
        err = _pair_phase_error(specs, matches_by_spec, i0, i1)
        if err is None:
            raise ValidationError("the |0>,|1> pair was not measured")
        theta = gate.params[0]
        d_theta = -err / n_rep
        return {"theta": theta + d_theta, "delta_theta": d_theta}
    if kind == "fsim":
        s_plus = (basis_state("01") + basis_state("10")) / np.sqrt(2)
        s_minus = (basis_state("01") - basis_state("10")) / np.sqrt(2)
        idx = {k: _canonical_index(es, v) for k, v in
               (("00", basis_state("00")), ("11", basis_state("11")), ("s+", s_plus), ("s-", s_minus))}
        err_t = _pair_phase_error(specs, matches_by_spec, idx["s+"], idx["s-"])
        err_p = _pair_phase_error(specs, matches_by_spec, idx["00"], idx["11"])
        if err_t is None or err_p is None:
            raise ValidationError("the (s+, s-) and (|00>, |11>) pairs must both be measured")
        theta, phi = gate.params
        d_theta = -err_t / (2 * n_rep)
        d_phi = -err_p / n_rep
        return {"theta": theta + d_theta, "delta_theta": d_theta, "phi": phi + d_phi, "delta_phi": d_phi}
    raise ValidationError(f"no unitary parameters are defined for target kind {kind!r}")


def hoeffding_sample_size(eps: float, delta: float) -> int:
    """Number of sampled entries so that the mean is within ``eps`` with probability ``1 - delta``."""
    if not (0 < eps <= 1) or not (0 < delta < 1):
        raise ValidationError("eps must lie in (0, 1] and delta in (0, 1)")
    val = math.log(2 / delta) / (2 * eps * eps)
    # guard against float noise on exact integers
    r = round(val)
    return int(r) if abs(val - r) < 1e-9 else math.ceil(val)


# ---------------------------------------------------------------------------
# reports


@dataclass
class CSBReport:
    """Outcome of a single benchmarking run."""

    process_fidelity: float
    stochastic_fidelity: float
    unitary_params: dict[str, float]
    matches: list[list[MatchedEigenvalue]]
    residuals: list[float]
    flags: list[str]
    dims: SubspaceDims
    specs: list[dict]
    imag_residue: float = 0.0
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "process_fidelity": self.process_fidelity,
            "stochastic_fidelity": self.stochastic_fidelity,
            "unitary_params": dict(self.unitary_params),
            "matches": [[mt.to_dict() for mt in ms] for ms in self.matches],
            "residuals": list(self.residuals),
            "flags": list(self.flags),
            "dims": {"d_ts": self.dims.d_ts, "d_ns": self.dims.d_ns},
            "specs": list(self.specs),
            "imag_residue": self.imag_residue,
            "notes": list(self.notes),
        }


@dataclass(frozen=True, eq=False)
class Design:
    target: Circuit
    eigensystem: Eigensystem
    specs: tuple[InitialStateSpec, ...]

    @property
    def groups(self) -> list[list[int]]:
        return signal_groups(self.specs)


FLAG_MESSAGES = {
    "ambiguous_match": "a phase error reaches half the ideal phase gap; eigenvalue matching unreliable, consider RC",
    "strong_unitary_error": "phase errors are large compared with the threshold; eigenvalue matching unreliable, consider RC",
    "excess_modes": "signals contain modes or structure beyond the expected eigenvalues",
    "degenerate_spectrum": "the target spectrum is degenerate; estimates are unreliable, consider lift_degeneracy",
    "outside_unit_disc": "a mode lies outside the unit disc beyond tolerance",
}


class ChannelSpectrumBenchmark(BaseEstimator):
    """Channel spectrum benchmarking estimator.

    Parameters
    ----------
    n_pairs : int, default=10
        Number of eigenstate pairs ``K`` (all pairs are used when fewer exist).
    L_max : int, default=50
        Longest sequence.
    shots : int or None, default=10000
        Shots per circuit; ``None`` uses exact probabilities.
    n_randomizations : int or None, default=None
        Number of randomly compiled copies per circuit; ``None`` disables randomized compiling.
    max_modes, sv_threshold : matrix pencil settings.
    fixed_point : {"replace", "include", "none"}, default="none"
        Treatment of the channel fixed point in the trivial average (see :func:`estimate_fidelities`).
    strong_phase_threshold : float, default=0.03
        Median non-trivial phase error (radians) above which ``strong_unitary_error`` is flagged.
    residual_factor : float, default=3.0
        ``excess_modes`` is flagged when a fit residual exceeds this multiple of the shot-noise level.
    n_rep : int, default=1
        Number of target copies treated as one unit (used to rescale angle estimates).
    random_state : int, SeedSequence or None
    """

    def __init__(
        self,
        n_pairs: int = 10,
        L_max: int = 50,
        shots: int | None = 10_000,
        n_randomizations: int | None = None,
        max_modes: int = 4,
        sv_threshold: float = 0.05,
        fixed_point: FixedPointPolicy = "none",
        strong_phase_threshold: float = 0.03,
        residual_factor: float = 3.0,
        unit_tol: float = 0.05,
        n_rep: int = 1,
        random_state=None,
    ):
        self.n_pairs = n_pairs
        self.L_max = L_max
        self.shots = shots
        self.n_randomizations = n_randomizations
        self.max_modes = max_modes
        self.sv_threshold = sv_threshold
        self.fixed_point = fixed_point
        self.strong_phase_threshold = strong_phase_threshold
        self.residual_factor = residual_factor
        self.unit_tol = unit_tol
        self.n_rep = n_rep
        self.random_state = random_state

    # -- steps ---------------------------------------------------------------

    def _seeds(self):
        seq = self.random_state
        if not isinstance(seq, np.random.SeedSequence):
            seq = np.random.SeedSequence(seq)
        design_seq, acquire_seq = seq.spawn(2)
        return design_seq, acquire_seq

    def _validate(self):
        if int(self.n_pairs) < 1 or int(self.L_max) < 8:
            raise ValidationError("n_pairs must be >= 1 and L_max >= 8")
        if self.shots is not None and int(self.shots) < 1:
            raise ValidationError("shots must be positive")
        if self.n_randomizations is not None and int(self.n_randomizations) < 1:
            raise ValidationError("n_randomizations must be positive")
        if self.fixed_point not in ("replace", "include", "none"):
            raise ValidationError(f"unknown fixed_point policy {self.fixed_point!r}")

    def design(self, target: Circuit, es: Eigensystem | None = None, rng=None) -> Design:
        self._validate()
        if int(self.n_rep) > 1:
            target = repeat_target(target, self.n_rep)
        es = es if es is not None else eigensystem(target)
        if rng is None:
            rng = np.random.default_rng(self._seeds()[0])
        specs = sample_eigenpairs(es, self.n_pairs, rng)
        return Design(target, es, tuple(specs))

    def acquire(self, design: Design, noise: NoiseModel | None, rng=None, cache: dict | None = None) -> list[Signal]:
        seq = rng if rng is not None else self._seeds()[1]
        if not isinstance(seq, np.random.SeedSequence):
            seq = np.random.SeedSequence(seq)
        groups = design.groups
        streams = seq.spawn(len(groups))
        return [
            acquire_signal(
                [design.specs[i] for i in g],
                design.target,
                noise,
                int(self.L_max),
                self.shots,
                np.random.default_rng(s),
                self.n_randomizations,
                cache,
            )
            for g, s in zip(groups, streams)
        ]

    def fit(self, X: Sequence[Signal], y=None, design: Design | None = None):
        """Extract, match and average modes of the signals ``X`` (one per signal group of ``design``)."""
        if design is None:
            raise ValidationError("fit needs the Design the signals were acquired with")
        groups = design.groups
        if len(X) != len(groups):
            raise ValidationError(f"expected {len(groups)} signals, got {len(X)}")
        self._validate()
        flags: set[str] = set()
        notes: list[str] = []
        per_signal: list[list[MatchedEigenvalue]] = []
        residuals = []
        for sig, g in zip(X, groups):
            sup = [design.specs[i] for i in g if design.specs[i].is_superposition]
            delta = sup[0].delta if sup else 0.0
            modes = estimate_modes(sig, self.max_modes, self.sv_threshold)
            residuals.append(modes.residual)
            if not len(modes):
                notes.append(f"signal {len(per_signal)}: no modes extracted")
                per_signal.append([])
                continue
            matches = compute_diagonal_entries(match_modes(modes, delta))
            per_signal.append(matches)
            if any(abs(m.z) > 1 + self.unit_tol for m in modes):
                flags.add("outside_unit_disc")
            if any(mt.ambiguous for mt in matches):
                flags.add("ambiguous_match")
            noise_level = np.sqrt(np.mean(sig.variance)) if sig.variance is not None else 0.0
            if any(mt.subspace == "excess" for mt in matches) or (
                noise_level > 0 and modes.residual > self.residual_factor * noise_level
            ):
                flags.add("excess_modes")
        dims = design.eigensystem.subspace_dims()
        if dims.d_ts > design.eigensystem.dim:
            flags.add("degenerate_spectrum")
        errs = [abs(mt.phase_error) for ms in per_signal for mt in ms if mt.subspace == "non-trivial"]
        if errs and np.median(errs) > self.strong_phase_threshold:
            flags.add("strong_unitary_error")
        est = estimate_fidelities(per_signal, dims, self.fixed_point)
        params: dict[str, float] = {}
        if self.n_randomizations is None and design.target.kind in ("rz", "fsim"):
            by_spec = [per_signal[_group_index(groups, i)] for i in range(len(design.specs))]
            try:
                params = estimate_unitary_params(
                    design.specs, by_spec, design.eigensystem, design.target, int(self.n_rep)
                )
            except ValidationError as exc:
                notes.append(str(exc))
        self.report_ = CSBReport(
            est.process_fidelity,
            est.stochastic_fidelity,
            params,
            per_signal,
            residuals,
            sorted(flags),
            dims,
            [s.describe(design.eigensystem) for s in design.specs],
            est.imag_residue,
            notes,
        )
        self.estimate_ = est
        return self

    def run(self, target: Circuit, noise: NoiseModel | None = None, cache: dict | None = None) -> CSBReport:
        design_seq, acquire_seq = self._seeds()
        design = self.design(target, rng=np.random.default_rng(design_seq))
        signals = self.acquire(design, noise, acquire_seq, cache)
        self.design_ = design
        self.signals_ = signals
        return self.fit(signals, design=design).report_


def _group_index(groups, spec_index: int) -> int:
    for k, g in enumerate(groups):
        if spec_index in g:
            return k
    raise KeyError(spec_index)


# ---------------------------------------------------------------------------
# repetitions


@dataclass
class RepeatedResult:
    """Per-repetition reports with their mean and sample standard deviation."""

    reports: list[CSBReport]
    oracle: GroundTruth | None = None
    signals: list[list[Signal]] = field(default_factory=list)

    def _values(self, attr):
        return np.array([getattr(r, attr) for r in self.reports])

    @property
    def process_fidelity(self) -> float:
        return float(np.mean(self._values("process_fidelity")))

    @property
    def stochastic_fidelity(self) -> float:
        return float(np.mean(self._values("stochastic_fidelity")))

    def _std(self, attr) -> float:
        v = self._values(attr)
        return float(np.std(v, ddof=1)) if len(v) > 1 else 0.0

    @property
    def process_fidelity_std(self) -> float:
        return self._std("process_fidelity")

    @property
    def stochastic_fidelity_std(self) -> float:
        return self._std("stochastic_fidelity")

    def unitary_params(self) -> dict[str, tuple[float, float]]:
        keys = sorted({k for r in self.reports for k in r.unitary_params})
        out = {}
        for k in keys:
            v = np.array([r.unitary_params[k] for r in self.reports if k in r.unitary_params])
            out[k] = (float(v.mean()), float(v.std(ddof=1)) if len(v) > 1 else 0.0)
        return out

    @property
    def flags(self) -> list[str]:
        return sorted({f for r in self.reports for f in r.flags})


def _run_one(args):
    params, target, noise, seq = args
    est = ChannelSpectrumBenchmark(**{**params, "random_state": seq})
    est.run(target, noise, cache=_WORKER_CACHE)
    return est.report_, est.signals_


_WORKER_CACHE: dict = {}


def run_repeated(
    target: Circuit,
    noise: NoiseModel | None,
    repetitions: int = 10,
    seed: int = 0,
    workers: int = 1,
    oracle: bool = True,
    **params,
) -> RepeatedResult:
    """Run the benchmark ``repetitions`` times with independent seeds derived from ``seed``.

    Results do not depend on ``workers``. Exact probabilities of non-randomized
    circuits are cached across repetitions.
    """
    if int(repetitions) < 1:
        raise ValidationError("repetitions must be positive")
    seqs = np.random.SeedSequence(seed).spawn(int(repetitions))
    jobs = [(params, target, noise, s) for s in seqs]
    if workers and workers > 1:
        workers = min(int(workers), os.cpu_count() or 1, len(jobs))
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outs = list(pool.map(_run_one, jobs))
    else:
        cache: dict = {}
        outs = []
        for s in seqs:
            est = ChannelSpectrumBenchmark(**{**params, "random_state": s})
            est.run(target, noise, cache=cache)
            outs.append((est.report_, est.signals_))
    gt = None
    if oracle:
        n_rep = int(params.get("n_rep", 1))
        gt = oracle_fidelities(repeat_target(target, n_rep) if n_rep > 1 else target, noise)
    return RepeatedResult([o[0] for o in outs], gt, [o[1] for o in outs])
