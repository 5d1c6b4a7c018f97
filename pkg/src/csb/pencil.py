"""Matrix pencil extraction of damped oscillating modes.

A signal ``s_L = sum_k c_k z_k^L`` is arranged in a Hankel matrix whose
truncated right singular vectors span the row space of the Vandermonde
matrix of the ``z_k``; the modes are the eigenvalues of the shift operator
on that space.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import hankel
from sklearn.base import BaseEstimator

from ._validation import check_signal_values
from .exceptions import ValidationError

MAX_MODES_CAP = 6


@dataclass(frozen=True)
class Signal:
    """Measured values ``s_L`` for ``L = 0..L_max``.

    ``n_circuits`` is the number of circuits whose probabilities were summed
    into each value, so values lie in ``[0, n_circuits]``. ``components``
    optionally keeps the per-circuit frequencies, shape ``(n_circuits, L_max + 1)``.
    """

    values: np.ndarray
    shots: int | None = None
    variance: np.ndarray | None = None
    n_circuits: int = 1
    components: np.ndarray | None = None

    def __post_init__(self):
        vals = check_signal_values(self.values)
        if np.any(vals < -1e-12) or np.any(vals > self.n_circuits + 1e-12):
            raise ValidationError(f"signal values must lie in [0, {self.n_circuits}]")
        vals = np.clip(vals, 0.0, float(self.n_circuits))
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        if self.shots is not None and int(self.shots) < 1:
            raise ValidationError("shots must be positive")
        if self.variance is not None:
            var = np.asarray(self.variance, dtype=float)
            if var.shape != vals.shape:
                raise ValidationError("variance must match the signal length")
            object.__setattr__(self, "variance", var)
        if self.components is not None:
            comp = np.asarray(self.components, dtype=float)
            if comp.shape != (self.n_circuits, len(vals)):
                raise ValidationError("components must have shape (n_circuits, L_max + 1)")
            object.__setattr__(self, "components", comp)

    @property
    def L_max(self) -> int:
        return len(self.values) - 1

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class Mode:
    z: complex
    c: complex

    @property
    def magnitude(self) -> float:
        return float(abs(self.z))

    @property
    def phase(self) -> float:
        return float(np.angle(self.z))


@dataclass(frozen=True)
class ModeSet:
    """Modes sorted by decreasing ``|c|`` plus fit diagnostics."""

    modes: tuple[Mode, ...]
    residual: float
    sv_retained: tuple[float, ...] = ()
    sv_discarded: tuple[float, ...] = ()
    diagnostics: tuple[str, ...] = field(default=())

    def __len__(self) -> int:
        return len(self.modes)

    def __iter__(self):
        return iter(self.modes)

    @property
    def z(self) -> np.ndarray:
        return np.array([m.z for m in self.modes], dtype=complex)

    @property
    def c(self) -> np.ndarray:
        return np.array([m.c for m in self.modes], dtype=complex)

    def evaluate(self, L) -> np.ndarray:
        L = np.atleast_1d(np.asarray(L))
        if not self.modes:
            return np.zeros(L.shape)
        return np.real(self.z[None, :] ** L[:, None] @ self.c)


def _pencil(values: np.ndarray, max_modes: int, sv_threshold: float):
    n = len(values)
    p = n // 2
    y = hankel(values[: n - p], values[n - p - 1 :])
    sv_all = np.linalg.svd(y, compute_uv=False)
    if not np.all(np.isfinite(sv_all)) or sv_all[0] <= np.finfo(float).tiny:
        return np.zeros(0, complex), sv_all, 0
    _, s, vh = np.linalg.svd(y, full_matrices=False)
    m = int(min(np.sum(s > sv_threshold * s[0]), max_modes))
    v = vh[:m]
    shift = v[:, 1:] @ np.linalg.pinv(v[:, :-1])
    return np.linalg.eigvals(shift), s, m


def _vander(z: np.ndarray, n: int) -> np.ndarray:
    return z[None, :] ** np.arange(n)[:, None]


def _coefficients(values: np.ndarray, z: np.ndarray) -> np.ndarray:
    vander = _vander(z, len(values))
    c, *_ = np.linalg.lstsq(vander, values.astype(complex), rcond=None)
    return c


def matrix_pencil(values, max_modes: int = 4, sv_threshold: float = 0.05) -> ModeSet:
    """Modes of a raw (real or complex) sequence, without range checks on the values."""
    values = np.asarray(values)
    if values.ndim != 1 or len(values) < 8:
        raise ValidationError("the pencil needs a 1-d sequence of length >= 8")
    if not np.all(np.isfinite(values)):
        raise ValidationError("signal contains non-finite values")
    if not 1 <= int(max_modes) <= MAX_MODES_CAP:
        raise ValidationError(f"max_modes must be in [1, {MAX_MODES_CAP}]")
    if not 0.0 < sv_threshold < 1.0:
        raise ValidationError("sv_threshold must lie in (0, 1)")
    z, s, m = _pencil(values, int(max_modes), float(sv_threshold))
    if m == 0:
        rms = float(np.sqrt(np.mean(np.abs(values) ** 2)))
        return ModeSet((), rms, (), tuple(map(float, s)), ("no singular value above threshold",))
    c = _coefficients(values, z)
    order = np.argsort(-np.abs(c), kind="stable")
    modes = tuple(Mode(complex(z[i]), complex(c[i])) for i in order)
    fit = _vander(z, len(values)) @ c
    resid = float(np.sqrt(np.mean(np.abs(values - fit) ** 2)))
    notes = ()
    if m < np.sum(s > sv_threshold * s[0]):
        notes = (f"mode count capped at {m}",)
    return ModeSet(modes, resid, tuple(map(float, s[:m])), tuple(map(float, s[m:])), notes)


def estimate_modes(s: Signal, max_modes: int = 4, sv_threshold: float = 0.05) -> ModeSet:
    """Matrix pencil estimate of the modes of ``s`` (pencil parameter ``len // 2``)."""
    if not isinstance(s, Signal):
        s = Signal(np.asarray(s, dtype=float))
    return matrix_pencil(s.values, max_modes, sv_threshold)


def reconstruct_residual(s: Signal | np.ndarray, m: ModeSet) -> float:
    """RMS of ``s_L - sum_k c_k z_k^L``."""
    values = s.values if isinstance(s, Signal) else np.asarray(s)
    L = np.arange(len(values))
    fit = np.zeros(len(values), dtype=complex)
    for mode in m.modes:
        fit += mode.c * mode.z**L
    return float(np.sqrt(np.mean(np.abs(values - fit) ** 2)))


class MatrixPencil(BaseEstimator):
    """Estimator wrapper around :func:`matrix_pencil`.

    Parameters
    ----------
    max_modes : int, default=4
        Upper bound on the model order.
    sv_threshold : float, default=0.05
        Singular values below ``sv_threshold * sigma_0`` are discarded.
    unit_tol : float, default=0.05
        Modes with ``|z| > 1 + unit_tol`` are reported in ``diagnostics``.

    Attributes
    ----------
    modes_ : ModeSet
    n_modes_ : int
    """

    def __init__(self, max_modes: int = 4, sv_threshold: float = 0.05, unit_tol: float = 0.05):
        self.max_modes = max_modes
        self.sv_threshold = sv_threshold
        self.unit_tol = unit_tol

    def fit(self, X, y=None):
        values = X.values if isinstance(X, Signal) else np.asarray(X)
        ms = matrix_pencil(values, self.max_modes, self.sv_threshold)
        big = [m for m in ms.modes if abs(m.z) > 1 + self.unit_tol]
        if big:
            notes = ms.diagnostics + (f"{len(big)} mode(s) outside the unit disc by more than {self.unit_tol}",)
            ms = ModeSet(ms.modes, ms.residual, ms.sv_retained, ms.sv_discarded, notes)
        self.modes_ = ms
        self.n_modes_ = len(ms)
        return self

    def predict(self, L) -> np.ndarray:
        """Reconstructed signal at lengths ``L``."""
        if not hasattr(self, "modes_"):
            raise ValidationError("MatrixPencil is not fitted")
        L = np.atleast_1d(np.asarray(L))
        return self.modes_.evaluate(L)

    def score(self, X, y=None) -> float:
        """Negative RMS reconstruction error on ``X``."""
        values = X.values if isinstance(X, Signal) else np.asarray(X)
        return -reconstruct_residual(values, self.modes_)
