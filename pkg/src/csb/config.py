"""Experiment configuration files.

A configuration is a flat TOML document. Noise parameters and ``L_max`` may
be lists, in which case the experiment is a sweep: list-valued keys must have
equal lengths and scalars are broadcast. Angles are in radians and damping
parameters are probabilities, as the key suffixes say.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PositiveInt, model_validator
from pydantic import ValidationError as PydanticValidationError

from .circuits import Circuit, build_target, lift_degeneracy, random_ising_params
from .exceptions import ValidationError
from .noise import NoiseModel

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

FloatOrList = Union[float, list[float]]

BUNDLED_DIR = Path(__file__).with_name("configs")


class ExperimentConfig(BaseModel):
    """Typed schema of an experiment file; unknown keys are rejected."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    name: str = "experiment"
    target: Literal["rz", "fsim", "toffoli", "ising"]
    target_theta_rad: float = float(np.pi / 4)
    target_phi_rad: float = float(np.pi / 2)
    ising_n: int = Field(6, ge=2, le=12)
    ising_seed: int = 7
    ising_scale: float = Field(1.0, gt=0)
    ising_h: Optional[list[float]] = None
    ising_J: Optional[list[float]] = None
    dt: float = 1.0
    lift: bool = False
    n_rep: PositiveInt = 1

    p_damping: FloatOrList = 0.0
    p_damping_2q: Optional[FloatOrList] = None
    theta2_rad: FloatOrList = 0.0
    phi2_rad: FloatOrList = 0.0
    overshoot_rad: FloatOrList = 0.0

    K: PositiveInt = 10
    L_max: Union[PositiveInt, list[PositiveInt]] = 50
    shots: PositiveInt = 10_000
    repetitions: PositiveInt = 10
    rc: bool = False
    n_r: PositiveInt = 10
    seed: int
    output_dir: str = "results"

    max_modes: int = Field(4, ge=1, le=6)
    sv_threshold: float = Field(0.05, gt=0, lt=1)
    strong_phase_threshold: float = Field(0.03, gt=0)
    sweep_key: Optional[str] = None

    @model_validator(mode="after")
    def _check(self):
        lengths = {len(v) for v in self._sweep_values().values() if isinstance(v, list)}
        if len(lengths) > 1:
            raise ValueError(f"list-valued sweep keys have different lengths {sorted(lengths)}")
        if any(isinstance(v, list) and not v for v in self._sweep_values().values()):
            raise ValueError("sweep lists must not be empty")
        if self.target == "ising":
            for key in ("ising_h", "ising_J"):
                v = getattr(self, key)
                if v is not None and len(v) != self.ising_n:
                    raise ValueError(f"{key} needs {self.ising_n} entries")
        if self.rc and any(v != 0 for v in np.atleast_1d(self.overshoot_rad)):
            raise ValueError("rc cannot be combined with a non-zero overshoot_rad")
        if self.sweep_key is not None and self.sweep_key not in self._sweep_values():
            raise ValueError(f"sweep_key must be one of {sorted(self._sweep_values())}")
        return self

    def _sweep_values(self) -> dict:
        return {
            "p_damping": self.p_damping,
            "p_damping_2q": self.p_damping_2q,
            "theta2_rad": self.theta2_rad,
            "phi2_rad": self.phi2_rad,
            "overshoot_rad": self.overshoot_rad,
            "L_max": self.L_max,
        }

    @property
    def n_points(self) -> int:
        lengths = [len(v) for v in self._sweep_values().values() if isinstance(v, list)]
        return lengths[0] if lengths else 1

    def swept_key(self) -> str | None:
        """The parameter plotted on the x axis of a sweep."""
        if self.sweep_key:
            return self.sweep_key
        for k, v in self._sweep_values().items():
            if isinstance(v, list) and k != "L_max" and len(set(v)) > 1:
                return k
        return None

    def points(self) -> list["SweepPoint"]:
        out = []
        for i in range(self.n_points):
            vals = {k: (v[i] if isinstance(v, list) else v) for k, v in self._sweep_values().items()}
            p2 = vals["p_damping"] if vals["p_damping_2q"] is None else vals["p_damping_2q"]
            noise = NoiseModel(vals["p_damping"], p2, vals["theta2_rad"], vals["phi2_rad"], vals["overshoot_rad"])
            out.append(SweepPoint(i, noise, int(vals["L_max"]), vals))
        return out

    def build_target(self) -> Circuit:
        if self.target == "rz":
            circ = build_target("rz", theta=self.target_theta_rad)
        elif self.target == "fsim":
            circ = build_target("fsim", theta=self.target_theta_rad, phi=self.target_phi_rad)
        elif self.target == "toffoli":
            circ = build_target("toffoli")
        else:
            circ = build_target("ising", dt=self.dt, **self.ising_params())
        if self.lift:
            circ = lift_degeneracy(circ)
        return circ

    def ising_params(self) -> dict:
        drawn = random_ising_params(self.ising_n, np.random.default_rng(self.ising_seed), self.ising_scale)
        h = self.ising_h if self.ising_h is not None else drawn["h"]
        J = self.ising_J if self.ising_J is not None else drawn["J"]
        return {"h": np.asarray(h, dtype=float), "J": np.asarray(J, dtype=float)}

    def estimator_params(self) -> dict:
        return {
            "n_pairs": self.K,
            "shots": self.shots,
            "n_randomizations": self.n_r if self.rc else None,
            "max_modes": self.max_modes,
            "sv_threshold": self.sv_threshold,
            "strong_phase_threshold": self.strong_phase_threshold,
            "n_rep": self.n_rep,
        }


@dataclass(frozen=True)
class SweepPoint:
    index: int
    noise: NoiseModel
    L_max: int
    values: dict


def format_errors(exc: PydanticValidationError) -> str:
    lines = []
    for err in exc.errors():
        path = ".".join(str(p) for p in err["loc"]) or "<root>"
        lines.append(f"{path}: {err['msg']}")
    return "\n".join(lines)


def parse_config(text: str) -> ExperimentConfig:
    """Parse TOML text into a validated config.

    Raises:
        ValidationError: with one ``field.path: message`` line per problem.
    """
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ValidationError(f"config is not valid TOML: {exc}") from exc
    nested = [k for k, v in data.items() if isinstance(v, dict)]
    if nested:
        raise ValidationError(f"config must be flat; found tables {nested}")
    try:
        return ExperimentConfig.model_validate(data)
    except PydanticValidationError as exc:
        raise ValidationError(format_errors(exc)) from None


def load_config(path: str | Path) -> ExperimentConfig:
    p = Path(path)
    if not p.exists() and (BUNDLED_DIR / p.name).exists():
        p = BUNDLED_DIR / p.name
    return parse_config(p.read_text())


def bundled_configs() -> list[Path]:
    return sorted(BUNDLED_DIR.glob("*.cfg"))
