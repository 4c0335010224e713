"""Scenario configuration schema for the command-line runner.

Configs are JSON. Unknown keys are rejected everywhere, and every default is
filled in so the resolved echo fully describes a run.
"""
from __future__ import annotations

import json
from typing import Annotated, Literal, Optional, Union

from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    ValidationError,
    field_validator,
    model_validator,
)

from . import core

COMMANDS = ("classical", "gaussian", "pde", "synchronize", "invariants", "compare", "brackets")

DEFAULT_TOLERANCES = {
    # classical / ermakov
    "wronskian_drift": 1e-8,
    "ermakov_drift": 1e-6,
    # gaussian
    "alpha_eta": 1e-8,
    "casimir_drift": 1e-7,
    "casimir_identity": 1e-12,
    # synchronizing clock
    "fit_residual": 1e-5,
    "frequency_transform": 1e-4,
    "symmetry": 1e-4,
    # pde
    "norm_drift_per_1000_steps": 1e-9,
    "pde_casimir_drift": 1e-6,
    "moment_deviation": 1e-5,
    "fidelity_loss": 1e-6,
    "excess_kurtosis": 1e-6,
    # algebra
    "bracket": 1e-5,
}


class ConfigError(ValueError):
    """Invalid scenario configuration."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ConstantSpec(_Strict):
    kind: Literal["constant"] = "constant"
    omega0: float = Field(1.0, ge=0)


class FloquetSpec(_Strict):
    kind: Literal["floquet"] = "floquet"
    omega0: float = Field(1.0, ge=0)
    eps: float = Field(0.1, gt=-1, lt=1)
    nu: float = 2.0


class RampSpec(_Strict):
    kind: Literal["linear_ramp"] = "linear_ramp"
    omega0_sq: float = 1.0
    slope: float = 0.0


class TabulatedSpec(_Strict):
    kind: Literal["tabulated"] = "tabulated"
    times: list[float]
    omega_sq_samples: list[float]


ProfileSpec = Annotated[
    Union[ConstantSpec, FloquetSpec, RampSpec, TabulatedSpec],
    Field(discriminator="kind"),
]


class ParamsSpec(_Strict):
    m: float = Field(1.0, gt=0)
    hbar: float = Field(1.0, gt=0)


class TimeSpec(_Strict):
    t_start: float = 0.0
    t_end: float = 10.0
    n_output: int = Field(1001, ge=2)

    @model_validator(mode="after")
    def _ordered(self):
        if not self.t_end > self.t_start:
            raise ValueError("t_end must exceed t_start")
        return self


class ClassicalSpec(_Strict):
    q: float = 1.0
    qdot: float = 0.0


class GaussianSpec(_Strict):
    q: float = 0.0
    p: float = 0.0
    alpha: float = Field(..., gt=0)
    beta: float = 0.0
    gamma: float = 0.0


class EtaSpec(_Strict):
    """Either explicit initial data (Omega, eta0, etadot0) or pair coefficients (a, b, c)."""

    Omega: Optional[float] = Field(None, ge=0)
    eta0: Optional[float] = Field(None, gt=0)
    etadot0: Optional[float] = None
    a: Optional[float] = None
    b: Optional[float] = None
    c: Optional[float] = None

    @model_validator(mode="after")
    def _one_form(self):
        direct = (self.Omega, self.eta0, self.etadot0)
        coeffs = (self.a, self.b, self.c)
        if all(v is not None for v in direct) and all(v is None for v in coeffs):
            return self
        if all(v is not None for v in coeffs) and all(v is None for v in direct):
            if not (self.a > 0 and self.a * self.b - self.c**2 > 0):
                raise ValueError("pair coefficients need a > 0 and ab - c^2 > 0")
            return self
        raise ValueError("give either (Omega, eta0, etadot0) or (a, b, c)")


class SolverSpec(_Strict):
    rel_tol: float = Field(1e-12, ge=1e-14, le=1e-3)


class PdeSpec(_Strict):
    n: int = 4096
    dt: float = Field(1e-4, gt=0)
    x_min: Optional[float] = None
    dx: Optional[float] = Field(None, gt=0)
    snapshots: bool = False

    @model_validator(mode="after")
    def _grid(self):
        if (self.x_min is None) != (self.dx is None):
            raise ValueError("x_min and dx must be given together")
        if self.n < 256 or self.n & (self.n - 1):
            raise ValueError("n must be a power of two >= 256")
        return self


class BracketSpec(_Strict):
    n_points: int = Field(20, ge=1)
    seed: int = 0


class Scenario(_Strict):
    name: str = "scenario"
    command: Optional[Literal[COMMANDS]] = None  # type: ignore[valid-type]
    profile: ProfileSpec = Field(default_factory=ConstantSpec)
    params: ParamsSpec = Field(default_factory=ParamsSpec)
    time: TimeSpec = Field(default_factory=TimeSpec)
    classical: Optional[ClassicalSpec] = None
    gaussian: Optional[GaussianSpec] = None
    eta: Optional[EtaSpec] = None
    solver: SolverSpec = Field(default_factory=SolverSpec)
    pde: PdeSpec = Field(default_factory=PdeSpec)
    brackets: BracketSpec = Field(default_factory=BracketSpec)
    tolerances: dict[str, float] = Field(default_factory=lambda: dict(DEFAULT_TOLERANCES),
                                         validate_default=True)

    @field_validator("tolerances")
    @classmethod
    def _fill_tolerances(cls, value: dict[str, float]) -> dict[str, float]:
        unknown = set(value) - set(DEFAULT_TOLERANCES)
        if unknown:
            raise ValueError(f"unknown tolerance keys: {sorted(unknown)}")
        bad = [k for k, v in value.items() if not v > 0]
        if bad:
            raise ValueError(f"tolerances must be positive: {sorted(bad)}")
        return {**DEFAULT_TOLERANCES, **value}

    # domain objects -------------------------------------------------------

    def build_profile(self) -> core.FrequencyProfile:
        return core.profile_from_dict(self.profile.model_dump())

    def build_params(self) -> core.PhysicalParams:
        return core.PhysicalParams(self.params.m, self.params.hbar)

    def build_grid(self) -> core.TimeGrid:
        return core.TimeGrid(self.time.t_start, self.time.t_end, self.time.n_output)

    def resolved(self) -> dict:
        return self.model_dump(mode="json")


def _format_validation(exc: ValidationError) -> str:
    parts = []
    for err in exc.errors():
        loc = ".".join(str(x) for x in err["loc"]) or "<root>"
        parts.append(f"{loc}: {err['msg']}")
    return "; ".join(parts)


def parse_scenario(data: dict, overrides: Optional[dict] = None) -> Scenario:
    data = dict(data)
    if overrides:
        tol = dict(data.get("tolerances") or {})
        tol.update(overrides)
        data["tolerances"] = tol
    try:
        return Scenario.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format_validation(exc)) from None


def load_config(path, overrides: Optional[dict] = None) -> list[Scenario]:
    """Read a scenario file. A top-level ``{"scenarios": [...]}`` is a batch."""
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    if isinstance(data, dict) and set(data) == {"scenarios"}:
        items = data["scenarios"]
        if not isinstance(items, list) or not items:
            raise ConfigError("scenarios must be a non-empty list")
    elif isinstance(data, dict):
        items = [data]
    else:
        raise ConfigError("config must be a JSON object")
    scenarios = []
    for i, item in enumerate(items):
        if not isinstance(item, dict):
            raise ConfigError(f"scenarios[{i}] must be an object")
        try:
            scenarios.append(parse_scenario(item, overrides))
        except ConfigError as exc:
            prefix = f"scenarios[{i}]: " if len(items) > 1 else ""
            raise ConfigError(prefix + str(exc)) from None
    names = [s.name for s in scenarios]
    if len(set(names)) != len(names):
        raise ConfigError("scenario names in a batch must be unique")
    return scenarios


def parse_overrides(pairs: list[str]) -> dict:
    out = {}
    for item in pairs:
        key, sep, val = item.partition("=")
        if not sep:
            raise ConfigError(f"tolerance override {item!r} is not KEY=VAL")
        if key not in DEFAULT_TOLERANCES:
            raise ConfigError(f"unknown tolerance key {key!r}")
        try:
            out[key] = float(val)
        except ValueError:
            raise ConfigError(f"tolerance {key} needs a number, got {val!r}") from None
    return out
