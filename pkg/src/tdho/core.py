"""Shared domain types: physical constants, frequency profiles, time grids
and classical trajectories.

Everything in here is an immutable value once constructed. Arrays held by
the containers are flagged read-only so they can be shared between
concurrent scenario runs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy.interpolate import CubicSpline


class TdhoError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(TdhoError, ValueError):
    """Invalid input outside the mathematical domain of an operation."""


class TimeRangeError(TdhoError, ValueError):
    """Requested time lies outside the range covered by the data."""


class IntegrationError(TdhoError, RuntimeError):
    """The adaptive integrator could not make progress.

    Attributes
    ----------
    t_last : float
        Last time at which the solution was accepted.
    """

    def __init__(self, message: str, t_last: float):
        super().__init__(f"{message} (last good time t={t_last!r})")
        self.t_last = t_last


class CollapseError(IntegrationError):
    """A strictly positive quantity (η or α) collapsed towards zero."""


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


# ---------------------------------------------------------------------------
# physical parameters
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PhysicalParams:
    """Mass and reduced Planck constant of the particle."""

    m: float = 1.0
    hbar: float = 1.0

    def __post_init__(self):
        for name in ("m", "hbar"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise DomainError(f"{name} must be a positive finite number, got {v!r}")

    @property
    def omega_quantum(self) -> float:
        """Frequency ħ/2m of the auxiliary equation solved by the packet width."""
        return self.hbar / (2.0 * self.m)


# ---------------------------------------------------------------------------
# frequency profiles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Constant:
    omega0: float

    def __post_init__(self):
        if not self.omega0 >= 0:
            raise DomainError(f"omega0 must be >= 0, got {self.omega0!r}")

    def omega_sq(self, t):
        return np.full_like(np.asarray(t, dtype=float), self.omega0**2)[()]

    def omega_sq_dot(self, t):
        return np.zeros_like(np.asarray(t, dtype=float))[()]


@dataclass(frozen=True)
class Floquet:
    """ω²(t) = ω₀²(1 + ε cos νt)."""

    omega0: float
    eps: float
    nu: float

    def __post_init__(self):
        if not self.omega0 >= 0:
            raise DomainError(f"omega0 must be >= 0, got {self.omega0!r}")
        if not abs(self.eps) < 1:
            raise DomainError(f"|eps| must be < 1, got {self.eps!r}")

    def omega_sq(self, t):
        return self.omega0**2 * (1.0 + self.eps * np.cos(self.nu * np.asarray(t, dtype=float)))[()]

    def omega_sq_dot(self, t):
        return (-self.omega0**2 * self.eps * self.nu
                * np.sin(self.nu * np.asarray(t, dtype=float)))[()]


@dataclass(frozen=True)
class LinearRampOfOmegaSq:
    """ω²(t) = ω₀² + slope·t. Goes negative past t = -ω₀²/slope; that is allowed."""

    omega0_sq: float
    slope: float

    def omega_sq(self, t):
        return (self.omega0_sq + self.slope * np.asarray(t, dtype=float))[()]

    def omega_sq_dot(self, t):
        return np.full_like(np.asarray(t, dtype=float), self.slope)[()]


@dataclass(frozen=True, eq=False)
class Tabulated:
    """ω² sampled on a strictly increasing time grid, natural cubic spline in between."""

    times: np.ndarray
    omega_sq_samples: np.ndarray
    _spline: CubicSpline = field(init=False, repr=False)

    def __post_init__(self):
        t = _frozen(self.times)
        w = _frozen(self.omega_sq_samples)
        if t.ndim != 1 or t.shape != w.shape or t.size < 4:
            raise DomainError("tabulated profile needs matching 1-D arrays with >= 4 samples")
        if not np.all(np.diff(t) > 0):
            raise DomainError("tabulated times must be strictly increasing")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(w))):
            raise DomainError("tabulated profile contains non-finite values")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "omega_sq_samples", w)
        object.__setattr__(self, "_spline", CubicSpline(t, w, bc_type="natural"))

    @property
    def t_min(self) -> float:
        return float(self.times[0])

    @property
    def t_max(self) -> float:
        return float(self.times[-1])

    def _check(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < self.t_min) or np.any(t > self.t_max):
            raise TimeRangeError(
                f"t outside tabulated range [{self.t_min}, {self.t_max}]")
        return t

    def omega_sq(self, t):
        return self._spline(self._check(t))[()]

    def omega_sq_dot(self, t):
        t = self._check(t)
        h = (self.t_max - self.t_min) * 1e-6
        # one-sided room at the edges keeps the stencil inside the table
        lo = np.clip(t - h, self.t_min, self.t_max)
        hi = np.clip(t + h, self.t_min, self.t_max)
        return ((self._spline(hi) - self._spline(lo)) / (hi - lo))[()]


FrequencyProfile = Union[Constant, Floquet, LinearRampOfOmegaSq, Tabulated]


def omega_sq(profile: FrequencyProfile, t):
    """ω²(t) for any profile variant. May be negative (inverted well)."""
    return profile.omega_sq(t)


def omega_sq_dot(profile: FrequencyProfile, t):
    """d(ω²)/dt: analytic for closed forms, central difference for tables."""
    return profile.omega_sq_dot(t)


def profile_from_dict(spec: dict) -> FrequencyProfile:
    """Build a profile from a ``{"kind": ..., **params}`` mapping."""
    spec = dict(spec)
    kind = spec.pop("kind", None)
    builders = {
        "constant": Constant,
        "floquet": Floquet,
        "linear_ramp": LinearRampOfOmegaSq,
        "tabulated": Tabulated,
    }
    if kind not in builders:
        raise DomainError(f"unknown profile kind {kind!r}; expected one of {sorted(builders)}")
    try:
        return builders[kind](**spec)
    except TypeError as exc:
        raise DomainError(f"bad parameters for profile {kind!r}: {exc}") from None


# ---------------------------------------------------------------------------
# time grids, states, trajectories
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TimeGrid:
    t_start: float
    t_end: float
    n_output: int

    def __post_init__(self):
        if not (math.isfinite(self.t_start) and math.isfinite(self.t_end)):
            raise DomainError("time grid bounds must be finite")
        if not self.t_end > self.t_start:
            raise DomainError(f"t_end must exceed t_start, got [{self.t_start}, {self.t_end}]")
        if int(self.n_output) != self.n_output or self.n_output < 2:
            raise DomainError(f"n_output must be an integer >= 2, got {self.n_output!r}")

    @property
    def times(self) -> np.ndarray:
        return np.linspace(self.t_start, self.t_end, int(self.n_output))

    @property
    def span(self) -> float:
        return self.t_end - self.t_start


@dataclass(frozen=True)
class ClassicalState:
    t: float
    q: float
    qdot: float

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.t, self.q, self.qdot)):
            raise DomainError(f"classical state must be finite, got {self}")


def hermite_cubic(nodes, y, dy, t):
    """Evaluate the C¹ cubic Hermite interpolant and its derivative.

    Returns ``(value, derivative)`` with the same shape as ``t``. Node times
    reproduce the stored samples exactly.
    """
    t = np.asarray(t, dtype=float)
    i = np.clip(np.searchsorted(nodes, t, side="right") - 1, 0, len(nodes) - 2)
    t0 = nodes[i]
    dt = nodes[i + 1] - t0
    s = (t - t0) / dt
    s2 = s * s
    s3 = s2 * s
    h00 = 2 * s3 - 3 * s2 + 1
    h10 = s3 - 2 * s2 + s
    h01 = -2 * s3 + 3 * s2
    h11 = s3 - s2
    val = h00 * y[i] + h10 * dt * dy[i] + h01 * y[i + 1] + h11 * dt * dy[i + 1]
    d00 = (6 * s2 - 6 * s) / dt
    d10 = 3 * s2 - 4 * s + 1
    d01 = (-6 * s2 + 6 * s) / dt
    d11 = 3 * s2 - 2 * s
    der = d00 * y[i] + d10 * dy[i] + d01 * y[i + 1] + d11 * dy[i + 1]
    return val[()], der[()]


def hermite_quintic(nodes, y, dy, ddy, t, deriv: int = 0):
    """C² quintic Hermite interpolant using values, first and second derivatives.

    ``deriv`` selects the derivative order returned (0, 1 or 2).
    """
    t = np.asarray(t, dtype=float)
    i = np.clip(np.searchsorted(nodes, t, side="right") - 1, 0, len(nodes) - 2)
    t0 = nodes[i]
    h = nodes[i + 1] - t0
    s = (t - t0) / h
    # basis in s; coefficient rows are (1, s, s², s³, s⁴, s⁵)
    powers = np.stack([s**k for k in range(6)])
    basis = np.array([
        [1, 0, 0, -10, 15, -6],      # y0
        [0, 1, 0, -6, 8, -3],        # h·y0'
        [0, 0, 0.5, -1.5, 1.5, -0.5],  # h²·y0''
        [0, 0, 0, 10, -15, 6],       # y1
        [0, 0, 0, -4, 7, -3],        # h·y1'
        [0, 0, 0, 0.5, -1, 0.5],     # h²·y1''
    ])
    if deriv:
        k = np.arange(6, dtype=float)
        for _ in range(deriv):
            basis = basis[:, 1:] * k[1:basis.shape[1]]
            k = k[:-1]
        basis = np.hstack([basis, np.zeros((6, deriv))])
    w = np.tensordot(basis, powers, axes=(1, 0))
    val = (w[0] * y[i] + w[1] * h * dy[i] + w[2] * h**2 * ddy[i]
           + w[3] * y[i + 1] + w[4] * h * dy[i + 1] + w[5] * h**2 * ddy[i + 1])
    return (val / h**deriv)[()]


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Time-ordered samples of (q, q̇) with cubic Hermite dense output."""

    t: np.ndarray
    q: np.ndarray
    qdot: np.ndarray

    def __post_init__(self):
        t, q, qd = _frozen(self.t), _frozen(self.q), _frozen(self.qdot)
        if t.ndim != 1 or t.size < 2 or q.shape != t.shape or qd.shape != t.shape:
            raise DomainError("trajectory arrays must be 1-D, equal length, >= 2 samples")
        if not np.all(np.diff(t) > 0):
            raise DomainError("trajectory times must be strictly increasing")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "qdot", qd)

    def __len__(self):
        return self.t.size

    @property
    def t_min(self) -> float:
        return float(self.t[0])

    @property
    def t_max(self) -> float:
        return float(self.t[-1])

    def check_range(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < self.t_min) or np.any(t > self.t_max):
            raise TimeRangeError(f"t outside trajectory range [{self.t_min}, {self.t_max}]")
        return t

    def interpolate(self, t):
        """Return ``(q, qdot)`` at ``t`` (scalar or array)."""
        return hermite_cubic(self.t, self.q, self.qdot, self.check_range(t))

    def state_at(self, t: float) -> ClassicalState:
        q, qd = self.interpolate(t)
        return ClassicalState(float(t), float(q), float(qd))

    def states(self):
        return [ClassicalState(float(a), float(b), float(c))
                for a, b, c in zip(self.t, self.q, self.qdot)]

    def __add__(self, other: Trajectory) -> Trajectory:
        if not np.array_equal(self.t, other.t):
            raise DomainError("trajectories must share sample times")
        return Trajectory(self.t, self.q + other.q, self.qdot + other.qdot)

    def __mul__(self, c: float) -> Trajectory:
        return Trajectory(self.t, c * self.q, c * self.qdot)

    __rmul__ = __mul__
