"""Gaussian wave-packet effective dynamics.

A packet ψ = N e^{iγ} e^{ixp/ħ} e^{−A(x−q)²} with A = (1 − 2iαβ/ħ)/(4α²)
stays Gaussian in a quadratic well. Its parameters follow a doubled
classical phase space {q, p} = {α, β} = 1 whose width sector carries the
conformal potential ħ²/(8mα²).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from . import _rk
from .classical import poisson_bracket_fd
from .core import (
    CollapseError,
    DomainError,
    FrequencyProfile,
    PhysicalParams,
    TimeGrid,
    TdhoError,
)
from .ermakov import EtaSolution, ReparamMap, synchronizing_clock

COLLAPSE_FRACTION = 1e-8


@dataclass(frozen=True)
class GaussianState:
    t: float
    q: float
    p: float
    alpha: float
    beta: float
    gamma: float = 0.0
    params: PhysicalParams = field(default_factory=PhysicalParams)

    def __post_init__(self):
        vals = (self.t, self.q, self.p, self.alpha, self.beta, self.gamma)
        if not all(math.isfinite(v) for v in vals):
            raise DomainError(f"gaussian state must be finite, got {self}")
        if not self.alpha > 0:
            raise DomainError(f"alpha must be positive, got {self.alpha!r}")

    @property
    def width(self) -> complex:
        """Complex Gaussian width A."""
        a, b, hbar = self.alpha, self.beta, self.params.hbar
        return complex(1.0, -2.0 * a * b / hbar) / (4.0 * a * a)

    @property
    def norm(self) -> float:
        return (self.alpha * math.sqrt(2 * math.pi)) ** -0.5

    def as_array(self) -> np.ndarray:
        return np.array([self.q, self.p, self.alpha, self.beta, self.gamma])

    @classmethod
    def coherent(cls, omega0: float, params: PhysicalParams, q: float = 0.0, p: float = 0.0,
                 t: float = 0.0) -> GaussianState:
        """Stationary width α = √(ħ/2mω₀), β = 0 for a constant well."""
        alpha = math.sqrt(params.hbar / (2 * params.m * omega0))
        return cls(t, q, p, alpha, 0.0, 0.0, params)


@dataclass(frozen=True)
class Moments:
    """⟨x̂⟩, ⟨p̂⟩, ⟨x̂²⟩, ⟨p̂²⟩ and ⟨D̂⟩ with D̂ = ½(x̂p̂ + p̂x̂)."""

    x1: float
    p1: float
    x2: float
    p2: float
    d: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x1, self.p1, self.x2, self.p2, self.d])

    def centered_casimir(self) -> float:
        return ((self.x2 - self.x1**2) * (self.p2 - self.p1**2)
                - (self.d - self.x1 * self.p1) ** 2)


def moments_of_gaussian(state: GaussianState) -> Moments:
    q, p, a, b = state.q, state.p, state.alpha, state.beta
    hbar = state.params.hbar
    return Moments(
        x1=q,
        p1=p,
        x2=q * q + a * a,
        p2=p * p + b * b + hbar * hbar / (4 * a * a),
        d=p * q + a * b,
    )


def uncertainty_casimir(m: Moments) -> float:
    """C = ⟨x̂²⟩⟨p̂²⟩ − ⟨D̂⟩²."""
    return m.x2 * m.p2 - m.d * m.d


def ermakov_invariant_of_width(state: GaussianState) -> float:
    """I_α = [(αp − βq)² + ħ²q²/(4α²)] / (2m²)."""
    q, p, a, b = state.q, state.p, state.alpha, state.beta
    m, hbar = state.params.m, state.params.hbar
    return ((a * p - b * q) ** 2 + hbar**2 * q * q / (4 * a * a)) / (2 * m * m)


def casimir_ermakov_identity(state: GaussianState) -> tuple[float, float, float]:
    """Return ``(C, I_alpha, |C − (2m²I_α + ħ²/4)|)``."""
    C = uncertainty_casimir(moments_of_gaussian(state))
    I = ermakov_invariant_of_width(state)
    m, hbar = state.params.m, state.params.hbar
    return C, I, abs(C - (2 * m * m * I + hbar * hbar / 4))


def effective_hamiltonian(state: GaussianState, profile: FrequencyProfile) -> float:
    """H = p²/2m + ½mω²q² + β²/2m + ½mω²α² + ħ²/(8mα²)."""
    m, hbar = state.params.m, state.params.hbar
    w2 = float(profile.omega_sq(state.t))
    q, p, a, b = state.q, state.p, state.alpha, state.beta
    return (p * p / (2 * m) + 0.5 * m * w2 * q * q
            + b * b / (2 * m) + 0.5 * m * w2 * a * a + hbar**2 / (8 * m * a * a))


def gaussian_rhs(profile: FrequencyProfile, params: PhysicalParams):
    """Right-hand side for y = (q, p, α, β, γ)."""
    m, hbar = params.m, params.hbar

    def rhs(t, y):
        q, p, a, b, _ = y
        w2 = profile.omega_sq(t)
        lag = p * p / (2 * m) - 0.5 * m * w2 * q * q
        return np.array([
            p / m,
            -m * w2 * q,
            b / m,
            -m * w2 * a + hbar * hbar / (4 * m * a**3),
            -lag / hbar - hbar / (4 * m * a * a),
        ])

    return rhs


def effective_vector_field(state: GaussianState, profile: FrequencyProfile) -> np.ndarray:
    """(q̇, ṗ, α̇, β̇) from the equations of motion."""
    return gaussian_rhs(profile, state.params)(state.t, state.as_array())[:4]


def moment_closure_rhs(moments: Moments, omega_sq: float, m: float) -> np.ndarray:
    """d/dt of (⟨x̂²⟩, ⟨p̂²⟩, ⟨D̂⟩) in a quadratic well.

    d⟨x²⟩ = 2⟨D⟩/m, d⟨p²⟩ = −2mω²⟨D⟩, d⟨D⟩ = ⟨p²⟩/m − mω²⟨x²⟩.
    """
    return np.array([
        2 * moments.d / m,
        -2 * m * omega_sq * moments.d,
        moments.p2 / m - m * omega_sq * moments.x2,
    ])


@dataclass(frozen=True, eq=False)
class GaussianSeries:
    """Output of :func:`evolve_gaussian` sampled on a time grid."""

    t: np.ndarray
    q: np.ndarray
    p: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray
    params: PhysicalParams
    profile: FrequencyProfile

    def __len__(self):
        return self.t.size

    def __getitem__(self, i) -> GaussianState:
        return GaussianState(float(self.t[i]), float(self.q[i]), float(self.p[i]),
                             float(self.alpha[i]), float(self.beta[i]),
                             float(self.gamma[i]), self.params)

    def __iter__(self) -> Iterator[GaussianState]:
        return (self[i] for i in range(len(self)))

    def moments(self) -> np.ndarray:
        """Array of shape (n, 5): x1, p1, x2, p2, d."""
        hb = self.params.hbar
        return np.column_stack([
            self.q,
            self.p,
            self.q**2 + self.alpha**2,
            self.p**2 + self.beta**2 + hb * hb / (4 * self.alpha**2),
            self.p * self.q + self.alpha * self.beta,
        ])

    def casimir(self) -> np.ndarray:
        mo = self.moments()
        return mo[:, 2] * mo[:, 3] - mo[:, 4] ** 2

    def ermakov_invariant(self) -> np.ndarray:
        m, hb = self.params.m, self.params.hbar
        a, b, q, p = self.alpha, self.beta, self.q, self.p
        return ((a * p - b * q) ** 2 + hb**2 * q * q / (4 * a * a)) / (2 * m * m)

    def hamiltonian(self) -> np.ndarray:
        m, hb = self.params.m, self.params.hbar
        w2 = self.profile.omega_sq(self.t)
        return (self.p**2 / (2 * m) + 0.5 * m * w2 * self.q**2 + self.beta**2 / (2 * m)
                + 0.5 * m * w2 * self.alpha**2 + hb**2 / (8 * m * self.alpha**2))

    def as_eta(self) -> EtaSolution:
        """View α(t) as a solution of the auxiliary equation with Ω = ħ/2m."""
        return EtaSolution(self.t, self.alpha, self.beta / self.params.m,
                           self.params.omega_quantum, self.profile)


def evolve_gaussian(
    profile: FrequencyProfile,
    init: GaussianState,
    grid: TimeGrid,
    rel_tol: float = 1e-10,
) -> GaussianSeries:
    """Integrate the packet parameters (q, p, α, β, γ) on ``grid``.

    Raises
    ------
    CollapseError
        If α drops below ``1e-8 * α₀``.
    """
    if init.t != grid.t_start:
        raise DomainError(f"init.t={init.t} must equal grid.t_start={grid.t_start}")
    floor = COLLAPSE_FRACTION * init.alpha

    def check(t, y):
        if not y[2] > floor:
            raise CollapseError("alpha collapsed towards zero", t)

    ts = grid.times
    ys = _rk.integrate(gaussian_rhs(profile, init.params), init.t, init.as_array(), ts,
                       rel_tol, check=check)
    return GaussianSeries(ts, ys[:, 0], ys[:, 1], ys[:, 2], ys[:, 3], ys[:, 4],
                          init.params, profile)


def alpha_clock(series: GaussianSeries) -> ReparamMap:
    """Synchronizing clock τ = ∫dt/α² = 4∫dt Re(A) built from the packet width."""
    if not np.all(series.alpha > 0):
        raise DomainError("alpha must stay positive")
    hb = series.params.hbar
    width = (1 - 2j * series.alpha * series.beta / hb) / (4 * series.alpha**2)
    mismatch = np.abs(4 * width.real * series.alpha**2 - 1.0)
    if np.max(mismatch) > 1e-12:
        raise TdhoError("4 Re(A) differs from 1/alpha^2")
    return synchronizing_clock(series.as_eta())


def _doubled_point(state: GaussianState) -> np.ndarray:
    # canonical layout (q, α, p, β): pairs (q, p) and (α, β)
    return np.array([state.q, state.alpha, state.p, state.beta])


def uncertainty_algebra_check(state: GaussianState, h: float | None = None) -> float:
    """Max deviation of the finite-difference brackets from the sl(2, R) relations.

    Checks {⟨x²⟩,⟨p²⟩} = 4⟨D⟩, {⟨D⟩,⟨x²⟩} = −2⟨x²⟩ and {⟨D⟩,⟨p²⟩} = 2⟨p²⟩ on
    the doubled phase space (q, p, α, β).
    """
    hbar = state.params.hbar

    def x2(z):
        return z[0] ** 2 + z[1] ** 2

    def p2(z):
        return z[2] ** 2 + z[3] ** 2 + hbar * hbar / (4 * z[1] ** 2)

    def d(z):
        return z[2] * z[0] + z[1] * z[3]

    z = _doubled_point(state)
    mo = moments_of_gaussian(state)
    residuals = [
        poisson_bracket_fd(x2, p2, z, h) - 4 * mo.d,
        poisson_bracket_fd(d, x2, z, h) + 2 * mo.x2,
        poisson_bracket_fd(d, p2, z, h) - 2 * mo.p2,
    ]
    return float(np.max(np.abs(residuals)))


def hamilton_vector_field_fd(state: GaussianState, profile: FrequencyProfile,
                             h: float | None = None) -> np.ndarray:
    """(q̇, ṗ, α̇, β̇) from finite-difference gradients of the effective Hamiltonian."""
    def H(z):
        s = GaussianState(state.t, z[0], z[2], z[1], z[3], state.gamma, state.params)
        return effective_hamiltonian(s, profile)

    z = _doubled_point(state)
    # ż_i = {z_i, H}
    coords = [lambda x, i=i: x[i] for i in range(4)]
    qdot, adot, pdot, bdot = (poisson_bracket_fd(c, H, z, h) for c in coords)
    return np.array([qdot, pdot, adot, bdot])
