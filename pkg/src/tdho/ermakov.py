"""Auxiliary (Ermakov) equation η̈ + ω²η = Ω²/η³, the Ermakov-Lewis
invariant, synchronizing clocks τ = ∫dt/η², and Schwarzian checks of the
time-reparametrization law ω² = h²(ω̃∘f)² + ½ Schw[f].
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from . import _rk
from .classical import FundamentalPair
from .core import (
    ClassicalState,
    CollapseError,
    DomainError,
    FrequencyProfile,
    TimeGrid,
    TimeRangeError,
    Trajectory,
    hermite_cubic,
    hermite_quintic,
)

COLLAPSE_FRACTION = 1e-8


@dataclass(frozen=True, eq=False)
class EtaSolution:
    """Samples of a positive solution η of the auxiliary equation.

    Dense values come from a quintic Hermite interpolant whose node second
    derivatives are taken from the equation itself, so η is C² between
    samples.
    """

    t: np.ndarray
    eta: np.ndarray
    etadot: np.ndarray
    Omega: float
    profile: FrequencyProfile
    etaddot: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        t = np.array(self.t, dtype=float)
        eta = np.array(self.eta, dtype=float)
        etadot = np.array(self.etadot, dtype=float)
        if t.ndim != 1 or eta.shape != t.shape or etadot.shape != t.shape or t.size < 2:
            raise DomainError("eta arrays must be 1-D, equal length, >= 2 samples")
        if not np.all(np.diff(t) > 0):
            raise DomainError("eta sample times must be strictly increasing")
        if not np.all(eta > 0):
            raise DomainError("eta must be strictly positive at every sample")
        if not self.Omega >= 0:
            raise DomainError(f"Omega must be >= 0, got {self.Omega!r}")
        etaddot = -self.profile.omega_sq(t) * eta + self.Omega**2 / eta**3
        for name, arr in (("t", t), ("eta", eta), ("etadot", etadot), ("etaddot", etaddot)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def t_min(self) -> float:
        return float(self.t[0])

    @property
    def t_max(self) -> float:
        return float(self.t[-1])

    def _check(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < self.t_min) or np.any(t > self.t_max):
            raise TimeRangeError(f"t outside eta range [{self.t_min}, {self.t_max}]")
        return t

    def __call__(self, t, deriv: int = 0):
        """η (or its ``deriv``-th derivative, up to 2) at ``t``."""
        return hermite_quintic(self.t, self.eta, self.etadot, self.etaddot,
                               self._check(t), deriv)

    def residual(self, t) -> np.ndarray:
        """Relative residual of the auxiliary equation at ``t``."""
        eta = self(t)
        eddot = self(t, 2)
        w2 = self.profile.omega_sq(t)
        src = self.Omega**2 / eta**3
        return np.abs(eddot + w2 * eta - src) / (np.abs(src) + np.abs(w2 * eta))

    def midpoint_residual(self) -> float:
        mid = 0.5 * (self.t[1:] + self.t[:-1])
        return float(np.max(self.residual(mid)))


def solve_eta_ode(
    profile: FrequencyProfile,
    Omega: float,
    init: tuple[float, float],
    grid: TimeGrid,
    rel_tol: float = 1e-10,
) -> EtaSolution:
    """Integrate the auxiliary equation from ``(η₀, η̇₀)`` at ``grid.t_start``.

    Raises
    ------
    CollapseError
        If η drops below ``1e-8 * η₀``.
    """
    eta0, etadot0 = float(init[0]), float(init[1])
    if not eta0 > 0:
        raise DomainError(f"eta0 must be positive, got {eta0!r}")
    if not Omega >= 0:
        raise DomainError(f"Omega must be >= 0, got {Omega!r}")
    om2 = float(Omega) ** 2
    floor = COLLAPSE_FRACTION * eta0

    def rhs(t, y):
        return np.array([y[1], -profile.omega_sq(t) * y[0] + om2 / y[0] ** 3])

    def check(t, y):
        if not y[0] > floor:
            raise CollapseError("eta collapsed towards zero", t)

    ts = grid.times
    ys = _rk.integrate(rhs, grid.t_start, [eta0, etadot0], ts, rel_tol, check=check)
    return EtaSolution(ts, ys[:, 0], ys[:, 1], float(Omega), profile)


def eta_from_pair(pair: FundamentalPair, a: float, b: float, c: float) -> EtaSolution:
    """Algebraic solution η = (a q₁² + b q₂² + 2c q₁q₂)^½ with Ω = √(ab−c²)|W|."""
    det = a * b - c * c
    if not (a > 0 and det > 0):
        raise DomainError(f"need a > 0 and ab - c^2 > 0, got a={a}, b={b}, c={c}")
    p, r = pair.traj1, pair.traj2
    eta_sq = a * p.q**2 + b * r.q**2 + 2 * c * p.q * r.q
    if not np.all(eta_sq > 0):
        raise DomainError("quadratic form is not positive on the pair's range")
    eta = np.sqrt(eta_sq)
    etadot = (a * p.q * p.qdot + b * r.q * r.qdot + c * (p.qdot * r.q + p.q * r.qdot)) / eta
    Omega = math.sqrt(det) * abs(pair.wronskian)
    return EtaSolution(p.t, eta, etadot, Omega, pair.profile)


def initial_data_from_coefficients(a: float, c: float) -> tuple[float, float]:
    """(η₀, η̇₀) matching η² = a q₁² + b q₂² + 2c q₁q₂ for the canonical pair at t₀."""
    if not a > 0:
        raise DomainError(f"a must be positive, got {a!r}")
    return math.sqrt(a), c / math.sqrt(a)


def ermakov_invariant(eta: EtaSolution, state: ClassicalState) -> float:
    """I_η = ½[(ηq̇ − η̇q)² + Ω²q²/η²]."""
    e = float(eta(state.t))
    ed = float(eta(state.t, 1))
    return 0.5 * ((e * state.qdot - ed * state.q) ** 2 + eta.Omega**2 * state.q**2 / e**2)


def ermakov_invariant_series(eta: EtaSolution, traj: Trajectory) -> np.ndarray:
    """I_η evaluated at every sample of ``traj``."""
    e = eta(traj.t)
    ed = eta(traj.t, 1)
    return 0.5 * ((e * traj.qdot - ed * traj.q) ** 2 + eta.Omega**2 * traj.q**2 / e**2)


def invariant_from_wronskians(a: float, b: float, c: float, W1: float, W2: float) -> float:
    """I_η written through the Wronskian charges of the canonical pair.

    For η² = a q₁² + b q₂² + 2c q₁q₂ the invariant is
    ½(a W₁² + b W₂² + 2c W₁W₂). The cross term carries 2c, the same
    coefficient as in η².
    """
    return 0.5 * (a * W1 * W1 + b * W2 * W2 + 2.0 * c * W1 * W2)


# ---------------------------------------------------------------------------
# reparametrization maps
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ClosedFormMap:
    """Analytic time map f with Jacobian h = ḟ and its first two derivatives."""

    f: Callable
    h: Callable
    h1: Callable
    h2: Callable
    name: str = "map"

    def tau(self, t):
        return self.f(np.asarray(t, dtype=float))

    def jacobian(self, t):
        return self.h(np.asarray(t, dtype=float))

    def schwarzian(self, t):
        h, h1, h2 = self.h(t), self.h1(t), self.h2(t)
        return h2 / h - 1.5 * (h1 / h) ** 2

    def compose(self, inner: ClosedFormMap) -> ClosedFormMap:
        """The map ``self ∘ inner``."""
        f, g = self, inner

        def h(t):
            return f.h(g.f(t)) * g.h(t)

        def h1(t):
            return f.h1(g.f(t)) * g.h(t) ** 2 + f.h(g.f(t)) * g.h1(t)

        def h2(t):
            x, gh, gh1 = g.f(t), g.h(t), g.h1(t)
            return f.h2(x) * gh**3 + 3 * f.h1(x) * gh * gh1 + f.h(x) * g.h2(t)

        return ClosedFormMap(lambda t: f.f(g.f(t)), h, h1, h2, f"{f.name}∘{g.name}")


def identity_map() -> ClosedFormMap:
    return ClosedFormMap(
        lambda t: np.asarray(t, dtype=float),
        lambda t: np.ones_like(np.asarray(t, dtype=float)),
        lambda t: np.zeros_like(np.asarray(t, dtype=float)),
        lambda t: np.zeros_like(np.asarray(t, dtype=float)),
        "id",
    )


def mobius_map(a: float, b: float, c: float, d: float) -> ClosedFormMap:
    """f(t) = (a t + b)/(c t + d) with ad − bc > 0."""
    det = a * d - b * c
    if not det > 0:
        raise DomainError(f"Mobius map needs ad - bc > 0, got {det!r}")
    return ClosedFormMap(
        lambda t: (a * t + b) / (c * t + d),
        lambda t: det / (c * t + d) ** 2,
        lambda t: -2 * c * det / (c * t + d) ** 3,
        lambda t: 6 * c * c * det / (c * t + d) ** 4,
        "mobius",
    )


def exp_map() -> ClosedFormMap:
    return ClosedFormMap(np.exp, np.exp, np.exp, np.exp, "exp")


def tan_map() -> ClosedFormMap:
    def h(t):
        return 1 / np.cos(t) ** 2

    def h1(t):
        return 2 * np.tan(t) / np.cos(t) ** 2

    def h2(t):
        return (2 + 6 * np.tan(t) ** 2) / np.cos(t) ** 2

    return ClosedFormMap(np.tan, h, h1, h2, "tan")


def power_map(k: float) -> ClosedFormMap:
    """f(t) = t^k on t > 0."""
    return ClosedFormMap(
        lambda t: t**k,
        lambda t: k * t ** (k - 1),
        lambda t: k * (k - 1) * t ** (k - 2),
        lambda t: k * (k - 1) * (k - 2) * t ** (k - 3),
        f"pow{k}",
    )


@dataclass(frozen=True, eq=False)
class ReparamMap:
    """Sampled monotone clock t ↦ τ with Jacobian h = dτ/dt > 0.

    Forward evaluation is cubic Hermite on (τ, h). The inverse solves the
    forward interpolant by safeguarded Newton iteration, so a round trip is
    exact to rounding.
    """

    t: np.ndarray
    tau_nodes: np.ndarray
    h_nodes: np.ndarray
    h_func: Optional[Callable] = field(default=None, repr=False)

    def __post_init__(self):
        t = np.array(self.t, dtype=float)
        tau = np.array(self.tau_nodes, dtype=float)
        hn = np.array(self.h_nodes, dtype=float)
        if not (t.shape == tau.shape == hn.shape and t.ndim == 1 and t.size >= 2):
            raise DomainError("map arrays must be 1-D and of equal length")
        if not np.all(hn > 0):
            raise DomainError("clock Jacobian must be strictly positive")
        if not (np.all(np.diff(t) > 0) and np.all(np.diff(tau) > 0)):
            raise DomainError("clock must be strictly increasing")
        for name, arr in (("t", t), ("tau_nodes", tau), ("h_nodes", hn)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def t_min(self) -> float:
        return float(self.t[0])

    @property
    def t_max(self) -> float:
        return float(self.t[-1])

    def _check(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < self.t_min) or np.any(t > self.t_max):
            raise TimeRangeError(f"t outside clock range [{self.t_min}, {self.t_max}]")
        return t

    def tau(self, t):
        return hermite_cubic(self.t, self.tau_nodes, self.h_nodes, self._check(t))[0]

    def jacobian(self, t):
        t = self._check(t)
        if self.h_func is not None:
            return self.h_func(t)
        return hermite_cubic(self.t, self.tau_nodes, self.h_nodes, t)[1]

    def inverse(self, tau):
        """t(τ): Newton on the forward interpolant, bracketed per interval."""
        tau = np.atleast_1d(np.asarray(tau, dtype=float))
        lo_tau, hi_tau = self.tau_nodes[0], self.tau_nodes[-1]
        if np.any(tau < lo_tau) or np.any(tau > hi_tau):
            raise TimeRangeError(f"tau outside clock range [{lo_tau}, {hi_tau}]")
        i = np.clip(np.searchsorted(self.tau_nodes, tau, side="right") - 1, 0, self.t.size - 2)
        a, b = self.t[i].copy(), self.t[i + 1].copy()
        # secant start inside the bracket
        frac = (tau - self.tau_nodes[i]) / (self.tau_nodes[i + 1] - self.tau_nodes[i])
        x = a + frac * (b - a)
        for _ in range(60):
            val, der = hermite_cubic(self.t, self.tau_nodes, self.h_nodes, x)
            val, der = np.atleast_1d(val), np.atleast_1d(der)
            g = val - tau
            a = np.where(g < 0, x, a)
            b = np.where(g > 0, x, b)
            with np.errstate(divide="ignore", invalid="ignore"):
                step = np.where(der > 0, g / der, 0.0)
            x_new = x - step
            outside = (x_new <= a) | (x_new >= b) | (der <= 0)
            x_new = np.where(outside, 0.5 * (a + b), x_new)
            if np.all(np.abs(x_new - x) <= 4 * np.finfo(float).eps * np.maximum(np.abs(x), 1.0)):
                x = x_new
                break
            x = x_new
        # nodes come back exactly
        hit = tau == self.tau_nodes[i]
        x = np.where(hit, self.t[i], x)
        hit1 = tau == self.tau_nodes[i + 1]
        x = np.where(hit1, self.t[i + 1], x)
        return x[()] if x.size > 1 else float(x[0])


def synchronizing_clock(eta: EtaSolution, refine: int = 8) -> ReparamMap:
    """τ(t) = ∫ dt/η² with τ(t_start) = 0.

    Each output interval is split into ``refine`` (even) panels and
    integrated with composite Simpson using the dense η.
    """
    if refine % 2:
        raise DomainError("Simpson refinement must be even")
    t = eta.t
    s = np.linspace(0.0, 1.0, refine + 1)
    fine = t[:-1, None] + (t[1:] - t[:-1])[:, None] * s[None, :]
    fine[:, -1] = t[1:]
    vals = 1.0 / eta(fine) ** 2
    w = np.ones(refine + 1)
    w[1:-1:2] = 4
    w[2:-1:2] = 2
    increments = (t[1:] - t[:-1]) / (3 * refine) * (vals @ w)
    tau = np.concatenate([[0.0], np.cumsum(increments)])
    h = 1.0 / eta.eta**2

    def h_func(x):
        return 1.0 / eta(x) ** 2

    return ReparamMap(t, tau, h, h_func)


AnyMap = Union[ReparamMap, ClosedFormMap]


def schwarzian(map: AnyMap, t, step: Optional[float] = None):
    """Schw[f] = d²ln h − ½(d ln h)².

    Analytic for :class:`ClosedFormMap`; five-point central differences of
    ln h for sampled maps with step ``1e-4 * range`` by default.
    """
    if isinstance(map, ClosedFormMap):
        return map.schwarzian(np.asarray(t, dtype=float))[()]
    t = np.asarray(t, dtype=float)
    if step is None:
        step = 1e-4 * (map.t_max - map.t_min)
    if np.any(t - 2 * step < map.t_min) or np.any(t + 2 * step > map.t_max):
        raise TimeRangeError("not enough room for the finite-difference stencil")
    f = [np.log(map.jacobian(t + k * step)) for k in (-2, -1, 0, 1, 2)]
    d1 = (f[0] - 8 * f[1] + 8 * f[3] - f[4]) / (12 * step)
    d2 = (-f[0] + 16 * f[1] - 30 * f[2] + 16 * f[3] - f[4]) / (12 * step**2)
    return (d2 - 0.5 * d1**2)[()]


def frequency_transform_residual(
    profile: FrequencyProfile,
    map: AnyMap,
    target_omega_sq: Callable,
    t_eval=None,
    n: int = 401,
) -> float:
    """max |ω²(t) − h²·ω̃²(f(t)) − ½Schw[f](t)| on a uniform grid.

    For sampled maps the grid keeps clear of the finite-difference stencil at
    both ends; closed-form maps need ``t_eval`` explicitly.
    """
    if t_eval is None:
        if isinstance(map, ClosedFormMap):
            raise DomainError("closed-form maps need explicit evaluation times")
        margin = 3e-4 * (map.t_max - map.t_min)
        t_eval = np.linspace(map.t_min + margin, map.t_max - margin, n)
    t_eval = np.asarray(t_eval, dtype=float)
    h = map.jacobian(t_eval)
    lhs = profile.omega_sq(t_eval)
    rhs = h**2 * target_omega_sq(map.tau(t_eval)) + 0.5 * schwarzian(map, t_eval)
    return float(np.max(np.abs(lhs - rhs)))


def reparametrize_trajectory(traj: Trajectory, eta: EtaSolution, map: ReparamMap) -> Trajectory:
    """Map (t, q) ↦ (τ, Q = q/η) with d_τQ = ηq̇ − η̇q.

    The returned :class:`Trajectory` uses τ as its time axis.
    """
    if traj.t_min < eta.t_min or traj.t_max > eta.t_max:
        raise TimeRangeError("trajectory extends beyond the eta solution")
    if traj.t_min < map.t_min or traj.t_max > map.t_max:
        raise TimeRangeError("trajectory extends beyond the clock")
    e = eta(traj.t)
    ed = eta(traj.t, 1)
    tau = map.tau(traj.t)
    return Trajectory(tau, traj.q / e, e * traj.qdot - ed * traj.q)


def oscillator_residual(synced: Trajectory, Omega: float, n: int = 2001) -> float:
    """max |d²Q/dτ² + Ω²Q| / ‖Q‖∞ on a uniform τ-resampling.

    Q is resampled with the Hermite interpolant in τ and differentiated with
    the five-point second-difference stencil.
    """
    tau = np.linspace(synced.t_min, synced.t_max, n)
    dtau = tau[1] - tau[0]
    Q, _ = synced.interpolate(tau)
    ddQ = (-Q[:-4] + 16 * Q[1:-3] - 30 * Q[2:-2] + 16 * Q[3:-1] - Q[4:]) / (12 * dtau**2)
    norm = np.max(np.abs(Q))
    return float(np.max(np.abs(ddQ + Omega**2 * Q[2:-2])) / norm)


def fit_harmonic(tau, Q, Omega: float) -> tuple[float, float, float]:
    """Least-squares fit Q ≈ A cos(Ωτ + φ).

    Returns ``(A, phi, max_abs_residual)``.
    """
    tau = np.asarray(tau, dtype=float)
    Q = np.asarray(Q, dtype=float)
    basis = np.column_stack([np.cos(Omega * tau), np.sin(Omega * tau)])
    coef, *_ = np.linalg.lstsq(basis, Q, rcond=None)
    A = math.hypot(coef[0], coef[1])
    phi = math.atan2(-coef[1], coef[0])
    resid = float(np.max(np.abs(basis @ coef - Q)))
    return A, phi, resid


def sl2_pullback(eta: EtaSolution, clock: ReparamMap, mobius: tuple[float, float, float, float]
                 ) -> EtaSolution:
    """New auxiliary solution obtained from a symmetry of the synchronized oscillator.

    The Möbius matrix (α, β, γ, δ) with αδ − βγ = 1 acts on u = tan(Ωτ); the
    induced τ ↦ g(τ) preserves the constant frequency Ω, and the clock
    τ' = g(τ(t)) corresponds to η' = η / √g'(τ). In closed form
    η'² = η²[(β² + δ²)cos²Ωτ + (α² + γ²)sin²Ωτ + 2(αβ + γδ) sinΩτ cosΩτ].
    """
    al, be, ga, de = mobius
    if not abs(al * de - be * ga - 1.0) < 1e-12:
        raise DomainError("Mobius matrix must have unit determinant")
    Om = eta.Omega
    tau = clock.tau(eta.t)
    c, s = np.cos(Om * tau), np.sin(Om * tau)
    quad = (be**2 + de**2) * c * c + (al**2 + ga**2) * s * s + 2 * (al * be + ga * de) * s * c
    dquad = 2 * Om * ((al**2 + ga**2 - be**2 - de**2) * s * c
                      + (al * be + ga * de) * (c * c - s * s))
    h = 1.0 / eta.eta**2
    new_eta = eta.eta * np.sqrt(quad)
    new_etadot = eta.etadot * np.sqrt(quad) + eta.eta * dquad * h / (2 * np.sqrt(quad))
    return EtaSolution(eta.t, new_eta, new_etadot, Om, eta.profile)


# ---------------------------------------------------------------------------
# symmetry vector fields
# ---------------------------------------------------------------------------

def _d1_7pt(x, h):
    return (-x[:-6] + 9 * x[1:-5] - 45 * x[2:-4] + 45 * x[4:-2] - 9 * x[5:-1] + x[6:]) / (60 * h)


def _d3_7pt(x, h):
    return (x[:-6] - 8 * x[1:-5] + 13 * x[2:-4] - 13 * x[4:-2] + 8 * x[5:-1] - x[6:]) / (8 * h**3)


def symmetry_residual(profile: FrequencyProfile, t, X) -> float:
    """Normalized residual of X⁽³⁾ + 4ω²Ẋ + 2(ω²)˙X on uniform samples.

    Returns max over interior points divided by ``max|X⁽³⁾| + 1``. Vector
    fields X ∂_t that are symmetries of the oscillator give ~0.
    """
    t = np.asarray(t, dtype=float)
    X = np.asarray(X, dtype=float)
    if t.shape != X.shape or t.ndim != 1:
        raise DomainError("t and X must be 1-D arrays of equal length")
    if t.size < 7:
        raise DomainError("need at least 7 samples for the 7-point stencils")
    dt = np.diff(t)
    h = dt[0]
    if not np.allclose(dt, h, rtol=1e-9, atol=0):
        raise DomainError("samples must be uniformly spaced")
    ti = t[3:-3]
    X1 = _d1_7pt(X, h)
    X3 = _d3_7pt(X, h)
    res = X3 + 4 * profile.omega_sq(ti) * X1 + 2 * profile.omega_sq_dot(ti) * X[3:-3]
    return float(np.max(np.abs(res)) / (np.max(np.abs(X3)) + 1.0))
