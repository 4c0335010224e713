"""Classical oscillator q̈ + ω(t)² q = 0: trajectories, fundamental pairs,
Wronskian charges and finite-difference Poisson brackets."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import _rk
from .core import (
    ClassicalState,
    DomainError,
    FrequencyProfile,
    TimeGrid,
    TimeRangeError,
    Trajectory,
)


def oscillator_rhs(profile: FrequencyProfile):
    def rhs(t, y):
        return np.array([y[1], -profile.omega_sq(t) * y[0]])
    return rhs


def integrate_oscillator(
    profile: FrequencyProfile,
    init: ClassicalState,
    grid: TimeGrid,
    rel_tol: float = 1e-10,
) -> Trajectory:
    """Integrate the oscillator from ``init`` and sample on ``grid``.

    Raises
    ------
    IntegrationError
        If the adaptive step size underflows.
    """
    if init.t != grid.t_start:
        raise DomainError(f"init.t={init.t} must equal grid.t_start={grid.t_start}")
    ts = grid.times
    ys = _rk.integrate(oscillator_rhs(profile), init.t, [init.q, init.qdot], ts, rel_tol)
    return Trajectory(ts, ys[:, 0], ys[:, 1])


@dataclass(frozen=True)
class FundamentalPair:
    """Two solutions with q₁=1, q̇₁=0, q₂=0, q̇₂=1 at ``t0``."""

    traj1: Trajectory
    traj2: Trajectory
    t0: float
    profile: FrequencyProfile
    wronskian: float = 1.0

    def wronskian_series(self) -> np.ndarray:
        a, b = self.traj1, self.traj2
        return a.q * b.qdot - a.qdot * b.q

    def at(self, t):
        """``(q1, q1dot, q2, q2dot)`` at ``t`` by Hermite interpolation."""
        q1, d1 = self.traj1.interpolate(t)
        q2, d2 = self.traj2.interpolate(t)
        return q1, d1, q2, d2


def fundamental_pair(
    profile: FrequencyProfile,
    t0: float,
    grid: TimeGrid,
    rel_tol: float = 1e-10,
) -> FundamentalPair:
    traj1 = integrate_oscillator(profile, ClassicalState(t0, 1.0, 0.0), grid, rel_tol)
    traj2 = integrate_oscillator(profile, ClassicalState(t0, 0.0, 1.0), grid, rel_tol)
    return FundamentalPair(traj1, traj2, float(t0), profile, 1.0)


def wronskian_charges(pair: FundamentalPair, state: ClassicalState) -> tuple[float, float]:
    """W_a = q_a q̇ − q̇_a q for a = 1, 2, evaluated at ``state.t``."""
    if not pair.traj1.t_min <= state.t <= pair.traj1.t_max:
        raise TimeRangeError(f"t={state.t} outside the pair's range")
    q1, d1, q2, d2 = pair.at(state.t)
    w1 = q1 * state.qdot - d1 * state.q
    w2 = q2 * state.qdot - d2 * state.q
    return float(w1), float(w2)


def wronskian_functions(pair: FundamentalPair, t: float, m: float = 1.0):
    """Phase-space functions ``W1(q, p)`` and ``W2(q, p)`` at fixed time ``t``.

    Uses the canonical momentum p = m q̇, so both take a point ``(q, p)``.
    """
    q1, d1, q2, d2 = (float(v) for v in pair.at(t))

    def w1(x):
        return q1 * x[1] / m - d1 * x[0]

    def w2(x):
        return q2 * x[1] / m - d2 * x[0]

    return w1, w2


def default_fd_step(point) -> float:
    return 1e-5 * (1.0 + float(np.max(np.abs(point))))


def poisson_bracket_fd(
    F: Callable[[np.ndarray], float],
    G: Callable[[np.ndarray], float],
    point,
    h: float | None = None,
) -> float:
    """Central-difference estimate of the canonical bracket {F, G}.

    ``point`` is laid out as ``(q_1, ..., q_n, p_1, ..., p_n)``; each
    ``(q_i, p_i)`` is a canonical pair. The error is O(h²).
    """
    x = np.asarray(point, dtype=float)
    if x.ndim != 1 or x.size % 2:
        raise DomainError("phase-space point must be a flat array of even length")
    if h is None:
        h = default_fd_step(x)
    if not h > 0:
        raise DomainError(f"finite-difference step must be positive, got {h!r}")
    n = x.size // 2
    dF = _gradient(F, x, h)
    dG = _gradient(G, x, h)
    return float(np.sum(dF[:n] * dG[n:]) - np.sum(dF[n:] * dG[:n]))


def _gradient(f, x, h):
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        fp, fm = f(x + e), f(x - e)
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise DomainError(f"non-finite function value near {x}")
        g[i] = (fp - fm) / (2 * h)
    return g
