"""Embedded Dormand-Prince 5(4) integrator with 4th-order dense output.

Steps are chosen by the error controller alone; output times are filled in
from the continuous extension, so the step sequence never depends on where
the caller wants samples.
"""
from __future__ import annotations

import math
from typing import Callable, Optional

import numpy as np

from .core import IntegrationError

# Butcher tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
# difference between 5th and embedded 4th order weights
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])
# continuous extension, columns multiply (θ, θ², θ³, θ⁴)
_P = np.array([
    [1, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0, 0, 0, 0],
    [0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 5.0
FLOOR = 1e-12


def integrate(
    rhs: Callable[[float, np.ndarray], np.ndarray],
    t0: float,
    y0,
    t_out,
    rel_tol: float,
    *,
    check: Optional[Callable[[float, np.ndarray], None]] = None,
    max_steps: int = 10_000_000,
) -> np.ndarray:
    """Integrate ``y' = rhs(t, y)`` forward and sample at ``t_out``.

    The local error estimate of every accepted step satisfies
    ``sum|err| <= rel_tol * (sum|y| + FLOOR)``.

    ``check(t, y)`` runs after each accepted step and may raise to abort.

    Returns an array of shape ``(len(t_out), len(y0))``.
    """
    if not (1e-14 <= rel_tol <= 1e-3):
        raise ValueError(f"rel_tol must lie in [1e-14, 1e-3], got {rel_tol!r}")
    t_out = np.asarray(t_out, dtype=float)
    y = np.array(y0, dtype=float)
    out = np.empty((t_out.size, y.size))
    t = float(t0)
    t_end = float(t_out[-1])
    if t_out[0] < t or np.any(np.diff(t_out) < 0):
        raise ValueError("output times must be non-decreasing and start at or after t0")

    k = np.empty((7, y.size))
    k[0] = rhs(t, y)
    j = 0
    while j < t_out.size and t_out[j] == t:
        out[j] = y
        j += 1

    span = t_end - t
    h = _initial_step(rhs, t, y, k[0], rel_tol, span)
    n_steps = 0
    while j < t_out.size:
        if n_steps >= max_steps:
            raise IntegrationError("too many steps", t)
        h = min(h, t_end - t)
        if h <= 16 * np.finfo(float).eps * max(abs(t), 1.0):
            raise IntegrationError("step size underflow", t)

        for s in range(1, 7):
            k[s] = rhs(t + _C[s] * h, y + h * (_A[s] @ k[:s]))
        y_new = y + h * (_B @ k)
        err = h * np.abs(_E @ k).sum()
        scale = rel_tol * (max(np.abs(y).sum(), np.abs(y_new).sum()) + FLOOR)
        ratio = err / scale
        if not math.isfinite(ratio):
            h *= MIN_FACTOR
            n_steps += 1
            continue
        if ratio <= 1.0:
            t_new = t + h
            if check is not None:
                check(t_new, y_new)
            while j < t_out.size and t_out[j] <= t_new:
                theta = (t_out[j] - t) / h
                if theta >= 1.0:
                    out[j] = y_new
                else:
                    p = np.cumprod(np.full(4, theta))
                    out[j] = y + h * ((k.T @ _P) @ p)
                j += 1
            t, y = t_new, y_new
            k[0] = k[6]
            factor = MAX_FACTOR if ratio == 0 else min(MAX_FACTOR, SAFETY * ratio ** -0.2)
        else:
            factor = max(MIN_FACTOR, SAFETY * ratio ** -0.2)
        h *= factor
        n_steps += 1
    return out


def _initial_step(rhs, t, y, f0, rel_tol, span):
    # Hairer-Wanner starting step heuristic, 1-norm flavour
    scale = rel_tol * (np.abs(y).sum() + FLOOR)
    d0 = np.abs(y).sum() / scale
    d1 = np.abs(f0).sum() / scale
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, span)
    f1 = rhs(t + h0, y + h0 * f0)
    d2 = np.abs(f1 - f0).sum() / scale / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100 * h0, h1, span)
