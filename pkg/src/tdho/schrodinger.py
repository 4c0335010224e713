"""Split-step Fourier propagation of iħψ_t = −(ħ²/2m)ψ_xx + ½mω(t)²x²ψ.

Serves as an ansatz-free reference for the Gaussian effective dynamics:
moments are computed from the grid wave-function alone.
"""
from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np

from .core import (
    DomainError,
    FrequencyProfile,
    PhysicalParams,
    TdhoError,
    TimeGrid,
)
from .gaussian import (
    GaussianSeries,
    GaussianState,
    Moments,
    evolve_gaussian,
    uncertainty_casimir,
)

BOUNDARY_FRACTION = 1e-10


class GridError(DomainError):
    """The spatial grid cannot hold the packet (too wide or under-resolved)."""


class BoundaryContaminationError(TdhoError, RuntimeError):
    """The wave-function reached the edge of the periodic box."""


@dataclass(frozen=True)
class SpatialGrid:
    x_min: float
    dx: float
    n: int

    def __post_init__(self):
        if not self.dx > 0:
            raise GridError(f"dx must be positive, got {self.dx!r}")
        n = int(self.n)
        if n != self.n or n < 256 or n & (n - 1):
            raise GridError(f"n must be a power of two >= 256, got {self.n!r}")

    @property
    def x(self) -> np.ndarray:
        return self.x_min + self.dx * np.arange(self.n)

    @property
    def x_max(self) -> float:
        return self.x_min + (self.n - 1) * self.dx

    @property
    def k(self) -> np.ndarray:
        return 2 * np.pi * np.fft.fftfreq(self.n, d=self.dx)

    @classmethod
    def symmetric(cls, half_width: float, n: int, center: float = 0.0) -> SpatialGrid:
        dx = 2 * half_width / (n - 1)
        return cls(center - half_width, dx, n)


@dataclass(frozen=True, eq=False)
class WaveFunction:
    grid: SpatialGrid
    amplitudes: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        psi = np.array(self.amplitudes, dtype=complex)
        if psi.shape != (self.grid.n,):
            raise DomainError("amplitude array does not match the grid")
        psi.setflags(write=False)
        object.__setattr__(self, "amplitudes", psi)

    def norm(self) -> float:
        return trapezoid(np.abs(self.amplitudes) ** 2, self.grid.dx)

    def boundary_ratio(self) -> float:
        a = np.abs(self.amplitudes)
        return float(max(a[0], a[-1]) / a.max())


def trapezoid(f, dx: float):
    f = np.asarray(f)
    return dx * (f.sum() - 0.5 * (f[0] + f[-1]))


def gaussian_amplitudes(state: GaussianState, x: np.ndarray) -> np.ndarray:
    """Closed-form packet N e^{iγ} e^{ixp/ħ} e^{−A(x−q)²} on ``x``."""
    hbar = state.params.hbar
    return (state.norm * np.exp(1j * state.gamma) * np.exp(1j * x * state.p / hbar)
            * np.exp(-state.width * (x - state.q) ** 2))


def init_gaussian_wavefunction(state: GaussianState, grid: SpatialGrid) -> WaveFunction:
    """Sample the packet on ``grid`` and fix the discrete norm to one.

    Raises
    ------
    GridError
        If dx does not resolve α or the packet touches the box edges.
    """
    if grid.dx > state.alpha / 8:
        raise GridError(f"dx={grid.dx} does not resolve alpha={state.alpha} (need dx <= alpha/8)")
    psi = gaussian_amplitudes(state, grid.x)
    wf = WaveFunction(grid, psi, state.t)
    if wf.boundary_ratio() >= BOUNDARY_FRACTION:
        raise GridError("packet too wide for the grid: amplitude at the box edge")
    norm = wf.norm()
    if abs(norm - 1) > 1e-6:
        raise GridError(f"discrete norm {norm} far from one; grid under-resolves the packet")
    return WaveFunction(grid, psi / math.sqrt(norm), state.t)


def split_step_propagate(
    psi: WaveFunction,
    profile: FrequencyProfile,
    dt: float,
    n_steps: int,
    params: PhysicalParams,
    check_every: int = 1000,
) -> WaveFunction:
    """Strang splitting with the potential taken at each step midpoint.

    Each step is V-half, T-full, V-half with V = ½mω²(t + dt/2)x². Adjacent
    potential half-steps are merged; every factor is unimodular so the norm
    is conserved to rounding.

    For accuracy keep ``dt * max|ω²| * x_max² * m / ħ`` well below one.

    Raises
    ------
    BoundaryContaminationError
        If the packet reaches the box edge during the run.
    """
    if not dt > 0:
        raise DomainError(f"dt must be positive, got {dt!r}")
    if int(n_steps) != n_steps or n_steps < 1:
        raise DomainError(f"n_steps must be a positive integer, got {n_steps!r}")
    m, hbar = params.m, params.hbar
    g = psi.grid
    x2 = g.x**2
    kinetic = np.exp(-1j * hbar * g.k**2 * dt / (2 * m))
    # half-step potential phase is exp(-i c ω² x²)
    c = m * dt / (4 * hbar)
    t0 = psi.t
    mids = t0 + dt * (np.arange(n_steps) + 0.5)
    w2 = np.asarray(profile.omega_sq(mids), dtype=float) * np.ones(n_steps)
    constant = bool(np.all(w2 == w2[0]))
    if constant:
        half = np.exp(-1j * c * w2[0] * x2)
        full = half * half

    y = np.array(psi.amplitudes)
    fft, ifft = np.fft.fft, np.fft.ifft
    for i in range(n_steps):
        if i == 0:
            y *= half if constant else np.exp(-1j * c * w2[0] * x2)
        y = ifft(kinetic * fft(y))
        if i + 1 < n_steps:
            y *= full if constant else np.exp(-1j * c * (w2[i] + w2[i + 1]) * x2)
        else:
            y *= half if constant else np.exp(-1j * c * w2[i] * x2)
        if (i + 1) % check_every == 0 or i + 1 == n_steps:
            a = np.abs(y)
            if max(a[0], a[-1]) >= BOUNDARY_FRACTION * a.max():
                t_fail = t0 + (i + 1) * dt
                raise BoundaryContaminationError(f"wave-function reached the box edge at t={t_fail}")
    return WaveFunction(g, y, t0 + n_steps * dt)


def moments(psi: WaveFunction, hbar: float = 1.0) -> Moments:
    """Position moments by quadrature, momentum moments spectrally.

    ⟨D̂⟩ = Re∫ψ̄ ½(x p̂ + p̂ x)ψ with p̂ = −iħ∂_x applied in Fourier space.
    """
    g = psi.grid
    x, k, dx = g.x, g.k, g.dx
    y = psi.amplitudes
    rho = np.abs(y) ** 2
    norm = trapezoid(rho, dx)
    x1 = trapezoid(x * rho, dx) / norm
    x2 = trapezoid(x * x * rho, dx) / norm
    phi = np.fft.fft(y)
    w = np.abs(phi) ** 2
    wsum = w.sum()
    p1 = hbar * np.dot(k, w) / wsum
    p2 = hbar * hbar * np.dot(k * k, w) / wsum

    def p_op(f):
        return -1j * hbar * np.fft.ifft(1j * k * np.fft.fft(f))

    dpsi = 0.5 * (x * p_op(y) + p_op(x * y))
    d = trapezoid(np.conj(y) * dpsi, dx).real / norm
    return Moments(float(x1), float(p1), float(x2), float(p2), float(d))


def excess_kurtosis(psi: WaveFunction) -> float:
    """Excess kurtosis of the position density |ψ|² (zero for a Gaussian)."""
    g = psi.grid
    rho = np.abs(psi.amplitudes) ** 2
    norm = trapezoid(rho, g.dx)
    mu = trapezoid(g.x * rho, g.dx) / norm
    xc = g.x - mu
    m2 = trapezoid(xc**2 * rho, g.dx) / norm
    m4 = trapezoid(xc**4 * rho, g.dx) / norm
    return float(m4 / m2**2 - 3.0)


def fidelity(psi: WaveFunction, state: GaussianState) -> float:
    """|⟨ψ_G|ψ⟩|² against the packet rebuilt from ``state`` (phase-insensitive)."""
    g = psi.grid
    ref = gaussian_amplitudes(state, g.x)
    ref = ref / math.sqrt(trapezoid(np.abs(ref) ** 2, g.dx))
    y = psi.amplitudes / math.sqrt(psi.norm())
    return float(abs(trapezoid(np.conj(ref) * y, g.dx)) ** 2)


def auto_grid(series: GaussianSeries, n: Optional[int] = None, margin: float = 10.0
              ) -> SpatialGrid:
    """Box that holds the whole effective-dynamics excursion.

    The half-width covers ``max|q − centre| + margin * max α``; n is the
    smallest power of two (>= 256) whose dx resolves both the narrowest
    width (dx <= α_min/8) and the widest momentum spread. An explicit ``n``
    is only checked against those bounds.
    """
    hbar = series.params.hbar
    lo = float(np.min(series.q - margin * series.alpha))
    hi = float(np.max(series.q + margin * series.alpha))
    center = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    sigma_p = np.sqrt(series.beta**2 + hbar**2 / (4 * series.alpha**2))
    k_need = float(np.max(np.abs(series.p) + margin * sigma_p)) / hbar
    dx_need = min(float(np.min(series.alpha)) / 8, math.pi / k_need)
    n_need = 256
    while 2 * half / (n_need - 1) > dx_need:
        n_need *= 2
    if n is None:
        n = n_need
    elif n < n_need:
        raise GridError(f"n={n} too small for this run, need at least {n_need}")
    return SpatialGrid.symmetric(half, n, center)


def save_density_csv(path, snapshots) -> None:
    """Write |ψ(x, t)|² snapshots as long-format CSV with columns t, x, density."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "x", "density"])
        for wf in snapshots:
            for xi, ri in zip(wf.grid.x, np.abs(wf.amplitudes) ** 2):
                w.writerow([format(float(v), ".17g") for v in (wf.t, xi, ri)])


@dataclass
class PdeRun:
    """Wave-function moments recorded at the output times of a run."""

    t: np.ndarray
    moments: np.ndarray          # (n, 5): x1, p1, x2, p2, d
    norms: np.ndarray
    kurtosis: np.ndarray
    snapshots: list = field(default_factory=list, repr=False)

    def casimir(self) -> np.ndarray:
        return self.moments[:, 2] * self.moments[:, 3] - self.moments[:, 4] ** 2


def propagate_on_grid(
    psi0: WaveFunction,
    profile: FrequencyProfile,
    grid: TimeGrid,
    dt: float,
    params: PhysicalParams,
    keep_snapshots: bool = False,
    on_output: Optional[Callable[[int, WaveFunction], None]] = None,
) -> PdeRun:
    """Propagate and record moments at every output time of ``grid``.

    ``dt`` must divide the output spacing to within 1e-9 of a step.
    """
    times = grid.times
    spacing = times[1] - times[0]
    steps_per = round(spacing / dt)
    if steps_per < 1 or abs(steps_per * dt - spacing) > 1e-9 * spacing:
        raise DomainError(f"dt={dt} does not divide the output spacing {spacing}")
    if psi0.t != grid.t_start:
        raise DomainError("initial wave-function time must equal grid.t_start")
    rows, norms, kurt, snaps = [], [], [], []
    psi = psi0
    for i, t in enumerate(times):
        if i:
            psi = split_step_propagate(psi, profile, dt, steps_per, params)
            # re-anchor to the output grid so rounding in t does not accumulate
            psi = WaveFunction(psi.grid, psi.amplitudes, float(t))
        rows.append(moments(psi, params.hbar).as_array())
        norms.append(psi.norm())
        kurt.append(excess_kurtosis(psi))
        if keep_snapshots:
            snaps.append(psi)
        if on_output is not None:
            on_output(i, psi)
    return PdeRun(times, np.array(rows), np.array(norms), np.array(kurt), snaps)


@dataclass
class ComparisonReport:
    """Worst-case disagreement between effective dynamics and the PDE."""

    max_dx1: float
    max_dp1: float
    max_dx2: float
    max_dp2: float
    max_dd: float
    max_dC: float
    min_fidelity: float
    pde_casimir_drift: float
    gaussian_casimir_drift: float
    max_norm_drift: float
    max_excess_kurtosis: float

    @property
    def max_moment_deviation(self) -> float:
        return max(self.max_dx1, self.max_dp1, self.max_dx2, self.max_dp2, self.max_dd)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["max_moment_deviation"] = self.max_moment_deviation
        return out


def compare_effective_vs_pde(
    profile: FrequencyProfile,
    init: GaussianState,
    grid: TimeGrid,
    spatial: Optional[SpatialGrid],
    dt: float,
    rel_tol: float = 1e-12,
) -> ComparisonReport:
    """Run both solvers from ``init`` and report their worst disagreement.

    ``spatial=None`` sizes the box from the effective run.
    """
    series = evolve_gaussian(profile, init, grid, rel_tol)
    if spatial is None:
        spatial = auto_grid(series)
    psi0 = init_gaussian_wavefunction(init, spatial)
    fids = []

    def record(i, wf):
        fids.append(fidelity(wf, series[i]))

    run = propagate_on_grid(psi0, profile, grid, dt, init.params, on_output=record)
    eff = series.moments()
    diff = np.abs(eff - run.moments).max(axis=0)
    c_eff = series.casimir()
    c_pde = run.casimir()
    report = ComparisonReport(
        max_dx1=float(diff[0]),
        max_dp1=float(diff[1]),
        max_dx2=float(diff[2]),
        max_dp2=float(diff[3]),
        max_dd=float(diff[4]),
        max_dC=float(np.max(np.abs(c_eff - c_pde))),
        min_fidelity=float(min(fids)),
        pde_casimir_drift=float(np.max(np.abs(c_pde - c_pde[0])) / abs(c_pde[0])),
        gaussian_casimir_drift=float(np.max(np.abs(c_eff - c_eff[0])) / abs(c_eff[0])),
        max_norm_drift=float(np.max(np.abs(run.norms - run.norms[0]))),
        max_excess_kurtosis=float(np.max(np.abs(run.kurtosis))),
    )
    return report
