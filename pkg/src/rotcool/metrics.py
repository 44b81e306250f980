"""Cooling and convergence diagnostics for population-only states.

Entropies are in nats.  The effective temperature of a distribution is the
temperature whose Boltzmann state on the same truncated ground manifold has
equal von Neumann entropy, found by bisection on the monotone map
T -> S_thermal(T).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .basis import MolecularParams, thermal_populations

__all__ = [
    "CoolingReport",
    "ExpFit",
    "purity",
    "vn_entropy",
    "effective_temperature",
    "delta_s_eff",
    "numerical_effort",
    "sample_std",
    "fit_exponential_extrapolate",
]


def _distribution(populations) -> np.ndarray:
    p = np.asarray(populations, dtype=float)
    if p.min() < -1e-12:
        raise ValueError(f"negative population {p.min():.3e}")
    return np.clip(p, 0.0, None)


def purity(populations) -> float:
    """Tr rho^2 of a coherence-free state: sum of squared populations."""
    p = _distribution(populations)
    return float(np.sum(p * p))


def vn_entropy(populations) -> float:
    """-sum p ln p in nats; zero entries contribute nothing."""
    p = _distribution(populations)
    nz = p[p > 0.0]
    return float(-np.sum(nz * np.log(nz)))


def effective_temperature(
    populations,
    params: MolecularParams,
    j_max: int | None = None,
    rtol: float = 1e-6,
) -> float:
    """Temperature of the equal-entropy thermal state on the ground manifold."""
    s_in = vn_entropy(populations)
    j_max = params.j_max_g if j_max is None else j_max
    n_states = (j_max + 1) ** 2
    s_max = math.log(n_states)
    if s_in >= s_max * (1.0 - 1e-12):
        raise ValueError("hotter than infinite temperature on truncated basis")
    if s_in <= 1e-15:
        return 0.0

    def s_thermal(t: float) -> float:
        ref = MolecularParams(
            b_g=params.b_g,
            b_e=params.b_e,
            mu0=params.mu0,
            gamma0=params.gamma0,
            j_max_g=max(j_max, 1),
            j_max_e=params.j_max_e,
            temperature=t,
        )
        return vn_entropy(thermal_populations(ref, j_max=j_max))

    lo, hi = 1e-9, 1.0
    while s_thermal(hi) < s_in:
        hi *= 4.0
        if hi > 1e15:
            raise ValueError("entropy bracket search failed")
    while s_thermal(lo) > s_in:
        lo /= 4.0
    while (hi - lo) > rtol * hi:
        mid = math.sqrt(lo * hi)
        if s_thermal(mid) < s_in:
            lo = mid
        else:
            hi = mid
    return math.sqrt(lo * hi)


def delta_s_eff(s_full_system: float, params: MolecularParams, j_cut: int | None = None) -> float:
    """Normalized entropy decrease of the cooled state.

    0 means no change from the initial thermal state, 1 means the entropy of
    the thermal state on the trimmed manifold (one J shell removed by
    default) was reached, and larger values mean colder still.
    """
    j_cut = params.j_max_g - 1 if j_cut is None else j_cut
    s_initial = vn_entropy(thermal_populations(params))
    s_target = vn_entropy(thermal_populations(params, j_max=j_cut))
    denom = s_target - s_initial
    if abs(denom) < 1e-15:
        raise ValueError("reference entropies coincide; normalization undefined")
    return (s_full_system - s_initial) / denom


def numerical_effort(n_iters: int, m_rp: int) -> float:
    """ln(iterations x ensemble size), the cost measure used in the sweeps."""
    if n_iters < 1 or m_rp < 1:
        raise ValueError("effort arguments must be >= 1")
    return math.log(n_iters * m_rp)


def sample_std(values) -> float:
    """Relative standard deviation sqrt(<x^2>-<x>^2)/|<x>| (population convention)."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ValueError("empty sample")
    mean = v.mean()
    if mean == 0.0:
        raise ValueError("zero mean; relative deviation undefined")
    return float(np.sqrt(np.mean(v * v) - mean * mean) / abs(mean))


@dataclass
class ExpFit:
    """Least-squares fit of infidelity(L) = a exp(-b L) in log space."""

    a: float
    b: float
    crossing: float      # L where the fit reaches the threshold (inf if none)
    converging: bool     # False flags b <= 0, "no convergence trend"
    residuals: np.ndarray


def fit_exponential_extrapolate(points, threshold: float) -> ExpFit:
    """Fit (L, infidelity) pairs and extrapolate the threshold crossing."""
    pts = [(float(l), float(y)) for l, y in points]
    if len(pts) < 3:
        raise ValueError("need at least 3 points to fit")
    ls = np.array([p[0] for p in pts])
    ys = np.array([p[1] for p in pts])
    if np.any(ys <= 0.0):
        raise ValueError("infidelities must be positive")
    if threshold <= 0.0:
        raise ValueError("threshold must be positive")
    slope, intercept = np.polyfit(ls, np.log(ys), 1)
    a = math.exp(intercept)
    b = -slope
    residuals = np.log(ys) - (intercept + slope * ls)
    converging = b > 0.0
    crossing = math.log(a / threshold) / b if converging else math.inf
    return ExpFit(a=a, b=b, crossing=crossing, converging=converging, residuals=residuals)


@dataclass
class CoolingReport:
    """Steady-state diagnostics of one cooling experiment."""

    purity: float
    entropy: float
    t_eff: float
    delta_s_eff: float
    leaked_probability: float

    @classmethod
    def from_populations(
        cls,
        populations,
        params: MolecularParams,
        leaked_probability: float = 0.0,
        j_cut: int | None = None,
    ) -> "CoolingReport":
        s = vn_entropy(populations)
        try:
            t_eff = effective_temperature(populations, params)
        except ValueError:
            t_eff = math.nan
        return cls(
            purity=purity(populations),
            entropy=s,
            t_eff=t_eff,
            delta_s_eff=delta_s_eff(s, params, j_cut),
            leaked_probability=float(leaked_probability),
        )
