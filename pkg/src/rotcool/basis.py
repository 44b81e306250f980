"""Two-surface symmetric-top rotational basis for a 1Sigma / 1Pi diatomic.

Conventions used throughout the package:

* Rotational constants are wavenumbers (cm^-1), temperatures are kelvin.
* Hamiltonians handed to the propagator are angular frequencies in rad/ps,
  matching time grids in picoseconds; :data:`CM1_TO_RAD_PS` does the
  conversion.
* The electronic gap between the surfaces is removed (rotating frame), so the
  field samples are slowly varying complex envelopes.
* Basis ordering is canonical and fixed: all ground-surface states first
  (J ascending, M ascending), then excited states (J, then Omega = -1 before
  +1, then M ascending).  Every matrix in the package uses this ordering.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy import constants as _const

from .wigner import wigner3j

__all__ = [
    "Surface",
    "BasisState",
    "MolecularParams",
    "OperatorMatrix",
    "RotorModel",
    "CM1_TO_RAD_PS",
    "C2_CM_K",
    "enumerate_basis",
    "n_ground_states",
    "rotational_energy",
    "build_h0",
    "dipole_element",
    "build_dipole_matrix",
    "raising_part",
    "thermal_populations",
    "build_model",
]

# angular frequency (rad/ps) of a 1 cm^-1 transition
CM1_TO_RAD_PS = 2.0 * np.pi * _const.c * 100.0 * 1e-12
# second radiation constant h*c/kB in cm*K (Boltzmann exponent is C2*nu/T)
C2_CM_K = _const.h * _const.c / _const.k * 100.0


class Surface(Enum):
    GROUND = "g"    # 1Sigma, Lambda = 0
    EXCITED = "e"   # 1Pi, Omega = +-1


@dataclass(frozen=True)
class BasisState:
    """One symmetric-top level |surface; J, Omega, M>."""

    surface: Surface
    j: int
    omega: int
    m: int

    def __post_init__(self):
        if self.j < 0:
            raise ValueError(f"J must be nonnegative, got {self.j}")
        if abs(self.m) > self.j:
            raise ValueError(f"|M| <= J violated: J={self.j}, M={self.m}")
        if self.surface is Surface.GROUND and self.omega != 0:
            raise ValueError("ground-surface states must have Omega = 0")
        if self.surface is Surface.EXCITED:
            if self.omega not in (-1, 1):
                raise ValueError("excited-surface states must have Omega = +-1")
            if self.j < 1:
                raise ValueError("excited-surface states require J >= 1")

    @property
    def label(self) -> str:
        if self.surface is Surface.GROUND:
            return f"g:{self.j}.{self.m}"
        return f"e:{self.j}.{self.omega:+d}.{self.m}"


@dataclass(frozen=True)
class MolecularParams:
    """Model constants and truncations.

    Defaults are AlF-like round numbers taken from spectroscopy tables
    (X1Sigma+ B ~ 0.552 cm^-1, A1Pi B ~ 0.556 cm^-1, microsecond-scale
    emission); they are implementer conveniences, not fitted values.
    """

    b_g: float = 0.5524          # cm^-1
    b_e: float = 0.5565          # cm^-1
    mu0: float = 1.0             # coupling scale multiplying the geometric dipole
    gamma0: float = 1.0e6        # 1/s, overall spontaneous-emission scale
    j_max_g: int = 11
    j_max_e: int = 11
    temperature: float = 30.0    # K

    def __post_init__(self):
        if self.b_g <= 0 or self.b_e <= 0:
            raise ValueError("rotational constants must be positive")
        if self.mu0 <= 0 or self.gamma0 <= 0:
            raise ValueError("mu0 and gamma0 must be positive")
        if self.j_max_g < 0:
            raise ValueError("j_max_g must be >= 0")
        if self.j_max_e < 1:
            raise ValueError("j_max_e must be >= 1")


@dataclass(eq=False)
class OperatorMatrix:
    """Dense operator over the canonical basis with a structural tag."""

    matrix: np.ndarray
    tag: str = "general"  # "hermitian" | "unitary" | "general"

    def validate(self) -> None:
        m = self.matrix
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"operator must be square, got shape {m.shape}")
        if self.tag == "hermitian":
            if np.max(np.abs(m - m.conj().T)) > 1e-12:
                raise ValueError("hermitian tag violated beyond 1e-12")
        elif self.tag == "unitary":
            eye = np.eye(m.shape[0])
            if np.max(np.abs(m.conj().T @ m - eye)) > 1e-10:
                raise ValueError("unitary tag violated beyond 1e-10")


def _as_matrix(op) -> np.ndarray:
    return op.matrix if isinstance(op, OperatorMatrix) else np.asarray(op)


def enumerate_basis(params: MolecularParams) -> list[BasisState]:
    """Canonically ordered basis: ground block first, then the excited block."""
    states = [
        BasisState(Surface.GROUND, j, 0, m)
        for j in range(params.j_max_g + 1)
        for m in range(-j, j + 1)
    ]
    states += [
        BasisState(Surface.EXCITED, j, omega, m)
        for j in range(1, params.j_max_e + 1)
        for omega in (-1, 1)
        for m in range(-j, j + 1)
    ]
    return states


def n_ground_states(params: MolecularParams) -> int:
    return (params.j_max_g + 1) ** 2


def rotational_energy(state: BasisState, params: MolecularParams) -> float:
    """Rotational term value in cm^-1; the electronic gap is removed."""
    j = state.j
    if state.surface is Surface.GROUND:
        return params.b_g * j * (j + 1)
    return params.b_e * (j * (j + 1) - 1)


def build_h0(params: MolecularParams, basis: list[BasisState] | None = None) -> OperatorMatrix:
    """Field-free Hamiltonian, diagonal in the canonical basis, in rad/ps."""
    basis = basis if basis is not None else enumerate_basis(params)
    diag = np.array([rotational_energy(s, params) for s in basis]) * CM1_TO_RAD_PS
    return OperatorMatrix(np.diag(diag).astype(complex), tag="hermitian")


def dipole_element(
    state_a: BasisState,
    state_b: BasisState,
    polarization: int = 0,
    condon_shortley: bool = True,
) -> float:
    """Geometric dipole factor between two basis states for one lab component.

    ``polarization`` is the lab spherical index p (0 for the z-polarized
    control field, +-1 only in spontaneous emission).  The value is
    (-1)^(M'-Omega') sqrt((2J+1)(2J'+1)) (J 1 J'; M p -M') (J 1 J'; 0 q -Omega')
    with primes on the excited state and q fixed by the Omega change; the
    Condon-Shortley phase can be disabled to check convention independence.
    Zero if both states live on the same surface.
    """
    if state_a.surface is state_b.surface:
        return 0.0
    g, e = (state_a, state_b) if state_a.surface is Surface.GROUND else (state_b, state_a)
    q = e.omega  # molecular-frame component: 0 + q - Omega' = 0
    amp = (
        np.sqrt((2 * g.j + 1) * (2 * e.j + 1))
        * wigner3j(g.j, 1, e.j, g.m, polarization, -e.m)
        * wigner3j(g.j, 1, e.j, 0, q, -e.omega)
    )
    if condon_shortley and (e.m - e.omega) % 2:
        amp = -amp
    return float(amp)


def build_dipole_matrix(
    params: MolecularParams,
    basis: list[BasisState] | None = None,
    condon_shortley: bool = True,
) -> OperatorMatrix:
    """Full Hermitian dipole operator mu0 * (geometric elements), z component.

    Only ground<->excited blocks are populated; all couplings are real.
    """
    basis = basis if basis is not None else enumerate_basis(params)
    n = len(basis)
    n_g = n_ground_states(params)
    mu = np.zeros((n, n))
    for ig in range(n_g):
        g = basis[ig]
        for ie in range(n_g, n):
            e = basis[ie]
            # z polarization: Delta M = 0 and |Delta J| <= 1, else skip the 3j work
            if e.m != g.m or abs(e.j - g.j) > 1:
                continue
            val = params.mu0 * dipole_element(g, e, 0, condon_shortley)
            mu[ig, ie] = val
            mu[ie, ig] = val
    return OperatorMatrix(mu.astype(complex), tag="hermitian")


def raising_part(mu, n_ground: int) -> np.ndarray:
    """Electronic raising block of the dipole operator (excited rows only).

    This is the operator multiplying the envelope eps(t) in the interaction;
    its dagger multiplies eps*(t).
    """
    m = _as_matrix(mu)
    out = np.zeros_like(m)
    out[n_ground:, :n_ground] = m[n_ground:, :n_ground]
    return out


def thermal_populations(params: MolecularParams, j_max: int | None = None) -> np.ndarray:
    """Boltzmann populations over the ground manifold (canonical M-resolved order).

    ``j_max`` overrides the manifold truncation, which the entropy-reference
    calculations need; it defaults to ``params.j_max_g``.
    """
    if params.temperature <= 0:
        raise ValueError("nonphysical temperature")
    j_max = params.j_max_g if j_max is None else j_max
    js = np.concatenate([np.full(2 * j + 1, j) for j in range(j_max + 1)])
    exponent = C2_CM_K * params.b_g * js * (js + 1.0) / params.temperature
    weights = np.exp(-(exponent - exponent.min()))
    return weights / weights.sum()


@dataclass(eq=False)
class RotorModel:
    """Bundle of everything derived from one parameter set."""

    params: MolecularParams
    basis: list[BasisState]
    n_ground: int
    h0: OperatorMatrix
    mu: OperatorMatrix
    mu_raise: np.ndarray
    thermal_weights: np.ndarray = field(repr=False, default=None)

    @property
    def dim(self) -> int:
        return len(self.basis)

    def ground_labels(self) -> list[str]:
        return [s.label for s in self.basis[: self.n_ground]]


def build_model(params: MolecularParams, condon_shortley: bool = True) -> RotorModel:
    basis = enumerate_basis(params)
    n_g = n_ground_states(params)
    mu = build_dipole_matrix(params, basis, condon_shortley)
    return RotorModel(
        params=params,
        basis=basis,
        n_ground=n_g,
        h0=build_h0(params, basis),
        mu=mu,
        mu_raise=raising_part(mu, n_g),
        thermal_weights=thermal_populations(params),
    )
