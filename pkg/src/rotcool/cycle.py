"""Spontaneous-emission branching and the excitation/decay cycle map.

One cooling cycle is: drive the system with the shaped pulse (unitary), then
let every excited sub-level decay back to the ground manifold.  Because the
decay step erases coherences, the cycle acts on ground-manifold populations
alone and is represented by a column-stochastic matrix.

Decay rates follow the golden rule with the emitted-frequency dependence
dropped (all lines are nearly degenerate on the rotational scale), summed over
all three lab polarizations.  With that normalization an excited level whose
decay channels all lie inside the truncated ground manifold has total rate
exactly ``gamma0``; anything missing is tracked as leaked probability rather
than silently renormalized away.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .basis import MolecularParams, RotorModel, Surface, dipole_element
from .fields import ControlField
from .propagation import total_propagator

__all__ = [
    "DarkStateError",
    "CycleMap",
    "SteadyState",
    "decay_rates",
    "branching_matrix",
    "leak_fractions",
    "cycle_map",
    "steady_state",
    "iterate_cycles",
    "write_cycle_map_csv",
]

DENSE_EIG_LIMIT = 512


class DarkStateError(ValueError):
    """An excited level with no dipole-allowed decay channel in the basis."""


def decay_rates(params: MolecularParams, basis=None) -> np.ndarray:
    """Rate matrix Gamma[f, i]: excited column i into ground row f, in 1/s.

    Sums the squared geometric dipole element over the lab spherical
    components p = -1, 0, +1; emission into the vacuum is not
    polarization-selected.
    """
    from .basis import enumerate_basis

    basis = basis if basis is not None else enumerate_basis(params)
    ground = [s for s in basis if s.surface is Surface.GROUND]
    excited = [s for s in basis if s.surface is Surface.EXCITED]
    rates = np.zeros((len(ground), len(excited)))
    for col, e in enumerate(excited):
        for row, g in enumerate(ground):
            if abs(e.j - g.j) > 1 or abs(e.m - g.m) > 1:
                continue
            p = e.m - g.m
            rates[row, col] = dipole_element(g, e, polarization=p) ** 2
    return params.gamma0 * rates


def branching_matrix(rates: np.ndarray, labels=None) -> np.ndarray:
    """Column-normalized decay probabilities (each column sums to 1)."""
    totals = rates.sum(axis=0)
    dark = np.nonzero(totals <= 0.0)[0]
    if dark.size:
        j = int(dark[0])
        name = labels[j] if labels is not None else f"column {j}"
        raise DarkStateError(f"dark excited state with zero total decay rate: {name}")
    return rates / totals


def leak_fractions(rates: np.ndarray, gamma0: float) -> np.ndarray:
    """Per-excited-state probability of decaying outside the truncated basis.

    Uses the sum rule that the untruncated total rate is exactly gamma0.
    """
    frac = 1.0 - rates.sum(axis=0) / gamma0
    return np.clip(frac, 0.0, 1.0)


@dataclass(eq=False)
class CycleMap:
    """One unitary-plus-decay cycle acting on ground populations."""

    matrix: np.ndarray
    control: ControlField | None = None
    leaked_per_column: np.ndarray | None = field(default=None, repr=False)
    labels: list[str] | None = field(default=None, repr=False)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def max_leak(self) -> float:
        if self.leaked_per_column is None:
            return 0.0
        return float(np.max(self.leaked_per_column))


def cycle_map(
    control: ControlField,
    model: RotorModel,
    branching: np.ndarray | None = None,
    rates: np.ndarray | None = None,
) -> CycleMap:
    """Build the population map of one cycle under ``control``.

    Column i is the ground distribution that results from preparing ground
    basis state i, applying the pulse, and decaying all excited population
    through the branching matrix.  Coherences are discarded.
    """
    if rates is None:
        rates = decay_rates(model.params, model.basis)
    if branching is None:
        branching = branching_matrix(rates, [s.label for s in model.basis[model.n_ground:]])
    n_g = model.n_ground
    u = total_propagator(control, model.h0, model.mu_raise)
    pops = np.abs(u[:, :n_g]) ** 2          # column i: populations after the pulse
    ground_part = pops[:n_g, :]
    excited_part = pops[n_g:, :]
    matrix = ground_part + branching @ excited_part
    leak = leak_fractions(rates, model.params.gamma0) @ excited_part
    return CycleMap(
        matrix=matrix,
        control=control,
        leaked_per_column=leak,
        labels=model.ground_labels(),
    )


@dataclass(eq=False)
class SteadyState:
    """Fixed point of a cycle map and its convergence diagnostics."""

    populations: np.ndarray | None
    gap: float
    residual: float
    reducible: bool = False
    unit_eigenvectors: np.ndarray | None = None


def _as_map_matrix(cmap) -> np.ndarray:
    return cmap.matrix if isinstance(cmap, CycleMap) else np.asarray(cmap, dtype=float)


def steady_state(cmap, unit_tol: float = 1e-8) -> SteadyState:
    """Perron eigenvector and spectral gap of a column-stochastic map.

    A unit eigenvalue of multiplicity > 1 (within ``unit_tol``) marks a
    reducible cycle map; all unit eigenvectors are then returned and
    ``populations`` is None.
    """
    m = _as_map_matrix(cmap)
    n = m.shape[0]
    if n <= DENSE_EIG_LIMIT:
        evals, evecs = np.linalg.eig(m)
    else:
        from scipy.sparse.linalg import eigs

        evals, evecs = eigs(m, k=min(6, n - 2), which="LM")
    order = np.argsort(-np.abs(evals))
    evals, evecs = evals[order], evecs[:, order]

    unit = np.nonzero(np.abs(evals - 1.0) < unit_tol)[0]
    if unit.size > 1:
        return SteadyState(
            populations=None,
            gap=0.0,
            residual=np.nan,
            reducible=True,
            unit_eigenvectors=evecs[:, unit],
        )
    if unit.size == 0:
        raise ValueError("cycle map has no unit eigenvalue; is it column-stochastic?")

    vec = evecs[:, unit[0]]
    pivot = np.argmax(np.abs(vec))
    vec = vec * np.exp(-1j * np.angle(vec[pivot]))
    if np.max(np.abs(vec.imag)) > 1e-10:
        raise ValueError("stationary eigenvector is not real up to a phase")
    pops = vec.real
    if pops[pivot] < 0:
        pops = -pops
    if pops.min() < -1e-12:
        raise ValueError(f"stationary vector has negative entries: min {pops.min():.3e}")
    pops = np.clip(pops, 0.0, None)
    pops = pops / pops.sum()
    gap = 1.0 - abs(evals[1]) if len(evals) > 1 else 1.0
    residual = float(np.max(np.abs(m @ pops - pops)))
    return SteadyState(populations=pops, gap=float(gap), residual=residual)


def iterate_cycles(cmap, p0: np.ndarray, n: int) -> np.ndarray:
    """All iterates p_0 ... p_n of repeated cycle application, rows by cycle."""
    m = _as_map_matrix(cmap)
    p = np.asarray(p0, dtype=float)
    out = np.empty((n + 1, p.size))
    out[0] = p
    for k in range(n):
        p = m @ p
        out[k + 1] = p
    return out


def write_cycle_map_csv(cmap: CycleMap, path) -> None:
    """Dense CSV with a header row of ground-basis labels."""
    import csv

    labels = cmap.labels or [f"g{i}" for i in range(cmap.dim)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(labels)
        for row in cmap.matrix:
            writer.writerow([format(x, ".17g") for x in row])
