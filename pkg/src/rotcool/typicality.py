"""Random-phase wavefunction ensembles over the occupied ground manifold.

A random-phase state carries amplitude sqrt(w_j) exp(i theta_j) on basis state
j with i.i.d. uniform phases.  Diagonal observables are then reproduced
exactly by every single draw, and off-diagonal estimator noise averages out as
1/sqrt(L) over ensembles.  Uniform weights recover the plain
maximally-mixed-state sampler; thermal weights make each draw a purification
sampler of the Boltzmann state.

Reproducibility: ensembles are generated from numpy's PCG64 via a
``SeedSequence(seed)`` spawned once per member, so (seed, L, weights) fully
determine every draw regardless of platform or evaluation order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .krotov import TargetOperator
from .propagation import StateVector, _amplitudes, total_propagator

__all__ = [
    "RpEnsemble",
    "sample_rp_state",
    "build_ensemble",
    "identity_resolution_error",
    "embed_ground",
    "full_space_validation",
    "write_ensemble_csv",
]


@dataclass(eq=False)
class RpEnsemble:
    """L random-phase states, their phase vectors, and the generating seed."""

    members: list[StateVector]
    phase_vectors: np.ndarray = field(repr=False)
    seed: int = 0
    weight_mode: str = "thermal"

    @property
    def size(self) -> int:
        return len(self.members)

    def member_weights(self) -> np.ndarray:
        return np.array([m.weight for m in self.members])


def _rp_from_phases(weights: np.ndarray, theta: np.ndarray) -> np.ndarray:
    return np.sqrt(weights) * np.exp(1j * theta)


def sample_rp_state(weights, rng: np.random.Generator) -> StateVector:
    """Draw one random-phase state with amplitude moduli sqrt(weights)."""
    w = np.asarray(weights, dtype=float)
    if np.any(w < 0):
        raise ValueError("weights must be nonnegative")
    total = w.sum()
    if total <= 0.0:
        raise ValueError("weights are all zero")
    w = w / total
    theta = rng.uniform(0.0, 2.0 * np.pi, w.size)
    return StateVector(_rp_from_phases(w, theta))


def build_ensemble(ell: int, weights, seed: int, weight_mode: str = "thermal") -> RpEnsemble:
    """L independent draws with member weights 1/L, deterministic in ``seed``."""
    if ell < 1:
        raise ValueError("ensemble size must be >= 1")
    w = np.asarray(weights, dtype=float)
    if w.sum() <= 0.0 or np.any(w < 0):
        raise ValueError("weights must be a nonnegative distribution")
    w = w / w.sum()
    members = []
    thetas = np.empty((ell, w.size))
    for l, child in enumerate(np.random.SeedSequence(seed).spawn(ell)):
        rng = np.random.default_rng(child)
        thetas[l] = rng.uniform(0.0, 2.0 * np.pi, w.size)
        members.append(StateVector(_rp_from_phases(w, thetas[l]), weight=1.0 / ell))
    return RpEnsemble(members=members, phase_vectors=thetas, seed=seed, weight_mode=weight_mode)


def identity_resolution_error(ensemble: RpEnsemble) -> float:
    """Max-norm distance of the averaged projector from I/N.

    The limit of (1/L) sum |psi><psi| for unit-modulus amplitude samplers is
    I/N (each projector has unit trace), against which the deviation is
    measured entrywise.
    """
    members = [_amplitudes(m) for m in ensemble.members]
    n = members[0].size
    avg = np.zeros((n, n), dtype=complex)
    for v in members:
        avg += np.outer(v, v.conj())
    avg /= len(members)
    return float(np.max(np.abs(avg - np.eye(n) / n)))


def embed_ground(vec, dim: int) -> np.ndarray:
    """Zero-pad a ground-manifold vector to the full basis dimension."""
    v = _amplitudes(vec)
    if v.size > dim:
        raise ValueError("vector longer than the target dimension")
    out = np.zeros(dim, dtype=complex)
    out[: v.size] = v
    return out


def full_space_validation(
    control,
    target: TargetOperator,
    weights,
    h0,
    mu_raise,
    n_ground: int,
) -> float:
    """Infidelity of the pulse on the classical full-space thermal ensemble.

    Every ground basis state is propagated (via the full-pulse unitary) and
    the weighted final-time expectation of the target is folded into
    1 - sum_i w_i <psi_i(T)|O|psi_i(T)>.
    """
    w = np.asarray(weights, dtype=float)
    if w.size != n_ground:
        raise ValueError("need one weight per ground basis state")
    u = total_propagator(control, h0, mu_raise)
    cols = u[:, :n_ground]
    o_cols = target.matrix @ cols
    expect = np.sum(cols.conj() * o_cols, axis=0).real
    return float(1.0 - np.dot(w, expect))


def write_ensemble_csv(ensemble: RpEnsemble, path, sidecar_path=None) -> None:
    """CSV of (member, basis index, re, im) plus a JSON sidecar with metadata."""
    import csv
    import json

    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["member", "basis_index", "re", "im"])
        for l, member in enumerate(ensemble.members):
            for j, amp in enumerate(member.amplitudes):
                writer.writerow([l, j, format(amp.real, ".17g"), format(amp.imag, ".17g")])
    if sidecar_path is not None:
        meta = {
            "seed": int(ensemble.seed),
            "L": ensemble.size,
            "weight_mode": ensemble.weight_mode,
        }
        with open(sidecar_path, "w", encoding="utf-8") as fh:
            json.dump(meta, fh, indent=2, sort_keys=True)
            fh.write("\n")
