"""Piecewise-constant propagation of pure states under H(t) = H0 + V(eps(t)).

The interaction is V(eps) = -(A eps + A^dag eps*) where A is the electronic
raising block of the dipole operator.  Each step exponentiates the full dense
Hamiltonian through a Hermitian eigendecomposition, so every step propagator is
unitary to machine precision regardless of dt; dt only controls how finely a
smooth envelope is sampled.

When H0 and the coupling are real (the usual case here) the exponential is
reduced to a real-symmetric eigenproblem by rotating the phase of eps onto the
rows coupled by A, which roughly halves the per-step cost.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import OperatorMatrix, _as_matrix
from .fields import ControlField

__all__ = [
    "StateVector",
    "step_propagator",
    "propagate_forward",
    "propagate_backward",
    "propagate_ensemble",
    "total_propagator",
    "suggest_dt",
]


@dataclass(eq=False)
class StateVector:
    """Complex amplitudes over the canonical basis plus an ensemble weight."""

    amplitudes: np.ndarray
    weight: float = 1.0

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if self.amplitudes.ndim != 1:
            raise ValueError("state amplitudes must be a 1-D vector")
        if self.weight < 0:
            raise ValueError("ensemble weight must be nonnegative")

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


def _amplitudes(state) -> np.ndarray:
    if isinstance(state, StateVector):
        return state.amplitudes
    return np.asarray(state, dtype=complex)


class _Stepper:
    """Precomputed context for building step unitaries from one (H0, A) pair."""

    def __init__(self, h0, mu_raise, validate: bool = True):
        self.h0 = _as_matrix(h0)
        self.mu_raise = _as_matrix(mu_raise)
        if self.h0.shape != self.mu_raise.shape or self.h0.ndim != 2:
            raise ValueError("H0 and the raising operator must be equal square matrices")
        if validate and np.max(np.abs(self.h0 - self.h0.conj().T)) > 1e-12:
            raise ValueError("H0 is not Hermitian within 1e-12")
        self.dim = self.h0.shape[0]
        # real path is valid when both operators carry no imaginary part
        self.real_path = (
            np.max(np.abs(self.h0.imag)) == 0.0 and np.max(np.abs(self.mu_raise.imag)) == 0.0
        )
        if self.real_path:
            a_r = self.mu_raise.real
            raised = np.any(a_r != 0.0, axis=1)
            lowered = np.any(a_r != 0.0, axis=0)
            # the single-phase gauge only works for a two-block (no ladder) coupling
            if np.any(raised & lowered):
                self.real_path = False
            else:
                self.h0_r = self.h0.real
                self.sym_coupling = a_r + a_r.T
                self.raised = raised

    def hamiltonian(self, eps: complex) -> np.ndarray:
        v = self.mu_raise * eps
        return self.h0 - v - v.conj().T

    def eigensystem(self, eps: complex) -> tuple[np.ndarray, np.ndarray]:
        """Eigenvalues and (complex) eigenvectors of H(eps).

        On the real path the phase of eps is gauged onto the coupled rows, a
        real-symmetric problem is solved, and the gauge is restored on the
        eigenvectors, so H(eps) = V diag(evals) V^dag exactly either way.
        """
        if self.real_path:
            r = abs(eps)
            evals, vecs = np.linalg.eigh(self.h0_r - r * self.sym_coupling)
            vecs = vecs.astype(complex)
            if r > 0.0:
                vecs[self.raised, :] *= eps / r
            return evals, vecs
        evals, vecs = np.linalg.eigh(self.hamiltonian(eps))
        return evals, vecs

    def unitary(self, eps: complex, dt: float) -> np.ndarray:
        evals, vecs = self.eigensystem(eps)
        return (vecs * np.exp(-1j * evals * dt)) @ vecs.conj().T


def step_propagator(h0, mu_raise, eps: complex, dt: float) -> OperatorMatrix:
    """Unitary exp(-i H(eps) dt) for one constant-envelope step."""
    u = _Stepper(h0, mu_raise).unitary(eps, dt)
    return OperatorMatrix(u, tag="unitary")


def propagate_forward(psi0, field: ControlField, h0, mu_raise) -> np.ndarray:
    """Trajectory array of shape (n_samples + 1, N) including t = 0 and t = T."""
    stepper = _Stepper(h0, mu_raise)
    return _run(stepper, _amplitudes(psi0), field.samples, field.dt, forward=True)


def propagate_backward(chi_t_final, field: ControlField, h0, mu_raise) -> np.ndarray:
    """Backward trajectory, indexed by ascending time like the forward one.

    Entry k is chi(t_k); entry -1 is the supplied boundary value at T.  The
    caller provides chi(T) (for optimal control, the target operator applied
    to the final state).
    """
    stepper = _Stepper(h0, mu_raise)
    return _run(stepper, _amplitudes(chi_t_final), field.samples, field.dt, forward=False)


def _run(stepper: _Stepper, start: np.ndarray, samples, dt: float, forward: bool) -> np.ndarray:
    if start.shape != (stepper.dim,):
        raise ValueError(f"state has dimension {start.shape}, operators are {stepper.dim}")
    n = len(samples)
    if n == 0:
        raise ValueError("empty control field")
    traj = np.empty((n + 1, stepper.dim), dtype=complex)
    if forward:
        traj[0] = start
        for k in range(n):
            u = stepper.unitary(samples[k], dt)
            traj[k + 1] = u @ traj[k]
    else:
        traj[n] = start
        for k in range(n - 1, -1, -1):
            u = stepper.unitary(samples[k], dt)
            traj[k] = u.conj().T @ traj[k + 1]
    return traj


def propagate_ensemble(states, field: ControlField, h0, mu_raise) -> list[np.ndarray]:
    """Propagate each member independently; output order matches input order."""
    stepper = _Stepper(h0, mu_raise)
    return [
        _run(stepper, _amplitudes(s), field.samples, field.dt, forward=True) for s in states
    ]


def total_propagator(field: ControlField, h0, mu_raise) -> np.ndarray:
    """Ordered product of all step unitaries: the full-pulse unitary."""
    stepper = _Stepper(h0, mu_raise)
    u = np.eye(stepper.dim, dtype=complex)
    for k in range(field.n_samples):
        u = stepper.unitary(field.samples[k], field.dt) @ u
    return u


def suggest_dt(h0, mu_raise, eps_max: float, phase_budget: float = 0.1) -> float:
    """Step size keeping (max|E| + max coupling * eps_max) * dt below the budget.

    With exact per-step exponentials this only limits envelope sampling error,
    not unitarity.
    """
    h = _as_matrix(h0)
    scale = float(np.max(np.abs(np.diag(h)))) + float(np.max(np.abs(_as_matrix(mu_raise)))) * abs(
        eps_max
    )
    if scale == 0.0:
        raise ValueError("cannot suggest dt for a null Hamiltonian")
    return phase_budget / scale
