"""Markovian master equations, the two-site exciton model and exact time steps.

Generators use ``D[L]ρ = LρL† − ½{L†L, ρ}`` with each jump operator stored
alongside its rate, so a term ``(γ/2)(ZρZ − ρ)`` is the pair ``(Z, γ/2)``.
Superoperators act on column-stacked density matrices.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import expm

from .channels import Channel, ChannelError, check_density_matrix, pauli_matrix


class ModelError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class LindbladModel:
    hamiltonian: np.ndarray
    jump_ops: tuple = ()
    labels: tuple = field(default=(), compare=False)

    def __post_init__(self):
        h = np.array(self.hamiltonian, dtype=complex)
        if h.ndim != 2 or h.shape[0] != h.shape[1]:
            raise ModelError("Hamiltonian must be a square matrix")
        if np.max(np.abs(h - h.conj().T), initial=0.0) > 1e-12:
            raise ModelError("Hamiltonian is not Hermitian")
        jumps = []
        for op, rate in self.jump_ops:
            op = np.array(op, dtype=complex)
            if op.shape != h.shape:
                raise ModelError("jump operator shape differs from the Hamiltonian")
            if rate < 0:
                raise ModelError(f"negative rate {rate}")
            op.setflags(write=False)
            jumps.append((op, float(rate)))
        h.setflags(write=False)
        object.__setattr__(self, "hamiltonian", h)
        object.__setattr__(self, "jump_ops", tuple(jumps))

    @property
    def dim(self) -> int:
        return self.hamiltonian.shape[0]

    def dissipative_part(self) -> "LindbladModel":
        return LindbladModel(np.zeros_like(self.hamiltonian), self.jump_ops, self.labels)

    def coherent_part(self) -> "LindbladModel":
        return LindbladModel(self.hamiltonian)

    def scaled_rates(self, factor: float, which: Sequence[str] | None = None) -> "LindbladModel":
        """Multiply the rates of the jumps whose label is in ``which`` (all if None)."""
        labels = self.labels or ("",) * len(self.jump_ops)
        jumps = [(op, rate * factor if which is None or lab in which else rate)
                 for (op, rate), lab in zip(self.jump_ops, labels)]
        return LindbladModel(self.hamiltonian, tuple(jumps), self.labels)


@dataclass(frozen=True)
class ExcitonParams:
    """Two-site exciton parameters. Defaults are illustrative artifact values."""

    eps1: float = 1.0
    eps2: float = 0.8
    J: float = 0.3
    gamma1: float = 0.05
    gamma2: float = 0.05
    gamma12: float = 0.02
    kappa1: float = 0.01
    kappa2: float = 0.01

    def __post_init__(self):
        for name in ("gamma1", "gamma2", "gamma12", "kappa1", "kappa2"):
            if getattr(self, name) < 0:
                raise ModelError(f"{name} must be non-negative")


SIGMA_MINUS = np.array([[0, 1], [0, 0]], dtype=complex)  # |0⟩⟨1|, |1⟩ is the excitation


def build_exciton_model(params: ExcitonParams) -> LindbladModel:
    """Two sites as qubits (site 1 leftmost) with hopping, dephasing and loss.

    ``H = -(ε₁/2)Z₁ - (ε₂/2)Z₂ + (J/2)(X₁X₂ + Y₁Y₂)``; jump operators are
    ``Z_j`` at rate ``γ_j/2``, ``Z₁Z₂`` at ``γ₁₂/2`` and ``σ_j⁻`` at ``κ_j``.
    """
    p = params
    z1, z2 = pauli_matrix("ZI"), pauli_matrix("IZ")
    h = (-p.eps1 / 2 * z1 - p.eps2 / 2 * z2
         + p.J / 2 * (pauli_matrix("XX") + pauli_matrix("YY")))
    eye = np.eye(2)
    jumps = [
        (z1, p.gamma1 / 2),
        (z2, p.gamma2 / 2),
        (pauli_matrix("ZZ"), p.gamma12 / 2),
        (np.kron(SIGMA_MINUS, eye), p.kappa1),
        (np.kron(eye, SIGMA_MINUS), p.kappa2),
    ]
    labels = ("dephasing_1", "dephasing_2", "dephasing_12", "loss_1", "loss_2")
    return LindbladModel(h, tuple(jumps), labels)


def dephasing_model(gamma: float) -> LindbladModel:
    """Single qubit with ``ρ̇ = (γ/2)(ZρZ − ρ)``; coherences decay as ``e^{−γt}``."""
    return LindbladModel(np.zeros((2, 2)), ((pauli_matrix("Z"), gamma / 2),), ("dephasing",))


def liouvillian(model: LindbladModel) -> np.ndarray:
    d = model.dim
    eye = np.eye(d)
    h = model.hamiltonian
    gen = -1j * (np.kron(eye, h) - np.kron(h.T, eye))
    for op, rate in model.jump_ops:
        if rate == 0:
            continue
        ld = op.conj().T @ op
        gen = gen + rate * (np.kron(op.conj(), op) - 0.5 * np.kron(eye, ld)
                            - 0.5 * np.kron(ld.T, eye))
    return gen


def exact_step(model: LindbladModel, tau: float) -> Channel:
    """The channel ``exp(L τ)``."""
    if tau < 0:
        raise ModelError("tau must be non-negative")
    s = expm(liouvillian(model) * tau)
    if not np.all(np.isfinite(s)):
        raise ArithmeticError("matrix exponential produced non-finite entries")
    return Channel.from_superop(s, model.dim, model.dim)


def coherent_step(model: LindbladModel, tau: float) -> Channel:
    return Channel.unitary(expm(-1j * model.hamiltonian * tau))


def first_order_kraus_step(model: LindbladModel, dt: float) -> Channel:
    """``K₀ = I − (iH + ½ΣL†L)dt``, ``K_i = √dt L_i``; trace preserving only to O(dt²).

    Valid while ``dt·‖L‖`` is small.
    """
    d = model.dim
    ops = [np.sqrt(rate) * op for op, rate in model.jump_ops if rate > 0]
    g = sum((op.conj().T @ op for op in ops), np.zeros((d, d), dtype=complex))
    k0 = np.eye(d) - (1j * model.hamiltonian + 0.5 * g) * dt
    if dt == 0:
        return Channel.from_kraus([k0])
    return Channel.from_kraus([k0] + [np.sqrt(dt) * op for op in ops])


def evolve(model: LindbladModel, rho0: np.ndarray, tau: float, steps: int) -> list[np.ndarray]:
    return evolve_channel(exact_step(model, tau), rho0, steps)


def evolve_channel(step: Channel, rho0: np.ndarray, steps: int) -> list[np.ndarray]:
    """``[ρ0, E(ρ0), E²(ρ0), …]`` with every state checked as a density matrix."""
    rho = check_density_matrix(rho0)
    out = [rho]
    s = step.superop
    d = step.dim_out
    vec = rho.T.reshape(-1)
    for _ in range(steps):
        vec = s @ vec
        rho = vec.reshape(d, d).T
        try:
            check_density_matrix(rho)
        except ChannelError as exc:
            raise ChannelError(f"step {len(out)}: {exc}") from exc
        out.append(rho)
    return out


def site_one_excitation() -> np.ndarray:
    """``|10⟩⟨10|``: one excitation on site 1."""
    rho = np.zeros((4, 4), dtype=complex)
    rho[2, 2] = 1.0
    return rho


def excitation_number(rho: np.ndarray) -> float:
    n_op = np.diag([0, 1, 1, 2])
    return float(np.real(np.trace(n_op @ rho)))


TRAJECTORY_HEADER = ("time", "pop_00", "pop_01", "pop_10", "pop_11", "coherence_10_01", "trace")


def trajectory_rows(states: Sequence[np.ndarray], tau: float) -> list[tuple]:
    rows = []
    for m, rho in enumerate(states):
        pops = np.real(np.diag(rho))
        rows.append((m * tau, *pops, abs(rho[2, 1]), float(np.real(np.trace(rho)))))
    return rows


def write_trajectory_csv(path, states: Sequence[np.ndarray], tau: float) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRAJECTORY_HEADER)
        for row in trajectory_rows(states, tau):
            w.writerow([repr(float(v)) for v in row])
