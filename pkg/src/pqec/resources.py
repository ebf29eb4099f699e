"""Code-distance selection and qubit footprints for target-aware error budgets.

All error quantities here are half diamond distances unless noted.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass


from .channels import Channel, DiamondBounds, diamond_distance_bounds, power
from .lindblad import LindbladModel, exact_step


REL_TOL = 1e-12


class BudgetError(ValueError):
    pass


@dataclass(frozen=True)
class ScalingAnsatz:
    """``p_L(d) = A (p_phys/p_th)^((d+1)/2)`` with multiplicity ``C`` for the unwanted component."""

    A: float = 0.1
    p_phys: float = 1e-3
    p_th: float = 1e-2
    C: float = 1.0

    def __post_init__(self):
        if self.A <= 0:
            raise BudgetError("A must be positive")
        if not 0 < self.p_phys < self.p_th:
            raise BudgetError("need 0 < p_phys < p_th")
        if self.C < 1:
            raise BudgetError("C must be >= 1")

    @property
    def ratio(self) -> float:
        return self.p_phys / self.p_th


@dataclass(frozen=True)
class BudgetSpec:
    """Per-run error budget; allowances are measured elsewhere and passed in."""

    epsilon: float
    m: int
    zeta: float = 0.1
    delta_tar: float = 0.0
    eps_prog_A: float = 0.0
    nu: float = 0.0
    eps_prog_B: float = 0.0

    def __post_init__(self):
        for name, v in asdict(self).items():
            if v < 0:
                raise BudgetError(f"{name} must be non-negative")
        if self.zeta >= 1:
            raise BudgetError("zeta must be < 1")
        if self.m < 1:
            raise BudgetError("m must be >= 1")

    @property
    def per_step(self) -> float:
        return self.epsilon / self.m


def _check_distance(d: int) -> None:
    if d < 3 or d % 2 == 0:
        raise BudgetError(f"distance must be odd and >= 3, got {d}")


def logical_error_rate(ansatz: ScalingAnsatz, d: int) -> float:
    _check_distance(d)
    return ansatz.A * ansatz.ratio ** ((d + 1) / 2)


def closed_form_distance(ansatz: ScalingAnsatz, x: float) -> float:
    """Unrounded ``2 log(x/(AC)) / log(p_phys/p_th) − 1``."""
    return 2 * math.log(x / (ansatz.A * ansatz.C)) / math.log(ansatz.ratio) - 1


def round_to_permitted(d: float) -> int:
    """Next odd integer ``≥ max(d, 3)``."""
    n = max(3, math.ceil(d - 1e-9))
    return n if n % 2 else n + 1


def distance_for_budget(ansatz: ScalingAnsatz, x: float) -> int:
    """Smallest odd ``d ≥ 3`` with ``C·p_L(d) ≤ x``, found by direct checking.

    The comparison allows a relative slack of ``REL_TOL`` so that budgets
    sitting exactly on a power of the error ratio are not pushed up a
    distance by round-off.
    """
    if not x > 0:
        raise BudgetError(f"tolerance must be positive, got {x}")
    d = 3
    while not meets_budget(ansatz, d, x):
        d += 2
    return d


def meets_budget(ansatz: ScalingAnsatz, d: int, x: float) -> bool:
    return ansatz.C * logical_error_rate(ansatz, d) <= x * (1 + REL_TOL)


def strategyA_threshold(budget: BudgetSpec, rule: str = "min") -> float:
    """Tolerance left for the unwanted logical component in Strategy A.

    ``rule="min"`` uses ``min{ε/m, ζΔ_tar}``; ``rule="target_aware"`` uses
    ``ζΔ_tar`` alone, the threshold behind the footprint comparison.
    """
    if rule == "min":
        x = min(budget.per_step, budget.zeta * budget.delta_tar)
    elif rule == "target_aware":
        x = budget.zeta * budget.delta_tar
    else:
        raise ValueError(f"unknown rule {rule!r}")
    return x - budget.eps_prog_A - budget.nu


def strategyB_threshold(budget: BudgetSpec) -> float:
    return budget.per_step - budget.eps_prog_B


def strategyA_distance(ansatz: ScalingAnsatz, budget: BudgetSpec, rule: str = "min") -> int:
    x = strategyA_threshold(budget, rule)
    if x <= 0:
        raise BudgetError(f"Strategy A infeasible: allowances leave threshold {x:.3e} <= 0")
    return distance_for_budget(ansatz, x)


def strategyB_distance(ansatz: ScalingAnsatz, budget: BudgetSpec) -> int:
    x = strategyB_threshold(budget)
    if x <= 0:
        raise BudgetError(f"Strategy B infeasible: allowance leaves threshold {x:.3e} <= 0")
    return distance_for_budget(ansatz, x)


def patch_qubits(d: int) -> int:
    _check_distance(d)
    return 2 * d * d - 1


def footprint(n_logical: int, d: int) -> int:
    return n_logical * patch_qubits(d)


def savings_ratio(d_B: int, d_A: int) -> float:
    return patch_qubits(d_B) / patch_qubits(d_A)


def savings_ratio_square(d_B: int, d_A: int) -> float:
    return (d_B / d_A) ** 2


def delta_tar(model: LindbladModel, tau: float, restarts: int = 4, seed: int = 0) -> DiamondBounds:
    """Bounds on ``‖exp(L_D τ) − id‖_◇`` (full norm, not halved) for the dissipative part."""
    step = exact_step(model.dissipative_part(), tau)
    half = diamond_distance_bounds(step, Channel.identity(model.dim), restarts, seed)
    return DiamondBounds(2 * half.lower, 2 * half.upper, half.converged)


@dataclass(frozen=True)
class MultistepReport:
    m: int
    per_step_lower: float
    per_step_upper: float
    m_step_lower: float
    m_step_upper: float
    chained_upper: float
    holds: bool

    def to_dict(self) -> dict:
        return asdict(self)


class ChainingViolation(AssertionError):
    """An m-step lower bound exceeded m times the per-step upper bound."""


def multistep_error_check(step_sim: Channel, step_tar: Channel, m: int,
                          restarts: int = 4, seed: int = 0) -> MultistepReport:
    """Check ``ℓ_m ≤ m·u₁`` for half diamond distances of m-fold compositions."""
    one = diamond_distance_bounds(step_sim, step_tar, restarts, seed)
    many = diamond_distance_bounds(power(step_sim, m), power(step_tar, m), restarts, seed)
    chained = m * one.upper
    holds = many.lower <= chained + 1e-12
    report = MultistepReport(m, one.lower, one.upper, many.lower, many.upper, chained, holds)
    if not holds:
        raise ChainingViolation(f"m={m}: lower bound {many.lower:.3e} > m*u1 = {chained:.3e}")
    return report


def resource_row(name: str, ansatz: ScalingAnsatz, x_A: float, x_B: float,
                 n_logical: int = 2) -> dict:
    d_A = distance_for_budget(ansatz, x_A)
    d_B = distance_for_budget(ansatz, x_B)
    return {
        "scenario": name,
        "x_A": x_A,
        "x_B": x_B,
        "d_A": d_A,
        "d_B": d_B,
        "footprint_A": footprint(n_logical, d_A),
        "footprint_B": footprint(n_logical, d_B),
        "ratio": savings_ratio(d_B, d_A),
        "ratio_square": savings_ratio_square(d_B, d_A),
        "closed_form_d_A": round_to_permitted(closed_form_distance(ansatz, x_A)),
        "closed_form_d_B": round_to_permitted(closed_form_distance(ansatz, x_B)),
    }
