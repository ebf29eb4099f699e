import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from pqec.channels import Channel
from pqec.lindblad import ExcitonParams, build_exciton_model, dephasing_model, exact_step
from pqec.resources import (
    BudgetError,
    BudgetSpec,
    ChainingViolation,
    ScalingAnsatz,
    closed_form_distance,
    delta_tar,
    distance_for_budget,
    footprint,
    logical_error_rate,
    meets_budget,
    multistep_error_check,
    patch_qubits,
    resource_row,
    round_to_permitted,
    savings_ratio,
    savings_ratio_square,
    strategyA_distance,
    strategyA_threshold,
    strategyB_distance,
    strategyB_threshold,
)


def test_footprints():
    assert footprint(2, 3) == 34
    assert footprint(2, 7) == 194
    assert patch_qubits(5) == 49
    with pytest.raises(BudgetError):
        patch_qubits(4)


def test_savings_ratio():
    assert savings_ratio(7, 3) == pytest.approx(97 / 17)
    assert savings_ratio_square(7, 3) == pytest.approx(49 / 9)


def test_distance_examples():
    ans = ScalingAnsatz(A=1.0, p_phys=1e-3, p_th=1e-2)
    assert distance_for_budget(ans, 1e-3) == 5
    assert distance_for_budget(ans, 1e-5) == 9
    assert distance_for_budget(ans, 1.0) == 3


ansatz_st = st.builds(
    lambda a, ratio, c: ScalingAnsatz(A=a, p_phys=ratio * 1e-2, p_th=1e-2, C=c),
    st.floats(0.01, 1.0), st.floats(0.01, 0.9), st.floats(1.0, 3.0))


@given(ansatz_st, st.floats(1e-12, 1e-1))
def test_distance_is_minimal_and_matches_closed_form(ans, x):
    d = distance_for_budget(ans, x)
    assert d % 2 == 1 and d >= 3
    assert ans.C * logical_error_rate(ans, d) <= x * (1 + 1e-12)
    if d > 3:
        assert ans.C * logical_error_rate(ans, d - 2) > x
    assert d == round_to_permitted(closed_form_distance(ans, x))


@given(ansatz_st, st.floats(1e-12, 1e-2), st.floats(1.0, 100.0))
def test_distance_monotone_in_budget(ans, x, factor):
    assert distance_for_budget(ans, x / factor) >= distance_for_budget(ans, x)


def test_round_to_permitted():
    assert round_to_permitted(0.2) == 3
    assert round_to_permitted(5.0) == 5
    assert round_to_permitted(5.0000000001) == 5
    assert round_to_permitted(5.01) == 7


def test_thresholds_and_allowances():
    b = BudgetSpec(epsilon=0.01, m=100, zeta=0.1, delta_tar=0.02, eps_prog_A=1e-4, nu=1e-4,
                   eps_prog_B=2e-5)
    assert strategyA_threshold(b) == pytest.approx(min(1e-4, 2e-3) - 2e-4)
    assert strategyA_threshold(b, "target_aware") == pytest.approx(2e-3 - 2e-4)
    assert strategyB_threshold(b) == pytest.approx(8e-5)
    ans = ScalingAnsatz()
    with pytest.raises(BudgetError):
        strategyA_distance(ans, b)
    assert strategyA_distance(ans, b, "target_aware") <= strategyB_distance(ans, b)


def test_min_rule_never_beats_b_without_allowances():
    ans = ScalingAnsatz()
    for dt in (1e-4, 1e-2, 1.0):
        b = BudgetSpec(1e-2, 100, 0.1, dt)
        assert strategyA_distance(ans, b) >= strategyB_distance(ans, b)


def test_budget_validation():
    with pytest.raises(BudgetError):
        BudgetSpec(-1, 10)
    with pytest.raises(BudgetError):
        BudgetSpec(0.1, 0)
    with pytest.raises(BudgetError):
        ScalingAnsatz(p_phys=0.02, p_th=0.01)
    with pytest.raises(BudgetError):
        distance_for_budget(ScalingAnsatz(), 0.0)


def test_delta_tar_dephasing_closed_form():
    # Full diamond norm of (pure dephasing step − id) is 1 − e^{−γτ}.
    b = delta_tar(dephasing_model(0.3), 1.0)
    assert b.lower == pytest.approx(1 - np.exp(-0.3), abs=1e-8)
    assert b.lower <= b.upper


def test_delta_tar_scales_linearly_for_small_tau():
    model = build_exciton_model(ExcitonParams())
    small, double = delta_tar(model, 0.01), delta_tar(model, 0.02)
    assert double.lower / small.lower == pytest.approx(2, rel=0.02)


@pytest.mark.parametrize("m", [1, 10, 100])
def test_chaining_holds(m):
    sim = exact_step(dephasing_model(0.08 * 1.06), 1.0)
    tar = exact_step(dephasing_model(0.08), 1.0)
    rep = multistep_error_check(sim, tar, m)
    assert rep.holds and rep.m_step_lower <= rep.chained_upper


def test_chaining_violation_is_reported(monkeypatch):
    from pqec import resources
    from pqec.channels import DiamondBounds

    calls = iter([DiamondBounds(0.0, 1e-6, True), DiamondBounds(0.5, 0.5, True)])
    monkeypatch.setattr(resources, "diamond_distance_bounds", lambda *a, **k: next(calls))
    with pytest.raises(ChainingViolation):
        multistep_error_check(Channel.identity(2), Channel.identity(2), 3)


def test_resource_row_columns():
    row = resource_row("demo", ScalingAnsatz(A=1.0), 1e-3, 1e-5)
    assert (row["d_A"], row["d_B"]) == (5, 9)
    assert row["footprint_A"] == 98 and row["footprint_B"] == 322
    assert row["ratio"] == pytest.approx(161 / 49)
    assert row["closed_form_d_A"] == 5
