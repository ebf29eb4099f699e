import csv

import numpy as np
import pytest

from pqec.compiler import CompileOptions, compile_step
from pqec.channels import trace_distance
from pqec.library import LogicalChannelLibrary
from pqec.lindblad import ExcitonParams, build_exciton_model, evolve, evolve_channel, exact_step, \
    site_one_excitation
from pqec.studies import (
    DynamicsSpec,
    FitStudySpec,
    ResourceSpec,
    default_gamma_tau_grid,
    default_mismatch_grid,
    run_channel_fit_study,
    run_dynamics_study,
    run_resource_study,
    run_single_fit,
    write_report,
)


def column(report, table, name):
    header, rows = report.tables[table]
    i = header.index(name)
    return [r[i] for r in rows]


def test_default_grids():
    g = default_gamma_tau_grid()
    assert len(g) == 16 and g[0] == pytest.approx(0.01) and g[-1] == pytest.approx(0.2)
    assert default_mismatch_grid() == pytest.approx([0.85, 0.9, 0.95, 1.0, 1.05, 1.1, 1.15])


@pytest.fixture(scope="module")
def fit_report():
    return run_channel_fit_study(FitStudySpec(gamma_tau=(0.001, 0.08), mismatch=(1.0, 1.15)))


def test_fit_study_mismatch_behaviour(fit_report):
    rows = {(r[0], r[1]): dict(zip(fit_report.tables["fit_study"][0], r))
            for r in fit_report.tables["fit_study"][1]}
    matched, off = rows[(0.08, 1.0)], rows[(0.08, 1.15)]
    assert matched["A_residual"] < 1e-12 and off["A_residual"] > 1e-4
    assert abs(matched["B_residual"] - off["B_residual"]) < 1e-10
    assert matched["A_z_weight"] > 0


def test_fit_study_records_infeasible_points(fit_report):
    # Below the baseline logical rate the target is outside Strategy A's hull.
    ok = dict(zip(zip(column(fit_report, "fit_study", "gamma_tau"),
                      column(fit_report, "fit_study", "mismatch_factor")),
                  column(fit_report, "fit_study", "A_ok")))
    assert ok[(0.001, 1.0)] == 0 and ok[(0.08, 1.0)] == 1
    assert fit_report.summary["A_failures"] == 2
    assert fit_report.summary["B_failures"] == 0


def test_fit_study_parallel_matches_serial():
    spec = FitStudySpec(gamma_tau=(0.02, 0.1), mismatch=(0.9, 1.1))
    serial = run_channel_fit_study(spec)
    parallel = run_channel_fit_study(FitStudySpec(spec.gamma_tau, spec.mismatch, workers=2))
    assert serial.tables == parallel.tables


def test_single_fit_report():
    rep = run_single_fit("dephasing", 0.08)
    weights = dict(rep.tables["weights"][1])
    assert weights["frame_Z"] == pytest.approx((1 - np.exp(-0.08)) / 2, abs=1e-8)


def test_dynamics_short_run():
    rep = run_dynamics_study(DynamicsSpec(m=10, diamond_restarts=1))
    s = rep.summary
    for name in ("A", "B", "A_mismatch"):
        assert s[name]["chained_bound_holds"]
    strategies = column(rep, "trajectories", "strategy")
    assert strategies.count("oracle") == 11
    oracle_d = [d for st, d in zip(strategies, column(rep, "trajectories", "trace_distance"))
                if st == "oracle"]
    assert max(oracle_d) == 0.0


def test_oracle_self_test_has_zero_distance():
    model = build_exciton_model(ExcitonParams())
    step = exact_step(model, 0.2)
    lib = LogicalChannelLibrary((step,), ("exact",))
    # Strategy B with the exact dissipator as its only program and no baseline.
    diss = exact_step(model.dissipative_part(), 0.2)
    compiled = compile_step("B", model, 0.2, LogicalChannelLibrary((diss,), ("d",)))
    assert compiled.fit.residual < 1e-12
    rho0 = site_one_excitation()
    a = evolve(model, rho0, 0.2, 20)
    b = evolve_channel(lib[0], rho0, 20)
    assert max(trace_distance(x, y) for x, y in zip(a, b)) == 0.0


def test_resource_study_rows():
    rep = run_resource_study(ResourceSpec(params=None, delta_tar=(1e-2,), per_step=(1e-5,)))
    header, rows = rep.tables["resources"]
    assert header[:6] == ("scenario", "d_A", "d_B", "footprint_A", "footprint_B", "ratio")
    row = dict(zip(header, rows[0]))
    assert (row["d_A"], row["d_B"]) == (3, 7)
    assert row["ratio"] == pytest.approx(97 / 17)


def test_resource_study_flags_infeasible():
    rep = run_resource_study(ResourceSpec(params=None, delta_tar=(1e-3,), per_step=(1e-4,),
                                          eps_prog_A=1e-3))
    assert rep.summary["infeasible"] == 1


def test_write_report_is_deterministic(tmp_path, fit_report):
    a = write_report(fit_report, tmp_path / "a", {"seed": 0})
    b = write_report(fit_report, tmp_path / "b", {"seed": 0})
    for x, y in zip(a, b):
        assert x.read_bytes() == y.read_bytes()
    rows = list(csv.reader(open(tmp_path / "a" / "fit_study.csv")))
    assert rows[0][0] == "gamma_tau" and len(rows) == 5
    assert (tmp_path / "a" / "manifest.json").exists()


def test_zero_rates_give_identical_trajectories():
    params = ExcitonParams(gamma1=0, gamma2=0, gamma12=0, kappa1=0, kappa2=0)
    from pqec.surface_code import NoiseModel

    rep = run_dynamics_study(DynamicsSpec(params=params, m=20, noise=NoiseModel("dephasing_only", 0.0),
                                          p_logical_B=0.0, eta=1e-8, diamond_restarts=1))
    dist = column(rep, "trajectories", "trace_distance")
    assert max(dist) < 1e-10


def test_trajectory_report_invariants():
    rep = run_dynamics_study(DynamicsSpec(m=5, diamond_restarts=1))
    strategies = column(rep, "trajectories", "strategy")
    times = column(rep, "trajectories", "time")
    dist = column(rep, "trajectories", "trace_distance")
    assert all(0 <= d <= 1 for d in dist)
    for name in set(strategies):
        t = [x for s, x in zip(strategies, times) if s == name]
        assert all(b > a for a, b in zip(t, t[1:]))
    with pytest.raises(ValueError):
        DynamicsSpec(m=0)
