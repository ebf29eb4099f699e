import csv

import numpy as np
import pytest
from hypothesis import given, strategies as st

from pqec.channels import amplitude_damping, pauli_matrix, random_density_matrix
from pqec.lindblad import (
    SIGMA_MINUS,
    TRAJECTORY_HEADER,
    ExcitonParams,
    LindbladModel,
    ModelError,
    build_exciton_model,
    coherent_step,
    dephasing_model,
    evolve,
    exact_step,
    excitation_number,
    first_order_kraus_step,
    liouvillian,
    site_one_excitation,
    write_trajectory_csv,
)

seeds = st.integers(0, 2**32 - 1)


def rhs(model, rho):
    h = model.hamiltonian
    out = -1j * (h @ rho - rho @ h)
    for op, rate in model.jump_ops:
        ld = op.conj().T @ op
        out += rate * (op @ rho @ op.conj().T - 0.5 * (ld @ rho + rho @ ld))
    return out


def random_model(rng, dim=2, n_jumps=2):
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    jumps = tuple((rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim)),
                   float(rng.uniform(0, 0.5))) for _ in range(n_jumps))
    return LindbladModel(g + g.conj().T, jumps)


@given(seeds, st.sampled_from([2, 4]))
def test_liouvillian_matches_master_equation(seed, dim):
    rng = np.random.default_rng(seed)
    model = random_model(rng, dim)
    rho = random_density_matrix(dim, rng)
    vec = liouvillian(model) @ rho.T.reshape(-1)
    assert np.allclose(vec.reshape(dim, dim).T, rhs(model, rho), atol=1e-10)


@given(seeds, st.floats(0.01, 2.0))
def test_exact_step_is_cptp_semigroup(seed, tau):
    model = random_model(np.random.default_rng(seed))
    one = exact_step(model, tau)
    assert one.validate(eig_tol=1e-9, tp_tol=1e-9).ok
    assert np.allclose(exact_step(model, 2 * tau).superop, one.superop @ one.superop, atol=1e-9)


@pytest.mark.parametrize("gt", [0.01, 0.08, 0.5])
def test_dephasing_closed_form(gt):
    step = exact_step(dephasing_model(gt), 1.0)
    assert np.allclose(step.ptm, np.diag([1, np.exp(-gt), np.exp(-gt), 1]), atol=1e-12)


def test_decay_matches_amplitude_damping():
    kappa, tau = 0.3, 0.7
    model = LindbladModel(np.zeros((2, 2)), ((SIGMA_MINUS, kappa),))
    lam = 1 - np.exp(-kappa * tau)
    assert np.allclose(exact_step(model, tau).choi, amplitude_damping(lam).choi, atol=1e-12)


def test_exciton_model_structure():
    model = build_exciton_model(ExcitonParams())
    assert model.dim == 4
    assert model.labels == ("dephasing_1", "dephasing_2", "dephasing_12", "loss_1", "loss_2")
    h = model.hamiltonian
    # Hopping couples |10⟩ (index 2) and |01⟩ (index 1) with amplitude J.
    assert h[2, 1] == pytest.approx(0.3)
    assert h[0, 0] == pytest.approx(-0.9) and h[3, 3] == pytest.approx(0.9)


def test_exciton_without_loss_conserves_excitations():
    model = build_exciton_model(ExcitonParams(kappa1=0.0, kappa2=0.0))
    states = evolve(model, site_one_excitation(), 0.2, 50)
    assert all(excitation_number(r) == pytest.approx(1.0, abs=1e-10) for r in states)
    assert abs(states[10][2, 1]) > 1e-3  # hopping builds a coherence


def test_exciton_loss_reduces_excitations():
    states = evolve(build_exciton_model(ExcitonParams()), site_one_excitation(), 0.2, 100)
    n = [excitation_number(r) for r in states]
    assert n[-1] == pytest.approx(np.exp(-0.01 * 20), abs=1e-9)  # equal loss rates on both sites
    assert all(np.trace(r).real == pytest.approx(1.0, abs=1e-10) for r in states)


def test_coherent_part_is_unitary_step():
    model = build_exciton_model(ExcitonParams())
    assert np.allclose(exact_step(model.coherent_part(), 0.3).superop,
                       coherent_step(model, 0.3).superop, atol=1e-12)
    assert not model.dissipative_part().hamiltonian.any()


def test_scaled_rates():
    model = build_exciton_model(ExcitonParams()).scaled_rates(1.06, ["dephasing_1"])
    rates = [r for _, r in model.jump_ops]
    assert rates[0] == pytest.approx(0.05 / 2 * 1.06) and rates[1] == pytest.approx(0.025)


def test_first_order_step_is_second_order_accurate():
    model = build_exciton_model(ExcitonParams())
    errs = []
    for dt in (1e-2, 1e-3):
        approx = first_order_kraus_step(model, dt)
        errs.append(np.linalg.norm(approx.choi - exact_step(model, dt).choi))
    assert errs[0] / errs[1] == pytest.approx(100, rel=0.1)


def test_model_validation():
    with pytest.raises(ModelError):
        LindbladModel(np.array([[0, 1], [0, 0]]))
    with pytest.raises(ModelError):
        LindbladModel(np.zeros((2, 2)), ((pauli_matrix("Z"), -0.1),))
    with pytest.raises(ModelError):
        ExcitonParams(gamma1=-1)
    with pytest.raises(ModelError):
        exact_step(dephasing_model(0.1), -1.0)


def test_trajectory_csv(tmp_path):
    states = evolve(build_exciton_model(ExcitonParams()), site_one_excitation(), 0.2, 3)
    path = tmp_path / "traj.csv"
    write_trajectory_csv(path, states, 0.2)
    rows = list(csv.reader(open(path)))
    assert tuple(rows[0]) == TRAJECTORY_HEADER
    assert len(rows) == 5
    assert float(rows[1][3]) == 1.0  # pop_10 at t=0


def test_hopping_rabi_oscillation():
    # Single-excitation block with equal site energies is a 2x2 Rabi problem:
    # P(10)(t) = cos²(J t), i.e. populations oscillate at angular frequency 2J.
    J = 0.7
    model = build_exciton_model(ExcitonParams(eps1=0.5, eps2=0.5, J=J, gamma1=0, gamma2=0,
                                              gamma12=0, kappa1=0, kappa2=0))
    states = evolve(model, site_one_excitation(), 0.1, 40)
    t = 0.1 * np.arange(41)
    assert np.allclose([r[2, 2].real for r in states], np.cos(J * t) ** 2, atol=1e-10)
    assert np.allclose([r[1, 1].real for r in states], np.sin(J * t) ** 2, atol=1e-10)
