"""Logical channel of one d=3 round under dephasing, exact and sampled."""
import numpy as np

from pqec.surface_code import NoiseModel, build_code, extract_logical_channel

code = build_code(3)
print(f"d=3: {code.n_data} data qubits, {code.n_stabilizers} stabilizers")
for p in (0.001, 0.005, 0.01, 0.05):
    noise = NoiseModel("dephasing_only", p)
    exact = extract_logical_channel(code, noise)
    report = exact.to_channel().validate()
    print(f"p={p:<6} p_Z={exact.pauli_probs.prob('Z'):.6e}  "
          f"min eig {report.min_choi_eigenvalue:+.1e}  TP defect {report.tp_defect:.1e}")

# Sampling agrees with enumeration within a few standard errors.
noise = NoiseModel("depolarizing", 0.03)
exact = extract_logical_channel(code, noise)
mc = extract_logical_channel(code, noise, "monte_carlo", 200_000, seed=1)
for k in "XYZ":
    z = (mc.pauli_probs.prob(k) - exact.pauli_probs.prob(k)) / mc.standard_errors[k]
    print(f"{k}: exact {exact.pauli_probs.prob(k):.5f}  sampled {mc.pauli_probs.prob(k):.5f}  "
          f"({z:+.1f} se)")

# Below threshold a larger code does better.
noise = NoiseModel("depolarizing", 0.005)
for d in (3, 5):
    r = extract_logical_channel(build_code(d), noise, "monte_carlo", 300_000, seed=d)
    print(f"d={d}: logical error rate {r.logical_error_rate:.2e}")
