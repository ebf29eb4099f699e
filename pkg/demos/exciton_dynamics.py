"""Two-site exciton transfer simulated by compiled logical channels."""
from pqec.studies import DynamicsSpec, run_dynamics_study

rep = run_dynamics_study(DynamicsSpec(m=100))
for strategy in ("A", "A_mismatch", "B"):
    s = rep.summary[strategy]
    print(f"{strategy:>10}: final trace distance {s['final_trace_distance']:.2e}, "
          f"max {s['max_trace_distance']:.2e}, chained bound {s['chained_bound']:.2e}")

header, rows = rep.tables["trajectories"]
col = {name: i for i, name in enumerate(header)}
print("\nsite-1 population, exact vs Strategy A, every 20 steps")
exact = [r for r in rows if r[col["strategy"]] == "oracle"]
comp = [r for r in rows if r[col["strategy"]] == "A"]
for e, c in list(zip(exact, comp))[::20]:
    print(f"t={e[col['time']]:5.1f}  {e[col['pop_10']]:.5f}  {c[col['pop_10']]:.5f}")
