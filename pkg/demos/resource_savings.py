"""Code distances and qubit footprints for the two compilation strategies."""
from pqec.studies import ResourceSpec, run_resource_study

rep = run_resource_study(ResourceSpec())
header, rows = rep.tables["resources"]
col = {name: i for i, name in enumerate(header)}
print(f"{'scenario':>28} {'d_A':>4} {'d_B':>4} {'qubits A':>9} {'qubits B':>9} {'ratio':>6}")
for r in rows:
    print(f"{r[col['scenario']]:>28} {r[col['d_A']]:4} {r[col['d_B']]:4} "
          f"{r[col['footprint_A']]:9} {r[col['footprint_B']]:9} {r[col['ratio']]:6.2f}")
