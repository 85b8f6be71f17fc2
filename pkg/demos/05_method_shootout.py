"""Small replay of the simulation shootout.

Runs two stock scenarios at a handful of replications and prints the
aggregate table: mixture variants against distance and Gaussian-mixture
baselines. The full 200-replication table takes much longer; see the
README for how to launch it from the command line.
"""

from armm.simulate import run_benchmark

report = run_benchmark([1, 5], reps=5, seed=0)
print(report.to_table_csv())
print("per-method wall time (seconds):")
for method, secs in report.metadata()["runtime_seconds"].items():
    print(f"  {method:6s} {secs:7.2f}")
