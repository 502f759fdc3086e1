"""How test levels evolve over a stream
=======================================

Spending rules pay for every test out of a fixed budget, so their levels
decay towards zero.  Investing rules earn budget back at every discovery,
which keeps levels alive indefinitely.  This script averages the level
trajectory alpha_t over replicated streams (300 hypotheses, half non-null,
exactly uniform nulls) and prints a log10 sparkline per procedure.
"""

import numpy as np

from alphastream import SimConfig, run_experiment

cfg = SimConfig(
    T=300,
    pi1=0.5,
    f0=("point", 0.0),          # exactly uniform null p-values
    f1=("normal", 3.0, 1.0),
    alpha=0.05,
    seed=42,
    replicates=200,
    procedures=("uncorrected", "alpha-spending", "lord", "saffron", "addis"),
)
result = run_experiment(cfg, collect_trajectories=True)

CHECKPOINTS = [1, 5, 20, 75, 150, 300]
print(f"mean level alpha_t (log10), {cfg.replicates} replicates, pi1 = {cfg.pi1}:\n")
header = "procedure        " + "".join(f"  t={t:<5}" for t in CHECKPOINTS)
print(header)
for name in cfg.procedures:
    traj = result.cell(cfg.pi1, name).mean_alpha
    row = "".join(f"  {np.log10(traj[t - 1]):>6.2f}" for t in CHECKPOINTS)
    print(f"{name:<17}{row}")

print("""
Reading the table: alpha-spending sinks steadily (no earnings), the
investing rules flatten out after the early discoveries, and the adaptive
rules sit highest -- close to, and sometimes above, the uncorrected line
log10(0.05) = -1.3.  With exactly uniform nulls the discarding rule has no
conservatism to exploit, so it tracks the candidate rule closely.""")
