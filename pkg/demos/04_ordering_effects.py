"""Why the order of the stream matters
=====================================

Online procedures never revisit a decision, so wealth earned early funds
tests that come later.  When side information can push likely discoveries
to the front of the stream, power rises; when the strong signals arrive
last, much of the budget is already gone.  This script measures that gap
for the re-investment rule by replaying identical streams in favourable,
adversarial, and uniformly shuffled order.
"""

import numpy as np

from alphastream import (
    SimConfig,
    gaussian_stream,
    ordering_scenario,
    run_procedure,
    score_stream,
)

cfg = SimConfig(T=300, pi1=0.1, f0=("normal", -0.5, 0.1), seed=99, replicates=400)
MODES = ("favourable", "shuffled", "adversarial")

powers = {mode: [] for mode in MODES}
for rep in range(cfg.replicates):
    base = gaussian_stream(cfg, rep)
    for mode in MODES:
        sample = ordering_scenario(base, mode, seed=rep)
        _, rejected = run_procedure("lord", sample.p, alpha=cfg.alpha)
        powers[mode].append(score_stream(rejected, sample.truth).power)

print(f"power of the re-investment rule at pi1 = {cfg.pi1}, "
      f"{cfg.replicates} replicates of T = {cfg.T}:\n")
for mode in MODES:
    arr = np.array(powers[mode])
    se = arr.std(ddof=1) / np.sqrt(len(arr))
    print(f"  {mode:<12} {arr.mean():.3f}  (se {se:.3f})")

gap = np.array(powers["favourable"]) - np.array(powers["adversarial"])
gap_se = gap.std(ddof=1) / np.sqrt(len(gap))
print(f"\nfavourable - adversarial = {gap.mean():.3f} "
      f"({gap.mean() / gap_se:.1f} standard errors)")
print("""
The shuffled row is the honest middle ground: with no usable side
information, a random order already recovers most of the favourable
ordering's advantage over the adversarial one.""")
