"""One full three-step optimization run, narrated.

Step 1 designs the detection order from a gain-maximizing reflection,
step 2 alternates power / combiners / reflection / blocklength until the
bottleneck exponent stalls, and step 3 re-pairs strong and weak users by
bottleneck matching.
"""

import numpy as np

from ris_urllc import make_config, realize_channels, run_three_step
from ris_urllc.ordering import determine_order

cfg = make_config(K=4, Nt=3, N=32, seed=3)
ch = realize_channels(cfg)

order = determine_order(ch, cfg)
print("Step 1: detection order from the gain-maximizing reflection")
print(f"  combined gains: {[f'{g:.2e}' for g in order.gains]}")
print(f"  strong users {order.strong} decode first; weak users {order.weak} decode clean")

alloc, rep, trace = run_three_step(cfg, ch)

print("\nStep 2: alternating optimization")
print(f"  bottleneck exponent per round: {[f'{c:.4f}' for c in trace.chi]}")
print(f"  terminated: {trace.termination}")
for step, sec in trace.step_seconds.items():
    print(f"    {step:12s} {sec * 1e3:7.1f} ms")

print("\nStep 3: bottleneck re-pairing")
print(f"  final slots (first listed decodes first): {alloc.groups}")
print(f"  matching bottleneck exponent: {trace.chi_pairing:.4f}")

print("\nResult")
print(f"  powers: {np.round(alloc.p, 4)} W, blocklength {int(alloc.m)} symbols")
print(f"  per-user error probabilities: {[f'{e:.2e}' for e in rep.eps]}")
print(f"  worst-case error: {rep.worst_eps:.3e}")
print(f"  energy used: {rep.energy_total:.3f} J of {cfg.E0} J")
