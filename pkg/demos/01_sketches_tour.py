"""Tour of the decayed streaming sketches.

The damped reservoir keeps a fixed-size sample whose decay step is
decoupled from insertion; the maintenance counter tracks heavy hitters
with constant-time inserts and amortized pruning.
"""

import numpy as np

from fastdata import AdaptableDampedReservoir, AmortizedMaintenanceCounter, SpaceSaving

rng = np.random.default_rng(0)

# --- damped reservoir -------------------------------------------------------
adr = AdaptableDampedReservoir(size=1000, decay_rate=0.5, seed=0)

print("Feed 50K values from N(10, 5), decaying each 10K:")
for chunk in range(5):
    adr.observe_many(rng.normal(10.0, 5.0, 10_000))
    adr.decay()
print(f"  sample mean ~10: {adr.sample().mean():.2f}, running weight c_w = {adr.weight:,.0f}")

print("Now the stream jumps to N(50, 5); the old regime decays away fast:")
for chunk in range(3):
    adr.observe_many(rng.normal(50.0, 5.0, 10_000))
    adr.decay()
print(f"  sample mean after 3 windows: {adr.sample().mean():.2f}")
print(f"  99th-percentile estimate: {adr.quantile(0.99):.2f}")

# --- heavy hitters ----------------------------------------------------------
print("\nZipf-distributed items through the maintenance counter (stable size 100):")
amc = AmortizedMaintenanceCounter(stable_size=100)
ss = SpaceSaving(capacity=100)
stream = rng.zipf(1.5, 200_000)
for item in stream.tolist():
    amc.observe(item)
    ss.observe(item)
amc.maintain()

true_counts = np.bincount(stream)
print(f"  {'item':>6} {'true':>8} {'amc':>10} {'spacesaving':>12}")
for item, estimate in amc.frequent(0.02)[:5]:
    print(f"  {item:>6} {true_counts[item]:>8} {estimate:>10.0f} {ss.estimate(item):>12.0f}")
print(f"  carry-over (overestimation bound for unseen items): {amc.carry_over:.0f}")
