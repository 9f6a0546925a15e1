"""
How much collection efficiency does a dot need?
===============================================

Thinning the emitted light by a collection efficiency eta turns a near-ideal
single-photon source into a mostly-vacuum one. This walks the BB84 decoy rate
at 100 km down the eta axis and finds where each source matches the best laser.
"""

import numpy as np

from qdqkd.qkd import ChannelSpec, Protocol, key_rate, optimize_mu, qds_distribution
from qdqkd.sweep import PAPER_STATS

proto = Protocol.BB84_INF_DECOY
ch = ChannelSpec(distance=100.0)
_, laser = optimize_mu(proto, ch)
print(f"optimised laser at 100 km: {laser:.3e} bits/pulse\n")

etas = np.round(np.linspace(0.02, 1.0, 50), 3)
print(f"{'eta':>6} {'adiabatic':>11} {'resonant':>11}")
for eta in etas[::5]:
    row = [key_rate(proto, qds_distribution(*PAPER_STATS[n], eta), ch) for n in ("adiabatic", "resonant")]
    print(f"{eta:6.2f} " + " ".join(f"{r:11.3e}" for r in row))

# the break-even collection efficiency against the laser
for name, stats in PAPER_STATS.items():
    even = next((e for e in etas if key_rate(proto, qds_distribution(*stats, e), ch) >= laser), None)
    print(f"{name} source beats the laser above eta ~ {even}")
