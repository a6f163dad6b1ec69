"""
Spectrum sharing with inter-operator coordination
=================================================

A sparse operator pools its 100 MHz with a denser operator's 200 MHz.
Without coordination the extra interference eats the bandwidth gain;
nulling toward the strongest foreign BSs brings it back.
"""

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from mmwave_coord import (AntennaParams, NetworkConfig, OperatorParams, PropagationParams, dbm_to_watts,
                          median_rate)
from mmwave_coord.coverage import coverage_grid


def scenario(k2, p=0.6, n=12):
    ops = (OperatorParams(5e-5, float(dbm_to_watts(20)), 100e6, 1),
           OperatorParams(1e-4, float(dbm_to_watts(25)), 200e6, k2))
    return NetworkConfig(ops, PropagationParams(), AntennaParams(n, 0.1, p))


gamma = np.linspace(1e7, 3e9, 120)

# the baseline keeps operator 1 alone on its own band
baseline = coverage_grid(scenario(0).without_sharing(), gamma)
fig, ax = plt.subplots()
ax.plot(gamma / 1e6, baseline.coverage, "k--", label="no sharing")
for k2 in (0, 3, 6):
    curve = coverage_grid(scenario(k2), gamma)
    gain = median_rate(curve) / median_rate(baseline) - 1
    ax.plot(gamma / 1e6, curve.coverage, label=f"sharing, K2 = {k2} ({100 * gain:+.0f}% median)")

ax.set_xlabel("rate threshold (Mbps)")
ax.set_ylabel("rate coverage")
ax.legend()
fig.savefig("sharing_gain.png", dpi=120)
