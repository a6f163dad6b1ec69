"""
Strength of the K-th strongest base station
===========================================

Closed-form distribution of the K-th strongest link power in a blocked
mmWave network, checked against a Monte Carlo drop of base stations.
"""

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from mmwave_coord import AntennaParams, IntensityMeasures, NetworkConfig, OperatorParams, PropagationParams, cdf_tk
from mmwave_coord.simulator import empirical_cdf_tk

# one operator, 50 BSs per square km, LoS links decaying as r^-2 and NLoS as r^-4
prop = PropagationParams(alpha_los=2, alpha_nlos=4, c_los=1e-6, c_nlos=1e-7, mu=144)
config = NetworkConfig((OperatorParams(5e-5, 0.1, 100e6, 1),), prop, AntennaParams())
measures = IntensityMeasures(5e-5, prop)

# link powers span many decades, so plot on a dB axis
t = np.logspace(-14, -7, 400)
fig, ax = plt.subplots()
for k in (1, 2, 3, 5):
    ecdf = empirical_cdf_tk(config, 0, k, 20_000, base_seed=1)
    ax.plot(10 * np.log10(t), cdf_tk(t, k, measures), label=f"K = {k}")
    ax.plot(10 * np.log10(t), ecdf(t), "k:", lw=1)
    print(f"K={k}: KS distance {ecdf.ks_distance(lambda x: cdf_tk(x, k, measures)):.4f}")

ax.set_xlabel("link power (dB)")
ax.set_ylabel("CDF")
ax.legend()
fig.savefig("kth_strongest_link.png", dpi=120)
