"""
How many coordinated base stations are LoS?
===========================================

The strongest few BSs are almost always line-of-sight; the share drops
as the coordination set grows and as the network thins out.
"""

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from mmwave_coord import IntensityMeasures, PropagationParams, los_fraction

prop = PropagationParams()
sizes = np.arange(1, 21)

fig, ax = plt.subplots()
for density in (5e-5, 8e-5, 1e-4):
    share = [los_fraction(int(k), IntensityMeasures(density, prop)) for k in sizes]
    ax.plot(sizes, share, "o-", label=f"{density * 1e6:.0f} BSs per km$^2$")

ax.set_xlabel("coordination set size")
ax.set_ylabel("expected LoS share")
ax.set_ylim(0, 1)
ax.legend()
fig.savefig("los_share.png", dpi=120)
