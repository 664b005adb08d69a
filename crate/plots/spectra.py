"""Output quadrature spectra and EPR curves against frequency.

usage: python spectra.py spectral-squeezing.csv
"""

import sys

import matplotlib.pyplot as plt

from csvdata import load

path = sys.argv[1]
d = load(path)

fig, ax = plt.subplots()
for name in d.dtype.names:
    if name.startswith("VX") or name.startswith("EPR"):
        ax.plot(d["omega"], d[name], label=name)
ax.axhline(1.0, color="k", lw=0.5)
ax.set_xlabel("omega / gamma1")
ax.legend()
plt.show()
