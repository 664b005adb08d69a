"""Intensities, X variances or EPR products against xi.

usage: python travelling_wave.py tw-intensities.csv [intensities|squeezing|epr]
"""

import sys

import matplotlib.pyplot as plt

from csvdata import load

path = sys.argv[1]
kind = sys.argv[2] if len(sys.argv) > 2 else "intensities"
d = load(path)
xi = d["xi"]

fig, ax = plt.subplots()
if kind == "intensities":
    for i in (1, 2, 3):
        ax.plot(xi, d[f"N{i}"], label=f"N{i}")
        ax.plot(xi, d[f"N{i}_classical"], "--", label=f"N{i} classical")
    ax.set_ylabel("photon number")
elif kind == "squeezing":
    for i in (1, 2, 3):
        ax.plot(xi, d[f"VX{i}"], label=f"V(X{i})")
    ax.axhline(1.0, color="k", lw=0.5)
    ax.set_ylabel("variance")
else:
    for name in d.dtype.names:
        if name.startswith("EPR") and not name.endswith("_se"):
            ax.plot(xi, d[name], label=name)
    ax.axhline(1.0, color="k", lw=0.5)
    ax.set_ylim(0, 2)
    ax.set_ylabel("EPR product")
ax.set_xlabel("xi")
ax.legend()
plt.show()
