"""Classical and ensemble-mean N1 for a self-pulsing run.

usage: python self_pulsing.py self-pulsing.csv
"""

import sys

import matplotlib.pyplot as plt

from csvdata import load, notes

path = sys.argv[1]
d = load(path)
info = notes(path)

fig, ax = plt.subplots()
ax.plot(d["t"], d["N1_classical"], label="classical")
ax.plot(d["t"], d["N1"], label="positive-P")
ax.axvline(float(info["window_start"]), color="k", lw=0.5)
ax.set_xlabel("gamma1 t")
ax.set_ylabel("N1")
ax.legend()
plt.show()
