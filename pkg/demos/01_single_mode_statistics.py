"""
Single-mode squeezed vacuum through a lossy detector
====================================================

A squeezed vacuum only ever holds photon pairs. This walk-through builds its
photon-number distribution, checks the textbook bunching value, sends it
through a binomial loss channel and undoes the loss again.
"""

import numpy as np

from broadsqueeze import fock
from broadsqueeze import squeezer as sq

r = 0.5
d = sq.single_mode_distribution(r, cutoff=40)
print("P_n for n = 0..8:", np.round(d.probs[:9], 5))

###############################################################################
# Bunching: ``g2 = 3 + 1/<n>`` for a single squeezed mode.

g2 = fock.g_factorial(d, 2)
print(f"g2 = {g2.value:.6f}, expected {3 + 1 / np.sinh(r) ** 2:.6f}")

###############################################################################
# Klyshko figures. Odd photon numbers are empty, so K_n with odd n is
# undefined and the even ones sit far below 1.

for k in fock.klyshko_figures(d, 4):
    print(f"K_{k.n} = {k.value:.4g}" if k.defined else f"K_{k.n} undefined (P_{k.n} = 0)")

###############################################################################
# Loss fills in the odd terms; inverting the binomial channel recovers the
# original distribution up to float round-off.

eta = 0.462
lossy = fock.apply_loss(d, eta)
print("after loss:", np.round(lossy.probs[:6], 5))
back = fock.compensate_loss(lossy, eta, M=40)
print("max |compensated - original| =", np.abs(back.probs - d.probs).max())
print("Klyshko after loss:", [round(k.value, 3) for k in fock.klyshko_figures(lossy, 3)])
