"""
Many squeezers at once
======================

Broadband pair sources emit into many Schmidt modes. With thermal-ladder
weights ``lambda_k = sqrt(1 - mu^2) mu^k`` the photon statistics approach a
thermal state as the mode count grows, and ``g3`` is nearly linear in ``g2``.
"""

import numpy as np

from broadsqueeze import fock
from broadsqueeze import squeezer as sq

mu = 0.961
shape = sq.thermal_shape_functions(mu)
print(f"mu = {mu}: L4 = {shape.L4:.5f}, slope S = {shape.S:.4f}, modes K = {shape.K:.2f}")

###############################################################################
# Exact moments against the small-gain closed form, over a range of gains.

print("   B      g2 exact   g2 approx   g3 exact   g3 approx")
for B in (0.05, 0.1, 0.2, 0.3):
    exact = sq.g_multi_exact(sq.SqueezerSpec.thermal(mu, B, K_max=400))
    approx = sq.g_multi_approx(mu, B)
    print(f"{B:5.2f} {exact.g2:11.3f} {approx.g2:11.3f} {exact.g3:10.2f} {approx.g3:11.2f}")

###############################################################################
# The full distribution by convolution agrees with the closed-form moments.

spec = sq.SqueezerSpec.thermal(mu, 0.27, K_max=400)
d = sq.multimode_distribution(spec, cutoff=80)
print("g2 from distribution:", fock.g_factorial(d, 2).value, " exact:", sq.g_multi_exact(spec).g2)

###############################################################################
# The ladder is truncated in practice; the discarded weight is mu^(2 K_max + 2).

for K_max in (40, 100, 300):
    print(f"K_max={K_max:4d}: sum lambda^2 = {1 - sq.thermal_weights(mu, K_max).deficit:.6f}")
