"""
Heat kernel on the rotation group
=================================

Angle density of the isotropic Gaussian on SO(3) at a few times, a
histogram check of the sampler, and the score pointing back to the mean.
"""

import numpy as np

from surfbridge.geom3 import rotation_angle, so3_log
from surfbridge.kernels.igso3 import angle_marginal_pdf, igso3_sample, igso3_score

rng = np.random.default_rng(0)
omega = np.linspace(0, np.pi, 1001)

# small t concentrates near the identity, large t approaches the Haar law
# whose angle density is (1 - cos w) / pi
for t in (0.05, 0.5, 5.0):
    pdf = angle_marginal_pdf(omega, t)
    mode = omega[np.argmax(pdf)]
    print(f"t={t:<5} mass={np.trapezoid(pdf, omega):.6f} mode={mode:.3f} rad")

haar = (1 - np.cos(omega)) / np.pi
print("t=10 vs Haar, max pdf gap:", np.abs(angle_marginal_pdf(omega, 10.0) - haar).max())

# sampled angles against the analytic marginal
t = 0.5
angles = rotation_angle(igso3_sample(t, rng, size=20000))
hist, edges = np.histogram(angles, bins=30, range=(0, np.pi), density=True)
mid = 0.5 * (edges[1:] + edges[:-1])
print("histogram vs pdf, max gap:", np.abs(hist - angle_marginal_pdf(mid, t)).max())

# the score at r_t is a tangent vector; its axis points back toward r_0
r0 = np.eye(3)
rt = igso3_sample(t, rng)
score = igso3_score(r0, rt, t)
print("score . log(rt) (negative means restoring):", float(score @ so3_log(rt)))
