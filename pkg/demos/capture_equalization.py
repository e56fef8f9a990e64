"""
Equal capture for near and far users
====================================

Under cell breathing a far user is served at full power while the other
cell whispers, and a near user the other way round.  With the right power
ratio both groups see the same SINR distribution, so a single channel model
fits everyone.
"""

from cellbreath.phy_layer import FAR, NEAR, CellGeometry, PowerLevels, capture_probability
from cellbreath.phy_layer import equalizing_power_ratio

geom = CellGeometry(d_near=1.0, d_far=2.0, d_cross_near=3.0, d_cross_far=2.5, alpha=3.0)
ratio = equalizing_power_ratio(geom)
print(f"equalizing p1/p2 = {ratio:.4f}")

for label, p1 in (("equalized", ratio), ("too weak", 0.5 * ratio), ("too strong", 2 * ratio)):
    powers = PowerLevels(p1, 1.0)
    near = capture_probability(NEAR, powers, geom, gamma=1.0, samples=200_000, seed=1)
    far = capture_probability(FAR, powers, geom, gamma=1.0, samples=200_000, seed=2)
    print(f"{label:>10}: P(capture) near={near:.4f} far={far:.4f}")

# Noise breaks the exact symmetry, mildly at high SNR.
powers = PowerLevels(ratio, 1.0)
for noise in (0.0, 0.01, 0.1):
    near = capture_probability(NEAR, powers, geom, 1.0, noise=noise, samples=200_000, seed=1)
    far = capture_probability(FAR, powers, geom, 1.0, noise=noise, samples=200_000, seed=2)
    print(f"noise {noise:<5}: near={near:.4f} far={far:.4f}")
