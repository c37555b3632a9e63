"""
Kernel width
============

The Gaussian kernel width sets which correspondences count as similar.  At
the default of 100 every bunny-scale distance gets a weight near one.  At
0.001 a 1 cm pair already weighs about 1e-22, and pairs a few centimetres
apart underflow to zero.  When that happens to every pair the
cross-covariance vanishes and the step can only line up centroids, which
is what the degenerate-iteration column counts.
"""


from cosmicp import (EulerPose, RegistrationConfig, apply, euler_to_transform, gaussian_kernel,
                     load_bunny, register)

target = load_bunny(0.005)
typical = 0.01  # a 1 cm correspondence distance
print("weight of a 1 cm pair:")
for sigma in (100.0, 1.0, 0.05, 0.01, 0.001):
    print(f"  sigma {sigma:<7g} -> {gaussian_kernel(typical ** 2, sigma):.6g}")

poses = {
    "small": EulerPose(0.314, 0, 0, 0, 0, 0.05),
    "large": EulerPose(2.39384, -2.57132, 4.66973, 0.876204, -2.83931, 2.68268),
}
print(f"\n{'pose':<6} {'sigma':>7} {'final rmse':>12} {'degenerate iters':>17}")
for name, pose in poses.items():
    source = apply(euler_to_transform(pose), target)
    for sigma in (100.0, 0.05, 0.01, 0.001):
        rep = register(source, target, RegistrationConfig(sigma=sigma, max_iterations=50))
        print(f"{name:<6} {sigma:7g} {rep.final_rmse:12.4e} {len(rep.degenerate_iterations):17d}")
