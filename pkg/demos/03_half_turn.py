"""
Why large poses can stall at a half turn
========================================

When the source is a rigid copy of the target with the same point order,
every source point satisfies ``p_i = R q_i + t``.  The mirrored similarity
matrix is symmetric, so the weighted cross-covariance factors as
``H = R S`` with ``S = Q'^T SM Q'`` symmetric.  If ``S`` is positive
definite, one SVD step recovers ``R`` exactly.  If ``S`` has two negative
eigenvalues, the polar factor picks up a half turn instead.  This script
checks both cases on the bunny.
"""

import numpy as np

from cosmicp import EulerPose, apply, build_similarity, euler_to_transform, load_bunny
from cosmicp.core import compose, transform_error
from cosmicp.registration import cross_covariance, estimate_step, find_correspondences
from cosmicp.spatial import KdTree

target = load_bunny(0.005)
tree = KdTree(target)
Q = target - target.mean(axis=0)

poses = {
    "small": EulerPose(0.314, 0, 0, 0, 0, 0.05),
    "large": EulerPose(-0.866749, -2.6182, -0.318386, -2.1561, -1.25001, -4.8753),
}
for name, pose in poses.items():
    truth = euler_to_transform(pose)
    source = apply(truth, target)
    corr = find_correspondences(source, tree)
    sm = build_similarity(source, target, corr.index, sigma=100.0)
    H = cross_covariance(source - source.mean(axis=0), Q, sm)
    S = truth.rotation.T @ H
    print(f"\n{name} pose")
    print("  S symmetric to rounding:", np.allclose(S, S.T, atol=1e-12 * np.abs(S).max()))
    print("  eigenvalues of S:", np.array2string(np.linalg.eigvalsh(S), precision=4))
    step = estimate_step(source, target, corr, sm)
    rot_err, _ = transform_error(step, truth.inverse())
    print(f"  rotation error after one step: {rot_err:.6f} rad")

    # follow the loop a few more steps
    total = step
    for _ in range(5):
        work = apply(total, source)
        corr = find_correspondences(work, tree)
        sm = build_similarity(work, target, corr.index, sigma=100.0)
        total = compose(estimate_step(work, target, corr, sm), total)
    print(f"  rotation error after six steps: "
          f"{transform_error(total, truth.inverse())[0]:.6f} rad (pi = {np.pi:.6f})")
