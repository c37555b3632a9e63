"""
Inside the similarity matrix
============================

Each iteration builds a sparse matrix with one correntropy weight per source
point at ``(i, c(i))`` plus the mirrored cell ``(c(i), i)``.  This script
prints its size, its symmetry and how many distinct targets are matched as
the registration proceeds.  That count is a cheap stand-in for the rank.
"""

import numpy as np

from cosmicp import (EulerPose, apply, build_similarity, euler_to_transform, load_bunny,
                     rank_proxy)
from cosmicp.core import compose
from cosmicp.registration import (cross_covariance, estimate_step, extract_rotation,
                                  find_correspondences)
from cosmicp.spatial import KdTree

target = load_bunny(0.005)
n = len(target)
source = apply(euler_to_transform(EulerPose(0.5, 0.2, -0.3, 0.02, 0.01, 0.0)), target)
tree = KdTree(target)

# run the loop by hand so that every matrix can be inspected
work = source
total = None
print(f"{'iter':>4} {'nnz':>6} {'2N':>6} {'symmetric':>9} {'distinct':>8} {'rank':>6} "
      f"{'min w':>10}")
for it in range(1, 7):
    corr = find_correspondences(work, tree)
    sm = build_similarity(work, target, corr.index, sigma=0.05)
    dense = sm.to_dense()
    distinct, rank = rank_proxy(sm)
    print(f"{it:4d} {sm.nnz:6d} {2 * n:6d} {str(np.array_equal(dense, dense.T)):>9} "
          f"{distinct:8d} {rank:6d} {sm.weights.min():10.3e}")
    step = estimate_step(work, target, corr, sm)
    total = step if total is None else compose(step, total)
    work = apply(total, source)

# a uniform rescale of the matrix leaves the rotation unchanged
P = work - work.mean(axis=0)
Q = target - target.mean(axis=0)
H = cross_covariance(P, Q, sm)
H_scaled = cross_covariance(P, Q, sm.scaled(0.125))
print("\nrotation unchanged by rescaling SM:",
      np.array_equal(extract_rotation(H), extract_rotation(H_scaled)))
