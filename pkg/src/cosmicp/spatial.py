"""Exact nearest-neighbour search over a static target cloud.

The tree is a median-split k-d tree over point indices with leaf buckets.
Queries return the lowest target index among exact ties, and distances are
the squared Euclidean distance ``dx*dx + dy*dy + dz*dz`` evaluated in that
order, so results agree bit-for-bit with a brute-force scan using the same
formula.
"""

from __future__ import annotations

import numba
import numpy as np

DEFAULT_LEAF_SIZE = 16

_NO_CHILD = -1


class KdTree:
    """Immutable k-d tree over the points of ``cloud``.

    Nodes are stored in flat arrays.  Every node covers a ``[start, stop)``
    range of :attr:`order`, the permutation of target indices, and keeps the
    tight bounding box of those points for pruning.  Inner nodes also carry
    the split axis and value.
    """

    def __init__(self, cloud, leaf_size: int = DEFAULT_LEAF_SIZE):
        pts = np.ascontiguousarray(cloud, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 3 or len(pts) == 0:
            raise ValueError("KdTree needs a nonempty (N, 3) cloud")
        if leaf_size < 1:
            raise ValueError("leaf_size must be >= 1")
        self.points = pts.copy()
        self.leaf_size = int(leaf_size)

        order = np.arange(len(pts), dtype=np.int64)
        axis, split, left, right, start, stop, depth = [], [], [], [], [], [], []

        # explicit stack of (node id, start, stop, depth) to build pre-order
        def new_node(lo, hi, d):
            axis.append(-1)
            split.append(0.0)
            left.append(_NO_CHILD)
            right.append(_NO_CHILD)
            start.append(lo)
            stop.append(hi)
            depth.append(d)
            return len(axis) - 1

        stack = [new_node(0, len(pts), 0)]
        while stack:
            node = stack.pop()
            lo, hi = start[node], stop[node]
            if hi - lo <= self.leaf_size:
                continue
            idx = order[lo:hi]
            sub = pts[idx]
            ax = int(np.argmax(np.ptp(sub, axis=0)))
            if np.ptp(sub[:, ax]) == 0.0:
                # all members coincide; keep them in one leaf
                continue
            # median by value, ties broken by lower original index
            perm = np.lexsort((idx, sub[:, ax]))
            order[lo:hi] = idx[perm]
            mid = lo + (hi - lo) // 2
            axis[node] = ax
            split[node] = pts[order[mid], ax]
            left[node] = new_node(lo, mid, depth[node] + 1)
            right[node] = new_node(mid, hi, depth[node] + 1)
            stack.append(right[node])
            stack.append(left[node])

        self.order = order
        n_nodes = len(axis)
        self.node_lo = np.empty((n_nodes, 3))
        self.node_hi = np.empty((n_nodes, 3))
        for node in range(n_nodes):
            members = pts[order[start[node]:stop[node]]]
            self.node_lo[node] = members.min(axis=0)
            self.node_hi[node] = members.max(axis=0)
        self.node_axis = np.array(axis, dtype=np.int64)
        self.node_split = np.array(split, dtype=np.float64)
        self.node_left = np.array(left, dtype=np.int64)
        self.node_right = np.array(right, dtype=np.int64)
        self.node_start = np.array(start, dtype=np.int64)
        self.node_stop = np.array(stop, dtype=np.int64)
        self.node_depth = np.array(depth, dtype=np.int64)
        for a in (self.points, self.order, self.node_axis, self.node_split, self.node_left,
                  self.node_right, self.node_start, self.node_stop, self.node_depth,
                  self.node_lo, self.node_hi):
            a.flags.writeable = False

    def __len__(self):
        return len(self.points)

    @property
    def depth(self) -> int:
        return int(self.node_depth.max())

    def leaves(self) -> list[np.ndarray]:
        """Target indices held by each leaf, in node order."""
        is_leaf = self.node_left == _NO_CHILD
        return [self.order[s:e] for s, e in zip(self.node_start[is_leaf], self.node_stop[is_leaf])]

    def query(self, queries, *, count_visits: bool = False):
        """Nearest target for each query point.

        Returns ``(indices, squared_distances)``, plus the number of tree
        nodes visited per query when ``count_visits`` is set.
        """
        q = np.ascontiguousarray(queries, dtype=np.float64)
        single = q.ndim == 1
        q = q.reshape(-1, 3)
        if not np.isfinite(q).all():
            raise ValueError("query points must be finite")
        idx, d2, visits = _query_batch(
            q, self.points, self.order, self.node_axis, self.node_split,
            self.node_left, self.node_right, self.node_start, self.node_stop,
            self.node_lo, self.node_hi, self.depth + 2,
        )
        if single:
            idx, d2, visits = idx[0], d2[0], visits[0]
        if count_visits:
            return idx, d2, visits
        return idx, d2


def build(cloud, leaf_size: int = DEFAULT_LEAF_SIZE) -> KdTree:
    return KdTree(cloud, leaf_size)


def nearest(tree: KdTree, query) -> tuple[int, float]:
    """``(index, squared distance)`` of the target point closest to ``query``."""
    idx, d2 = tree.query(np.asarray(query, dtype=np.float64).reshape(3))
    return int(idx), float(d2)


@numba.njit(cache=True, nogil=True, inline="always")
def _box_d2(q0, q1, q2, lo, hi, node):
    # per-axis gap to the node's bounding box; rounding is monotone and the
    # sum uses the point-distance order, so this never exceeds a member's d2
    o0 = max(lo[node, 0] - q0, q0 - hi[node, 0], 0.0)
    o1 = max(lo[node, 1] - q1, q1 - hi[node, 1], 0.0)
    o2 = max(lo[node, 2] - q2, q2 - hi[node, 2], 0.0)
    return o0 * o0 + o1 * o1 + o2 * o2


@numba.njit(cache=True, nogil=True)
def _query_batch(queries, pts, order, axis, split, left, right, start, stop, lo, hi,
                 max_stack):
    m = queries.shape[0]
    out_idx = np.empty(m, dtype=np.int64)
    out_d2 = np.empty(m, dtype=np.float64)
    out_visits = np.empty(m, dtype=np.int64)
    stack_node = np.empty(max_stack, dtype=np.int64)
    stack_bound = np.empty(max_stack, dtype=np.float64)
    for qi in range(m):
        qx = queries[qi, 0]
        qy = queries[qi, 1]
        qz = queries[qi, 2]
        best = np.inf
        best_i = -1
        visits = 0
        stack_node[0] = 0
        stack_bound[0] = _box_d2(qx, qy, qz, lo, hi, 0)
        top = 1
        while top > 0:
            top -= 1
            node = stack_node[top]
            # strict: a node at exactly the best distance may hold a lower index
            if stack_bound[top] > best:
                continue
            visits += 1
            if left[node] == -1:
                for k in range(start[node], stop[node]):
                    j = order[k]
                    dx = qx - pts[j, 0]
                    dy = qy - pts[j, 1]
                    dz = qz - pts[j, 2]
                    d2 = dx * dx + dy * dy + dz * dz
                    if d2 < best or (d2 == best and j < best_i):
                        best = d2
                        best_i = j
                continue
            a = left[node]
            b = right[node]
            da = _box_d2(qx, qy, qz, lo, hi, a)
            db = _box_d2(qx, qy, qz, lo, hi, b)
            # push the farther child first so the nearer one is explored first
            if da <= db:
                a, b = b, a
                da, db = db, da
            if da <= best:
                stack_node[top] = a
                stack_bound[top] = da
                top += 1
            if db <= best:
                stack_node[top] = b
                stack_bound[top] = db
                top += 1
        out_idx[qi] = best_i
        out_d2[qi] = best
        out_visits[qi] = visits
    return out_idx, out_d2, out_visits


def brute_force_nearest(targets, queries):
    """O(N*M) reference scan with the same distance formula and tie rule."""
    t = np.asarray(targets, dtype=np.float64)
    q = np.asarray(queries, dtype=np.float64).reshape(-1, 3)
    dx = q[:, None, 0] - t[None, :, 0]
    dy = q[:, None, 1] - t[None, :, 1]
    dz = q[:, None, 2] - t[None, :, 2]
    d2 = dx * dx + dy * dy + dz * dz
    idx = np.argmin(d2, axis=1)  # argmin returns the first (lowest) index among ties
    return idx, d2[np.arange(len(q)), idx]
