"""CoSM-ICP and the plain SVD-ICP baseline.

Both methods share one loop: nearest-neighbour correspondences, a weighted
3x3 cross-covariance of the demeaned clouds, rotation from its SVD, and
translation ``t_cen - R @ s_cen``.  CoSM weights the covariance with the
correntropy similarity matrix; the baseline uses unit weights on the
``(i, c(i))`` cells only.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .core import SCALE, Method, RegistrationConfig, RigidTransform, apply, as_cloud, compose
from .correntropy import SimilarityMatrix, build_similarity, similarity_from_weights
from .spatial import KdTree

logger = logging.getLogger(__name__)

DEGENERACY_RTOL = 1e-12


class DegenerateCovariance(ArithmeticError):
    """Two or more singular values of H vanish; the rotation is not unique.

    ``rotation`` holds the best-effort estimate so callers can carry on.
    """

    def __init__(self, singular_values, rotation):
        self.singular_values = singular_values
        self.rotation = rotation
        super().__init__(f"degenerate cross-covariance, singular values {singular_values}")


class DimensionMismatch(ValueError):
    pass


@dataclass(frozen=True)
class Correspondences:
    index: np.ndarray
    d_sq: np.ndarray

    def __len__(self):
        return len(self.index)


@dataclass(frozen=True)
class SvdFactors:
    U: np.ndarray
    singular_values: np.ndarray
    V: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return self.U @ np.diag(self.singular_values) @ self.V.T


def find_correspondences(source, target_tree: KdTree) -> Correspondences:
    """Exact nearest target for every source point (no rejection, no reciprocity)."""
    idx, d2 = target_tree.query(np.asarray(source, dtype=np.float64).reshape(-1, 3))
    return Correspondences(idx, d2)


def centroids(source, target) -> tuple[np.ndarray, np.ndarray]:
    """Unweighted means of the source cloud and of the full target cloud."""
    return (np.asarray(source, dtype=np.float64).mean(axis=0),
            np.asarray(target, dtype=np.float64).mean(axis=0))


def cross_covariance(source_demeaned, target_demeaned, sm: SimilarityMatrix) -> np.ndarray:
    """``H = sum_(j,k,w) w * p'_j q'_k^T`` over the stored triplets of ``sm``.

    This equals the dense product ``P' @ SM @ Q'^T`` with points as columns.
    """
    P = np.asarray(source_demeaned, dtype=np.float64)
    Q = np.asarray(target_demeaned, dtype=np.float64)
    if sm.shape != (len(P), len(Q)):
        raise DimensionMismatch(f"SM is {sm.shape} but clouds have {len(P)} and {len(Q)} points")
    return (P[sm.rows] * sm.weights[:, None]).T @ Q[sm.cols]


def svd3(H) -> SvdFactors:
    U, s, Vt = np.linalg.svd(np.asarray(H, dtype=np.float64))
    return SvdFactors(U, s, Vt.T)


def extract_rotation(H, *, strict: bool = True) -> np.ndarray:
    """Proper rotation ``R = V U^T`` maximizing ``trace(R H)``.

    A reflection is repaired by negating the column of V that belongs to the
    smallest singular value.  If two or more singular values are below
    ``1e-12`` times the largest, :class:`DegenerateCovariance` is raised when
    ``strict``; otherwise the best-effort rotation is returned.
    """
    f = svd3(H)
    V = f.V.copy()
    R = V @ f.U.T
    if np.linalg.det(R) < 0:
        V[:, 2] = -V[:, 2]
        R = V @ f.U.T
    s = f.singular_values
    if strict and (s[0] == 0.0 or np.sum(s < DEGENERACY_RTOL * s[0]) >= 2):
        raise DegenerateCovariance(s, R)
    return R


def estimate_step(source, target, corr, sm: SimilarityMatrix | None = None) -> RigidTransform:
    """One pose update mapping the current source toward the target.

    ``sm=None`` selects the unit-weight baseline on the ``(i, c(i))`` cells.
    ``corr`` may be a :class:`Correspondences` or a plain index vector.
    """
    src = np.asarray(source, dtype=np.float64)
    tgt = np.asarray(target, dtype=np.float64)
    index = corr.index if isinstance(corr, Correspondences) else np.asarray(corr)
    if sm is None:
        sm = similarity_from_weights(index, np.ones(len(src)), len(tgt), mirror=False)
    s_cen, t_cen = centroids(src, tgt)
    H = cross_covariance(src - s_cen, tgt - t_cen, sm)
    try:
        R = extract_rotation(H)
    except DegenerateCovariance as exc:
        exc.translation = t_cen - exc.rotation @ s_cen
        raise
    return RigidTransform(R, t_cen - R @ s_cen)


def rmse(source, target, corr) -> float:
    """Root mean squared distance between source points and their matches."""
    src = np.asarray(source, dtype=np.float64)
    tgt = np.asarray(target, dtype=np.float64)
    index = corr.index if isinstance(corr, Correspondences) else np.asarray(corr)
    diff = src - SCALE * tgt[index]
    return float(np.sqrt(np.mean(np.sum(diff * diff, axis=1))))


@dataclass
class RegistrationReport:
    final_transform: RigidTransform
    rmse_trace: list[float] = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    rank_trace: list[int] = field(default_factory=list)
    degenerate_iterations: list[int] = field(default_factory=list)
    wall_time_s: float = 0.0

    @property
    def final_rmse(self) -> float:
        return self.rmse_trace[-1]

    @property
    def status(self) -> str:
        return "degenerate" if self.degenerate_iterations else "ok"


def register(source, target, config: RegistrationConfig | None = None, *,
             target_tree: KdTree | None = None) -> RegistrationReport:
    """Align ``source`` onto ``target``.

    Each iteration: correspondences, similarity matrix (CoSM only), pose
    step, update of the working source, and the RMSE of the moved source
    against fresh correspondences.  ``final_transform`` maps the original
    source into the target frame.  A prebuilt ``target_tree`` can be passed
    to share it between runs.
    """
    config = config or RegistrationConfig()
    src0 = as_cloud(source, name="source")
    tgt = as_cloud(target, name="target")
    tree = target_tree if target_tree is not None else KdTree(tgt)
    if len(tree) != len(tgt):
        raise ValueError("target_tree was built over a different cloud")

    t0 = time.perf_counter()
    total = RigidTransform.identity()
    work = src0
    report = RegistrationReport(total)
    corr = find_correspondences(work, tree)
    previous = rmse(work, tgt, corr)

    for it in range(1, config.max_iterations + 1):
        if config.method is Method.COSM:
            sm = build_similarity(work, tgt, corr.index, config.sigma, mirror=config.mirror)
        else:
            sm = None
        try:
            step = estimate_step(work, tgt, corr, sm)
        except DegenerateCovariance as exc:
            logger.debug("iteration %d: %s", it, exc)
            report.degenerate_iterations.append(it)
            step = RigidTransform(exc.rotation, exc.translation)

        total = compose(step, total)
        work = apply(total, src0)
        report.rank_trace.append(int(len(np.unique(corr.index))))
        corr = find_correspondences(work, tree)
        current = rmse(work, tgt, corr)
        report.rmse_trace.append(current)
        report.iterations = it

        if config.rmse_abs_tol > 0 and current < config.rmse_abs_tol:
            report.converged = True
            break
        if config.rmse_rel_tol > 0 and previous > 0 and \
                abs(previous - current) / previous < config.rmse_rel_tol:
            report.converged = True
            break
        previous = current

    report.final_transform = total
    report.wall_time_s = time.perf_counter() - t0
    return report
