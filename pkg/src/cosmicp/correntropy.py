"""Gaussian correntropy kernel and the per-iteration similarity matrix.

The similarity matrix ``SM`` has one primary entry per source point at
``(i, c(i))``.  When source and target have the same size, the mirrored cell
``(c(i), i)`` receives the same weight.  Writes are applied in ascending ``i``
(primary before mirror), and the last write to a cell wins.  The matrix is
stored as triplets and is never materialized densely by the registration
code.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse

EXACT_RANK_LIMIT = 2000
RANK_RTOL = 1e-10


class CorrespondenceOutOfRange(IndexError):
    pass


def gaussian_kernel(d_sq, sigma: float):
    """``exp(-d_sq / (2 sigma^2))``, unnormalized so that ``kernel(0) == 1``."""
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    d_sq = np.asarray(d_sq, dtype=np.float64)
    if np.any(d_sq < 0):
        raise ValueError("squared distances must be nonnegative")
    out = np.exp(-d_sq / (2.0 * sigma * sigma))
    return out if out.ndim else float(out)


@dataclass(frozen=True, eq=False)
class SimilarityMatrix:
    """Sparse ``n_rows x n_cols`` matrix held as sorted, duplicate-free triplets."""

    rows: np.ndarray
    cols: np.ndarray
    weights: np.ndarray
    shape: tuple[int, int]
    # correspondence vector the matrix was built from
    corr: np.ndarray

    @property
    def nnz(self) -> int:
        return len(self.weights)

    @property
    def is_square(self) -> bool:
        return self.shape[0] == self.shape[1]

    def scaled(self, factor: float) -> "SimilarityMatrix":
        return SimilarityMatrix(self.rows, self.cols, self.weights * factor, self.shape, self.corr)

    def to_sparse(self) -> scipy.sparse.csr_matrix:
        return scipy.sparse.csr_matrix((self.weights, (self.rows, self.cols)), shape=self.shape)

    def to_dense(self) -> np.ndarray:
        """Dense copy, for tests and small diagnostics only."""
        out = np.zeros(self.shape)
        out[self.rows, self.cols] = self.weights
        return out

    def triplets(self) -> list[tuple[int, int, float]]:
        return list(zip(self.rows.tolist(), self.cols.tolist(), self.weights.tolist()))


def _check_corr(corr, n_source: int, n_target: int) -> np.ndarray:
    c = np.asarray(corr)
    if c.shape != (n_source,):
        raise CorrespondenceOutOfRange(
            f"correspondence vector has shape {c.shape}, expected ({n_source},)")
    if not np.issubdtype(c.dtype, np.integer):
        raise CorrespondenceOutOfRange("correspondence indices must be integers")
    c = c.astype(np.int64)
    if n_source and (c.min() < 0 or c.max() >= n_target):
        raise CorrespondenceOutOfRange("correspondence index outside [0, N_t)")
    return c


def similarity_from_weights(corr, weights, n_target: int, *, mirror: bool = True) -> SimilarityMatrix:
    """Assemble ``SM`` from per-source weights ``weights[i]`` for cell ``(i, corr[i])``.

    ``mirror`` only has an effect when the matrix is square.
    """
    w = np.asarray(weights, dtype=np.float64)
    n = len(w)
    c = _check_corr(corr, n, n_target)
    rows = np.arange(n, dtype=np.int64)
    if mirror and n == n_target:
        # write sequence: primary i at 2i, mirror i at 2i + 1
        r = np.empty(2 * n, dtype=np.int64)
        k = np.empty(2 * n, dtype=np.int64)
        r[0::2], r[1::2] = rows, c
        k[0::2], k[1::2] = c, rows
        ww = np.repeat(w, 2)
        key = r * n_target + k
        # last occurrence of each key wins
        _, rev_first = np.unique(key[::-1], return_index=True)
        last = len(key) - 1 - rev_first
        rows_out, cols_out, w_out = r[last], k[last], ww[last]
    else:
        rows_out, cols_out, w_out = rows, c, w
    order = np.lexsort((cols_out, rows_out))
    out = SimilarityMatrix(rows_out[order], cols_out[order], w_out[order], (n, int(n_target)), c)
    for a in (out.rows, out.cols, out.weights, out.corr):
        a.flags.writeable = False
    return out


def build_similarity(source, target, corr, sigma: float, *, mirror: bool = True) -> SimilarityMatrix:
    """Correntropy similarity between each source point and its matched target."""
    src = np.asarray(source, dtype=np.float64)
    tgt = np.asarray(target, dtype=np.float64)
    c = _check_corr(corr, len(src), len(tgt))
    diff = src - tgt[c]
    d_sq = diff[:, 0] * diff[:, 0] + diff[:, 1] * diff[:, 1] + diff[:, 2] * diff[:, 2]
    return similarity_from_weights(c, gaussian_kernel(d_sq, sigma), len(tgt), mirror=mirror)


def rank_proxy(sm: SimilarityMatrix, *, exact: bool | None = None):
    """``(distinct matched targets, exact numeric rank or None)``.

    The exact rank counts singular values of the dense matrix above
    ``1e-10`` times the largest.  It is computed only when both dimensions
    are at most 2000, unless forced with ``exact=True``.
    """
    distinct = int(len(np.unique(sm.corr)))
    if exact is None:
        exact = max(sm.shape) <= EXACT_RANK_LIMIT
    rank = None
    if exact:
        s = np.linalg.svd(sm.to_dense(), compute_uv=False)
        rank = int(np.sum(s > RANK_RTOL * s[0])) if s[0] > 0 else 0
    return distinct, rank
