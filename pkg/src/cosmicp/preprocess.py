"""Dataset preparation: voxel-grid downsampling, random poses, outlier injection.

All randomness goes through numpy's ``PCG64`` bit generator seeded via
``SeedSequence``, so sequences are reproducible across platforms.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .core import EulerPose

UNIFORM_ANGLE_BOUND = 6.28
GAUSSIAN_ANGLE_STD = 6.28317
DEFAULT_TRANSLATION_SCALE = 10.0


class NonPositiveLeaf(ValueError):
    pass


def voxel_keys(cloud, leaf: float) -> np.ndarray:
    """Integer lattice coordinates of each point, anchored at the min corner."""
    pts = np.asarray(cloud, dtype=np.float64)
    return np.floor((pts - pts.min(axis=0)) / leaf).astype(np.int64)


def voxel_grid_filter(cloud, leaf: float, *, return_counts: bool = False):
    """Replace the points of every occupied voxel by their centroid.

    Output points are ordered by ascending ``(ix, iy, iz)`` voxel key.  With
    ``return_counts=True`` the number of members per output point is returned
    as well.
    """
    if not (leaf > 0 and math.isfinite(leaf)):
        raise NonPositiveLeaf(f"leaf size must be positive, got {leaf!r}")
    pts = np.asarray(cloud, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3 or len(pts) == 0:
        raise ValueError("voxel_grid_filter needs a nonempty (N, 3) cloud")

    keys = voxel_keys(pts, leaf)
    # np.unique on rows sorts lexicographically by (ix, iy, iz)
    _, inverse, counts = np.unique(keys, axis=0, return_inverse=True, return_counts=True)
    inverse = inverse.reshape(-1)
    out = np.empty((len(counts), 3))
    for d in range(3):
        out[:, d] = np.bincount(inverse, weights=pts[:, d], minlength=len(counts)) / counts
    # summation noise must not push a centroid outside its members' hull
    lo = np.full_like(out, np.inf)
    hi = np.full_like(out, -np.inf)
    np.minimum.at(lo, inverse, pts)
    np.maximum.at(hi, inverse, pts)
    out = np.clip(out, lo, hi)
    if return_counts:
        return out, counts
    return out


class SamplerMode(str, enum.Enum):
    UNIFORM = "uniform"
    GAUSSIAN = "gaussian"


@dataclass
class TransformSampler:
    """Seeded source of random :class:`EulerPose` values.

    ``uniform`` draws every angle from ``[-angle_scale, angle_scale]`` and
    every translation from ``[-trans_scale, trans_scale]``.  ``gaussian`` draws
    zero-mean normals with standard deviations ``angle_scale`` and
    ``trans_scale``.  A scale of 0 pins that group of components to zero.
    """

    mode: SamplerMode = SamplerMode.GAUSSIAN
    seed: int = 0
    angle_scale: float | None = None
    trans_scale: float = DEFAULT_TRANSLATION_SCALE
    _rng: np.random.Generator = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        self.mode = SamplerMode(self.mode)
        if self.angle_scale is None:
            self.angle_scale = (UNIFORM_ANGLE_BOUND if self.mode is SamplerMode.UNIFORM
                                else GAUSSIAN_ANGLE_STD)
        if self.angle_scale < 0 or self.trans_scale < 0:
            raise ValueError("sampler scales must be nonnegative")
        self._rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(self.seed)))

    def substream(self, index: int) -> "TransformSampler":
        """Independent sampler for run ``index``, derived from ``(seed, index)``."""
        child = TransformSampler(self.mode, self.seed, self.angle_scale, self.trans_scale)
        ss = np.random.SeedSequence(self.seed, spawn_key=(int(index),))
        child._rng = np.random.Generator(np.random.PCG64(ss))
        return child

    def sample(self) -> EulerPose:
        scales = np.array([self.angle_scale] * 3 + [self.trans_scale] * 3)
        if self.mode is SamplerMode.UNIFORM:
            draws = self._rng.uniform(-1.0, 1.0, size=6)
        else:
            draws = self._rng.standard_normal(size=6)
        return EulerPose(*(draws * scales).tolist())


def sample_pose(sampler: TransformSampler) -> EulerPose:
    """Draw the next pose from ``sampler``'s stream."""
    return sampler.sample()


@dataclass(frozen=True)
class OutlierSpec:
    """Fraction of points to corrupt and the spread of their offsets.

    ``offset_std=None`` means half the cloud's bounding-box diagonal.
    """

    fraction: float
    offset_std: float | None = None
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.fraction <= 1.0:
            raise ValueError("outlier fraction must lie in [0, 1]")
        if self.offset_std is not None and not self.offset_std >= 0:
            raise ValueError("offset_std must be nonnegative")


def inject_outliers(cloud, spec: OutlierSpec, rng: np.random.Generator | None = None):
    """Shift ``round(fraction * N)`` distinct random points by Gaussian offsets.

    Returns ``(new_cloud, sorted_indices)``.  Untouched points are copied
    bit-for-bit.  ``rng`` overrides the generator built from ``spec.seed``.
    """
    pts = np.asarray(cloud, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3 or len(pts) == 0:
        raise ValueError("inject_outliers needs a nonempty (N, 3) cloud")
    n = len(pts)
    if rng is None:
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(spec.seed)))
    std = spec.offset_std
    if std is None:
        std = 0.5 * float(np.linalg.norm(pts.max(axis=0) - pts.min(axis=0)))
    count = int(round(spec.fraction * n))
    idx = np.sort(rng.choice(n, size=count, replace=False))
    out = pts.copy()
    if count:
        out[idx] = pts[idx] + rng.normal(0.0, 1.0, size=(count, 3)) * std
    return out, idx
