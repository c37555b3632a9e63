"""Bundled sample data."""

import os
from importlib import resources
from pathlib import Path

import numpy as np

from .pcd import parse_pcd

BUNNY_LEAF = 0.005
# set to an ASCII PCD (e.g. a converted bun000 scan) to replace the bundled view
BUNNY_ENV = "COSMICP_BUNNY_PCD"


def bunny_path():
    """Path-like handle to the bunny PCD, honouring ``$COSMICP_BUNNY_PCD``."""
    override = os.environ.get(BUNNY_ENV)
    if override:
        return Path(override)
    return resources.files("cosmicp") / "data" / "bunny_view.pcd"


def load_bunny(leaf: float | None = None) -> np.ndarray:
    """The bundled bunny cloud in metres, voxel-filtered when ``leaf`` is given.

    19404 points from one viewpoint of the Stanford bunny, see
    ``tools/make_bunny.py`` for how it is produced.
    """
    _, cloud = parse_pcd(bunny_path().read_bytes())
    if leaf is not None:
        from .preprocess import voxel_grid_filter

        cloud = voxel_grid_filter(cloud, leaf)
    return cloud
