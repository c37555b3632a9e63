"""Rebuild ``src/cosmicp/data/bunny_view.pcd`` from the Stanford bunny mesh.

The mesh (50000 vertices, VTK reconstruction of the Stanford bunny) ships in
the ``pymeshfix`` source distribution.  We rescale it to the metric size of the
original scan (height 0.1207 m along z of the original frame), orient it with y
up, and keep only the vertices visible from one viewpoint, which gives a
single range-scan-like cloud instead of a closed surface.

Usage::

    pip download --no-deps --no-binary :all: pymeshfix==0.18.1 -d /tmp/pmf
    python tools/make_bunny.py /tmp/pmf/pymeshfix-0.18.1.tar.gz
"""

import sys
import tarfile
from pathlib import Path

import numpy as np

from cosmicp.pcd import write_pcd

MEMBER = "pymeshfix-0.18.1/src/pymeshfix/examples/StanfordBunny.ply"
OUT = Path(__file__).resolve().parents[1] / "src" / "cosmicp" / "data" / "bunny_view.pcd"
# min corner of the original bun_zipper scan, used only to place the cloud
MIN_CORNER = np.array([-0.0947, 0.0330, -0.0619])


def load_mesh(sdist):
    with tarfile.open(sdist) as tar:
        blob = tar.extractfile(MEMBER).read()
    start = blob.index(b"end_header\n") + len(b"end_header\n")
    nv, nf = 50000, 99785
    verts = np.frombuffer(blob[start:start + nv * 12], dtype="<f4").reshape(-1, 3).astype(float)
    face_dtype = np.dtype([("n", "u1"), ("idx", "<i4", (3,))])
    faces = np.frombuffer(blob[start + nv * 12:start + nv * 12 + nf * 13], dtype=face_dtype)
    assert (faces["n"] == 3).all()
    return verts, faces["idx"]


def visible_vertices(verts, faces, pixel=0.0008, depth_tol=0.002, samples_per_face=24):
    """Orthographic z-buffer seen from -z; returns a boolean mask over vertices."""
    rng = np.random.default_rng(0)
    a = rng.random((samples_per_face, 1))
    b = rng.random((samples_per_face, 1))
    flip = a + b > 1
    a[flip] = 1 - a[flip]
    b[flip] = 1 - b[flip]
    A, B, C = verts[faces[:, 0]], verts[faces[:, 1]], verts[faces[:, 2]]
    surf = (A[None] + a[:, :, None] * (B - A)[None] + b[:, :, None] * (C - A)[None]).reshape(-1, 3)
    surf = np.vstack([surf, verts])

    lo = verts[:, :2].min(0)
    ij = np.floor((surf[:, :2] - lo) / pixel).astype(int)
    zbuf = np.full(ij.max(0) + 1, -np.inf)
    np.maximum.at(zbuf, (ij[:, 0], ij[:, 1]), surf[:, 2])
    vij = np.floor((verts[:, :2] - lo) / pixel).astype(int)
    return verts[:, 2] >= zbuf[vij[:, 0], vij[:, 1]] - depth_tol


def main(sdist):
    verts, faces = load_mesh(sdist)
    scale = 0.1207 / np.ptp(verts[:, 1])
    # y up; the sign flips turn the bunny 180 degrees about y (a proper rotation)
    oriented = np.column_stack([-verts[:, 0], verts[:, 2], verts[:, 1]]) * scale
    cloud = oriented[visible_vertices(oriented, faces)]
    cloud = cloud - cloud.min(0) + MIN_CORNER
    OUT.write_bytes(write_pcd(cloud))
    print(f"wrote {len(cloud)} points to {OUT}")


if __name__ == "__main__":
    main(sys.argv[1])
