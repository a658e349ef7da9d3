"""Median-split bounding volume hierarchy over triangles.

Built once per mesh; the node arrays are consumed by the compiled traversal
kernel.  Triangles are re-ordered during the build so leaves reference a
contiguous [start, start + count) range.
"""

from dataclasses import dataclass

import numpy as np

LEAF_SIZE = 4


@dataclass(frozen=True)
class TriangleArrays:
    """Flat triangle + BVH arrays in build order."""

    v0: np.ndarray  # (F, 3)
    e1: np.ndarray  # (F, 3) second vertex - v0
    e2: np.ndarray  # (F, 3) third vertex - v0
    face_normals: np.ndarray  # (F, 3) unit, outward for CCW winding
    bmin: np.ndarray  # (M, 3) node lower bounds
    bmax: np.ndarray  # (M, 3) node upper bounds
    left: np.ndarray  # (M,) child index or -1
    right: np.ndarray  # (M,) child index or -1
    start: np.ndarray  # (M,) leaf triangle range start
    count: np.ndarray  # (M,) leaf triangle count (0 for internal nodes)


def build_triangle_arrays(vertices, faces) -> TriangleArrays:
    vertices = np.ascontiguousarray(vertices, dtype=np.float64)
    faces = np.ascontiguousarray(faces, dtype=np.int64)
    tv = vertices[faces]  # (F, 3, 3)
    tri_min = tv.min(axis=1)
    tri_max = tv.max(axis=1)
    centroids = tv.mean(axis=1)
    nf = faces.shape[0]

    bmin, bmax, left, right, start, count = [], [], [], [], [], []
    order = np.arange(nf)

    def add_node(lo, hi):
        idx = len(bmin)
        sel = order[lo:hi]
        bmin.append(tri_min[sel].min(axis=0))
        bmax.append(tri_max[sel].max(axis=0))
        left.append(-1)
        right.append(-1)
        start.append(0)
        count.append(0)
        if hi - lo <= LEAF_SIZE:
            start[idx] = lo
            count[idx] = hi - lo
            return idx
        span = bmax[idx] - bmin[idx]
        axis = int(np.argmax(span))
        mid = (lo + hi) // 2
        local = np.argsort(centroids[sel, axis], kind="stable")
        order[lo:hi] = sel[local]
        left[idx] = add_node(lo, mid)
        right[idx] = add_node(mid, hi)
        return idx

    add_node(0, nf)

    tv = tv[order]
    v0 = np.ascontiguousarray(tv[:, 0])
    e1 = np.ascontiguousarray(tv[:, 1] - tv[:, 0])
    e2 = np.ascontiguousarray(tv[:, 2] - tv[:, 0])
    fn = np.cross(e1, e2)
    norms = np.linalg.norm(fn, axis=1)
    norms = np.where(norms > 0.0, norms, 1.0)
    fn = np.ascontiguousarray(fn / norms[:, None])
    arrays = TriangleArrays(
        v0=v0,
        e1=e1,
        e2=e2,
        face_normals=fn,
        bmin=np.ascontiguousarray(np.array(bmin)),
        bmax=np.ascontiguousarray(np.array(bmax)),
        left=np.ascontiguousarray(np.array(left, dtype=np.int32)),
        right=np.ascontiguousarray(np.array(right, dtype=np.int32)),
        start=np.ascontiguousarray(np.array(start, dtype=np.int32)),
        count=np.ascontiguousarray(np.array(count, dtype=np.int32)),
    )
    for field in arrays.__dataclass_fields__:
        getattr(arrays, field).setflags(write=False)
    return arrays
