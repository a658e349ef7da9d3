"""Indenter shapes: analytic primitives and triangle meshes with ray support.

Shapes live directly in the fingertip body frame; scene poses are applied at
construction time (see transformed()).  Meshes must be watertight with
outward CCW normals for the inside test used by the ray cast.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import SceneFormatError
from .kernels import bvh, get_backend


@dataclass(frozen=True)
class Sphere:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        if self.radius <= 0:
            raise SceneFormatError("sphere radius must be positive")

    def bounding_sphere(self):
        return self.center, self.radius

    def transformed(self, rotation=None, translation=None) -> "Sphere":
        c = self.center if rotation is None else np.asarray(rotation) @ self.center
        if translation is not None:
            c = c + np.asarray(translation, dtype=float)
        return Sphere(c, self.radius)

    def raycast(self, origins, direction, dmin, backend=None):
        impl = get_backend(backend)
        return impl.raycast_sphere(
            np.ascontiguousarray(origins), np.ascontiguousarray(direction, dtype=float),
            np.ascontiguousarray(self.center), float(self.radius), float(dmin),
        )


@dataclass(frozen=True)
class Cylinder:
    """Finite capped cylinder (a bolt shank, for instance)."""

    center: np.ndarray
    axis: np.ndarray
    radius: float
    half_length: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        axis = np.asarray(self.axis, dtype=float)
        norm = np.linalg.norm(axis)
        if norm == 0:
            raise SceneFormatError("cylinder axis must be nonzero")
        object.__setattr__(self, "axis", axis / norm)
        if self.radius <= 0 or self.half_length <= 0:
            raise SceneFormatError("cylinder radius and half length must be positive")

    def bounding_sphere(self):
        return self.center, math.hypot(self.radius, self.half_length)

    def transformed(self, rotation=None, translation=None) -> "Cylinder":
        c, a = self.center, self.axis
        if rotation is not None:
            rot = np.asarray(rotation)
            c, a = rot @ c, rot @ a
        if translation is not None:
            c = c + np.asarray(translation, dtype=float)
        return Cylinder(c, a, self.radius, self.half_length)

    def raycast(self, origins, direction, dmin, backend=None):
        impl = get_backend(backend)
        return impl.raycast_cylinder(
            np.ascontiguousarray(origins), np.ascontiguousarray(direction, dtype=float),
            np.ascontiguousarray(self.center), np.ascontiguousarray(self.axis),
            float(self.radius), float(self.half_length), float(dmin),
        )


class TriangleMesh:
    """Watertight triangle mesh with a BVH acceleration structure."""

    def __init__(self, vertices, faces):
        vertices = np.ascontiguousarray(vertices, dtype=np.float64)
        faces = np.ascontiguousarray(faces, dtype=np.int64)
        if vertices.ndim != 2 or vertices.shape[1] != 3:
            raise SceneFormatError("mesh vertices must be (V, 3)")
        if faces.ndim != 2 or faces.shape[1] != 3 or faces.size == 0:
            raise SceneFormatError("mesh faces must be a nonempty (F, 3) array")
        if faces.min() < 0 or faces.max() >= len(vertices):
            raise SceneFormatError("mesh face index out of range")
        self.vertices = vertices
        self.faces = faces
        self.vertices.setflags(write=False)
        self.faces.setflags(write=False)

    @cached_property
    def _accel(self) -> bvh.TriangleArrays:
        return bvh.build_triangle_arrays(self.vertices, self.faces)

    def bounding_sphere(self):
        lo = self.vertices.min(axis=0)
        hi = self.vertices.max(axis=0)
        center = 0.5 * (lo + hi)
        radius = float(np.linalg.norm(self.vertices - center, axis=1).max())
        return center, radius

    def transformed(self, rotation=None, translation=None) -> "TriangleMesh":
        v = self.vertices
        if rotation is not None:
            v = v @ np.asarray(rotation).T
        if translation is not None:
            v = v + np.asarray(translation, dtype=float)
        return TriangleMesh(v, self.faces)

    def raycast(self, origins, direction, dmin, backend=None):
        impl = get_backend(backend)
        acc = self._accel
        return impl.raycast_mesh(
            np.ascontiguousarray(origins), np.ascontiguousarray(direction, dtype=float),
            acc.v0, acc.e1, acc.e2, acc.face_normals,
            acc.bmin, acc.bmax, acc.left, acc.right, acc.start, acc.count,
            float(dmin),
        )

    @classmethod
    def load(cls, path) -> "TriangleMesh":
        name = str(path).lower()
        if name.endswith(".stl"):
            return cls.from_stl(path)
        if name.endswith(".obj"):
            return cls.from_obj(path)
        raise SceneFormatError(f"unsupported mesh format: {path}")

    @classmethod
    def from_stl(cls, path) -> "TriangleMesh":
        with open(path, "rb") as fh:
            raw = fh.read()
        if len(raw) < 5:
            raise SceneFormatError(f"not an STL file: {path}")
        if raw[:5] == b"solid" and _looks_like_ascii_stl(raw):
            tris = _parse_ascii_stl(raw.decode("ascii", errors="replace"))
        else:
            tris = _parse_binary_stl(raw)
        return _mesh_from_triangle_soup(tris)

    @classmethod
    def from_obj(cls, path) -> "TriangleMesh":
        vertices, faces = [], []
        with open(path) as fh:
            for lineno, line in enumerate(fh, 1):
                parts = line.split()
                if not parts or parts[0].startswith("#"):
                    continue
                if parts[0] == "v":
                    if len(parts) < 4:
                        raise SceneFormatError(f"bad OBJ vertex at line {lineno}")
                    vertices.append([float(x) for x in parts[1:4]])
                elif parts[0] == "f":
                    idx = [int(p.split("/")[0]) for p in parts[1:]]
                    idx = [i - 1 if i > 0 else len(vertices) + i for i in idx]
                    if len(idx) < 3:
                        raise SceneFormatError(f"bad OBJ face at line {lineno}")
                    for k in range(1, len(idx) - 1):  # fan-triangulate polygons
                        faces.append([idx[0], idx[k], idx[k + 1]])
        if not vertices or not faces:
            raise SceneFormatError(f"OBJ file has no usable geometry: {path}")
        return cls(np.array(vertices), np.array(faces))


IndenterShape = Sphere | Cylinder | TriangleMesh


def _looks_like_ascii_stl(raw: bytes) -> bool:
    # binary STLs may also start with "solid"; require a facet keyword early on
    return b"facet" in raw[:500]


def _parse_ascii_stl(text: str) -> np.ndarray:
    tris, cur = [], []
    for line in text.splitlines():
        parts = line.split()
        if parts[:1] == ["vertex"]:
            if len(parts) != 4:
                raise SceneFormatError("bad ASCII STL vertex line")
            cur.append([float(x) for x in parts[1:4]])
            if len(cur) == 3:
                tris.append(cur)
                cur = []
    if cur or not tris:
        raise SceneFormatError("truncated or empty ASCII STL")
    return np.asarray(tris, dtype=float)


def _parse_binary_stl(raw: bytes) -> np.ndarray:
    if len(raw) < 84:
        raise SceneFormatError("binary STL shorter than its header")
    (count,) = struct.unpack_from("<I", raw, 80)
    if len(raw) < 84 + 50 * count or count == 0:
        raise SceneFormatError("binary STL length does not match triangle count")
    data = np.frombuffer(raw, dtype=np.uint8, count=50 * count, offset=84)
    tris = data.reshape(count, 50)[:, 12:48].copy().view("<f4").reshape(count, 3, 3)
    return tris.astype(np.float64)


def _mesh_from_triangle_soup(tris: np.ndarray) -> TriangleMesh:
    flat = tris.reshape(-1, 3)
    vertices, inverse = np.unique(flat.round(decimals=9), axis=0, return_inverse=True)
    faces = inverse.reshape(-1, 3)
    return TriangleMesh(vertices, faces)


def write_ascii_stl(path, mesh: TriangleMesh, name="skinsim"):
    tv = mesh.vertices[mesh.faces]
    n = np.cross(tv[:, 1] - tv[:, 0], tv[:, 2] - tv[:, 0])
    n /= np.maximum(np.linalg.norm(n, axis=1, keepdims=True), 1e-30)
    with open(path, "w") as fh:
        fh.write(f"solid {name}\n")
        for tri, nrm in zip(tv, n):
            fh.write(f"facet normal {nrm[0]:.9e} {nrm[1]:.9e} {nrm[2]:.9e}\n")
            fh.write("outer loop\n")
            for v in tri:
                fh.write(f"vertex {v[0]:.9e} {v[1]:.9e} {v[2]:.9e}\n")
            fh.write("endloop\nendfacet\n")
        fh.write(f"endsolid {name}\n")


def make_icosphere(radius: float, subdivisions: int = 3, center=(0.0, 0.0, 0.0)) -> TriangleMesh:
    """Subdivided icosahedron projected onto a sphere (20 * 4^k faces)."""
    phi = (1.0 + math.sqrt(5.0)) / 2.0
    verts = np.array(
        [
            [-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
            [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
            [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1],
        ],
        dtype=float,
    )
    verts /= np.linalg.norm(verts, axis=1, keepdims=True)
    faces = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    verts = [tuple(v) for v in verts]
    for _ in range(subdivisions):
        cache: dict = {}
        new_faces = []

        def midpoint(i, j):
            key = (min(i, j), max(i, j))
            if key not in cache:
                m = np.array(verts[i]) + np.array(verts[j])
                m /= np.linalg.norm(m)
                verts.append(tuple(m))
                cache[key] = len(verts) - 1
            return cache[key]

        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new_faces
    v = np.asarray(verts) * radius + np.asarray(center, dtype=float)
    return TriangleMesh(v, np.asarray(faces))


def make_box(extents, center=(0.0, 0.0, 0.0)) -> TriangleMesh:
    """Axis-aligned box given full side lengths."""
    h = 0.5 * np.asarray(extents, dtype=float)
    c = np.asarray(center, dtype=float)
    signs = np.array(
        [[-1, -1, -1], [1, -1, -1], [1, 1, -1], [-1, 1, -1],
         [-1, -1, 1], [1, -1, 1], [1, 1, 1], [-1, 1, 1]],
        dtype=float,
    )
    v = c + signs * h
    faces = np.array(
        [
            [0, 2, 1], [0, 3, 2],  # -z
            [4, 5, 6], [4, 6, 7],  # +z
            [0, 1, 5], [0, 5, 4],  # -y
            [2, 3, 7], [2, 7, 6],  # +y
            [1, 2, 6], [1, 6, 5],  # +x
            [3, 0, 4], [3, 4, 7],  # -x
        ]
    )
    return TriangleMesh(v, faces)


def make_cylinder_mesh(radius, half_length, segments=96,
                       axis=(0.0, 1.0, 0.0), center=(0.0, 0.0, 0.0)) -> TriangleMesh:
    """Tessellated capped cylinder, used mainly as a ray-cast cross-check."""
    axis = np.asarray(axis, dtype=float)
    axis /= np.linalg.norm(axis)
    # orthonormal frame around the axis
    ref = np.array([1.0, 0.0, 0.0]) if abs(axis[0]) < 0.9 else np.array([0.0, 0.0, 1.0])
    e1 = np.cross(axis, ref)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(axis, e1)
    ang = 2.0 * math.pi * np.arange(segments) / segments
    ring = radius * (np.outer(np.cos(ang), e1) + np.outer(np.sin(ang), e2))
    bottom = ring - half_length * axis
    top = ring + half_length * axis
    c = np.asarray(center, dtype=float)
    verts = np.vstack([bottom, top, -half_length * axis, half_length * axis]) + c
    ib, it = 2 * segments, 2 * segments + 1
    faces = []
    for k in range(segments):
        k2 = (k + 1) % segments
        faces += [[k, k2, segments + k], [k2, segments + k2, segments + k]]
        faces += [[ib, k2, k], [it, segments + k, segments + k2]]
    return TriangleMesh(verts, np.asarray(faces))
