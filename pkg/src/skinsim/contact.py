"""Contact information: ray casting against indenters and an analytic
contact provider that stands in for a rigid-body physics engine.

Ray casting measures, for every tactile point, the distance along the
contact normal to the first front-facing piece of indenter surface.  Hit
parameters are computed from the unshifted points, so penetration profiles
do not depend on the shift constant D beyond its validity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DTooSmallError, NoContactGeometryError, SceneFormatError
from .geometry import TactilePointSet
from .shapes import Cylinder, IndenterShape, Sphere

_Y_AXIS = np.array([0.0, 1.0, 0.0])


@dataclass(frozen=True)
class ContactState:
    """Contact normal (fingertip -> indenter), normal force, and the indenter."""

    normal: np.ndarray
    normal_force: float
    indenter: IndenterShape

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=float)
        norm = np.linalg.norm(n)
        if not math.isclose(norm, 1.0, rel_tol=0, abs_tol=1e-9):
            raise SceneFormatError(f"contact normal must be unit length, |n| = {norm}")
        object.__setattr__(self, "normal", n)
        if self.normal_force < 0:
            raise SceneFormatError("normal force must be non-negative")


@dataclass(frozen=True)
class RayCastResult:
    """Per-point ray-cast distances for one contact.

    distances:  d_i from the shifted starts, +inf where the ray misses.
    hit_normals: indenter surface normal at the hit, zero rows on miss.
    offset:     delta = min over finite distances.
    rel_depth:  d_i - delta evaluated shift-free (identical for any valid D).
    """

    distances: np.ndarray
    hit_normals: np.ndarray
    hit: np.ndarray
    offset: float
    rel_depth: np.ndarray
    shift: float
    normal: np.ndarray


def auto_shift(points: TactilePointSet, shape: IndenterShape) -> float:
    """Shift constant guaranteeing every shifted point exits the indenter.

    Bounding-sphere radius plus the farthest tactile point from that center
    plus 1 mm: shifted points then lie strictly outside the bounding sphere.
    """
    center, radius = shape.bounding_sphere()
    pts_center, pts_radius = points.bounding_sphere
    reach = float(np.linalg.norm(pts_center - center)) + pts_radius
    return radius + reach + 1.0


def cast_rays(points: TactilePointSet, contact: ContactState,
              shift: float | None = None, backend=None) -> RayCastResult:
    """Cast one ray per tactile point along the contact normal.

    Rays start at the points shifted by `shift` against the normal (chosen
    automatically when None); the first front-face hit defines the distance,
    back-face hits are discarded.
    """
    d = shift if shift is not None else auto_shift(points, contact.indenter)
    if d <= 0:
        raise DTooSmallError(f"shift constant must be positive, got {d}")
    t, normals, inside = contact.indenter.raycast(
        points.positions, contact.normal, -d, backend=backend
    )
    n_inside = int(np.count_nonzero(inside))
    if n_inside:
        raise DTooSmallError(
            f"{n_inside} shifted points lie inside the indenter; "
            f"increase the shift constant (D = {d:g} mm)"
        )
    hit = np.isfinite(t)
    if not hit.any():
        raise NoContactGeometryError("no ray hit the indenter")
    tmin = float(t[hit].min())
    rel = np.where(hit, t - tmin, np.inf)
    distances = np.where(hit, t + d, np.inf)
    for arr in (distances, normals, hit, rel):
        arr.setflags(write=False)
    return RayCastResult(
        distances=distances,
        hit_normals=normals,
        hit=hit,
        offset=tmin + d,
        rel_depth=rel,
        shift=d,
        normal=contact.normal,
    )


def local_penetrations(rc: RayCastResult, eps_max: float) -> np.ndarray:
    """eps_i = max(eps_max - (d_i - delta), 0); misses give 0."""
    if eps_max < 0:
        raise ValueError(f"eps_max must be non-negative, got {eps_max}")
    return np.maximum(eps_max - rc.rel_depth, 0.0)


@dataclass(frozen=True)
class FingertipCylinder:
    """Cylindrical fingertip segment: axis along +y through the origin."""

    radius: float = 10.0
    axial_min: float = 0.0
    axial_max: float = 47.0

    def __post_init__(self):
        if self.radius <= 0:
            raise SceneFormatError("fingertip radius must be positive")
        if self.axial_min >= self.axial_max:
            raise SceneFormatError("fingertip axial span is empty")

    def closest_surface_point(self, p) -> np.ndarray:
        """Closest point on the (finite, capped) cylinder surface to an
        exterior point."""
        p = np.asarray(p, dtype=float)
        rho = math.hypot(p[0], p[2])
        y = min(max(p[1], self.axial_min), self.axial_max)
        if self.axial_min <= p[1] <= self.axial_max:
            if rho <= 1e-12:  # on the axis; direction undefined, pick +z
                return np.array([0.0, y, self.radius])
            return np.array([p[0] / rho * self.radius, y, p[2] / rho * self.radius])
        if rho <= self.radius:  # over a cap face
            return np.array([p[0], y, p[2]])
        return np.array([p[0] / rho * self.radius, y, p[2] / rho * self.radius])


@dataclass(frozen=True)
class ContactScene:
    """Fingertip plus one posed indenter."""

    fingertip: FingertipCylinder
    indenter: IndenterShape


def _sphere_contact(scene: ContactScene, sphere: Sphere):
    closest = scene.fingertip.closest_surface_point(sphere.center)
    gap = sphere.center - closest
    dist = float(np.linalg.norm(gap))
    separation = dist - sphere.radius
    if dist <= 1e-12:
        return None, None, math.inf
    normal = gap / dist
    return normal, closest, separation


def _segment_closest_params(p1, d1, l1a, l1b, p2, d2, l2a, l2b):
    """Closest-point parameters (s, t) between two segments given as
    point + unit direction with parameter ranges."""
    r = p1 - p2
    a = float(d1 @ d1)
    e = float(d2 @ d2)
    b = float(d1 @ d2)
    c = float(d1 @ r)
    f = float(d2 @ r)
    denom = a * e - b * b
    if denom > 1e-12:
        s = (b * f - c * e) / denom
    else:
        s = 0.0  # parallel axes: any common perpendicular; anchor at p1
    s = min(max(s, l1a), l1b)
    t = (b * s + f) / e
    t = min(max(t, l2a), l2b)
    s = (b * t - c) / a
    s = min(max(s, l1a), l1b)
    return s, t


def _cylinder_contact(scene: ContactScene, bolt: Cylinder):
    tip = scene.fingertip
    mid = 0.5 * (tip.axial_min + tip.axial_max)
    half = 0.5 * (tip.axial_max - tip.axial_min)
    p1 = np.array([0.0, mid, 0.0])
    s, t = _segment_closest_params(
        p1, _Y_AXIS, -half, half,
        bolt.center, bolt.axis, -bolt.half_length, bolt.half_length,
    )
    q1 = p1 + s * _Y_AXIS
    q2 = bolt.center + t * bolt.axis
    gap = q2 - q1
    dist = float(np.linalg.norm(gap))
    if dist <= 1e-12:
        return None, None, math.inf
    normal = gap / dist
    surface_point = q1 + tip.radius * normal
    separation = dist - tip.radius - bolt.radius
    return normal, surface_point, separation


def contact_with_point(scene: ContactScene, commanded_force: float,
                       tolerance: float = 1e-9):
    """Analytic contact for the scene, plus the fingertip surface point.

    Returns (ContactState, surface_point) or (None, None) when the indenter
    does not touch the fingertip envelope.  The normal points from the
    fingertip into the indenter; the commanded force is passed through.
    """
    if isinstance(scene.indenter, Sphere):
        normal, point, separation = _sphere_contact(scene, scene.indenter)
    elif isinstance(scene.indenter, Cylinder):
        normal, point, separation = _cylinder_contact(scene, scene.indenter)
    else:
        raise SceneFormatError(
            "analytic contact supports sphere and cylinder indenters only"
        )
    if normal is None or separation > tolerance:
        return None, None
    state = ContactState(
        normal=normal, normal_force=float(commanded_force), indenter=scene.indenter
    )
    return state, point


def analytic_contact(scene: ContactScene, commanded_force: float):
    """ContactState for the scene, or None when there is no contact."""
    state, _ = contact_with_point(scene, commanded_force)
    return state


def sphere_press_contact(fingertip_radius: float, theta: float, axial: float,
                         sphere_radius: float, force: float) -> ContactState:
    """Sphere touching the fingertip surface at cylinder coords (theta, axial).

    The sphere center sits on the outward radial at exactly touching
    distance; the solved penetration supplies the actual indentation, so the
    radial placement drops out of the tactile image.
    """
    normal = np.array([math.sin(theta), 0.0, math.cos(theta)])
    center = (fingertip_radius + sphere_radius) * normal
    center[1] = axial
    return ContactState(
        normal=normal,
        normal_force=float(force),
        indenter=Sphere(center, sphere_radius),
    )


def press_sphere_at_uv(points: TactilePointSet, uv, sphere_radius: float,
                       force: float) -> ContactState:
    """Sphere press located by flat sensor coordinates (u, v)."""
    from .geometry import sensor_uv_to_cylinder

    theta, axial = sensor_uv_to_cylinder(points.mount, uv)
    return sphere_press_contact(
        points.mount.fingertip_radius, theta, axial, sphere_radius, force
    )
