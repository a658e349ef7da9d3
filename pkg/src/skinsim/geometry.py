"""Sensor-patch discretization and cylindrical mounting geometry.

The sensing surface is discretized into a regular grid of tactile points
covering the taxel array plus a surrounding margin.  The flat patch is then
wrapped isometrically onto the cylindrical part of the fingertip: the first
flat axis becomes arc length around the cylinder, the second stays parallel
to the cylinder axis.

Conventions used throughout the package:
  * the fingertip body frame has the cylinder axis along +y,
  * the wrap angle theta is measured around +y starting from +z, so a patch
    mounted with beta = 0 faces +z,
  * flat sensor coordinates are (u, v): u along taxel columns, v along rows,
    origin at the patch center.  Mounting alpha rotates (u, v) in-plane
    before wrapping.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ConfigError

# region codes stored in TactilePointSet.taxel_index (taxels are 0..N_T-1)
GAP = -1
MARGIN = -2


def normalize_angle_deg(angle: float) -> float:
    """Wrap an angle in degrees to (-180, 180]."""
    a = (float(angle) + 180.0) % 360.0 - 180.0
    return 180.0 if a == -180.0 else a


def wrap_angle(theta):
    """Wrap an angle in radians to (-pi, pi]."""
    a = np.mod(np.asarray(theta, dtype=float) + np.pi, 2.0 * np.pi) - np.pi
    return np.where(a == -np.pi, np.pi, a)[()]


@dataclass(frozen=True)
class SensorLayout:
    """Flat geometry of the taxel array (all lengths in mm)."""

    taxel_rows: int = 4
    taxel_cols: int = 4
    taxel_size: float = 2.5
    taxel_pitch: float = 4.0
    margin: float = 8.0
    resolution: float = 0.25

    def __post_init__(self):
        if self.taxel_rows < 1 or self.taxel_cols < 1:
            raise ConfigError("taxel grid needs at least one row and one column")
        if self.resolution <= 0:
            raise ConfigError(f"resolution must be positive, got {self.resolution}")
        if self.margin < 0:
            raise ConfigError(f"margin must be non-negative, got {self.margin}")
        if self.taxel_size <= 0 or self.taxel_pitch <= 0:
            raise ConfigError("taxel size and pitch must be positive")
        if self.taxel_size > self.taxel_pitch:
            raise ConfigError("taxel size cannot exceed the taxel pitch")

    @property
    def taxel_count(self) -> int:
        return self.taxel_rows * self.taxel_cols

    @property
    def sensor_extent(self) -> tuple[float, float]:
        """(u, v) side lengths of the taxel array footprint."""
        return (
            (self.taxel_cols - 1) * self.taxel_pitch + self.taxel_size,
            (self.taxel_rows - 1) * self.taxel_pitch + self.taxel_size,
        )

    @property
    def grid_extent(self) -> tuple[float, float]:
        """(u, v) side lengths of the discretized area including margins."""
        eu, ev = self.sensor_extent
        return (eu + 2.0 * self.margin, ev + 2.0 * self.margin)

    @property
    def grid_shape(self) -> tuple[int, int]:
        """Points per side (n_u, n_v).

        Cell-centered convention: the covered extent is divided into
        round(extent / resolution) cells of size resolution x resolution,
        one point at each cell center.  At the defaults this gives
        (14.5 + 16) / 0.25 = 122 points per side, 14884 in total.
        """
        gu, gv = self.grid_extent
        return (int(round(gu / self.resolution)), int(round(gv / self.resolution)))

    @property
    def point_count(self) -> int:
        nu, nv = self.grid_shape
        return nu * nv

    def taxel_centers(self) -> np.ndarray:
        """(N_T, 2) flat-plane centers of the taxel squares, row-major."""
        eu, ev = self.sensor_extent
        u0 = -0.5 * eu + 0.5 * self.taxel_size
        v0 = -0.5 * ev + 0.5 * self.taxel_size
        cols = u0 + self.taxel_pitch * np.arange(self.taxel_cols)
        rows = v0 + self.taxel_pitch * np.arange(self.taxel_rows)
        uu, vv = np.meshgrid(cols, rows)
        return np.column_stack([uu.ravel(), vv.ravel()])


@dataclass(frozen=True)
class MountingParams:
    """Placement of the flat patch on the fingertip cylinder.

    y: offset along the cylinder's longitudinal axis (mm).
    beta: offset angle around the longitudinal axis (deg).
    alpha: in-plane rotation about the patch's surface normal (deg).
    """

    y: float = 23.5
    beta: float = 0.0
    alpha: float = 0.0
    fingertip_radius: float = 10.0

    def __post_init__(self):
        if self.fingertip_radius <= 0:
            raise ConfigError(
                f"fingertip radius must be positive, got {self.fingertip_radius}"
            )
        object.__setattr__(self, "beta", normalize_angle_deg(self.beta))
        object.__setattr__(self, "alpha", normalize_angle_deg(self.alpha))


@dataclass(frozen=True)
class TactilePoint:
    """One tactile point: position/normal in the fingertip frame, area, region."""

    position: np.ndarray
    normal: np.ndarray
    area: float
    region: int  # 0..N_T-1 for taxels, GAP or MARGIN otherwise


def _classify_axis(coord, offset, pitch, size, count):
    """Band index along one flat axis; -1 where outside every taxel band.

    Taxel bands are half-open [start, start + size) so boundary points are
    never assigned twice.
    """
    rel = np.asarray(coord, dtype=float) + offset
    idx = np.floor(rel / pitch).astype(np.int64)
    good = (idx >= 0) & (idx < count)
    inside = good & (rel - idx * pitch < size) & (rel >= 0)
    return np.where(inside, idx, -1), rel


def classify_flat(coords, layout: SensorLayout) -> np.ndarray:
    """Region codes for (N, 2) flat coordinates (taxel index, GAP or MARGIN)."""
    coords = np.atleast_2d(np.asarray(coords, dtype=float))
    eu, ev = layout.sensor_extent
    iu, rel_u = _classify_axis(coords[:, 0], 0.5 * eu, layout.taxel_pitch,
                               layout.taxel_size, layout.taxel_cols)
    iv, rel_v = _classify_axis(coords[:, 1], 0.5 * ev, layout.taxel_pitch,
                               layout.taxel_size, layout.taxel_rows)
    on_sensor = (rel_u >= 0) & (rel_u < eu) & (rel_v >= 0) & (rel_v < ev)
    region = np.full(coords.shape[0], MARGIN, dtype=np.int32)
    region[on_sensor] = GAP
    taxel = (iu >= 0) & (iv >= 0)
    region[taxel] = (iv[taxel] * layout.taxel_cols + iu[taxel]).astype(np.int32)
    return region


def classify_point(flat_coord, layout: SensorLayout) -> int:
    """Region of a single flat coordinate.

    Returns the row-major taxel index (0-based; taxel j of the 1-based
    numbering is index j - 1), or GAP / MARGIN.
    """
    return int(classify_flat(np.asarray(flat_coord, dtype=float)[None, :], layout)[0])


def _wrap_flat(coords, mount: MountingParams):
    """Vectorized wrap of (N, 2) flat coords onto the mounted cylinder."""
    a = math.radians(mount.alpha)
    ca, sa = math.cos(a), math.sin(a)
    u, v = coords[:, 0], coords[:, 1]
    s = ca * u - sa * v  # circumferential arc length
    t = sa * u + ca * v  # axial offset
    theta = math.radians(mount.beta) + s / mount.fingertip_radius
    sin_t, cos_t = np.sin(theta), np.cos(theta)
    r = mount.fingertip_radius
    positions = np.column_stack([r * sin_t, mount.y + t, r * cos_t])
    normals = np.column_stack([sin_t, np.zeros_like(sin_t), cos_t])
    return positions, normals


def wrap_to_cylinder(flat_coord, mount: MountingParams):
    """Map one flat coordinate to (position, outward normal) on the cylinder.

    The wrap is an isometry along the circumference: arc length equals the
    rotated flat coordinate, so in-surface distances are preserved.
    """
    pos, nrm = _wrap_flat(np.asarray(flat_coord, dtype=float)[None, :], mount)
    return pos[0], nrm[0]


def sensor_uv_to_cylinder(mount: MountingParams, uv):
    """Flat sensor coordinate -> (theta_rad, axial_mm) on the cylinder."""
    u, v = float(uv[0]), float(uv[1])
    a = math.radians(mount.alpha)
    s = math.cos(a) * u - math.sin(a) * v
    t = math.sin(a) * u + math.cos(a) * v
    return math.radians(mount.beta) + s / mount.fingertip_radius, mount.y + t


def cylinder_to_sensor_uv(mount: MountingParams, theta: float, axial: float):
    """Inverse of sensor_uv_to_cylinder; angle difference wrapped to (-pi, pi]."""
    s = mount.fingertip_radius * float(wrap_angle(theta - math.radians(mount.beta)))
    t = axial - mount.y
    a = math.radians(mount.alpha)
    return (math.cos(a) * s + math.sin(a) * t, -math.sin(a) * s + math.cos(a) * t)


def project_to_cylinder(point):
    """(theta_rad, axial_mm, radial_mm) cylinder coordinates of a 3D point."""
    p = np.asarray(point, dtype=float)
    return math.atan2(p[0], p[2]), float(p[1]), math.hypot(p[0], p[2])


@dataclass(frozen=True)
class TactilePointSet:
    """Immutable discretized sensor surface in the fingertip body frame."""

    layout: SensorLayout
    mount: MountingParams
    flat_coords: np.ndarray  # (N, 2) mm
    positions: np.ndarray  # (N, 3) mm
    normals: np.ndarray  # (N, 3) unit
    areas: np.ndarray  # (N,) mm^2
    taxel_index: np.ndarray  # (N,) int32; 0..N_T-1, GAP, MARGIN

    @property
    def n_points(self) -> int:
        return self.positions.shape[0]

    @property
    def n_taxels(self) -> int:
        return self.layout.taxel_count

    @cached_property
    def taxel_point_indices(self) -> tuple[np.ndarray, ...]:
        """Per-taxel index arrays into the point set."""
        return tuple(
            np.flatnonzero(self.taxel_index == j) for j in range(self.n_taxels)
        )

    @cached_property
    def taxel_centers_flat(self) -> np.ndarray:
        return self.layout.taxel_centers()

    @cached_property
    def bounding_sphere(self) -> tuple[np.ndarray, float]:
        """(center, radius) enclosing every tactile point."""
        lo = self.positions.min(axis=0)
        hi = self.positions.max(axis=0)
        center = 0.5 * (lo + hi)
        radius = float(np.linalg.norm(self.positions - center, axis=1).max())
        return center, radius

    def point(self, i: int) -> TactilePoint:
        return TactilePoint(
            position=self.positions[i].copy(),
            normal=self.normals[i].copy(),
            area=float(self.areas[i]),
            region=int(self.taxel_index[i]),
        )

    def region_counts(self) -> dict:
        """{'taxel': n, 'gap': n, 'margin': n} point counts."""
        return {
            "taxel": int(np.count_nonzero(self.taxel_index >= 0)),
            "gap": int(np.count_nonzero(self.taxel_index == GAP)),
            "margin": int(np.count_nonzero(self.taxel_index == MARGIN)),
        }


def build_tactile_point_set(
    layout: SensorLayout | None = None, mount: MountingParams | None = None
) -> TactilePointSet:
    """Discretize the sensor patch and wrap it onto the fingertip cylinder.

    The grid is cell-centered: n = round(extent / resolution) cells per side,
    each contributing one point of area resolution^2 at its center.  The
    default layout (0.25 mm resolution, 8 mm margin around the 14.5 mm taxel
    array) yields a 122 x 122 grid of 14884 points.
    """
    layout = layout or SensorLayout()
    mount = mount or MountingParams()
    gu, gv = layout.grid_extent
    if gu > 2.0 * math.pi * mount.fingertip_radius:
        raise ConfigError(
            "patch would self-overlap: circumferential extent "
            f"{gu:.2f} mm exceeds the cylinder circumference"
        )
    nu, nv = layout.grid_shape
    res = layout.resolution
    u = (np.arange(nu) + 0.5) * res - 0.5 * nu * res
    v = (np.arange(nv) + 0.5) * res - 0.5 * nv * res
    uu, vv = np.meshgrid(u, v)  # v-major ordering: index = iv * nu + iu
    flat = np.column_stack([uu.ravel(), vv.ravel()])
    region = classify_flat(flat, layout)
    positions, normals = _wrap_flat(flat, mount)
    areas = np.full(flat.shape[0], res * res)
    for arr in (flat, positions, normals, areas, region):
        arr.setflags(write=False)
    return TactilePointSet(
        layout=layout,
        mount=mount,
        flat_coords=flat,
        positions=positions,
        normals=normals,
        areas=areas,
        taxel_index=region,
    )


# JSON sensor config schema:
# {taxel_rows, taxel_cols, taxel_size_mm, taxel_pitch_mm, margin_mm,
#  resolution_mm, mount: {y_mm, beta_deg, alpha_deg, radius_mm}}
_LAYOUT_KEYS = {
    "taxel_rows": "taxel_rows",
    "taxel_cols": "taxel_cols",
    "taxel_size_mm": "taxel_size",
    "taxel_pitch_mm": "taxel_pitch",
    "margin_mm": "margin",
    "resolution_mm": "resolution",
}
_MOUNT_KEYS = {
    "y_mm": "y",
    "beta_deg": "beta",
    "alpha_deg": "alpha",
    "radius_mm": "fingertip_radius",
}


def sensor_config_from_dict(cfg: dict) -> tuple[SensorLayout, MountingParams]:
    """Build layout and mounting from a config dict; missing keys use defaults."""
    if not isinstance(cfg, dict):
        raise ConfigError("sensor config must be a JSON object")
    unknown = set(cfg) - set(_LAYOUT_KEYS) - {"mount"}
    if unknown:
        raise ConfigError(f"unknown sensor config keys: {sorted(unknown)}")
    layout = SensorLayout(**{dst: cfg[src] for src, dst in _LAYOUT_KEYS.items() if src in cfg})
    mcfg = cfg.get("mount", {})
    unknown = set(mcfg) - set(_MOUNT_KEYS)
    if unknown:
        raise ConfigError(f"unknown mount config keys: {sorted(unknown)}")
    mount = MountingParams(**{dst: mcfg[src] for src, dst in _MOUNT_KEYS.items() if src in mcfg})
    return layout, mount


def sensor_config_to_dict(layout: SensorLayout, mount: MountingParams) -> dict:
    return {
        "taxel_rows": layout.taxel_rows,
        "taxel_cols": layout.taxel_cols,
        "taxel_size_mm": layout.taxel_size,
        "taxel_pitch_mm": layout.taxel_pitch,
        "margin_mm": layout.margin,
        "resolution_mm": layout.resolution,
        "mount": {
            "y_mm": mount.y,
            "beta_deg": mount.beta,
            "alpha_deg": mount.alpha,
            "radius_mm": mount.fingertip_radius,
        },
    }


def load_sensor_config(path) -> tuple[SensorLayout, MountingParams]:
    with open(path) as fh:
        return sensor_config_from_dict(json.load(fh))
