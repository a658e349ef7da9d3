import json

import numpy as np
import pytest

from skinsim import (
    GAP,
    MARGIN,
    MountingParams,
    SensorLayout,
    build_tactile_point_set,
    classify_point,
    wrap_to_cylinder,
)
from skinsim.errors import ConfigError
from skinsim.geometry import (
    classify_flat,
    cylinder_to_sensor_uv,
    load_sensor_config,
    sensor_config_from_dict,
    sensor_config_to_dict,
    sensor_uv_to_cylinder,
)


def test_default_point_count(default_points):
    # (14.5 + 16) / 0.25 = 122 points per side
    assert default_points.layout.grid_shape == (122, 122)
    assert default_points.n_points == 14884


def test_half_resolution_count():
    layout = SensorLayout(resolution=0.5)
    pts = build_tactile_point_set(layout, MountingParams())
    assert pts.layout.grid_shape == (61, 61)
    assert pts.n_points == 3721


def test_points_per_taxel(default_points):
    # (2.5 / 0.25)^2 = 100 points in each taxel square
    for idx in default_points.taxel_point_indices:
        assert len(idx) == 100


def test_regions_partition(default_points):
    counts = default_points.region_counts()
    assert sum(counts.values()) == default_points.n_points
    region = default_points.taxel_index
    assert set(np.unique(region)) <= set(range(16)) | {GAP, MARGIN}


def test_taxel_area_sum_resolution_independent():
    for res in (0.25, 0.5, 0.125):
        layout = SensorLayout(resolution=res)
        pts = build_tactile_point_set(layout, MountingParams())
        cell = res * res
        for idx in pts.taxel_point_indices:
            area = pts.areas[idx].sum()
            assert abs(area - 6.25) <= cell + 1e-12


def test_classify_taxel_centers():
    layout = SensorLayout()
    centers = layout.taxel_centers()
    # row-major numbering: taxel 1 (index 0) is row 1 / col 1 at (-6, -6)
    np.testing.assert_allclose(centers[0], [-6.0, -6.0])
    for j, c in enumerate(centers):
        assert classify_point(c, layout) == j


def test_classify_gap_and_margin():
    layout = SensorLayout()
    # midway between taxel (r0,c0) and (r0,c1): u = -6 + 2 = -4 (gap strip center)
    assert classify_point((-4.0, -6.0), layout) == GAP
    # 5 mm outside the sensor boundary, inside the 8 mm margin
    assert classify_point((7.25 + 5.0, 0.0), layout) == MARGIN
    assert classify_point((0.0, -7.25 - 5.0), layout) == MARGIN


def test_classify_half_open_boundaries():
    layout = SensorLayout()
    # left edge of taxel (0, 0) belongs to it, right edge does not
    assert classify_point((-7.25, -7.25), layout) == 0
    assert classify_point((-4.75, -6.0), layout) == GAP
    # sensor boundary itself is margin (half-open sensor extent)
    assert classify_point((7.25, 0.0), layout) == MARGIN


def test_wrap_identity_mounting():
    mount = MountingParams(y=23.5, beta=0.0, alpha=0.0, fingertip_radius=10.0)
    pos, nrm = wrap_to_cylinder((0.0, 0.0), mount)
    np.testing.assert_allclose(pos, [0.0, 23.5, 10.0], atol=1e-12)
    np.testing.assert_allclose(nrm, [0.0, 0.0, 1.0], atol=1e-12)


def test_wrap_arc_length_angle():
    r = 10.0
    mount = MountingParams(y=0.0, beta=0.0, alpha=0.0, fingertip_radius=r)
    s = r * np.pi / 6  # 30 degrees of arc
    pos, nrm = wrap_to_cylinder((s, 0.0), mount)
    np.testing.assert_allclose(pos, [r * 0.5, 0.0, r * np.sqrt(3) / 2], atol=1e-12)
    assert np.isclose(np.linalg.norm(nrm), 1.0, atol=1e-12)


def test_wrap_beta_offset():
    r = 10.0
    mount = MountingParams(y=0.0, beta=30.0, alpha=0.0, fingertip_radius=r)
    pos, _ = wrap_to_cylinder((0.0, 0.0), mount)
    theta = np.arctan2(pos[0], pos[2])
    assert np.isclose(np.degrees(theta), 30.0, atol=1e-9)


def test_alpha_90_swaps_flat_axes():
    r = 50.0
    m0 = MountingParams(y=0.0, beta=0.0, alpha=0.0, fingertip_radius=r)
    m90 = MountingParams(y=0.0, beta=0.0, alpha=90.0, fingertip_radius=r)
    p_ref, _ = wrap_to_cylinder((-3.0, 2.0), m0)
    # alpha = 90 deg maps (u, v) -> (s, t) = (-v, u)
    p_rot, _ = wrap_to_cylinder((2.0, 3.0), m90)
    np.testing.assert_allclose(p_rot, p_ref, atol=1e-9)


def test_wrap_isometry_circumferential():
    rng = np.random.default_rng(7)
    r = 10.0
    mount = MountingParams(y=5.0, beta=20.0, alpha=35.0, fingertip_radius=r)
    for _ in range(50):
        a, b = rng.uniform(-10, 10, size=(2, 2))
        pa, _ = wrap_to_cylinder(a, mount)
        pb, _ = wrap_to_cylinder(b, mount)
        # geodesic distance on the cylinder = sqrt((r dtheta)^2 + dy^2)
        ta, tb = np.arctan2(pa[0], pa[2]), np.arctan2(pb[0], pb[2])
        dth = np.arctan2(np.sin(ta - tb), np.cos(ta - tb))
        geo = np.hypot(r * dth, pa[1] - pb[1])
        assert np.isclose(geo, np.linalg.norm(a - b), atol=1e-9)


def test_normals_unit_and_radial(default_points):
    norms = np.linalg.norm(default_points.normals, axis=1)
    np.testing.assert_allclose(norms, 1.0, atol=1e-9)
    # radial: zero axial component, aligned with (x, z) of the position
    assert np.all(np.abs(default_points.normals[:, 1]) < 1e-12)
    radial = default_points.positions[:, [0, 2]]
    radial = radial / np.linalg.norm(radial, axis=1, keepdims=True)
    np.testing.assert_allclose(default_points.normals[:, [0, 2]], radial, atol=1e-9)


def test_uv_cylinder_round_trip():
    mount = MountingParams(y=23.5, beta=-40.0, alpha=25.0, fingertip_radius=9.0)
    rng = np.random.default_rng(3)
    for _ in range(20):
        uv = rng.uniform(-8, 8, size=2)
        theta, axial = sensor_uv_to_cylinder(mount, uv)
        back = cylinder_to_sensor_uv(mount, theta, axial)
        np.testing.assert_allclose(back, uv, atol=1e-9)


def test_classify_flat_matches_single(default_points):
    flat = default_points.flat_coords[::373]
    batch = classify_flat(flat, default_points.layout)
    singles = [classify_point(c, default_points.layout) for c in flat]
    np.testing.assert_array_equal(batch, singles)


def test_invalid_configs_raise():
    with pytest.raises(ConfigError):
        SensorLayout(resolution=0.0)
    with pytest.raises(ConfigError):
        SensorLayout(margin=-1.0)
    with pytest.raises(ConfigError):
        SensorLayout(taxel_size=5.0, taxel_pitch=4.0)
    with pytest.raises(ConfigError):
        MountingParams(fingertip_radius=0.0)
    with pytest.raises(ConfigError):
        # 30.5 mm patch cannot wrap a 4 mm radius cylinder
        build_tactile_point_set(SensorLayout(), MountingParams(fingertip_radius=4.0))


def test_angle_normalization():
    m = MountingParams(beta=350.0, alpha=-190.0)
    assert m.beta == -10.0
    assert m.alpha == 170.0


def test_immutability(default_points):
    with pytest.raises(ValueError):
        default_points.positions[0, 0] = 1.0


def test_sensor_config_round_trip(tmp_path):
    layout = SensorLayout(resolution=0.5, margin=6.0)
    mount = MountingParams(y=20.0, beta=5.0, alpha=-10.0, fingertip_radius=9.5)
    path = tmp_path / "sensor.json"
    path.write_text(json.dumps(sensor_config_to_dict(layout, mount)))
    l2, m2 = load_sensor_config(path)
    assert l2 == layout
    assert m2 == mount


def test_sensor_config_defaults_and_unknown_keys():
    l, m = sensor_config_from_dict({"resolution_mm": 0.5})
    assert l.resolution == 0.5
    assert l.taxel_rows == 4
    assert m == MountingParams()
    with pytest.raises(ConfigError):
        sensor_config_from_dict({"resolution": 0.5})
