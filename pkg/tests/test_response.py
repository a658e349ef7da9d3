import numpy as np
import pytest

from skinsim import (
    ContactState,
    MountingParams,
    SensorLayout,
    SkinParams,
    Sphere,
    build_tactile_point_set,
    cast_rays,
    local_penetrations,
    press_sphere_at_uv,
    simulate_contact,
    solve_max_penetration,
    sphere_press_contact,
    taxel_values,
    total_normal_force,
    unscaled_taxel_forces,
)
from skinsim.errors import ForceUnreachableError
from skinsim.response import _ForceCurve, zero_image
from skinsim.shapes import make_box

Z = np.array([0.0, 0.0, 1.0])


def flat_punch_state(flat_points, footprint=(2.5, 2.5), center_uv=(-6.0, -6.0), force=1.0):
    r = flat_points.mount.fingertip_radius
    box = make_box(
        (footprint[0], footprint[1], 10.0),
        center=(center_uv[0], center_uv[1], r + 5.0),
    )
    return ContactState(Z, force, box)


def brute_sphere_eval(points, sphere, n_c, eps_max, elasticity):
    """Independent evaluation of the force and per-taxel integrals.

    Straightforward ray-sphere quadratic plus direct sums; shares no code
    with the kernels or the response module.
    """
    v = points.positions - sphere.center
    b = v @ n_c
    c0 = np.einsum("ij,ij->i", v, v) - sphere.radius**2
    disc = b * b - c0
    hit = disc >= 0
    t = np.where(hit, -b - np.sqrt(np.where(hit, disc, 0.0)), np.inf)
    delta = t[hit].min()
    eps = np.where(hit, np.maximum(eps_max - (t - delta), 0.0), 0.0)
    proj_t = np.maximum(points.normals @ n_c, 0.0)
    force = 1e-3 * elasticity * np.sum(eps * points.areas * proj_t)
    hit_pts = points.positions + t[:, None] * n_c
    with np.errstate(invalid="ignore"):
        n_s = (hit_pts - sphere.center) / sphere.radius
    proj_s = np.where(hit, np.maximum(-(n_s @ n_c), 0.0), 0.0)
    contrib = 1e-3 * elasticity * eps * points.areas * proj_t * proj_s
    taxel = np.array(
        [contrib[points.taxel_index == j].sum() for j in range(points.n_taxels)]
    )
    return force, taxel


class TestTotalForce:
    def test_zero_penetration_zero_force(self, flat_points):
        state = flat_punch_state(flat_points)
        rc = cast_rays(flat_points, state)
        assert total_normal_force(rc, flat_points, Z, 500.0, 0.0) == 0.0

    def test_flat_punch_closed_form(self, flat_points):
        # E = 500 MPa/m over A = 6.25 mm^2 at 0.5 mm: 500e6 * 5e-4 * 6.25e-6 = 1.5625 N
        state = flat_punch_state(flat_points)
        rc = cast_rays(flat_points, state)
        f = total_normal_force(rc, flat_points, Z, 500.0, 0.5)
        assert np.isclose(f, 1.5625, rtol=1e-3)

    def test_matches_force_curve(self, flat_points, default_points):
        for pts, state in (
            (flat_points, flat_punch_state(flat_points)),
            (default_points, sphere_press_contact(10.0, 0.1, 23.0, 6.0, 2.0)),
        ):
            rc = cast_rays(pts, state)
            curve = _ForceCurve(rc, pts, 400.0)
            for eps in (0.0, 0.05, 0.3, 1.0):
                direct = total_normal_force(rc, pts, state.normal, 400.0, eps)
                assert np.isclose(curve.force(eps), direct, rtol=1e-12, atol=1e-12)


class TestSolver:
    def test_flat_punch_inverse(self, flat_points):
        # F = E * A * 0.3 mm recovers eps_max = 0.3 within the refinement step
        e, area = 500.0, 6.25
        force = 1e-3 * e * area * 0.3
        state = flat_punch_state(flat_points, force=force)
        rc = cast_rays(flat_points, state)
        sol = solve_max_penetration(rc, flat_points, state, e)
        assert abs(sol.eps_max - 0.3) <= 0.011
        assert 0.0 <= sol.residual_force <= 1e-3 * e * sol.active_area * 0.011

    def test_zero_force(self, default_points):
        state = sphere_press_contact(10.0, 0.0, 23.5, 6.0, 0.0)
        rc = cast_rays(default_points, state)
        sol = solve_max_penetration(rc, default_points, state, 500.0)
        assert sol.eps_max == 0.0
        assert not sol.local_eps.any()

    def test_monotone_in_force(self, default_points):
        state = sphere_press_contact(10.0, 0.2, 22.0, 6.0, 1.0)
        rc = cast_rays(default_points, state)
        prev = 0.0
        for f in np.linspace(0.1, 4.0, 12):
            sol = solve_max_penetration(
                rc, default_points, ContactState(state.normal, f, state.indenter), 500.0
            )
            assert sol.eps_max >= prev
            prev = sol.eps_max

    def test_non_increasing_in_elasticity(self, flat_points):
        state = flat_punch_state(flat_points, force=1.0)
        rc = cast_rays(flat_points, state)
        sols = [
            solve_max_penetration(rc, flat_points, state, e).eps_max
            for e in (236.0, 400.0, 500.0, 848.0)
        ]
        assert all(a >= b for a, b in zip(sols, sols[1:]))
        # flat punch: eps ~ 1/E within the refinement quantization
        assert abs(sols[0] * 236.0 - sols[2] * 500.0) <= 0.011 * 500.0

    def test_force_unreachable(self, default_points):
        state = sphere_press_contact(10.0, 0.0, 23.5, 6.0, 500.0)
        rc = cast_rays(default_points, state)
        with pytest.raises(ForceUnreachableError):
            solve_max_penetration(rc, default_points, state, 300.0)

    def test_residual_bound(self, default_points):
        rng = np.random.default_rng(11)
        for _ in range(10):
            force = rng.uniform(0.5, 4.0)
            e = rng.uniform(236.0, 848.0)
            state = sphere_press_contact(
                10.0, rng.uniform(-0.3, 0.3), rng.uniform(20, 27), 6.0, force
            )
            rc = cast_rays(default_points, state)
            sol = solve_max_penetration(rc, default_points, state, e)
            assert 0.0 <= sol.residual_force <= 1e-3 * e * sol.active_area * 0.01 + 1e-12


class TestTaxelValues:
    def test_no_contact_zero_image(self, default_points, skin_params):
        img, sol = simulate_contact(default_points, None, skin_params)
        assert img.is_zero
        assert sol.eps_max == 0.0

    def test_covered_taxel_value(self, flat_points):
        # S * E * eps * A with the 1.5625 N example: 70 * 1.5625 = 109.375
        params = SkinParams(elasticity=500.0, scales=np.full(16, 70.0))
        state = flat_punch_state(flat_points, force=1.5625)
        img, sol = simulate_contact(flat_points, state, params)
        expected = 70.0 * (1e-3 * 500.0 * sol.eps_max * 6.25)
        assert np.isclose(img.values[0], expected, rtol=1e-2)
        # the closed-form anchor sits exactly on a line-search grid point;
        # allow the 0.01 mm refinement quantization on top of 1%
        quant = 70.0 * 1e-3 * 500.0 * 6.25 * 0.011
        assert abs(img.values[0] - 109.375) <= 0.01 * 109.375 + quant
        assert np.all(img.values[1:] == 0.0)

    def test_four_taxel_symmetry(self, default_points, skin_params):
        state = sphere_press_contact(10.0, 0.0, 23.5, 6.0, 1.5)
        img, _ = simulate_contact(default_points, state, skin_params)
        grid = img.grid()
        center = np.array([grid[1, 1], grid[1, 2], grid[2, 1], grid[2, 2]])
        assert center.min() > 0
        assert (center.max() - center.min()) / center.max() < 1e-6

    def test_scale_linearity(self, default_points):
        state = sphere_press_contact(10.0, 0.0, 23.5, 6.0, 1.5)
        img1, sol = simulate_contact(
            default_points, state, SkinParams(500.0, np.full(16, 30.0))
        )
        img3, _ = simulate_contact(
            default_points, state, SkinParams(500.0, np.full(16, 90.0))
        )
        assert img3.values.max() < 255.0  # below the clip
        np.testing.assert_allclose(img3.values, 3.0 * img1.values, rtol=1e-12)

    def test_refinement_oracle(self, default_points, skin_params):
        """Default grid vs a 4x finer grid evaluated independently."""
        state = sphere_press_contact(10.0, 0.05, 23.2, 6.0, 1.5)
        img, sol = simulate_contact(default_points, state, skin_params)
        rc = cast_rays(default_points, state)
        f_coarse = total_normal_force(
            rc, default_points, state.normal, 500.0, sol.eps_max
        )
        fine = build_tactile_point_set(
            SensorLayout(resolution=0.0625), MountingParams()
        )
        f_fine, taxel_fine = brute_sphere_eval(
            fine, state.indenter, state.normal, sol.eps_max, 500.0
        )
        assert np.isclose(f_coarse, f_fine, rtol=0.02)
        expected = np.clip(70.0 * taxel_fine, 0, 255)
        active = img.values > 0.02 * img.values.max()
        np.testing.assert_allclose(
            img.values[active], expected[active], rtol=0.02
        )

    def test_clip_at_255(self, default_points):
        state = sphere_press_contact(10.0, 0.0, 23.5, 6.0, 4.0)
        params = SkinParams(elasticity=500.0, scales=np.full(16, 5000.0))
        img, _ = simulate_contact(default_points, state, params)
        assert img.values.max() == 255.0
        assert np.all(img.values <= 255.0)
        assert np.all(img.values >= 0.0)

    def test_quantized(self):
        img = zero_image()
        assert img.quantized().dtype == np.uint8


class TestPipeline:
    def test_shift_invariance_bit_identical(self, default_points, skin_params):
        state = sphere_press_contact(10.0, 0.13, 24.0, 6.0, 2.2)
        img1, _ = simulate_contact(default_points, state, skin_params, shift=40.0)
        img2, _ = simulate_contact(default_points, state, skin_params, shift=80.0)
        assert np.array_equal(img1.values, img2.values)

    def test_multi_taxel_response(self, default_points, skin_params):
        # contact area spanning several taxels: press between taxel centers
        state = press_sphere_at_uv(default_points, (0.0, 0.0), 6.0, 1.5)
        img, _ = simulate_contact(default_points, state, skin_params)
        assert np.count_nonzero(img.values) == 4
        # press offset from a taxel center: dominant taxel, smaller neighbor
        state = press_sphere_at_uv(default_points, (-0.8, -2.0), 6.0, 1.5)
        img, _ = simulate_contact(default_points, state, skin_params)
        assert np.argmax(img.values) == 5
        neighbor = img.grid()[1, 2]
        assert 0 < neighbor < img.values[5]

    def test_centroid_tracks_sweep(self, default_points, skin_params):
        """Sweep oracle: the image centroid follows a +u sweep monotonically
        and advances by exactly one pitch over a 4 mm period."""
        centers = default_points.taxel_centers_flat
        us = np.arange(-2.0, 2.0 + 1e-9, 0.5)
        track = []
        for u in us:
            state = press_sphere_at_uv(default_points, (u, 0.3), 6.0, 1.5)
            img, _ = simulate_contact(default_points, state, skin_params)
            w = img.values / img.values.sum()
            track.append(w @ centers)
        track = np.asarray(track)
        # narrow footprints plateau near taxel centers: weak monotonicity
        assert np.all(np.diff(track[:, 0]) >= 0)
        assert track[-1, 0] > track[0, 0]
        # periodicity: one full 4 mm pitch of travel moves the centroid 4 mm
        assert np.isclose(track[-1, 0] - track[0, 0], 4.0, atol=0.05)
        assert np.all(np.abs(track[:, 1] - track[0, 1]) < 0.3)

    def test_pitch_translation_equivariance(self, default_points, skin_params):
        # shifting the press by one 4 mm pitch axially shifts taxel rows
        s0 = press_sphere_at_uv(default_points, (-0.7, -2.0), 6.0, 1.5)
        s1 = press_sphere_at_uv(default_points, (-0.7, 2.0), 6.0, 1.5)
        g0 = simulate_contact(default_points, s0, skin_params)[0].grid()
        g1 = simulate_contact(default_points, s1, skin_params)[0].grid()
        np.testing.assert_allclose(g1[1:, :], g0[:-1, :], rtol=1e-6, atol=1e-9)

    def test_unscaled_forces_sum_below_total(self, default_points):
        state = sphere_press_contact(10.0, 0.0, 23.5, 6.0, 1.5)
        rc = cast_rays(default_points, state)
        sol = solve_max_penetration(rc, default_points, state, 500.0)
        u = unscaled_taxel_forces(rc, default_points, sol.local_eps, 500.0)
        # taxel integrals carry the extra surface-normal projection and
        # exclude gaps/margins, so they cannot exceed the equilibrium force
        assert 0 < u.sum() < state.normal_force + sol.residual_force
