"""Skin response model: force-equilibrium penetration solve and taxel values.

Local stress is linear in the local penetration, sigma = E * eps.  The
maximum penetration is the smallest depth whose integrated stress meets the
reported normal force; taxel values integrate the stress over each taxel
region with both normal-projection factors clamped at zero.

Unit convention: lengths mm, areas mm^2, forces N, elasticity MPa/m.
1 MPa/m * 1 mm * 1 mm^2 = 1e-3 N, applied once as _FORCE_UNIT.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .contact import ContactState, RayCastResult, cast_rays, local_penetrations
from .errors import ConfigError, ForceUnreachableError
from .geometry import TactilePointSet

_FORCE_UNIT = 1e-3  # (MPa/m * mm * mm^2) -> N

LINE_SEARCH_STEP = 0.1  # mm
REFINE_STEP = 0.01  # mm
PENETRATION_CAP = 5.0  # mm


@dataclass(frozen=True)
class SkinParams:
    """Tunable model parameters: elasticity E (MPa/m) and per-taxel scales (1/N)."""

    elasticity: float = 500.0
    scales: np.ndarray = field(default_factory=lambda: np.full(16, 70.0))
    value_range: tuple[float, float] = (0.0, 255.0)

    def __post_init__(self):
        if self.elasticity <= 0:
            raise ConfigError(f"elasticity must be positive, got {self.elasticity}")
        scales = np.asarray(self.scales, dtype=float)
        if np.any(scales <= 0):
            raise ConfigError("all taxel scales must be positive")
        scales.setflags(write=False)
        object.__setattr__(self, "scales", scales)


@dataclass(frozen=True)
class TactileImage:
    """Taxel values in [0, 255], row-major taxel order."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def is_zero(self) -> bool:
        return not np.any(self.values)

    def grid(self, rows: int = 4) -> np.ndarray:
        return self.values.reshape(rows, -1)

    def quantized(self) -> np.ndarray:
        return np.clip(np.rint(self.values), 0, 255).astype(np.uint8)


def zero_image(n_taxels: int = 16) -> TactileImage:
    return TactileImage(np.zeros(n_taxels))


@dataclass(frozen=True)
class PenetrationSolution:
    """Solved maximum penetration and derived per-point penetrations."""

    eps_max: float
    local_eps: np.ndarray
    residual_force: float
    active_area: float  # projected penetrated area (mm^2) at the solution
    target_force: float


class _ForceCurve:
    """Total normal force as a function of eps_max, via sorted prefix sums.

    Only hit points with a positive normal projection contribute:
    F(eps) = unit * E * sum_i max(eps - r_i, 0) * w_i with r_i = d_i - delta
    and w_i = a_i * max(n_t,i . n_c, 0).  Sorting r once makes each
    evaluation O(log n).
    """

    def __init__(self, rc: RayCastResult, points: TactilePointSet, elasticity: float):
        proj = points.normals @ rc.normal
        np.maximum(proj, 0.0, out=proj)
        mask = rc.hit & (proj > 0.0)
        r = rc.rel_depth[mask]
        w = points.areas[mask] * proj[mask]
        order = np.argsort(r, kind="stable")
        r = r[order]
        w = w[order]
        self.r = r
        self.cum_w = np.concatenate([[0.0], np.cumsum(w)])
        self.cum_rw = np.concatenate([[0.0], np.cumsum(r * w)])
        self.scale = _FORCE_UNIT * elasticity

    def force(self, eps: float) -> float:
        k = int(np.searchsorted(self.r, eps, side="left"))
        return self.scale * (eps * self.cum_w[k] - self.cum_rw[k])

    def active_area(self, eps: float) -> float:
        k = int(np.searchsorted(self.r, eps, side="left"))
        return float(self.cum_w[k])


def total_normal_force(rc: RayCastResult, points: TactilePointSet,
                       normal, elasticity: float, eps_max: float) -> float:
    """Integrated normal stress over the whole point set at a given depth.

    Sum over taxel, gap, and margin points alike of
    E * eps_i * a_i * max(n_t,i . n_c, 0).
    """
    eps = local_penetrations(rc, eps_max)
    proj = np.maximum(points.normals @ np.asarray(normal, dtype=float), 0.0)
    return float(_FORCE_UNIT * elasticity * np.sum(eps * points.areas * proj))


def solve_max_penetration(rc: RayCastResult, points: TactilePointSet,
                          contact: ContactState, elasticity: float,
                          step: float = LINE_SEARCH_STEP,
                          refine: float = REFINE_STEP,
                          cap: float = PENETRATION_CAP) -> PenetrationSolution:
    """Smallest penetration on the step grid meeting the contact force,
    narrowed by bisection to the refine resolution.

    The returned eps_max is the upper end of the final bracket, so the force
    residual is non-negative and bounded by E * active_area * refine.
    """
    target = contact.normal_force
    if target < 0:
        raise ValueError("normal force must be non-negative")
    if target == 0.0:
        return PenetrationSolution(0.0, np.zeros(points.n_points), 0.0, 0.0, 0.0)
    curve = _ForceCurve(rc, points, elasticity)
    if curve.force(cap) < target:
        raise ForceUnreachableError(
            f"force {target:g} N not reachable within {cap:g} mm penetration"
        )
    lo = 0.0
    hi = step
    while curve.force(hi) < target:
        lo = hi
        hi = min(hi + step, cap)
    while hi - lo > refine:
        mid = 0.5 * (lo + hi)
        if curve.force(mid) >= target:
            hi = mid
        else:
            lo = mid
    eps_max = hi
    return PenetrationSolution(
        eps_max=eps_max,
        local_eps=local_penetrations(rc, eps_max),
        residual_force=curve.force(eps_max) - target,
        active_area=curve.active_area(eps_max),
        target_force=target,
    )


def unscaled_taxel_forces(rc: RayCastResult, points: TactilePointSet,
                          local_eps: np.ndarray, elasticity: float) -> np.ndarray:
    """Per-taxel force integrals (N) before scaling:
    sum over the taxel's points of
    E * eps_i * a_i * max(n_c . n_t,i, 0) * max(-n_s,i . n_c, 0).
    """
    n_c = rc.normal
    mask = rc.hit & (local_eps > 0.0) & (points.taxel_index >= 0)
    if not mask.any():
        return np.zeros(points.n_taxels)
    proj_t = np.maximum(points.normals[mask] @ n_c, 0.0)
    proj_s = np.maximum(-(rc.hit_normals[mask] @ n_c), 0.0)
    contrib = (
        _FORCE_UNIT * elasticity
        * local_eps[mask] * points.areas[mask] * proj_t * proj_s
    )
    return np.bincount(
        points.taxel_index[mask], weights=contrib, minlength=points.n_taxels
    )


def taxel_values(rc: RayCastResult, points: TactilePointSet,
                 solution: PenetrationSolution, contact: ContactState,
                 params: SkinParams) -> TactileImage:
    """Scaled taxel values clipped to the sensor's output range."""
    if params.scales.shape[0] != points.n_taxels:
        raise ConfigError(
            f"{params.scales.shape[0]} scales for {points.n_taxels} taxels"
        )
    forces = unscaled_taxel_forces(rc, points, solution.local_eps, params.elasticity)
    lo, hi = params.value_range
    return TactileImage(np.clip(params.scales * forces, lo, hi))


def simulate_contact(points: TactilePointSet, contact: ContactState | None,
                     params: SkinParams, shift: float | None = None,
                     backend=None) -> tuple[TactileImage, PenetrationSolution]:
    """Full pipeline: one ray cast, penetration solve, taxel evaluation.

    A missing contact (None) or zero force yields the zero image without
    casting any rays.
    """
    if contact is None or contact.normal_force == 0.0:
        return zero_image(points.n_taxels), PenetrationSolution(
            0.0, np.zeros(points.n_points), 0.0, 0.0, 0.0
        )
    rc = cast_rays(points, contact, shift=shift, backend=backend)
    solution = solve_max_penetration(rc, points, contact, params.elasticity)
    return taxel_values(rc, points, solution, contact, params), solution
