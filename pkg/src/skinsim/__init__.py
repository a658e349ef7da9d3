"""Soft-contact tactile skin simulation and calibration toolkit."""

from .contact import (
    ContactScene,
    ContactState,
    FingertipCylinder,
    RayCastResult,
    analytic_contact,
    cast_rays,
    contact_with_point,
    local_penetrations,
    press_sphere_at_uv,
    sphere_press_contact,
)
from .geometry import (
    GAP,
    MARGIN,
    MountingParams,
    SensorLayout,
    TactilePointSet,
    build_tactile_point_set,
    classify_point,
    load_sensor_config,
    wrap_to_cylinder,
)
from .response import (
    PenetrationSolution,
    SkinParams,
    TactileImage,
    simulate_contact,
    solve_max_penetration,
    taxel_values,
    total_normal_force,
    unscaled_taxel_forces,
)
from .shapes import Cylinder, Sphere, TriangleMesh

__version__ = "0.1.0"

__all__ = [
    "GAP",
    "MARGIN",
    "ContactScene",
    "ContactState",
    "Cylinder",
    "FingertipCylinder",
    "MountingParams",
    "PenetrationSolution",
    "RayCastResult",
    "SensorLayout",
    "SkinParams",
    "Sphere",
    "TactileImage",
    "TactilePointSet",
    "TriangleMesh",
    "analytic_contact",
    "build_tactile_point_set",
    "cast_rays",
    "classify_point",
    "contact_with_point",
    "load_sensor_config",
    "local_penetrations",
    "press_sphere_at_uv",
    "simulate_contact",
    "solve_max_penetration",
    "sphere_press_contact",
    "taxel_values",
    "total_normal_force",
    "unscaled_taxel_forces",
    "wrap_to_cylinder",
]
