import numpy as np
import pytest

from skinsim import (
    MountingParams,
    SensorLayout,
    SkinParams,
    build_tactile_point_set,
)


@pytest.fixture(scope="session")
def default_points():
    return build_tactile_point_set()


@pytest.fixture(scope="session")
def flat_points():
    """Effectively flat sensor: huge fingertip radius, patch centered at y=0.

    Curvature corrections are ~1e-11 relative, so closed-form flat-punch
    expressions hold to well below test tolerances.
    """
    return build_tactile_point_set(
        SensorLayout(), MountingParams(y=0.0, fingertip_radius=1.0e6)
    )


@pytest.fixture(scope="session")
def skin_params():
    return SkinParams(elasticity=500.0, scales=np.full(16, 70.0))
