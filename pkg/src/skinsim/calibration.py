"""Two-stage calibration of the skin model against measured tactile images.

Macro variables (mounting y/beta/alpha and elasticity E) are searched on a
grid.  Inside each cell, per-sample contact-position estimates (micro
variables) are found by exhaustive search over a small slack window using
normalized images, after which the per-taxel scales have a closed-form least
squares solution.  Grid cells whose image loss stays below a threshold form
a valley; the valley's bounding box yields the calibrated intervals used for
domain randomization.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .contact import cast_rays, sphere_press_contact
from .errors import (
    ForceUnreachableError,
    InvalidSampleError,
    NoContactGeometryError,
    NoOverlapError,
    NoValleyError,
    SceneFormatError,
)
from .geometry import (
    MountingParams,
    SensorLayout,
    build_tactile_point_set,
    project_to_cylinder,
    sensor_uv_to_cylinder,
)
from .kernels import get_backend
from .response import (
    LINE_SEARCH_STEP,
    PENETRATION_CAP,
    REFINE_STEP,
    solve_max_penetration,
    unscaled_taxel_forces,
)

LOSS_THRESHOLD = 25.0  # valley criterion: RMSE of 5 per taxel


@dataclass(frozen=True)
class CalibrationSample:
    """One pressed contact: measured position (mm), force (N), image (16,)."""

    contact_position: np.ndarray
    force: float
    image: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.contact_position, dtype=float)
        img = np.asarray(self.image, dtype=float)
        if p.shape != (3,):
            raise InvalidSampleError("contact position must be a 3-vector")
        if img.ndim != 1:
            raise InvalidSampleError("image must be a flat taxel vector")
        object.__setattr__(self, "contact_position", p)
        object.__setattr__(self, "image", img)


@dataclass(frozen=True)
class MacroParams:
    """One macro grid cell: mounting offsets plus elasticity."""

    y: float
    beta: float
    alpha: float
    elasticity: float

    def as_tuple(self):
        return (self.y, self.beta, self.alpha, self.elasticity)


@dataclass(frozen=True)
class MicroEstimate:
    """Estimated contact position for one sample at fixed macro variables."""

    offset: np.ndarray  # (du, dv) on the sensor surface, mm
    estimated_position: np.ndarray  # 3-vector, mm
    loss: float  # normalized-image squared error at the optimum


@dataclass(frozen=True)
class CalibrationConfig:
    """Scene constants and search settings shared by all stages."""

    fingertip_radius: float = 10.0
    indenter_radius: float = 6.0
    slack: float = 2.0  # micro search half-window, mm
    micro_step: float = 0.25  # micro grid resolution, mm
    layout: SensorLayout = field(default_factory=SensorLayout)
    activity_threshold: float = 10.0  # taxel counts as active above this value
    min_active_taxels: int = 2

    def micro_offsets(self) -> np.ndarray:
        """Slack-window offsets ordered by magnitude, then lexicographically,
        so the scan's first strict minimum implements the tie-break rule."""
        steps = np.arange(-self.slack, self.slack + 1e-9, self.micro_step)
        grid = np.array(list(product(steps, steps)))
        order = np.lexsort((grid[:, 1], grid[:, 0], np.einsum("ij,ij->i", grid, grid)))
        return grid[order]


@dataclass(frozen=True)
class GridSpec:
    """Macro grid: explicit value lists for each parameter."""

    y_values: np.ndarray
    beta_values: np.ndarray
    alpha_values: np.ndarray
    elasticity_values: np.ndarray

    @classmethod
    def default(cls, axial_min=18.0, axial_max=29.0) -> "GridSpec":
        """Documented defaults: y over the mounting span at 0.5 mm, beta at
        2.5 deg, alpha at 5 deg, E log-spaced 100-1600 MPa/m (12 points)."""
        return cls(
            y_values=np.arange(axial_min, axial_max + 1e-9, 0.5),
            beta_values=np.arange(-12.0, 12.0 + 1e-9, 2.5),
            alpha_values=np.arange(-15.0, 15.0 + 1e-9, 5.0),
            elasticity_values=np.geomspace(100.0, 1600.0, 12),
        )

    def cells(self) -> list[MacroParams]:
        return [
            MacroParams(float(y), float(b), float(a), float(e))
            for y, b, a, e in product(
                self.y_values, self.beta_values, self.alpha_values,
                self.elasticity_values,
            )
        ]


@dataclass(frozen=True)
class CellResult:
    macro: MacroParams
    loss: float
    scales: np.ndarray  # (N_T,), NaN when unsolvable
    micro: tuple  # MicroEstimate or None per valid sample
    n_failed: int  # samples with no overlap anywhere in the slack window


@dataclass(frozen=True)
class CalibrationResult:
    cells: tuple
    intervals: dict
    best: CellResult
    valid_count: int
    threshold: float


def is_valid_sample(sample: CalibrationSample, config: CalibrationConfig) -> bool:
    """Validity rule: positive force and at least two active taxels."""
    active = int(np.count_nonzero(sample.image > config.activity_threshold))
    return sample.force > 0 and active >= config.min_active_taxels


def valid_samples(dataset, config: CalibrationConfig):
    if not dataset:
        raise InvalidSampleError("empty calibration dataset")
    return [s for s in dataset if is_valid_sample(s, config)]


def normalize_image(values) -> np.ndarray:
    """L1 normalization: taxel ratios carry the position information."""
    v = np.asarray(values, dtype=float)
    total = v.sum()
    if total == 0:
        raise InvalidSampleError("cannot normalize an all-zero image")
    return v / total


def mse_loss(dataset, simulated_images) -> float:
    """Mean squared image error: sum_k ||T_sim,k - T_k||^2 / (16 N_V)."""
    if not dataset:
        raise InvalidSampleError("empty calibration dataset")
    if len(simulated_images) != len(dataset):
        raise InvalidSampleError("one simulated image per sample required")
    n_taxels = dataset[0].image.shape[0]
    total = 0.0
    for sample, sim in zip(dataset, simulated_images):
        diff = np.asarray(sim, dtype=float) - sample.image
        total += float(diff @ diff)
    return total / (n_taxels * len(dataset))


def _mounted_points(macro: MacroParams, config: CalibrationConfig):
    mount = MountingParams(
        y=macro.y, beta=macro.beta, alpha=macro.alpha,
        fingertip_radius=config.fingertip_radius,
    )
    return build_tactile_point_set(config.layout, mount)


def _surface_coords(position, config: CalibrationConfig):
    """Project a measured contact position radially onto the cylinder."""
    theta, axial, _ = project_to_cylinder(position)
    return theta, axial


def _offset_coords(theta, axial, offset_uv, macro, config):
    """Apply a sensor-frame (du, dv) slack offset on the cylinder surface."""
    a = math.radians(macro.alpha)
    ds = math.cos(a) * offset_uv[0] - math.sin(a) * offset_uv[1]
    dt = math.sin(a) * offset_uv[0] + math.cos(a) * offset_uv[1]
    return theta + ds / config.fingertip_radius, axial + dt


def simulate_unscaled(points, theta, axial, force, elasticity,
                      config: CalibrationConfig, backend=None):
    """Unscaled per-taxel forces for a sphere press, or None when the press
    cannot produce a response (no rays hit / force unreachable).

    Uses the fused compiled kernel when it is built; the composed
    cast/solve/sum path otherwise (a parity test keeps the two aligned).
    """
    contact = sphere_press_contact(
        config.fingertip_radius, theta, axial, config.indenter_radius, force
    )
    impl = get_backend(backend)
    if hasattr(impl, "sphere_press_response"):
        u, _, status = impl.sphere_press_response(
            points.positions, points.normals, points.areas, points.taxel_index,
            points.n_taxels, contact.indenter.center, contact.normal,
            contact.indenter.radius, contact.normal_force, elasticity,
            LINE_SEARCH_STEP, REFINE_STEP, PENETRATION_CAP,
        )
        return None if status else u
    try:
        rc = cast_rays(points, contact, backend=backend)
        sol = solve_max_penetration(rc, points, contact, elasticity)
    except (NoContactGeometryError, ForceUnreachableError):
        return None
    return unscaled_taxel_forces(rc, points, sol.local_eps, elasticity)


def surface_point(theta, axial, radius) -> np.ndarray:
    return np.array(
        [radius * math.sin(theta), axial, radius * math.cos(theta)]
    )


def _micro_search(sample, macro, config, points, offsets):
    """Shared slack-window scan; returns (MicroEstimate, U) or (None, None)."""
    theta0, axial0 = _surface_coords(sample.contact_position, config)
    target = normalize_image(sample.image)
    best = None
    for offset in offsets:
        theta, axial = _offset_coords(theta0, axial0, offset, macro, config)
        u = simulate_unscaled(
            points, theta, axial, sample.force, macro.elasticity, config
        )
        if u is None or not u.any():
            continue
        diff = u / u.sum() - target
        loss = float(diff @ diff)
        if best is None or loss < best[0]:
            best = (loss, offset, theta, axial, u)
    if best is None:
        return None, None
    loss, offset, theta, axial, u = best
    estimate = MicroEstimate(
        offset=offset.copy(),
        estimated_position=surface_point(theta, axial, config.fingertip_radius),
        loss=loss,
    )
    return estimate, u


def optimize_micro(sample: CalibrationSample, macro: MacroParams,
                   config: CalibrationConfig, points=None) -> MicroEstimate:
    """Exhaustive slack-window search minimizing the normalized-image error.

    Both the simulated and the measured image are L1-normalized; ties are
    broken toward the smallest offset magnitude, then lexicographically
    (guaranteed by the pre-sorted offset order).
    """
    if points is None:
        points = _mounted_points(macro, config)
    estimate, _ = _micro_search(sample, macro, config, points, config.micro_offsets())
    if estimate is None:
        raise NoOverlapError(
            "no slack offset produces a tactile response for this sample"
        )
    return estimate


def solve_scales(samples, unscaled_images) -> np.ndarray:
    """Per-taxel least squares: S_j = sum_k T_kj U_kj / sum_k U_kj^2.

    Taxels never excited fall back to the mean of the solvable ones.
    """
    t = np.array([s.image for s in samples], dtype=float)
    u = np.asarray(unscaled_images, dtype=float)
    denom = np.einsum("kj,kj->j", u, u)
    solvable = denom > 0
    if not solvable.any():
        raise InvalidSampleError("no taxel is excited in any simulated image")
    scales = np.zeros(u.shape[1])
    scales[solvable] = np.einsum("kj,kj->j", t, u)[solvable] / denom[solvable]
    scales[~solvable] = scales[solvable].mean()
    return scales


def evaluate_cell(dataset, macro: MacroParams,
                  config: CalibrationConfig) -> CellResult:
    """Full inner loop for one macro cell: micro search per sample, analytic
    scales, then the absolute-image loss.

    Samples without any overlap contribute a zero simulated image (their
    full measured energy enters the loss), keeping cells comparable.
    """
    points = _mounted_points(macro, config)
    offsets = config.micro_offsets()
    n_taxels = points.n_taxels
    sims, micros, n_failed = [], [], 0
    for sample in dataset:
        estimate, u = _micro_search(sample, macro, config, points, offsets)
        if estimate is None:
            n_failed += 1
            micros.append(None)
            sims.append(np.zeros(n_taxels))
        else:
            micros.append(estimate)
            sims.append(u)
    sims = np.asarray(sims)
    try:
        scales = solve_scales(dataset, sims)
    except InvalidSampleError:
        scales = np.full(n_taxels, np.nan)
    if np.isnan(scales).any():
        images = [np.zeros(n_taxels)] * len(dataset)
    else:
        images = [np.clip(scales * u, 0.0, 255.0) for u in sims]
    loss = mse_loss(dataset, images)
    return CellResult(
        macro=macro, loss=loss, scales=scales, micro=tuple(micros),
        n_failed=n_failed,
    )


def _cell_task(args):
    positions, forces, images, macro_tuple, config = args
    dataset = [
        CalibrationSample(p, float(f), img)
        for p, f, img in zip(positions, forces, images)
    ]
    return evaluate_cell(dataset, MacroParams(*macro_tuple), config)


def extract_intervals(cells, threshold: float) -> dict:
    """Bounding box of all valley cells (loss <= threshold) per parameter;
    the scale interval spans all per-taxel scales of those cells."""
    valley = [c for c in cells if c.loss <= threshold]
    if not valley:
        return {}
    ys = [c.macro.y for c in valley]
    betas = [c.macro.beta for c in valley]
    alphas = [c.macro.alpha for c in valley]
    es = [c.macro.elasticity for c in valley]
    scales = np.concatenate([c.scales for c in valley if not np.isnan(c.scales).any()])
    intervals = {
        "y_mm": [min(ys), max(ys)],
        "beta_deg": [min(betas), max(betas)],
        "alpha_deg": [min(alphas), max(alphas)],
        "elasticity_mpa_per_m": [min(es), max(es)],
    }
    if scales.size:
        intervals["scale_per_n"] = [float(scales.min()), float(scales.max())]
    return intervals


def grid_search_macro(dataset, grid: GridSpec, config: CalibrationConfig,
                      threshold: float = LOSS_THRESHOLD,
                      n_jobs: int = 1) -> CalibrationResult:
    """Evaluate every macro cell and extract the loss-valley intervals.

    Cells are independent work items; with n_jobs > 1 they are evaluated in
    worker processes and merged in grid order, so the result does not depend
    on scheduling.
    """
    samples = valid_samples(dataset, config)
    if not samples:
        raise InvalidSampleError("no valid samples (need >= 2 active taxels)")
    macros = grid.cells()
    if n_jobs > 1:
        positions = np.array([s.contact_position for s in samples])
        forces = np.array([s.force for s in samples])
        images = np.array([s.image for s in samples])
        tasks = [
            (positions, forces, images, m.as_tuple(), config) for m in macros
        ]
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            cells = list(pool.map(_cell_task, tasks, chunksize=4))
    else:
        cells = [evaluate_cell(samples, m, config) for m in macros]
    best = min(cells, key=lambda c: c.loss)
    intervals = extract_intervals(cells, threshold)
    if not intervals:
        raise NoValleyError(
            f"no grid cell reaches loss <= {threshold:g} "
            f"(best {best.loss:.2f} at {best.macro})",
            best_cell=best,
        )
    return CalibrationResult(
        cells=tuple(cells),
        intervals=intervals,
        best=best,
        valid_count=len(samples),
        threshold=threshold,
    )


# ---------------------------------------------------------------------------
# dataset file format and result export

def dataset_from_json(data) -> list:
    if not isinstance(data, list):
        raise SceneFormatError("dataset must be a JSON array of samples")
    samples = []
    for k, entry in enumerate(data):
        try:
            samples.append(
                CalibrationSample(
                    contact_position=np.asarray(entry["contact_position_mm"], float),
                    force=float(entry["force_N"]),
                    image=np.asarray(entry["image"], dtype=float),
                )
            )
        except (KeyError, TypeError, ValueError, InvalidSampleError) as exc:
            raise SceneFormatError(f"bad dataset entry {k}: {exc}") from exc
    return samples


def load_dataset(path) -> list:
    with open(path) as fh:
        return dataset_from_json(json.load(fh))


def dataset_to_json(samples) -> list:
    return [
        {
            "contact_position_mm": list(map(float, s.contact_position)),
            "force_N": float(s.force),
            "image": list(map(float, s.image)),
        }
        for s in samples
    ]


def result_to_dict(result: CalibrationResult) -> dict:
    return {
        "intervals": result.intervals,
        "best_cell": {
            "y_mm": result.best.macro.y,
            "beta_deg": result.best.macro.beta,
            "alpha_deg": result.best.macro.alpha,
            "elasticity_mpa_per_m": result.best.macro.elasticity,
            "loss": result.best.loss,
            "scales_per_n": [float(s) for s in result.best.scales],
            "failed_samples": result.best.n_failed,
        },
        "valid_count": result.valid_count,
        "threshold": result.threshold,
    }


def write_loss_grid_csv(path, cells):
    with open(path, "w") as fh:
        fh.write("y_mm,beta_deg,alpha_deg,elasticity_mpa_per_m,loss,failed\n")
        for c in cells:
            fh.write(
                f"{c.macro.y!r},{c.macro.beta!r},{c.macro.alpha!r},"
                f"{c.macro.elasticity!r},{c.loss!r},{c.n_failed}\n"
            )


# ---------------------------------------------------------------------------
# synthetic data generation (testing and demonstration)

def synthesize_dataset(macro: MacroParams, scales, config: CalibrationConfig,
                       n_samples: int = 24, rng=None,
                       force_range=(1.0, 4.0), area_half_width: float = 6.0,
                       position_corruption: float = 1.5,
                       taxel_noise: bool = True,
                       min_taxel_value: float = 20.0):
    """Generate a calibration dataset from known ground truth.

    Contact positions are drawn over the sensor area; the recorded (measured)
    positions carry a bounded on-surface corruption so the micro stage has
    something to recover.  Taxel noise follows the domain-randomization
    bands: per-taxel offsets U(-5, 5), noise ranges U(0, 5); like a real
    acquisition, the sensor is tared first (the noise floor estimated from
    no-contact frames is subtracted from every image).

    Placements whose clean image lacks a solid third taxel are rejected
    (min_taxel_value on the three strongest): under L1 normalization a pure
    two-taxel pattern only determines the position component along the taxel
    pair, so bounded 2-D recovery needs three-taxel patterns.
    """
    rng = np.random.default_rng(rng)
    scales = np.asarray(scales, dtype=float)
    points = _mounted_points(macro, config)
    if taxel_noise:
        offsets = rng.uniform(-5.0, 5.0, points.n_taxels)
        sigmas = rng.uniform(0.0, 5.0, points.n_taxels)
        # tare: average a short burst of clipped no-contact frames
        idle = np.clip(rng.normal(offsets, sigmas, (50, points.n_taxels)), 0, 255)
        floor = idle.mean(axis=0)
    else:
        offsets = sigmas = floor = 0.0
    samples, truth = [], []
    while len(samples) < n_samples:
        uv = rng.uniform(-area_half_width, area_half_width, 2)
        force = rng.uniform(*force_range)
        theta, axial = sensor_uv_to_cylinder(points.mount, uv)
        u = simulate_unscaled(points, theta, axial, force, macro.elasticity, config)
        if u is None or not u.any():
            continue
        clean = scales * u
        if np.sort(clean)[-3] < min_taxel_value:
            continue
        image = clean
        if taxel_noise:
            image = np.clip(clean + rng.normal(offsets, sigmas), 0.0, 255.0) - floor
        image = np.clip(image, 0.0, 255.0)
        active = int(np.count_nonzero(image > config.activity_threshold))
        if active < config.min_active_taxels:
            continue
        angle = rng.uniform(0.0, 2.0 * math.pi)
        mag = rng.uniform(0.0, position_corruption)
        corruption = mag * np.array([math.cos(angle), math.sin(angle)])
        theta_m, axial_m = _offset_coords(theta, axial, corruption, macro, config)
        samples.append(
            CalibrationSample(
                contact_position=surface_point(
                    theta_m, axial_m, config.fingertip_radius
                ),
                force=force,
                image=image,
            )
        )
        truth.append({"uv": uv, "corruption": corruption, "force": force})
    return samples, truth
