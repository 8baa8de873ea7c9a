"""Scenario chance-constrained path planning over probabilistic occupancy
fields, with delta-safe velocity scheduling and calibration metrics."""

from .collision import (
    SafetyConfig,
    SegmentChecker,
    baseline_bounding_volume,
    baseline_chance_constraint,
    baseline_max_prob,
    pose_is_delta_safe,
    segment_is_delta_safe,
)
from .geometry import (
    Box,
    Obstacle,
    RobotShape,
    SampleRegion,
    TaskPose,
    apply_rigid_motion,
    distance_point_to_obstacle,
    distance_point_to_region,
    sample_region_uniform,
    wrap_angle,
)
from .metrics import (
    LabeledRaster,
    ReliabilityDiagram,
    brier_score,
    mean_iou,
    monte_carlo_validate,
    nll,
    normalized_costs,
    path_cost,
    pixel_accuracy,
    reliability,
)
from .occupancy import (
    AnalyticField,
    PredictionStack,
    RasterField,
    ensemble_fuse,
    extrude_raster_2d,
    load_raster,
    save_raster,
)
from .planner import (
    PathResult,
    PlannerConfig,
    TrackingErrorModel,
    UnsafeEndpointError,
    interpolate_path,
    line_cost,
    plan,
)
from .scene import Scene, random_sphere_scene
from .scenefile import (
    BenchmarkSpec,
    SceneFileError,
    load_benchmark_spec,
    load_scene,
    packaged_scene_path,
)
from .velocity import (
    StallError,
    Trajectory,
    VelocityProfile,
    max_velocity,
    schedule,
    time_parameterize,
    unsafe_distance,
)

__version__ = "0.1.0"
