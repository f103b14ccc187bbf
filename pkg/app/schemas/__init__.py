# Import all schemas here to make them available when importing from the schemas package
from app.schemas.geometry import Box, ConvexPolygon, Point, Scenario, ScenarioKind, ScenarioParams, Workspace
from app.schemas.esdf import EsdfGrid
from app.schemas.gaussian import AffineMap, GaussianState, Gmm
from app.schemas.trajectory import CostWeights, GaussianRoadmap, GaussianTrajectory, GmmTrajectory, GpModel, PlanDocument
from app.schemas.diffusion import CheckpointHeader, CheckpointLayer, Context, NoiseSchedule, Normalizer
from app.schemas.dataset import Dataset, DatasetHeader, DatasetIndex, DatasetRecord
from app.schemas.robot import Assignment, MpcConfig, RobotState, SwarmFrame, SwarmLog, SwarmLogHeader
from app.schemas.metrics import METRIC_COLUMNS, MetricsReport
