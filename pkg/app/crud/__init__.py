from app.crud.checkpoint import CheckpointRepository
from app.crud.dataset import DatasetRepository
from app.crud.esdf import EsdfRepository
from app.crud.plan import MetricsRepository, PlanRepository
from app.crud.scenario import ScenarioRepository
from app.crud.swarm_log import SwarmLogRepository
from app.crud.table import TableRepository
