# app/crud/plan.py
from typing import Optional

from app.crud.base import BaseRepository, PathLike, check_config_hash
from app.schemas.metrics import MetricsReport
from app.schemas.trajectory import PlanDocument


class PlanRepository(BaseRepository[PlanDocument]):
    """Plan JSON documents"""

    def __init__(self):
        super().__init__(PlanDocument)

    def load(self, path: PathLike, config_hash: Optional[str] = None) -> PlanDocument:
        doc = self.get(path)
        check_config_hash(doc.config_hash, config_hash, path)
        return doc


class MetricsRepository(BaseRepository[MetricsReport]):
    """Metrics JSON written next to plans and logs"""

    def __init__(self):
        super().__init__(MetricsReport)


def metrics_path(artifact: PathLike) -> str:
    """Sidecar file holding the wall-clock metrics of a plan or log."""
    return f"{artifact}.metrics.json"
