# app/crud/scenario.py
from pathlib import Path
from typing import Optional

from app.crud.base import BaseRepository, PathLike, check_config_hash
from app.schemas.geometry import Scenario


class ScenarioRepository(BaseRepository[Scenario]):
    """Scenario JSON documents"""

    def __init__(self):
        super().__init__(Scenario)

    def load(self, path: PathLike, config_hash: Optional[str] = None) -> Scenario:
        scenario = self.get(path)
        check_config_hash(scenario.config_hash, config_hash, path)
        return scenario

    def save(self, path: PathLike, scenario: Scenario) -> Path:
        return self.create(path, scenario)
