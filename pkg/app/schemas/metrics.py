# app/schemas/metrics.py
from typing import Optional

from pydantic import BaseModel, Field, model_validator

# Fixed CSV column order
METRIC_COLUMNS = [
    "T_sol", "T_macro", "T_micro", "D_bar", "d_obs", "d_rob", "success",
    "seed", "config_hash", "T_fit", "T_load", "T_mpc", "T_task",
]


class MetricsReport(BaseModel):
    """Run metrics; times in seconds, distances in meters"""
    T_sol: float = Field(0.0, ge=0)
    T_macro: float = Field(0.0, ge=0)
    T_micro: float = Field(0.0, ge=0)
    D_bar: Optional[float] = Field(None, description="Mean travel distance per robot")
    d_obs: Optional[float] = Field(None, description="Min robot-obstacle surface distance")
    d_rob: Optional[float] = Field(None, description="Min robot-robot surface distance")
    success: bool = False
    seed: int = 0
    config_hash: Optional[str] = None
    T_fit: float = Field(0.0, ge=0, description="Endpoint EM fitting time")
    T_load: float = Field(0.0, ge=0, description="Model load time")
    T_mpc: float = Field(0.0, ge=0, description="Mean MPC solve time per robot step")
    T_task: float = Field(0.0, ge=0, description="Simulated completion time")

    @model_validator(mode="after")
    def _additive(self) -> "MetricsReport":
        if abs(self.T_sol - (self.T_macro + self.T_micro)) > 1e-3:
            raise ValueError("T_sol must equal T_macro + T_micro")
        return self

    @classmethod
    def build(cls, **fields) -> "MetricsReport":
        fields["T_sol"] = fields.get("T_macro", 0.0) + fields.get("T_micro", 0.0)
        return cls(**fields)

    def csv_row(self, **extra) -> dict:
        row = dict(extra)
        row.update({k: getattr(self, k) for k in METRIC_COLUMNS})
        return row
