# app/config.py
import hashlib
import json
from pathlib import Path
from typing import Literal, Optional, Union

from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from app.errors import ConfigError
from app.schemas.geometry import ScenarioKind, ScenarioParams
from app.schemas.robot import MpcConfig
from app.schemas.trajectory import CostWeights


class Settings(BaseSettings):
    """Process settings"""
    # Logging settings
    LOG_LEVEL: str = "INFO"
    LOG_FORMAT: Literal["text", "json"] = "text"

    # Execution settings
    WORKERS: int = 1
    TORCH_THREADS: int = 1
    DEVICE: str = "cpu"

    PROJECT_NAME: str = "SwarmDiff"

    model_config = SettingsConfigDict(env_prefix="SWARMDIFF_", env_file=".env", case_sensitive=True, extra="ignore")


# Create settings instance
settings = Settings()


# Planner config sections
class ScenarioConfig(ScenarioParams):
    """Scenario generation section"""
    kind: ScenarioKind = Field("dense-obstacles", description="Scenario family")
    boundary_obstacles: bool = Field(False, description="Add the workspace boundary to the SDF")


class EsdfConfig(BaseModel):
    resolution: float = Field(0.5, gt=0, description="Grid spacing in meters")


class SigmaBounds(BaseModel):
    """Shape-parameter bounds for roadmap node sampling"""
    sigma_min: float = Field(0.2, ge=1e-4)
    sigma_max: float = Field(1.5, gt=0)
    rho_max: float = Field(0.5, ge=0, lt=1)

    @model_validator(mode="after")
    def _ordered(self) -> "SigmaBounds":
        if self.sigma_max < self.sigma_min:
            raise ValueError("sigma_max must be >= sigma_min")
        return self


class GpConfig(BaseModel):
    """Constant-velocity prior: white-noise-on-acceleration spectral densities"""
    dt: float = Field(1.0, gt=0, description="Transition step in seconds")
    q_position: float = Field(1.0, gt=0)
    q_shape: float = Field(0.1, gt=0)


class ScheduleConfig(BaseModel):
    kind: Literal["cosine", "linear"] = "cosine"
    steps: int = Field(100, ge=1, description="Diffusion steps T")
    cosine_s: float = Field(0.008, gt=0)
    max_beta: float = Field(0.999, gt=0, lt=1)
    beta_start: float = Field(1e-4, gt=0, lt=1)
    beta_end: float = Field(0.02, gt=0, lt=1)

    @model_validator(mode="after")
    def _linear_range(self) -> "ScheduleConfig":
        if self.beta_end < self.beta_start:
            raise ValueError("beta_end must be >= beta_start")
        return self


class DenoiserConfig(BaseModel):
    kind: Literal["dit", "unet"] = "dit"
    horizon: int = Field(64, ge=2, description="Planning horizon H")
    width: int = Field(128, ge=8)
    depth: int = Field(6, ge=1)
    heads: int = Field(4, ge=1)
    mlp_ratio: float = Field(4.0, gt=0)
    unet_channels: list[int] = Field(default_factory=lambda: [64, 128, 256])

    @model_validator(mode="after")
    def _heads_divide_width(self) -> "DenoiserConfig":
        if self.width % self.heads != 0:
            raise ValueError(f"width {self.width} is not divisible by heads {self.heads}")
        if not self.unet_channels or min(self.unet_channels) < 1:
            raise ValueError("unet_channels must be a non-empty list of positive sizes")
        return self


class ContextConfig(BaseModel):
    n_chord: int = Field(16, ge=2, description="ESDF samples along the start-goal chord")
    use_esdf: bool = Field(True, description="False zeroes the ESDF features")

    @property
    def esdf_dim(self) -> int:
        return 3 * self.n_chord + 5

    @property
    def dim(self) -> int:
        return 10 + self.esdf_dim


class TrainConfig(BaseModel):
    steps: int = Field(2000, ge=1)
    batch_size: int = Field(32, ge=1)
    lr: float = Field(3e-4, gt=0)
    weight_decay: float = Field(0.0, ge=0)
    loss: Literal["mse", "sliced-wasserstein"] = "mse"
    sw_projections: int = Field(64, ge=1)
    grad_clip: Optional[float] = Field(1.0, gt=0)
    shuffle: bool = True
    log_every: int = Field(100, ge=1)
    seed: int = Field(0, ge=0)


class RoadmapConfig(BaseModel):
    n_nodes: int = Field(500, ge=2)
    k_neighbors: int = Field(10, ge=1)
    edge_resolution: int = Field(10, ge=2, description="Interpolation points checked per edge")
    max_node_retries: int = Field(10000, ge=1)
    path_nodes: int = Field(256, ge=2)
    shortcut: bool = True


class DatasetConfig(BaseModel):
    count: int = Field(100, ge=1)
    kind: ScenarioKind = "dense-obstacles"
    failure_window: int = Field(100, ge=1)
    max_failure_rate: float = Field(0.9, gt=0, le=1)
    workers: int = Field(1, ge=1)


class MissionConfig(BaseModel):
    robot_count: int = Field(20, ge=1)
    robot_radius: float = Field(0.2, gt=0)
    min_spacing: float = Field(0.6, gt=0, description="Minimum center distance between spawned robots")
    spawn_radius: float = Field(2.5, gt=0, description="Radius of the spawn and goal discs")
    n_start: Optional[int] = Field(None, ge=1, description="Start mixture components; None picks by swarm size")
    n_goal: Optional[int] = Field(None, ge=1)
    em_iters: int = Field(100, ge=1)
    em_tol: float = Field(1e-8, gt=0)

    @model_validator(mode="after")
    def _spacing(self) -> "MissionConfig":
        if self.min_spacing < 2 * self.robot_radius:
            raise ValueError("min_spacing must be at least twice robot_radius")
        return self

    def components(self) -> tuple[int, int]:
        default = 3 if self.robot_count >= 20 else 1
        return self.n_start or default, self.n_goal or default


class PlannerSection(BaseModel):
    samples_per_pair: int = Field(4, ge=1)
    merge_threshold: float = Field(0.05, ge=0, description="W2 distance below which components merge")
    macro_dt: float = Field(1.0, gt=0, description="Seconds between macroscopic indices")
    guidance_weight: float = Field(1.0, ge=0)
    guidance_clip: Optional[float] = Field(None, gt=0, description="Max norm of the guidance gradient")
    hard_cap: float = Field(25.0, ge=0, description="Largest collision_cost accepted for a pair")
    workers: int = Field(1, ge=1)


class SeedsConfig(BaseModel):
    root: int = Field(0, ge=0)


class BenchConfig(BaseModel):
    sizes: list[int] = Field(default_factory=lambda: [10, 20, 50])
    densities: list[int] = Field(default_factory=lambda: [3, 5, 8])
    repeats: int = Field(3, ge=1)
    workers: int = Field(1, ge=1)

    @field_validator("sizes", "densities")
    @classmethod
    def _non_negative(cls, value: list[int]) -> list[int]:
        if not value or min(value) < 0:
            raise ValueError("must be a non-empty list of non-negative counts")
        return value


class PlannerConfig(BaseModel):
    """The planner config document"""
    scenario: ScenarioConfig = Field(default_factory=ScenarioConfig)
    esdf: EsdfConfig = Field(default_factory=EsdfConfig)
    sigma_bounds: SigmaBounds = Field(default_factory=SigmaBounds)
    costs: CostWeights = Field(default_factory=CostWeights)
    gp: GpConfig = Field(default_factory=GpConfig)
    schedule: ScheduleConfig = Field(default_factory=ScheduleConfig)
    denoiser: DenoiserConfig = Field(default_factory=DenoiserConfig)
    context: ContextConfig = Field(default_factory=ContextConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    roadmap: RoadmapConfig = Field(default_factory=RoadmapConfig)
    dataset: DatasetConfig = Field(default_factory=DatasetConfig)
    mission: MissionConfig = Field(default_factory=MissionConfig)
    planner: PlannerSection = Field(default_factory=PlannerSection)
    mpc: MpcConfig = Field(default_factory=MpcConfig)
    seeds: SeedsConfig = Field(default_factory=SeedsConfig)
    bench: BenchConfig = Field(default_factory=BenchConfig)

    @model_validator(mode="after")
    def _cross_section(self) -> "PlannerConfig":
        problems = []
        limit = min(self.scenario.width, self.scenario.height) / 4
        if self.esdf.resolution > limit:
            problems.append(f"esdf.resolution {self.esdf.resolution} exceeds min(width, height)/4 = {limit}")
        if self.denoiser.horizon > self.roadmap.path_nodes:
            problems.append("denoiser.horizon must not exceed roadmap.path_nodes")
        if self.mpc.capture_radius <= 0:
            problems.append("mpc.capture_radius must be positive")
        if problems:
            raise ValueError("; ".join(problems))
        return self


def load_config(path: Optional[Union[str, Path]] = None) -> PlannerConfig:
    """
    Load and validate a planner config document.

    Args:
        path: JSON file; None returns the defaults

    Returns:
        The validated config

    Raises:
        ConfigError: with every violation listed
    """
    if path is None:
        return PlannerConfig()
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, source=str(path))


def parse_config(text: str, source: str = "<config>") -> PlannerConfig:
    try:
        return PlannerConfig.model_validate_json(text)
    except ValidationError as exc:
        errors = exc.errors(include_url=False)
        lines = [f"{'.'.join(str(p) for p in e['loc']) or '<root>'}: {e['msg']}" for e in errors]
        raise ConfigError(f"invalid config {source}:\n  " + "\n  ".join(lines), errors=errors) from exc


def dump_config(cfg: PlannerConfig) -> str:
    return cfg.model_dump_json(indent=2)


def config_hash(cfg: PlannerConfig) -> str:
    """First 16 hex characters of the SHA-256 of the canonical JSON dump."""
    canonical = json.dumps(cfg.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]
