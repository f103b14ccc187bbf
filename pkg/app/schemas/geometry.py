# app/schemas/geometry.py
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

Point = tuple[float, float]
# (x_min, y_min, x_max, y_max)
Box = tuple[float, float, float, float]

ScenarioKind = Literal["dense-obstacles", "narrow-passages"]


def signed_area(vertices: list[Point]) -> float:
    """Shoelace area, positive for counter-clockwise order."""
    n = len(vertices)
    acc = 0.0
    for i in range(n):
        x0, y0 = vertices[i]
        x1, y1 = vertices[(i + 1) % n]
        acc += x0 * y1 - x1 * y0
    return 0.5 * acc


class ConvexPolygon(BaseModel):
    """Convex obstacle, vertices stored counter-clockwise"""
    model_config = ConfigDict(frozen=True)

    vertices: list[Point] = Field(..., min_length=3, description="Polygon vertices in meters")

    @field_validator("vertices")
    @classmethod
    def _convex_ccw(cls, vertices: list[Point]) -> list[Point]:
        area = signed_area(vertices)
        if abs(area) <= 1e-12:
            raise ValueError("polygon is degenerate (zero area)")
        if area < 0:
            vertices = list(reversed(vertices))
        n = len(vertices)
        for i in range(n):
            ax, ay = vertices[i]
            bx, by = vertices[(i + 1) % n]
            cx, cy = vertices[(i + 2) % n]
            cross = (bx - ax) * (cy - by) - (by - ay) * (cx - bx)
            if cross <= 0.0:
                raise ValueError(f"polygon is not strictly convex at vertex {(i + 1) % n}")
        return vertices

    @property
    def area(self) -> float:
        return signed_area(self.vertices)


class Workspace(BaseModel):
    """Bounded 2D workspace with convex polygonal obstacles"""
    model_config = ConfigDict(frozen=True)

    width: float = Field(..., gt=0, description="Workspace width in meters")
    height: float = Field(..., gt=0, description="Workspace height in meters")
    obstacles: list[ConvexPolygon] = Field(default_factory=list)
    boundary_obstacles: bool = Field(False, description="Treat the four boundary half-planes as obstacles")

    @model_validator(mode="after")
    def _inside_bounds(self) -> "Workspace":
        tol = 1e-9
        for k, poly in enumerate(self.obstacles):
            for x, y in poly.vertices:
                if not (-tol <= x <= self.width + tol and -tol <= y <= self.height + tol):
                    raise ValueError(f"obstacle {k} vertex ({x}, {y}) lies outside the workspace")
        return self

    def contains(self, x: float, y: float) -> bool:
        return 0.0 <= x <= self.width and 0.0 <= y <= self.height


class ScenarioParams(BaseModel):
    """Procedural scenario parameters"""
    width: float = Field(100.0, gt=0)
    height: float = Field(80.0, gt=0)
    obstacle_count: int = Field(5, ge=0, description="Random convex obstacles to place")
    radius_range: tuple[float, float] = Field((4.0, 10.0), description="Circumradius range of random obstacles")
    vertex_range: tuple[int, int] = Field((3, 8), description="Vertex count range of random obstacles")
    min_clearance: float = Field(4.0, ge=0, description="Minimum gap between obstacles")
    corridor_width: float = Field(4.0, gt=0, description="Narrow-passage corridor width")
    corridor_count: int = Field(1, ge=1)
    start_region: Box = Field((2.0, 28.0, 14.0, 52.0))
    goal_region: Box = Field((86.0, 28.0, 98.0, 52.0))
    region_clearance: float = Field(8.0, ge=0, description="Gap between obstacles and the start/goal regions")
    max_retries: int = Field(2000, ge=1, description="Rejection-sampling budget per obstacle")

    @field_validator("radius_range", "vertex_range")
    @classmethod
    def _ordered(cls, value):
        lo, hi = value
        if lo <= 0 or hi < lo:
            raise ValueError(f"range must satisfy 0 < low <= high, got {value}")
        return value

    @field_validator("vertex_range")
    @classmethod
    def _min_vertices(cls, value):
        if value[0] < 3:
            raise ValueError("polygons need at least 3 vertices")
        return value

    @model_validator(mode="after")
    def _regions_inside(self) -> "ScenarioParams":
        for name in ("start_region", "goal_region"):
            x0, y0, x1, y1 = getattr(self, name)
            if not (0 <= x0 < x1 <= self.width and 0 <= y0 < y1 <= self.height):
                raise ValueError(f"{name} {getattr(self, name)} must be a box inside the workspace")
        return self


class Scenario(BaseModel):
    """Scenario file document: a workspace plus its provenance"""
    width: float = Field(..., gt=0)
    height: float = Field(..., gt=0)
    obstacles: list[list[Point]] = Field(default_factory=list, description="Vertex lists, counter-clockwise")
    boundary_obstacles: bool = False
    seed: int = 0
    kind: ScenarioKind = "dense-obstacles"
    params: ScenarioParams = Field(default_factory=ScenarioParams)
    config_hash: Optional[str] = None

    model_config = ConfigDict(
        json_schema_extra={
            "example": {
                "width": 10.0,
                "height": 10.0,
                "obstacles": [[[4.0, 4.0], [6.0, 4.0], [6.0, 6.0], [4.0, 6.0]]],
                "seed": 7,
                "kind": "dense-obstacles",
            }
        }
    )

    @model_validator(mode="after")
    def _valid_workspace(self) -> "Scenario":
        self.to_workspace()
        return self

    def to_workspace(self) -> Workspace:
        return Workspace(
            width=self.width,
            height=self.height,
            obstacles=[ConvexPolygon(vertices=v) for v in self.obstacles],
            boundary_obstacles=self.boundary_obstacles,
        )

    @classmethod
    def from_workspace(
        cls, ws: Workspace, *, kind: ScenarioKind, seed: int, params: ScenarioParams,
        config_hash: Optional[str] = None,
    ) -> "Scenario":
        return cls(
            width=ws.width,
            height=ws.height,
            obstacles=[list(p.vertices) for p in ws.obstacles],
            boundary_obstacles=ws.boundary_obstacles,
            seed=seed,
            kind=kind,
            params=params,
            config_hash=config_hash,
        )
