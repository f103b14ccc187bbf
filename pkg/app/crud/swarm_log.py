# app/crud/swarm_log.py
from pathlib import Path
from typing import Optional

from app.crud.base import (
    BaseRepository,
    PathLike,
    atomic_write,
    check_config_hash,
    parse_json_line,
    read_bytes,
    validate_model,
)
from app.errors import ArtifactError
from app.schemas.robot import SwarmFrame, SwarmLog, SwarmLogHeader


class SwarmLogRepository(BaseRepository[SwarmFrame]):
    """Swarm logs: one header line, then one frame per line"""

    def __init__(self):
        super().__init__(SwarmFrame)

    def save(self, path: PathLike, log: SwarmLog) -> Path:
        lines = [log.header.model_dump_json()] + [frame.model_dump_json() for frame in log.frames]
        return atomic_write(path, ("\n".join(lines) + "\n").encode("utf-8"))

    def load(self, path: PathLike, config_hash: Optional[str] = None) -> SwarmLog:
        data = read_bytes(path)
        end = data.find(b"\n")
        if end < 0:
            raise ArtifactError(f"{path}: missing swarm log header line", path=str(path), offset=0)
        header = validate_model(SwarmLogHeader, parse_json_line(data, 0, end, path, "header"), path)
        check_config_hash(header.config_hash, config_hash, path)
        frames = list(self._frames(data, end + 1, path))
        if not frames:
            raise ArtifactError(f"{path}: swarm log has no frames", path=str(path), offset=end + 1)
        for frame in frames:
            if len(frame.positions) != header.robot_count:
                raise ArtifactError(f"{path}: frame at t={frame.t} has {len(frame.positions)} robots, "
                                    f"expected {header.robot_count}", path=str(path))
        return SwarmLog(header=header, frames=frames)

    def _frames(self, data: bytes, start: int, path: PathLike):
        while start < len(data):
            end = data.find(b"\n", start)
            end = len(data) if end < 0 else end
            if data[start:end].strip():
                yield validate_model(self.schema, parse_json_line(data, start, end, path, "frame"), path, start)
            start = end + 1
