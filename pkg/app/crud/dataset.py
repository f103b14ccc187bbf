# app/crud/dataset.py
"""
Dataset files.

Layout: one JSON header line, one JSON index line per record (the scene
descriptor), then `count` little-endian f32 records of fixed stride, each
the (path_nodes, 5) trajectory followed by the context feature vector.
"""
from pathlib import Path
from typing import Optional

import numpy as np

from app.crud.base import (
    BaseRepository,
    PathLike,
    atomic_write,
    check_config_hash,
    line_offsets,
    parse_json_line,
    read_bytes,
    validate_model,
)
from app.errors import ArtifactError
from app.schemas.dataset import DATASET_FORMAT, Dataset, DatasetHeader, DatasetIndex, DatasetRecord


class DatasetRepository(BaseRepository[DatasetHeader]):
    def __init__(self):
        super().__init__(DatasetHeader)

    def save(self, path: PathLike, header: DatasetHeader, records: list[DatasetRecord]) -> Path:
        if len(records) != header.count:
            raise ArtifactError(f"header announces {header.count} records, got {len(records)}", path=str(path))
        lines = [header.model_dump_json()]
        lines += [DatasetIndex(index=i, attempt=r.attempt, scenario=r.scenario).model_dump_json()
                  for i, r in enumerate(records)]
        body = np.concatenate([
            np.concatenate([np.asarray(r.trajectory).reshape(-1), np.asarray(r.features).reshape(-1)])
            for r in records
        ]).astype("<f4")
        if body.size != header.count * header.stride:
            raise ArtifactError(f"record sizes do not match the stride {header.stride}", path=str(path))
        return atomic_write(path, ("\n".join(lines) + "\n").encode("utf-8") + body.tobytes())

    def load_header(self, path: PathLike) -> DatasetHeader:
        data = read_bytes(path)
        return self._header(data, path)

    def _header(self, data: bytes, path: PathLike) -> DatasetHeader:
        end = data.find(b"\n")
        if end < 0:
            raise ArtifactError(f"{path}: missing dataset header line", path=str(path), offset=0)
        header = validate_model(self.schema, parse_json_line(data, 0, end, path, "dataset header"), path)
        if header.format != DATASET_FORMAT:
            raise ArtifactError(f"{path}: not a dataset file (format {header.format!r})", path=str(path), offset=0)
        return header

    def load(self, path: PathLike, config_hash: Optional[str] = None) -> Dataset:
        """
        Raises:
            ArtifactError: naming the byte offset of the first malformed part
        """
        data = read_bytes(path)
        header = self._header(data, path)
        check_config_hash(header.config_hash, config_hash, path)
        offsets = line_offsets(data, header.count + 1)
        if len(offsets) < header.count + 2:
            raise ArtifactError(f"{path}: index ends after {len(offsets) - 2} of {header.count} records",
                                path=str(path), offset=offsets[-1])
        index = []
        for i in range(header.count):
            start, end = offsets[i + 1], offsets[i + 2] - 1
            entry = validate_model(DatasetIndex, parse_json_line(data, start, end, path, f"index line {i}"), path, start)
            if entry.index != i:
                raise ArtifactError(f"{path}: index line {i} carries index {entry.index}", path=str(path), offset=start)
            index.append(entry)
        binary = offsets[-1]
        expected = header.count * header.stride * 4
        if len(data) - binary != expected:
            raise ArtifactError(
                f"{path}: binary section holds {len(data) - binary} bytes, expected {expected}",
                path=str(path), offset=binary + min(len(data) - binary, expected),
            )
        flat = np.frombuffer(data, dtype="<f4", offset=binary).astype(np.float64).reshape(header.count, header.stride)
        n = header.path_nodes * 5
        trajs = flat[:, :n].reshape(header.count, header.path_nodes, 5)
        return Dataset(header=header, index=index, trajectories=trajs, features=flat[:, n:])
