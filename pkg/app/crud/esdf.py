# app/crud/esdf.py
import struct
from pathlib import Path

import numpy as np

from app.crud.base import BaseRepository, PathLike, atomic_write, read_bytes
from app.errors import ArtifactError
from app.schemas.esdf import EsdfGrid

MAGIC = b"ESDF"
VERSION = 1
# magic, version, nx, ny, resolution, origin x, origin y
HEADER = struct.Struct("<4sIIIddd")


class EsdfRepository(BaseRepository[EsdfGrid]):
    """
    Binary ESDF export: a 40-byte little-endian header followed by row-major
    f32 values and then f32 gradient pairs.

    An imported grid covers (nx - 1) * resolution by (ny - 1) * resolution,
    which can exceed the workspace it was built from by less than one cell.
    """

    def __init__(self):
        super().__init__(EsdfGrid)

    def save(self, path: PathLike, grid: EsdfGrid) -> Path:
        ny, nx = grid.shape
        header = HEADER.pack(MAGIC, VERSION, nx, ny, grid.resolution, *grid.origin)
        body = np.asarray(grid.values, dtype="<f4").tobytes() + np.asarray(grid.gradients, dtype="<f4").tobytes()
        return atomic_write(path, header + body)

    def load(self, path: PathLike) -> EsdfGrid:
        data = read_bytes(path)
        if len(data) < HEADER.size:
            raise ArtifactError(f"{path}: truncated ESDF header", path=str(path), offset=len(data))
        magic, version, nx, ny, resolution, ox, oy = HEADER.unpack_from(data, 0)
        if magic != MAGIC:
            raise ArtifactError(f"{path}: bad ESDF magic {magic!r}", path=str(path), offset=0)
        if version != VERSION:
            raise ArtifactError(f"{path}: unsupported ESDF version {version}", path=str(path), offset=4)
        if nx < 2 or ny < 2 or not resolution > 0:
            raise ArtifactError(f"{path}: bad grid size {nx}x{ny} at resolution {resolution}", path=str(path), offset=8)
        expected = HEADER.size + 4 * nx * ny * 3
        if len(data) != expected:
            raise ArtifactError(f"{path}: expected {expected} bytes, found {len(data)}", path=str(path),
                                offset=min(len(data), expected))
        values = np.frombuffer(data, dtype="<f4", count=nx * ny, offset=HEADER.size).reshape(ny, nx)
        grads = np.frombuffer(data, dtype="<f4", count=2 * nx * ny, offset=HEADER.size + 4 * nx * ny)
        grads = grads.reshape(ny, nx, 2).astype(np.float64)
        norms = np.linalg.norm(grads, axis=-1, keepdims=True)
        grads = np.where(norms > 1e-12, grads / np.maximum(norms, 1e-12), np.array([1.0, 0.0]))
        try:
            return EsdfGrid(
                resolution=resolution, origin=(ox, oy), width=(nx - 1) * resolution, height=(ny - 1) * resolution,
                values=values.astype(np.float64), gradients=grads,
            )
        except ValueError as exc:
            raise ArtifactError(f"{path}: invalid grid: {exc}", path=str(path), offset=HEADER.size) from exc

    get = load
    create = save
