# app/crud/base.py
import json
import logging
import os
import tempfile
from pathlib import Path
from typing import Generic, Iterator, Optional, Type, TypeVar, Union

from pydantic import BaseModel, ValidationError

from app.errors import ArtifactError

logger = logging.getLogger(__name__)

# Define generic type for the pydantic schema a repository stores
SchemaType = TypeVar("SchemaType", bound=BaseModel)

PathLike = Union[str, Path]


def atomic_write(path: PathLike, data: bytes) -> Path:
    """
    Write bytes through a temporary file in the target directory and rename it into place.

    Raises:
        ArtifactError: if the file cannot be written
    """
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(data)
                fh.flush()
                os.fsync(fh.fileno())
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
    except OSError as exc:
        raise ArtifactError(f"cannot write {path}: {exc}", path=str(path)) from exc
    return path


def read_bytes(path: PathLike) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise ArtifactError(f"cannot read {path}: {exc}", path=str(path)) from exc


def line_offsets(data: bytes, count: int) -> list[int]:
    """Byte offsets of the first `count` lines (plus the offset after the last one)."""
    offsets = [0]
    for _ in range(count):
        nl = data.find(b"\n", offsets[-1])
        if nl < 0:
            break
        offsets.append(nl + 1)
    return offsets


def parse_json_line(data: bytes, start: int, end: int, path: PathLike, what: str) -> dict:
    """
    Raises:
        ArtifactError: naming the byte offset of the parse failure
    """
    try:
        obj = json.loads(data[start:end].decode("utf-8"))
    except UnicodeDecodeError as exc:
        raise ArtifactError(f"{path}: {what} is not UTF-8", path=str(path), offset=start + exc.start) from exc
    except json.JSONDecodeError as exc:
        raise ArtifactError(f"{path}: malformed {what}: {exc.msg}", path=str(path), offset=start + exc.pos) from exc
    if not isinstance(obj, dict):
        raise ArtifactError(f"{path}: {what} must be a JSON object", path=str(path), offset=start)
    return obj


def validate_model(schema: Type[SchemaType], obj, path: PathLike, offset: int = 0) -> SchemaType:
    try:
        return schema.model_validate(obj)
    except ValidationError as exc:
        first = exc.errors(include_url=False)[0]
        loc = ".".join(str(p) for p in first["loc"]) or "<root>"
        raise ArtifactError(
            f"{path}: invalid {schema.__name__} at {loc}: {first['msg']}", path=str(path), offset=offset
        ) from exc


def check_config_hash(embedded: Optional[str], current: Optional[str], path: PathLike) -> bool:
    """Warn (never fail) when an artifact was produced under a different config."""
    if embedded and current and embedded != current:
        logger.warning("config hash mismatch path=%s artifact=%s current=%s", path, embedded, current)
        return False
    return True


class BaseRepository(Generic[SchemaType]):
    """
    Base class for file-backed repositories.

    Stores one pydantic document per JSON file, or a stream of documents
    per JSON-lines file. Every write is atomic.
    """

    def __init__(self, schema: Type[SchemaType]):
        """
        Initialize the repository with the schema it stores.

        Args:
            schema: Pydantic model class
        """
        self.schema = schema

    def get(self, path: PathLike) -> SchemaType:
        """
        Read one document.

        Args:
            path: JSON file

        Returns:
            The validated document

        Raises:
            ArtifactError: on I/O, JSON or validation problems
        """
        data = read_bytes(path)
        return validate_model(self.schema, parse_json_line(data, 0, len(data), path, "document"), path)

    def get_multi(self, path: PathLike) -> Iterator[SchemaType]:
        """
        Stream documents from a JSON-lines file.

        Args:
            path: JSON-lines file

        Yields:
            One validated document per non-empty line
        """
        data = read_bytes(path)
        start = 0
        while start < len(data):
            end = data.find(b"\n", start)
            end = len(data) if end < 0 else end
            if data[start:end].strip():
                yield validate_model(self.schema, parse_json_line(data, start, end, path, "line"), path, start)
            start = end + 1

    def create(self, path: PathLike, obj: SchemaType) -> Path:
        """
        Write one document.

        Args:
            path: Destination
            obj: Document to store

        Returns:
            The written path
        """
        return atomic_write(path, (obj.model_dump_json(indent=2) + "\n").encode("utf-8"))

    def create_multi(self, path: PathLike, objs: Iterator[BaseModel]) -> Path:
        """Write documents as JSON lines."""
        lines = [obj.model_dump_json() for obj in objs]
        return atomic_write(path, ("\n".join(lines) + "\n").encode("utf-8"))
