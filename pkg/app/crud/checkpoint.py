# app/crud/checkpoint.py
"""
Model checkpoints.

Layout: one JSON header line (architecture hyperparameters, normalizer,
noise schedule, context settings, layer table) followed by the parameters
as little-endian f32 blobs in state_dict order.
"""
import logging
from pathlib import Path
from typing import Optional

import numpy as np
import torch

from app.config import ContextConfig
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
from app.models import build_denoiser
from app.models.prior import DiffusionPrior
from app.schemas.diffusion import CHECKPOINT_FORMAT, CheckpointHeader, CheckpointLayer

logger = logging.getLogger(__name__)


class CheckpointRepository(BaseRepository[CheckpointHeader]):
    def __init__(self):
        super().__init__(CheckpointHeader)

    def save(self, path: PathLike, prior: DiffusionPrior) -> Path:
        """
        Write a trained prior.

        Args:
            path: Destination file
            prior: Model, normalizer, schedule and context settings

        Returns:
            The written path
        """
        layers, blobs, offset = [], [], 0
        for name, tensor in prior.model.state_dict().items():
            values = tensor.detach().cpu().to(torch.float32).numpy().astype("<f4")
            layers.append(CheckpointLayer(name=name, shape=list(values.shape), offset=offset, count=values.size))
            blobs.append(values.reshape(-1).tobytes())
            offset += values.size
        header = self.schema(
            hyper=prior.model.hyperparameters(),
            normalizer=prior.normalizer,
            schedule=prior.schedule,
            context=prior.context.model_dump(mode="json"),
            horizon=prior.horizon,
            step=prior.step,
            config_hash=prior.config_hash,
            layers=layers,
        )
        written = atomic_write(path, header.model_dump_json().encode("utf-8") + b"\n" + b"".join(blobs))
        logger.info("checkpoint saved path=%s step=%d parameters=%d", written, prior.step, offset)
        return written

    def load_header(self, path: PathLike) -> CheckpointHeader:
        data = read_bytes(path)
        header, _ = self._header(data, path)
        return header

    def _header(self, data: bytes, path: PathLike) -> tuple[CheckpointHeader, int]:
        end = data.find(b"\n")
        if end < 0:
            raise ArtifactError(f"{path}: missing checkpoint header line", path=str(path), offset=0)
        header = validate_model(self.schema, parse_json_line(data, 0, end, path, "checkpoint header"), path)
        if header.format != CHECKPOINT_FORMAT:
            raise ArtifactError(f"{path}: not a checkpoint (format {header.format!r})", path=str(path), offset=0)
        return header, end + 1

    def load(self, path: PathLike, config_hash: Optional[str] = None) -> DiffusionPrior:
        """
        Read a checkpoint back into a ready-to-sample prior.

        Raises:
            ArtifactError: on a malformed header, a truncated blob section
                or a layer table that does not match the architecture
        """
        data = read_bytes(path)
        header, body = self._header(data, path)
        check_config_hash(header.config_hash, config_hash, path)
        expected = header.total * 4
        if len(data) - body != expected:
            raise ArtifactError(
                f"{path}: parameter section holds {len(data) - body} bytes, expected {expected}",
                path=str(path), offset=body + min(len(data) - body, expected),
            )
        flat = np.frombuffer(data, dtype="<f4", offset=body)

        try:
            model = build_denoiser(header.hyper)
        except (TypeError, ValueError) as exc:
            raise ArtifactError(f"{path}: cannot rebuild denoiser: {exc}", path=str(path), offset=0) from exc
        reference = model.state_dict()
        stored = {layer.name: layer for layer in header.layers}
        if list(stored) != list(reference):
            missing = sorted(set(reference) - set(stored))
            extra = sorted(set(stored) - set(reference))
            raise ArtifactError(f"{path}: layer table mismatch (missing {missing}, unexpected {extra})",
                                path=str(path), offset=0)
        state = {}
        for name, ref in reference.items():
            layer = stored[name]
            if tuple(layer.shape) != tuple(ref.shape) or layer.count != ref.numel():
                raise ArtifactError(f"{path}: layer {name} has shape {layer.shape}, expected {list(ref.shape)}",
                                    path=str(path), offset=body + 4 * layer.offset)
            values = flat[layer.offset:layer.offset + layer.count].reshape(layer.shape)
            state[name] = torch.from_numpy(values.astype(np.float32))
        model.load_state_dict(state)
        model.eval()
        return DiffusionPrior(
            model=model,
            schedule=header.schedule,
            normalizer=header.normalizer,
            context=ContextConfig.model_validate(header.context),
            horizon=header.horizon,
            config_hash=header.config_hash,
            step=header.step,
        )
