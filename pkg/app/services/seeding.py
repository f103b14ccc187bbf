# app/services/seeding.py
"""
Counter-based seed splitting.

Every random stream is keyed by the root seed plus a path of labels, e.g.
``derive_seed(root, "dataset", 12)``. Labels are strings or non-negative
integers; strings are hashed to 32-bit words. The same path always gives the
same stream regardless of execution order, so parallel workers stay
reproducible.
"""
import hashlib
from typing import Union

import numpy as np
import torch

Label = Union[int, str]


def _word(label: Label) -> int:
    if isinstance(label, str):
        return int.from_bytes(hashlib.sha256(label.encode("utf-8")).digest()[:4], "little")
    if label < 0:
        raise ValueError(f"seed labels must be non-negative, got {label}")
    return int(label)


def seed_sequence(root: int, *labels: Label) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=int(root), spawn_key=tuple(_word(l) for l in labels))


def derive_seed(root: int, *labels: Label) -> int:
    """63-bit integer seed for the labelled stream."""
    state = seed_sequence(root, *labels).generate_state(2, dtype=np.uint32)
    return int((int(state[0]) << 31) ^ int(state[1]))


def rng(root: int, *labels: Label) -> np.random.Generator:
    return np.random.default_rng(seed_sequence(root, *labels))


def torch_generator(root: int, *labels: Label) -> torch.Generator:
    gen = torch.Generator()
    gen.manual_seed(derive_seed(root, *labels))
    return gen
