# app/schemas/base.py
from typing import Annotated

import numpy as np
from pydantic import BaseModel, PlainValidator, ConfigDict, PlainSerializer


def _as_float_array(value) -> np.ndarray:
    arr = np.array(value, dtype=np.float64)
    arr.setflags(write=False)
    return arr


# Numpy array field: accepts nested lists, dumps back to nested lists
NDArray = Annotated[
    np.ndarray,
    PlainValidator(_as_float_array),
    PlainSerializer(lambda a: np.asarray(a).tolist(), return_type=list),
]


class ArrayModel(BaseModel):
    """Base schema for immutable values that carry numpy arrays."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)
