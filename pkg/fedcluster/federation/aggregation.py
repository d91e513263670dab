from typing import Sequence, Tuple

import numpy as np

from fedcluster.nn.network import ParamVector
from fedcluster.util.errors import ShapeError


def aggregate_fedavg(uploads: Sequence[Tuple[ParamVector, int]]) -> ParamVector:
    """
    Sample-count weighted mean of the uploaded parameter vectors.

    Terms are summed in the order given; callers pass uploads in ascending client id so
    the result does not depend on which worker finished first.
    """
    if not uploads:
        raise ShapeError("Cannot aggregate an empty list of uploads.")
    size = np.asarray(uploads[0][0]).shape
    total = 0
    for params, count in uploads:
        if np.asarray(params).shape != size:
            raise ShapeError(f"Upload of shape {np.asarray(params).shape} does not match {size}.")
        if count < 1:
            raise ValueError(f"Sample counts must be at least 1, got {count}")
        total += count

    out = np.zeros(size)
    for params, count in uploads:
        out += (count / total) * np.asarray(params, dtype=np.float64)
    return out
