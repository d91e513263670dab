import logging
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from fedcluster.util.errors import ShapeError

logger = logging.getLogger(__name__)


class Basis(str, Enum):
    PARAMS = "PARAMS"
    DELTA = "DELTA"


def basis_vector(
    local: np.ndarray, global_prev: Optional[np.ndarray], basis: Basis = Basis.DELTA
) -> np.ndarray:
    """The vector a client is compared by: its parameters, or its update against the global model."""
    local = np.asarray(local, dtype=np.float64)
    if Basis(basis) == Basis.PARAMS:
        return local
    global_prev = np.asarray(global_prev, dtype=np.float64)
    if local.shape != global_prev.shape:
        raise ShapeError(
            f"Cannot take a delta between vectors of shape {local.shape} and {global_prev.shape}."
        )
    return local - global_prev


def cosine_distance(a: np.ndarray, b: np.ndarray) -> float:
    """1 - cos(a, b), clipped to [0, 2]. A zero vector is at distance 1 from anything."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    norm_a = np.linalg.norm(a)
    norm_b = np.linalg.norm(b)
    if norm_a == 0 or norm_b == 0:
        return 1.0
    return float(np.clip(1.0 - np.dot(a, b) / (norm_a * norm_b), 0.0, 2.0))


def distance_matrix(
    vectors: Sequence[np.ndarray],
    basis: Basis = Basis.PARAMS,
    reference: Optional[Sequence[np.ndarray]] = None,
) -> np.ndarray:
    """
    Symmetric pairwise cosine distances with a zero diagonal, one evaluation per pair.

    With the DELTA basis, `reference` holds the global model each vector was trained from
    (one entry per vector) and distances are taken between the updates.
    """
    if len(vectors) < 2:
        raise ShapeError(f"Need at least two vectors, got {len(vectors)}.")
    lengths = {np.asarray(v).size for v in vectors}
    if len(lengths) != 1:
        raise ShapeError(f"Vectors have differing lengths {sorted(lengths)}.")
    if Basis(basis) == Basis.DELTA:
        if reference is None or len(reference) != len(vectors):
            raise ShapeError("The DELTA basis needs one reference vector per client.")
        vectors = [basis_vector(v, r, Basis.DELTA) for v, r in zip(vectors, reference)]

    n = len(vectors)
    d = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            d[i, j] = d[j, i] = cosine_distance(vectors[i], vectors[j])
    return d
