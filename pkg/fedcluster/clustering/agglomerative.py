import logging
from enum import Enum
from typing import List, NamedTuple

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from fedcluster.util.errors import ClusteringError

logger = logging.getLogger(__name__)

SYMMETRY_TOLERANCE = 1e-12
# relative slack under which two merge distances count as tied
TIE_TOLERANCE = 1e-12


class Linkage(str, Enum):
    AVERAGE = "average"
    SINGLE = "single"
    COMPLETE = "complete"


class Merge(NamedTuple):
    a: int
    b: int
    distance: float
    new_id: int


class Dendrogram(BaseModel):
    """
    Merge history of n leaves. Leaves are clusters 0..n-1; merge k creates cluster n+k.
    """

    model_config = ConfigDict(frozen=True)

    n: int
    merges: List[Merge]

    @model_validator(mode="after")
    def validate_merges(self):
        if len(self.merges) != self.n - 1:
            raise ValueError(f"{self.n} leaves need {self.n - 1} merges, got {len(self.merges)}.")
        used = [id_ for merge in self.merges for id_ in (merge.a, merge.b)]
        if len(used) != len(set(used)):
            raise ValueError("A cluster id was merged more than once.")
        return self


class ClusterAssignment(BaseModel):
    """
    Cluster index per client. Labels are canonical: client 0 is in cluster 0, and each
    cluster first seen while scanning clients in order takes the next index.
    """

    model_config = ConfigDict(frozen=True)

    labels: List[int]
    p: int

    @model_validator(mode="after")
    def validate_labels(self):
        expected = 0
        for label in self.labels:
            if label > expected or label < 0:
                raise ValueError(f"Labels {self.labels} are not canonical.")
            if label == expected:
                expected += 1
        if expected != self.p:
            raise ValueError(f"Labels {self.labels} form {expected} clusters, not {self.p}.")
        return self

    @property
    def n(self) -> int:
        return len(self.labels)

    def clusters(self) -> list[list[int]]:
        members = [[] for _ in range(self.p)]
        for client, label in enumerate(self.labels):
            members[label].append(client)
        return members


def _validate_matrix(D) -> np.ndarray:
    d = np.asarray(D, dtype=np.float64)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise ClusteringError(f"Distance matrix must be square, got shape {d.shape}.")
    if d.shape[0] < 2:
        raise ClusteringError("Need at least two clients to cluster.")
    if not np.isfinite(d).all():
        raise ClusteringError("Distance matrix contains NaN or infinite entries.")
    if np.abs(d - d.T).max() > SYMMETRY_TOLERANCE:
        raise ClusteringError("Distance matrix is not symmetric.")
    return d


def agglomerate(D, linkage: Linkage = Linkage.AVERAGE) -> Dendrogram:
    """
    Agglomerative clustering of a distance matrix.

    Cluster distances are maintained with the Lance-Williams recurrence; for average
    linkage d(k, i+j) = (|i| d(k, i) + |j| d(k, j)) / (|i| + |j|). Each step merges the
    closest pair. Distances within a relative TIE_TOLERANCE of the minimum are tied, since
    the recurrence rounds equal inputs to slightly different values. Ties go to the
    lexicographically smallest pair of representatives, a cluster's representative being
    its smallest client id.
    """
    d = _validate_matrix(D)
    linkage = Linkage(linkage)
    n = len(d)
    # row r holds the cluster whose smallest member is r
    work = d.copy()
    active = np.ones(n, dtype=bool)
    sizes = np.ones(n)
    ids = list(range(n))
    upper = np.triu(np.ones((n, n), dtype=bool), k=1)

    merges = []
    for step in range(n - 1):
        candidates = np.where(upper & active[:, None] & active[None, :], work, np.inf)
        lowest = candidates.min()
        tied = candidates <= lowest + TIE_TOLERANCE * max(1.0, abs(lowest))
        # row-major scan: smallest row representative, then smallest column
        i, j = divmod(int(np.argmax(tied)), n)
        merges.append(Merge(ids[i], ids[j], float(work[i, j]), n + step))

        if linkage == Linkage.AVERAGE:
            joined = (sizes[i] * work[i] + sizes[j] * work[j]) / (sizes[i] + sizes[j])
        elif linkage == Linkage.SINGLE:
            joined = np.minimum(work[i], work[j])
        else:
            joined = np.maximum(work[i], work[j])
        others = active.copy()
        others[[i, j]] = False
        work[i, others] = joined[others]
        work[others, i] = joined[others]

        sizes[i] += sizes[j]
        active[j] = False
        ids[i] = n + step

    logger.debug(f"Agglomerated {n} clients with {linkage.value} linkage")
    return Dendrogram(n=n, merges=merges)


def cut(dendrogram: Dendrogram, p: int) -> ClusterAssignment:
    """Undoes the last p-1 merges, leaving exactly p clusters."""
    n = dendrogram.n
    if not 1 <= p <= n:
        raise ClusteringError(f"Cluster count must be in [1, {n}], got {p}.")

    members = {leaf: [leaf] for leaf in range(n)}
    for merge in dendrogram.merges[: n - p]:
        members[merge.new_id] = members.pop(merge.a) + members.pop(merge.b)

    owner = {leaf: cluster for cluster, leaves in members.items() for leaf in leaves}
    canonical: dict[int, int] = {}
    labels = [canonical.setdefault(owner[client], len(canonical)) for client in range(n)]
    return ClusterAssignment(labels=labels, p=p)
