from typing import Iterable, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from fedcluster.util.errors import EmptyDatasetError, ShapeError


class LabeledDataset(BaseModel):
    """
    Immutable labelled samples.

    `inputs` is (count, 1, 28, 28) in [0, 1] for IDX digits and (count, features) for
    synthetic blobs. `source_index` maps each sample back to its row in the dataset it was
    carved from, so shards can be checked for disjointness.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    inputs: np.ndarray
    labels: np.ndarray
    source_index: np.ndarray

    def __init__(self, inputs, labels, source_index: Optional[np.ndarray] = None, **data):
        labels = np.asarray(labels)
        if source_index is None:
            source_index = np.arange(len(labels))
        super().__init__(
            inputs=np.asarray(inputs), labels=labels, source_index=np.asarray(source_index), **data
        )

    @model_validator(mode="after")
    def validate_lengths(self):
        if len(self.inputs) != len(self.labels):
            raise ShapeError(
                f"Dataset has {len(self.inputs)} inputs but {len(self.labels)} labels."
            )
        if len(self.labels) and self.labels.min() < 0:
            raise ShapeError("Labels must be non-negative.")
        if len(self.source_index) != len(self.labels):
            raise ShapeError("source_index must have one entry per sample.")
        return self

    def __len__(self):
        return len(self.labels)

    @property
    def count(self) -> int:
        return len(self.labels)

    @property
    def sample_shape(self) -> tuple[int, ...]:
        return tuple(self.inputs.shape[1:])

    def subset(self, idx: np.ndarray) -> "LabeledDataset":
        idx = np.asarray(idx, dtype=np.int64)
        return LabeledDataset(self.inputs[idx], self.labels[idx], self.source_index[idx])

    def label_counts(self, classes: Iterable[int]) -> dict[int, int]:
        return {int(c): int(np.count_nonzero(self.labels == c)) for c in classes}


class ClientShard(BaseModel):
    model_config = ConfigDict(frozen=True)

    client_id: int = Field(..., ge=0)
    dataset: LabeledDataset

    def __init__(self, client_id: int, dataset: LabeledDataset, **data):
        super().__init__(client_id=client_id, dataset=dataset, **data)

    @model_validator(mode="after")
    def validate_samples(self):
        if len(self.dataset) == 0:
            raise EmptyDatasetError(f"Client {self.client_id} has no samples.")
        return self

    @property
    def sample_count(self) -> int:
        return len(self.dataset)


def filter_labels(
    ds: LabeledDataset, keep: Iterable[int], reindex: bool = False
) -> tuple[LabeledDataset, dict[int, int]]:
    """
    Keeps only samples whose label is in `keep`, preserving order.

    With `reindex`, the kept labels are renumbered densely in ascending order and the
    returned map is {original label: new label}; otherwise the map is the identity.
    """
    keep = sorted({int(k) for k in keep})
    mask = np.isin(ds.labels, keep)
    if not mask.any():
        raise EmptyDatasetError(f"No samples left after keeping labels {keep}.")
    filtered = ds.subset(np.flatnonzero(mask))
    mapping = {label: (i if reindex else label) for i, label in enumerate(keep)}
    if reindex:
        lookup = np.full(max(keep) + 1, -1, dtype=np.int64)
        for old, new in mapping.items():
            lookup[old] = new
        filtered = LabeledDataset(filtered.inputs, lookup[filtered.labels], filtered.source_index)
    return filtered, mapping
