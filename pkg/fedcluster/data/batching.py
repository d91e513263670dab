import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from fedcluster.util.errors import ShapeError


class Batch(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    inputs: np.ndarray
    labels: np.ndarray

    def __init__(self, inputs, labels, **data):
        super().__init__(inputs=np.asarray(inputs), labels=np.asarray(labels), **data)

    @model_validator(mode="after")
    def validate_lengths(self):
        if len(self.labels) < 1:
            raise ShapeError("A batch needs at least one sample.")
        if len(self.inputs) != len(self.labels):
            raise ShapeError(
                f"Batch has {len(self.inputs)} inputs but {len(self.labels)} labels."
            )
        return self

    def __len__(self):
        return len(self.labels)


def batches(shard, batch_size: int, seed: int) -> list[Batch]:
    """
    Splits a shard into mini-batches in a seed-determined order. The last batch may be short.

    Parameters:
        shard (ClientShard | LabeledDataset): The samples to batch.
        batch_size (int): Maximum batch size, at least 1.
        seed (int): Seed of the permutation.
    """
    if batch_size < 1:
        raise ValueError(f"batch_size must be at least 1, got {batch_size}")
    dataset = getattr(shard, "dataset", shard)
    order = np.random.default_rng(seed).permutation(len(dataset))
    return [
        Batch(dataset.inputs[idx], dataset.labels[idx])
        for idx in (order[i : i + batch_size] for i in range(0, len(order), batch_size))
    ]
