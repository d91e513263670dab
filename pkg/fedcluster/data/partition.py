import logging
from typing import List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from fedcluster.data.datasets import ClientShard, LabeledDataset
from fedcluster.util.errors import EmptyDatasetError
from fedcluster.util.seeding import stream

logger = logging.getLogger(__name__)


class PartitionPlan(BaseModel):
    """
    Which labels each client holds.

    Parameters:
        n_clients: Number of clients.
        labels_per_client: One label set per client, indexed by client id.
        per_client_cap: Optional upper bound on every shard's size.
        seed: Seed of the per-label shuffles.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    n_clients: int = Field(..., ge=1)
    labels_per_client: List[List[int]]
    per_client_cap: Optional[int] = Field(default=None, ge=1)
    seed: int = 0

    @model_validator(mode="after")
    def validate_plan(self):
        if len(self.labels_per_client) != self.n_clients:
            raise ValueError(
                f"labels_per_client has {len(self.labels_per_client)} entries "
                f"for {self.n_clients} clients."
            )
        for client, labels in enumerate(self.labels_per_client):
            if not labels:
                raise ValueError(f"Client {client} has an empty label set.")
        return self

    @classmethod
    def pairwise(cls, n_clients: int = 8, seed: int = 0, per_client_cap: Optional[int] = None):
        """Clients 2k and 2k+1 share the label pair {2k, 2k+1}."""
        return cls(
            n_clients=n_clients,
            labels_per_client=[[2 * (c // 2), 2 * (c // 2) + 1] for c in range(n_clients)],
            per_client_cap=per_client_cap,
            seed=seed,
        )

    @property
    def labels(self) -> list[int]:
        return sorted({label for labels in self.labels_per_client for label in labels})


def partition(ds: LabeledDataset, plan: PartitionPlan) -> list[ClientShard]:
    """
    Splits a dataset into disjoint client shards following the plan.

    Samples of each label are shuffled and split evenly between all clients holding that
    label. With a cap, each client keeps a seeded random subset of its samples.
    """
    owned: list[list[np.ndarray]] = [[] for _ in range(plan.n_clients)]
    for label in plan.labels:
        holders = [c for c, labels in enumerate(plan.labels_per_client) if label in labels]
        idx = stream(plan.seed, "partition", label).permutation(np.flatnonzero(ds.labels == label))
        for client, part in zip(holders, np.array_split(idx, len(holders))):
            owned[client].append(part)

    shards = []
    for client, parts in enumerate(owned):
        idx = np.concatenate(parts)
        if plan.per_client_cap is not None and len(idx) > plan.per_client_cap:
            idx = stream(plan.seed, "cap", client).permutation(idx)[: plan.per_client_cap]
        if len(idx) == 0:
            raise EmptyDatasetError(
                f"Client {client} would receive no samples for labels "
                f"{plan.labels_per_client[client]}."
            )
        shards.append(ClientShard(client, ds.subset(np.sort(idx))))
        logger.debug(f"Client {client}: {len(idx)} samples")
    return shards
