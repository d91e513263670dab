from typing import NamedTuple

from pydantic import BaseModel, ConfigDict, Field

from fedcluster.data.datasets import ClientShard
from fedcluster.nn.model_spec import ModelSpec
from fedcluster.nn.network import ParamVector
from fedcluster.nn.training import local_train


class TrainingSettings(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    lr: float = Field(default=0.01, gt=0)
    local_epochs: int = Field(default=1, ge=0)
    batch_size: int = Field(default=32, ge=1)


class Upload(NamedTuple):
    client_id: int
    params: ParamVector
    loss: float
    sample_count: int


class Client:
    """A simulated participant. Its shard never leaves this object; only uploads do."""

    def __init__(self, shard: ClientShard):
        self.shard = shard

    @property
    def id(self) -> int:
        return self.shard.client_id

    @property
    def sample_count(self) -> int:
        return self.shard.sample_count

    def train(
        self, spec: ModelSpec, global_params: ParamVector, settings: TrainingSettings, seed: int
    ) -> Upload:
        params, loss = local_train(
            spec,
            global_params,
            self.shard,
            epochs=settings.local_epochs,
            batch_size=settings.batch_size,
            lr=settings.lr,
            seed=seed,
        )
        return Upload(self.id, params, loss, self.sample_count)

    def __repr__(self):
        return f"Client(id={self.id}, samples={self.sample_count})"
