from enum import Enum
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from fedcluster.clustering import ClusterAssignment
from fedcluster.controller import ControllerMode


class SelectionMode(str, Enum):
    FEDAVG_ALL = "FEDAVG_ALL"
    FEDSAUC_FIXED_K = "FEDSAUC_FIXED_K"
    ADAPTIVE = "ADAPTIVE"


class SelectionPolicy(BaseModel):
    """
    Parameters:
        mode: FEDAVG_ALL (everyone, every round), FEDSAUC_FIXED_K (k clusters frozen after
            warmup, half of each cluster per round) or ADAPTIVE (one client per cluster, p
            chosen by the controller every round).
        k: Cluster count of FEDSAUC_FIXED_K.
        controller_mode: Controller variant of ADAPTIVE.
        warmup_rounds: Rounds in which every client participates.
        seed: Seed of the selection draws.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    mode: SelectionMode = SelectionMode.ADAPTIVE
    k: Optional[int] = Field(default=None, ge=1)
    controller_mode: ControllerMode = ControllerMode.TCP
    warmup_rounds: int = Field(default=2, ge=1)
    seed: int = 0

    @model_validator(mode="after")
    def validate_k(self):
        if self.mode == SelectionMode.FEDSAUC_FIXED_K and self.k is None:
            raise ValueError("FEDSAUC_FIXED_K needs a cluster count k.")
        return self

    @property
    def label(self) -> str:
        if self.mode == SelectionMode.FEDAVG_ALL:
            return "FedAvg"
        if self.mode == SelectionMode.FEDSAUC_FIXED_K:
            return f"FedSAUC({self.k})"
        return f"Adaptive-{self.controller_mode.value}"


def select_one_per_cluster(assignment: ClusterAssignment, rng: np.random.Generator) -> list[int]:
    """One uniformly drawn client per cluster, returned in ascending order."""
    return sorted(int(rng.choice(members)) for members in assignment.clusters())


def select_half_per_cluster(assignment: ClusterAssignment, rng: np.random.Generator) -> list[int]:
    """max(1, floor(s/2)) clients drawn without replacement from every cluster of size s."""
    chosen = []
    for members in assignment.clusters():
        take = max(1, len(members) // 2)
        chosen.extend(int(c) for c in rng.choice(members, size=take, replace=False))
    return sorted(chosen)
