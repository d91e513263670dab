from collections import Counter
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator

MODAL_WINDOW = 50


class RoundRecord(BaseModel):
    """One row of the metrics file."""

    model_config = ConfigDict(extra="forbid")

    round: int = Field(..., ge=1)
    participants: List[int] = Field(..., min_length=1)
    loss: float
    reduction_ratio: Optional[float] = None
    p: int = Field(..., ge=1)
    assignment: Optional[List[int]] = None
    test_accuracy: Optional[float] = None
    uploads: int
    cumulative_uploads: int

    @field_validator("loss")
    @classmethod
    def validate_loss(cls, value):
        if value != value or value in (float("inf"), float("-inf")):
            raise ValueError(f"Round loss must be finite, got {value}")
        return value


class RunSummary(BaseModel):
    model_config = ConfigDict(extra="forbid")

    method: str
    rounds: int
    top_accuracy: Optional[float]
    top_accuracy_round: Optional[int]
    final_accuracy: Optional[float]
    total_uploads: int
    p_trajectory: List[int]
    modal_p: int
    config: Dict[str, Any] = Field(default_factory=dict)

    @classmethod
    def from_records(
        cls, method: str, records: List[RoundRecord], config: Optional[Dict[str, Any]] = None
    ) -> "RunSummary":
        evaluated = [r for r in records if r.test_accuracy is not None]
        # the earliest round wins ties
        top = max(evaluated, key=lambda r: (r.test_accuracy, -r.round), default=None)
        trajectory = [r.p for r in records]
        return cls(
            method=method,
            rounds=len(records),
            top_accuracy=top.test_accuracy if top else None,
            top_accuracy_round=top.round if top else None,
            final_accuracy=evaluated[-1].test_accuracy if evaluated else None,
            total_uploads=records[-1].cumulative_uploads if records else 0,
            p_trajectory=trajectory,
            modal_p=modal_p(trajectory),
            config=config or {},
        )


def modal_p(trajectory: List[int], window: int = MODAL_WINDOW) -> int:
    """Most frequent p over the last `window` rounds; the smaller p wins ties."""
    if not trajectory:
        return 0
    counts = Counter(trajectory[-window:])
    return min(counts, key=lambda p: (-counts[p], p))
