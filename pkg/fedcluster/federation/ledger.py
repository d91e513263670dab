from typing import List

from pydantic import BaseModel, Field


class TransmissionLedger(BaseModel):
    """Model uploads per round. Downloads and participant-list messages are not counted."""

    per_round: List[int] = Field(default_factory=list)

    def record(self, uploads: int) -> int:
        if uploads < 0:
            raise ValueError(f"Upload count must be non-negative, got {uploads}")
        self.per_round.append(uploads)
        return self.cumulative

    @property
    def cumulative(self) -> int:
        return sum(self.per_round)


def measure_transmissions(ledger: TransmissionLedger) -> int:
    return ledger.cumulative
