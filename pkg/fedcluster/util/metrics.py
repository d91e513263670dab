import json
import logging
from pathlib import Path
from typing import Iterable, List

from pydantic import ValidationError

from fedcluster.federation.records import RoundRecord, RunSummary
from fedcluster.util.errors import DataFormatError

logger = logging.getLogger(__name__)


def write_metrics(records: Iterable[RoundRecord], path) -> Path:
    """One JSON object per line, one line per round."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        for record in records:
            f.write(record.model_dump_json() + "\n")
    logger.info(f"Wrote metrics to {path}")
    return path


def read_metrics(path) -> List[RoundRecord]:
    path = Path(path)
    if not path.is_file():
        raise DataFormatError(f"Metrics file not found: {path}")
    records = []
    with open(path) as f:
        for number, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                records.append(RoundRecord.model_validate_json(line))
            except ValidationError as e:
                raise DataFormatError(f"{path}:{number}: malformed metrics row ({e.error_count()} errors)") from e
    if not records:
        raise DataFormatError(f"{path} holds no metrics rows.")
    rounds = [r.round for r in records]
    if rounds != sorted(rounds) or len(set(rounds)) != len(rounds):
        raise DataFormatError(f"{path}: round indices are not strictly increasing.")
    return records


def write_summary(summary: RunSummary, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(summary.model_dump_json(indent=2) + "\n")
    logger.info(f"Wrote summary to {path}")
    return path


def read_summary(path) -> RunSummary:
    try:
        return RunSummary.model_validate(json.loads(Path(path).read_text()))
    except (OSError, ValueError) as e:
        raise DataFormatError(f"Cannot read summary {path}: {e}") from e
