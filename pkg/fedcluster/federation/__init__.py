from .aggregation import aggregate_fedavg
from .client import Client, TrainingSettings, Upload
from .engine import FederationEngine, ServerState
from .ledger import TransmissionLedger, measure_transmissions
from .records import RoundRecord, RunSummary, modal_p
from .selection import (
    SelectionMode,
    SelectionPolicy,
    select_half_per_cluster,
    select_one_per_cluster,
)
