from .config import SimConfig, parse_config
from .federation import FederationEngine, RoundRecord, RunSummary
from .simulation import build_engine, load_federated_data, run_simulation
