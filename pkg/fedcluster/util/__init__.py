from .errors import (
    ClusteringError,
    ConfigError,
    DataFormatError,
    DivergenceError,
    EmptyDatasetError,
    FedClusterError,
    ShapeError,
)
from .seeding import derive_seed, stream
