class FedClusterError(Exception):
    pass


class ShapeError(FedClusterError, ValueError):
    pass


class DataFormatError(FedClusterError, ValueError):
    pass


class EmptyDatasetError(FedClusterError, ValueError):
    pass


class ClusteringError(FedClusterError, ValueError):
    pass


class ConfigError(FedClusterError):
    pass


class DivergenceError(FedClusterError, ArithmeticError):
    pass
