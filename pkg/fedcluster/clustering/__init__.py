from .agglomerative import (
    ClusterAssignment,
    Dendrogram,
    Linkage,
    Merge,
    agglomerate,
    cut,
)
