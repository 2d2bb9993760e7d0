"""Active clustering on a sparse skeleton graph.

The engine builds a nearest-neighbor tree over a dataset, then refines it
into clusters by asking an oracle must-link/cannot-link questions about the
most suspicious edges, deducing every answer it can from previously stored
constraints so the number of queries stays near-linear in the data size.
"""

from .errors import (
    DeduciblePair,
    DimensionMismatch,
    DuplicatePair,
    EmptyCandidates,
    EmptyFile,
    EmptyTrace,
    InvalidSpec,
    LengthMismatch,
    MissingLabels,
    NoPendingQuery,
    NonFiniteValue,
    ParseError,
    PendingQueryExists,
    SkelclusterError,
)
from .graph import (
    CANNOT_LINK,
    MUST_LINK,
    DataSkeleton,
    MinimalConstraintGraph,
    PairwiseConstraint,
    SkeletonEdge,
    connected_component_labels,
    max_suspicious_edge,
)

__version__ = "0.1.0"

__all__ = [
    "CANNOT_LINK",
    "MUST_LINK",
    "DataSkeleton",
    "DeduciblePair",
    "DimensionMismatch",
    "DuplicatePair",
    "EmptyCandidates",
    "EmptyFile",
    "EmptyTrace",
    "InvalidSpec",
    "LengthMismatch",
    "MinimalConstraintGraph",
    "MissingLabels",
    "NoPendingQuery",
    "NonFiniteValue",
    "PairwiseConstraint",
    "ParseError",
    "PendingQueryExists",
    "SkelclusterError",
    "SkeletonEdge",
    "connected_component_labels",
    "max_suspicious_edge",
]
