"""Region dependency graphs from raw features, plus soft-threshold cleansing.

Four dense N x N views: origin / destination context similarity from trips,
and pairwise row similarity of the POI and check-in count tables. Entries are
cosines, so everything lives in [0, 1] for non-negative inputs; all-zero
underlying vectors yield zero dependency rather than a fabricated similarity.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .autodiff import Tensor, soft_threshold
from .data import Dataset, FeatureTable, TripSet

__all__ = [
    "VIEWS",
    "DependencyGraph",
    "trip_counts",
    "context_distributions",
    "mobility_graphs",
    "feature_graph",
    "build_graphs",
    "cleanse",
    "pairwise_cosine",
]

VIEWS = ("origin", "destination", "function", "semantics")


@dataclass
class DependencyGraph:
    tag: str
    matrix: np.ndarray  # N x N pairwise dependencies
    threshold: float = 0.0  # cleansing threshold (trainable during training)

    def __post_init__(self):
        if self.tag not in VIEWS:
            raise ValueError(f"unknown view tag {self.tag!r}")
        self.matrix = np.asarray(self.matrix, dtype=np.float64)
        n = self.matrix.shape[0]
        if self.matrix.shape != (n, n):
            raise ValueError("dependency matrix must be square")
        if self.threshold < 0:
            raise ValueError("cleansing threshold must be non-negative")

    @property
    def n(self) -> int:
        return int(self.matrix.shape[0])


def trip_counts(trips: TripSet, n: int) -> np.ndarray:
    """counts[i, j] = number of trips with origin i and destination j."""
    counts = np.zeros((n, n))
    np.add.at(counts, (trips.origins, trips.dests), 1.0)
    return counts


def context_distributions(counts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Row-normalized outgoing and column-normalized incoming distributions.

    Row i of the first matrix is region i's distribution over destinations;
    row i of the second is its distribution over origins. Regions without
    trips in a direction get an all-zero row (no data, no fabricated mass).
    """
    counts = np.asarray(counts, dtype=np.float64)
    if (counts < 0).any():
        raise ValueError("trip counts must be non-negative")
    row_sums = counts.sum(axis=1, keepdims=True)
    col_sums = counts.sum(axis=0, keepdims=True)
    out = np.divide(counts, row_sums, out=np.zeros_like(counts), where=row_sums > 0)
    inc = np.divide(counts, col_sums, out=np.zeros_like(counts), where=col_sums > 0).T
    return out, inc


def pairwise_cosine(rows: np.ndarray) -> np.ndarray:
    """Cosine similarity between all row pairs; zero rows give 0, and the
    result is exactly symmetric with unit diagonal for nonzero rows."""
    rows = np.asarray(rows, dtype=np.float64)
    norms = np.sqrt((rows * rows).sum(axis=1, keepdims=True))
    unit = np.divide(rows, norms, out=np.zeros_like(rows), where=norms > 0)
    sim = unit @ unit.T
    sim = (sim + sim.T) / 2.0
    np.clip(sim, -1.0, 1.0, out=sim)
    np.fill_diagonal(sim, np.where(norms[:, 0] > 0, 1.0, 0.0))
    return sim


def mobility_graphs(
    p_out: np.ndarray, p_in: np.ndarray
) -> tuple[DependencyGraph, DependencyGraph]:
    return (
        DependencyGraph("origin", pairwise_cosine(p_out)),
        DependencyGraph("destination", pairwise_cosine(p_in)),
    )


def feature_graph(table: FeatureTable, tag: str) -> DependencyGraph:
    return DependencyGraph(tag, pairwise_cosine(table.counts))


def build_graphs(dataset: Dataset) -> dict[str, DependencyGraph]:
    """All four dependency views for a dataset. Inputs are static, so this
    runs once at startup; only cleansing sits inside the training loop."""
    counts = trip_counts(dataset.trips, dataset.regions.n)
    p_out, p_in = context_distributions(counts)
    g_origin, g_dest = mobility_graphs(p_out, p_in)
    return {
        "origin": g_origin,
        "destination": g_dest,
        "function": feature_graph(dataset.poi, "function"),
        "semantics": feature_graph(dataset.checkins, "semantics"),
    }


def cleanse(graph: DependencyGraph) -> DependencyGraph:
    """Soft-threshold the matrix with the graph's current threshold value.

    This is the eager form for inspection and export; during training the
    same shrinkage runs as a tape operation on the trainable threshold so its
    gradient flows.
    """
    cleaned = soft_threshold(Tensor(graph.matrix), graph.threshold).data
    return replace(graph, matrix=cleaned)
