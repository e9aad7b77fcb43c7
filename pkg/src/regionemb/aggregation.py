"""Per-view multi-head global attention with cosine similarity scores.

Attention is computed over every region pair, not a spatial neighborhood, so
two regions with similar projected features attend to each other regardless
of distance. Each head projects the view features to dim/heads columns,
scores pairs by cosine similarity of the projected rows, softmax-normalizes
the scores over all other regions (self excluded), and aggregates the
projected rows. Head outputs fill disjoint column blocks scaled by 1/heads,
and a final row-wise softmax produces the view embedding, so the per-head
parameter budget stays at dim^2 overall.
"""

from __future__ import annotations

import numpy as np

from .autodiff import Tensor, concat, matmul, normalize_rows, softmax, transpose

__all__ = [
    "make_head_projections",
    "init_view_features",
    "head_attention",
    "multi_head_aggregate",
]

_SELF_MASK = -1e30  # additive score bias; exp underflows to exactly 0


def make_head_projections(dim: int, n_heads: int, rng: np.random.Generator) -> list[Tensor]:
    """One dim x (dim/n_heads) projection per head; n_heads must divide dim."""
    if n_heads <= 0:
        raise ValueError("need at least one attention head")
    if dim % n_heads != 0:
        raise ValueError(f"head count {n_heads} does not divide dim {dim}")
    head_dim = dim // n_heads
    bound = 1.0 / np.sqrt(dim)
    return [
        Tensor(rng.uniform(-bound, bound, size=(dim, head_dim)), requires_grad=True)
        for _ in range(n_heads)
    ]


def init_view_features(graph_rows: Tensor, projection: Tensor) -> Tensor:
    """Vertex features for one view: cleansed graph rows times a trainable
    N -> dim projection."""
    if graph_rows.shape[1] != projection.shape[0]:
        raise ValueError(
            f"graph width {graph_rows.shape[1]} does not match projection "
            f"input dim {projection.shape[0]}"
        )
    return matmul(graph_rows, projection)


def head_attention(h: Tensor, projection: Tensor) -> tuple[Tensor, Tensor]:
    """One attention head over all regions.

    Projects h, scores every pair by cosine similarity of the projected rows,
    softmax-normalizes each row over the other regions (the diagonal is
    masked out; self-information re-enters later through the fusion
    residual), and returns (attention matrix, attention-weighted projected
    rows).
    """
    n = h.shape[0]
    if n < 2:
        raise ValueError("attention needs at least two regions")
    projected = matmul(h, projection)
    unit = normalize_rows(projected)
    scores = matmul(unit, transpose(unit))
    mask = Tensor(np.where(np.eye(n, dtype=bool), _SELF_MASK, 0.0))
    attn = softmax(scores + mask, axis=1)
    return attn, matmul(attn, projected)


def multi_head_aggregate(h: Tensor, projections: list[Tensor]) -> Tensor:
    """Combine the independent heads into the view embedding.

    Head outputs occupy disjoint column blocks, scaled by 1/heads, and the
    stacked result is passed through a row-wise softmax. With a single head
    this reduces to head_attention followed by the row softmax.
    """
    if not projections:
        raise ValueError("need at least one head projection")
    dim = h.shape[1]
    head_dim = dim // len(projections)
    if head_dim * len(projections) != dim:
        raise ValueError(f"{len(projections)} heads do not divide dim {dim}")
    for p in projections:
        if p.shape != (dim, head_dim):
            raise ValueError(
                f"head projection shape {p.shape} != expected {(dim, head_dim)}"
            )
    parts = [head_attention(h, p)[1] for p in projections]
    stacked = parts[0] if len(parts) == 1 else concat(parts, axis=1)
    return softmax(stacked * (1.0 / len(projections)), axis=1)
