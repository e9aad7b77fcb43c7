"""Dual-stage fusion across the four views.

Stage one shares information between views through a small trainable
key/value memory: each view's rows address the memory slots (softmax over
slots, then an explicit l1 row normalization) and read back a mixture of the
value rows. Cost is linear in the number of regions, unlike the quadratic
self-attention baseline kept here for ablations and benchmarking.

Stage two blends each view's local embedding with its memory read through a
sigmoid gate, forms a per-region softmax-weighted average over views, and
mixes that shared embedding back into every view with a fixed coefficient.
"""

from __future__ import annotations

import time
from statistics import median

import numpy as np

from .autodiff import Tensor, concat, exp, matmul, sigmoid, softmax, transpose

__all__ = [
    "attentive_fusion",
    "self_attention_baseline",
    "gated_combine",
    "view_weighted_sum",
    "final_embeddings",
    "concat_views",
    "scaling_benchmark",
]


def attentive_fusion(
    views: list[Tensor],
    mem_key: Tensor,
    mem_value: Tensor,
    literal_sum: bool = False,
    return_scores: bool = False,
):
    """Memory-mediated information sharing across views, O(dim*slots*N).

    Per view: scores = view @ mem_key^T (N x slots), softmax over slots then
    l1-normalized per row; output = scores @ mem_value. Cross-view coupling
    enters through the shared memory. With literal_sum the per-view reads are
    summed and every view receives the same total.
    """
    if not views:
        raise ValueError("attentive_fusion needs at least one view")
    shape = views[0].shape
    for v in views:
        if v.shape != shape:
            raise ValueError(f"view shape mismatch: {v.shape} != {shape}")
    if mem_key.shape != mem_value.shape:
        raise ValueError("key and value memory must have identical shapes")
    if mem_key.shape[1] != shape[1]:
        raise ValueError(
            f"memory width {mem_key.shape[1]} does not match view dim {shape[1]}"
        )
    key_t = transpose(mem_key)
    scores = []
    for v in views:
        a = softmax(matmul(v, key_t), axis=1)
        a = a / a.sum(axis=1, keepdims=True)
        scores.append(a)
    if literal_sum:
        total = matmul(scores[0], mem_value)
        for a in scores[1:]:
            total = total + matmul(a, mem_value)
        reads = [total for _ in views]
    else:
        reads = [matmul(a, mem_value) for a in scores]
    if return_scores:
        return reads, scores
    return reads


def self_attention_baseline(
    e: Tensor,
    w_query: Tensor,
    w_key: Tensor,
    w_value: Tensor,
    return_attention: bool = False,
):
    """Plain softmax(Q K^T) V with trainable projections, O(dim*N^2).

    Used only by the fusion ablation and the complexity benchmark.
    """
    q = matmul(e, w_query)
    k = matmul(e, w_key)
    v = matmul(e, w_value)
    attn = softmax(matmul(q, transpose(k)), axis=1)
    out = matmul(attn, v)
    if return_attention:
        return out, attn
    return out


def gated_combine(local: Tensor, shared: Tensor, gate_logit: Tensor) -> Tensor:
    """Convex blend gate*shared + (1-gate)*local with gate = sigmoid(logit)."""
    if local.shape != shared.shape:
        raise ValueError("gated_combine operands must have identical shapes")
    gate = sigmoid(gate_logit)
    return gate * shared + (1.0 - gate) * local


def view_weighted_sum(
    views: list[Tensor],
    score_weight: Tensor,
    score_bias: Tensor,
    return_weights: bool = False,
):
    """Per-region softmax-weighted average of the views.

    Each view gets a scalar score per region from a single-layer projection;
    scores are softmax-normalized across views so the weights sum to 1 for
    every region.
    """
    if not views:
        raise ValueError("view_weighted_sum needs at least one view")
    logits = [matmul(v, score_weight) + score_bias for v in views]  # each N x 1
    shift = np.maximum.reduce([z.data for z in logits])  # constant, stabilizes exp
    exps = [exp(z - Tensor(shift)) for z in logits]
    denom = exps[0]
    for e in exps[1:]:
        denom = denom + e
    weights = [e / denom for e in exps]
    fused = weights[0] * views[0]
    for w, v in zip(weights[1:], views[1:]):
        fused = fused + w * v
    if return_weights:
        return fused, weights
    return fused


def final_embeddings(per_view: list[Tensor], fused: Tensor, beta: float) -> list[Tensor]:
    """Per-view result beta*view + (1-beta)*fused, beta in [0, 1]."""
    if not (0.0 <= beta <= 1.0):
        raise ValueError("beta must lie in [0, 1]")
    return [beta * v + (1.0 - beta) * fused for v in per_view]


def concat_views(views: list[Tensor]) -> np.ndarray:
    """The downstream N x (views*dim) embedding matrix."""
    return np.concatenate([v.data for v in views], axis=1)


def scaling_benchmark(
    sizes: tuple[int, ...] = (256, 1024),
    runs: int = 5,
    dim: int = 32,
    slots: int = 32,
    n_views: int = 4,
    seed: int = 0,
) -> dict:
    """Median forward-pass time of memory fusion vs the quadratic baseline.

    Returns per-size medians in seconds plus the largest/smallest-size
    ratios; memory fusion should grow roughly linearly in the number of
    regions while the baseline grows quadratically.
    """
    rng = np.random.default_rng(seed)
    mem_key = Tensor(rng.standard_normal((slots, dim)) * 0.02)
    mem_value = Tensor(rng.standard_normal((slots, dim)) * 0.02)
    bound = 1.0 / np.sqrt(dim)
    wq, wk, wv = (
        Tensor(rng.uniform(-bound, bound, size=(dim, dim))) for _ in range(3)
    )
    linear_s, quad_s = [], []
    for n in sizes:
        views = [Tensor(rng.standard_normal((n, dim))) for _ in range(n_views)]
        lt, qt = [], []
        for _ in range(runs):
            t0 = time.perf_counter()
            attentive_fusion(views, mem_key, mem_value)
            lt.append(time.perf_counter() - t0)
            t0 = time.perf_counter()
            self_attention_baseline(views[0], wq, wk, wv)
            qt.append(time.perf_counter() - t0)
        linear_s.append(median(lt))
        quad_s.append(median(qt))
    return {
        "sizes": list(sizes),
        "runs": runs,
        "dim": dim,
        "slots": slots,
        "linear_seconds": linear_s,
        "quadratic_seconds": quad_s,
        "linear_ratio": linear_s[-1] / linear_s[0],
        "quadratic_ratio": quad_s[-1] / quad_s[0],
    }
