"""Objectives, epoch loop, parameter registry, and run artifacts.

Per epoch: cleanse the (precomputed) dependency graphs with the trainable
thresholds, derive view features, aggregate per view with multi-head cosine
attention, run dual-stage fusion, and optimize the sum of three objectives:
an origin/destination cross-entropy over observed trips and two squared
reconstruction losses tying the function/semantics embeddings back to their
cleansed graphs. Full batch, one Adam step per epoch, thresholds clamped to
stay non-negative after every step.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .aggregation import (
    init_view_features,
    make_head_projections,
    multi_head_aggregate,
)
from .autodiff import (
    Gradients,
    Tape,
    Tensor,
    clamp_min,
    log,
    matmul,
    soft_threshold,
    softmax,
    tensor_sum,
    transpose,
)
from .data import Dataset
from .fusion import (
    attentive_fusion,
    concat_views,
    final_embeddings,
    gated_combine,
    self_attention_baseline,
    view_weighted_sum,
)
from .graphs import VIEWS, DependencyGraph, build_graphs, trip_counts
from .optim import Adam

__all__ = [
    "NumericalError",
    "TrainConfig",
    "AblationFlags",
    "ABLATION_NAMES",
    "Model",
    "ForwardOutput",
    "LossRecord",
    "TrainResult",
    "od_distributions",
    "od_prediction_loss",
    "graph_reconstruction_loss",
    "total_loss",
    "train",
    "save_checkpoint",
    "load_checkpoint",
    "write_loss_log",
    "write_embeddings_csv",
    "read_embeddings_csv",
    "write_embeddings_json",
]

logger = logging.getLogger("regionemb")

LOG_FLOOR = 1e-12  # probability floor inside -log terms


class NumericalError(RuntimeError):
    """Raised when training produces a non-finite loss."""


@dataclass
class TrainConfig:
    epochs: int = 200
    lr: float = 0.005
    weight_decay: float = 0.001
    dim: int = 144
    heads: int = 12
    memory_slots: int = 32
    beta: float = 0.5
    seed: int = 0
    normalize_losses: bool = True  # scale OD by 1/M and reconstructions by 1/N^2
    fusion_literal_sum: bool = False  # sum memory reads over views instead of per view

    def validate(self) -> None:
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")
        for name in ("lr", "weight_decay", "dim", "heads", "memory_slots"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not (0.0 <= self.beta <= 1.0):
            raise ValueError("beta must lie in [0, 1]")
        if self.dim % self.heads != 0:
            raise ValueError(f"heads {self.heads} must divide dim {self.dim}")


@dataclass
class AblationFlags:
    disable_cleansing: bool = False  # skip the soft-threshold layer entirely
    use_plain_attention: bool = False  # neighbor-masked dot-product attention
    use_self_attention_fusion: bool = False  # quadratic baseline instead of memory
    no_dual_stage: bool = False  # aggregated views go straight to the losses

    def any_active(self) -> bool:
        return any(asdict(self).values())


ABLATION_NAMES = {
    "gcl": "disable_cleansing",
    "mgam": "use_plain_attention",
    "afm": "use_self_attention_fusion",
    "dsgf": "no_dual_stage",
}


def ablation_from_name(name: str) -> AblationFlags:
    """Accepts 'gcl' or variant spellings like 'w/o-GCL'."""
    key = name.lower().replace("w/o", "").strip(" -_")
    if key not in ABLATION_NAMES:
        raise ValueError(f"unknown ablation {name!r}; choose from {sorted(ABLATION_NAMES)}")
    return AblationFlags(**{ABLATION_NAMES[key]: True})


def od_distributions(origin_emb: Tensor, dest_emb: Tensor) -> tuple[Tensor, Tensor]:
    """Row-stochastic trip distributions from the two mobility embeddings.

    Row i of the first matrix is the predicted destination distribution for
    origin i (softmax of dot products against every destination embedding);
    row i of the second is the predicted origin distribution for destination i.
    """
    if origin_emb.shape != dest_emb.shape:
        raise ValueError("origin/destination embeddings must share a shape")
    p_out = softmax(matmul(origin_emb, transpose(dest_emb)), axis=1)
    p_in = softmax(matmul(dest_emb, transpose(origin_emb)), axis=1)
    return p_out, p_in


def od_prediction_loss(p_out: Tensor, p_in: Tensor, counts: np.ndarray) -> Tensor:
    """Negative log-likelihood of the observed trips in both directions.

    counts[i, j] holds the number of observed i -> j trips, so the trip sum
    collapses to two weighted log sums. Probabilities are floored at 1e-12.
    """
    c = Tensor(counts)
    c_t = Tensor(counts.T.copy())
    ll = tensor_sum(c * log(clamp_min(p_out, LOG_FLOOR)))
    ll = ll + tensor_sum(c_t * log(clamp_min(p_in, LOG_FLOOR)))
    return -ll


def graph_reconstruction_loss(emb: Tensor, target: Tensor) -> Tensor:
    """Squared error between the target matrix and the embedding Gram matrix."""
    if target.shape != (emb.shape[0], emb.shape[0]):
        raise ValueError("target must be square over the embedded regions")
    diff = target - matmul(emb, transpose(emb))
    return tensor_sum(diff * diff)


def total_loss(od: Tensor, function: Tensor, semantics: Tensor) -> Tensor:
    """Unweighted sum; raises NumericalError naming a non-finite component."""
    for name, t in (("od", od), ("function", function), ("semantics", semantics)):
        if not math.isfinite(float(t.data)):
            raise NumericalError(f"{name} loss is not finite")
    return od + function + semantics


@dataclass
class ForwardOutput:
    final: dict[str, Tensor]  # per-view final embeddings
    cleansed: dict[str, Tensor]
    od: Tensor
    function: Tensor
    semantics: Tensor
    total: Tensor
    raw: dict[str, float]  # unnormalized component values

    def loss_values(self) -> dict[str, float]:
        return {
            "od": float(self.od.data),
            "function": float(self.function.data),
            "semantics": float(self.semantics.data),
            "total": float(self.total.data),
        }


class Model:
    """All trainable tensors plus the forward pass over one city."""

    def __init__(
        self,
        graphs: dict[str, DependencyGraph],
        counts: np.ndarray,
        config: TrainConfig,
        ablation: AblationFlags | None = None,
    ):
        config.validate()
        self.config = config
        self.ablation = ablation or AblationFlags()
        missing = [v for v in VIEWS if v not in graphs]
        if missing:
            raise ValueError(f"missing graph views: {missing}")
        self.graphs = {v: graphs[v].matrix for v in VIEWS}
        self.n = graphs[VIEWS[0]].n
        self.counts = np.asarray(counts, dtype=np.float64)
        if self.counts.shape != (self.n, self.n):
            raise ValueError("trip count matrix must be N x N")
        self.n_trips = float(self.counts.sum())
        self.params: dict[str, Tensor] = {}
        self._decay: set[str] = set()
        self._build_params()
        logger.info(
            "model: %d regions, %d trips, %d parameters in %d tensors",
            self.n, int(self.n_trips), self.parameter_count(), len(self.params),
        )

    def _add(self, name: str, data: np.ndarray, decay: bool = False) -> Tensor:
        t = Tensor(data, requires_grad=True, name=name)
        self.params[name] = t
        if decay:
            self._decay.add(name)
        return t

    def _build_params(self) -> None:
        cfg = self.config
        rng = np.random.default_rng(cfg.seed)
        in_bound = 1.0 / np.sqrt(self.n)
        dim_bound = 1.0 / np.sqrt(cfg.dim)
        for v in VIEWS:
            self._add(
                f"proj/{v}", rng.uniform(-in_bound, in_bound, (self.n, cfg.dim)), decay=True
            )
        if self.ablation.use_plain_attention:
            for v in VIEWS:
                self._add(
                    f"plain_attn/{v}",
                    rng.uniform(-dim_bound, dim_bound, (cfg.dim, cfg.dim)),
                    decay=True,
                )
        else:
            for v in VIEWS:
                for t, proj in enumerate(make_head_projections(cfg.dim, cfg.heads, rng)):
                    self.params[f"heads/{v}/{t}"] = proj
                    proj.name = f"heads/{v}/{t}"
                    self._decay.add(f"heads/{v}/{t}")
        if not self.ablation.no_dual_stage:
            if self.ablation.use_self_attention_fusion:
                for role in ("query", "key", "value"):
                    self._add(
                        f"self_attn/{role}",
                        rng.uniform(-dim_bound, dim_bound, (cfg.dim, cfg.dim)),
                        decay=True,
                    )
            else:
                self._add(
                    "memory/key", rng.standard_normal((cfg.memory_slots, cfg.dim)) * 0.02
                )
                self._add(
                    "memory/value", rng.standard_normal((cfg.memory_slots, cfg.dim)) * 0.02
                )
            for v in VIEWS:
                self._add(f"gate/{v}", np.zeros(()))  # sigmoid(0) = 0.5
            self._add(
                "view_score/weight", rng.uniform(-dim_bound, dim_bound, (cfg.dim, 1)),
                decay=True,
            )
            self._add("view_score/bias", np.zeros(()))
        if not self.ablation.disable_cleansing:
            for v in VIEWS:
                self._add(f"threshold/{v}", np.zeros(()))

    @property
    def decay_names(self) -> frozenset[str]:
        return frozenset(self._decay)

    def parameter_count(self) -> int:
        return sum(p.data.size for p in self.params.values())

    def clamp_thresholds(self) -> None:
        for v in VIEWS:
            t = self.params.get(f"threshold/{v}")
            if t is not None:
                t.data = np.maximum(t.data, 0.0)

    def _plain_attention(self, view: str, cleansed: Tensor, h: Tensor) -> Tensor:
        # neighbor-masked dot-product attention over current graph edges
        w = self.params[f"plain_attn/{view}"]
        projected = matmul(h, w)
        scale = 1.0 / np.sqrt(self.config.dim)
        scores = matmul(projected, transpose(projected)) * scale
        edges = cleansed.data != 0.0
        np.fill_diagonal(edges, True)
        bias = Tensor(np.where(edges, 0.0, -1e30))
        attn = softmax(scores + bias, axis=1)
        return matmul(attn, projected)

    def forward(self) -> ForwardOutput:
        cfg = self.config
        ab = self.ablation
        cleansed: dict[str, Tensor] = {}
        aggregated: dict[str, Tensor] = {}
        for v in VIEWS:
            g = Tensor(self.graphs[v])
            gc = g if ab.disable_cleansing else soft_threshold(g, self.params[f"threshold/{v}"])
            cleansed[v] = gc
            h = init_view_features(gc, self.params[f"proj/{v}"])
            if ab.use_plain_attention:
                aggregated[v] = self._plain_attention(v, gc, h)
            else:
                heads = [self.params[f"heads/{v}/{t}"] for t in range(cfg.heads)]
                aggregated[v] = multi_head_aggregate(h, heads)
        views = [aggregated[v] for v in VIEWS]
        if ab.no_dual_stage:
            final = views
        else:
            if ab.use_self_attention_fusion:
                reads = [
                    self_attention_baseline(
                        e,
                        self.params["self_attn/query"],
                        self.params["self_attn/key"],
                        self.params["self_attn/value"],
                    )
                    for e in views
                ]
            else:
                reads = attentive_fusion(
                    views,
                    self.params["memory/key"],
                    self.params["memory/value"],
                    literal_sum=cfg.fusion_literal_sum,
                )
            combined = [
                gated_combine(e, r, self.params[f"gate/{v}"])
                for v, e, r in zip(VIEWS, views, reads)
            ]
            fused = view_weighted_sum(
                combined, self.params["view_score/weight"], self.params["view_score/bias"]
            )
            final = final_embeddings(combined, fused, cfg.beta)
        finals = dict(zip(VIEWS, final))

        p_out, p_in = od_distributions(finals["origin"], finals["destination"])
        raw_od = od_prediction_loss(p_out, p_in, self.counts)
        raw_fn = graph_reconstruction_loss(finals["function"], cleansed["function"])
        raw_sem = graph_reconstruction_loss(finals["semantics"], cleansed["semantics"])
        if cfg.normalize_losses:
            od = raw_od * (1.0 / self.n_trips)
            fn = raw_fn * (1.0 / float(self.n * self.n))
            sem = raw_sem * (1.0 / float(self.n * self.n))
        else:
            od, fn, sem = raw_od, raw_fn, raw_sem
        total = total_loss(od, fn, sem)
        return ForwardOutput(
            final=finals,
            cleansed=cleansed,
            od=od,
            function=fn,
            semantics=sem,
            total=total,
            raw={
                "od": float(raw_od.data),
                "function": float(raw_fn.data),
                "semantics": float(raw_sem.data),
            },
        )

    def embeddings(self) -> dict[str, np.ndarray]:
        out = self.forward()
        return {v: out.final[v].data for v in VIEWS}

    def concat_embeddings(self) -> np.ndarray:
        out = self.forward()
        return concat_views([out.final[v] for v in VIEWS])

    def load_params(self, values: dict[str, np.ndarray]) -> None:
        if set(values) != set(self.params):
            extra = sorted(set(values) - set(self.params))
            missing = sorted(set(self.params) - set(values))
            raise ValueError(f"parameter mismatch: extra={extra} missing={missing}")
        for name, arr in values.items():
            arr = np.asarray(arr, dtype=np.float64)
            if arr.shape != self.params[name].data.shape:
                raise ValueError(f"shape mismatch for {name}")
            self.params[name].data = arr.copy()


@dataclass
class LossRecord:
    epoch: int
    od: float
    function: float
    semantics: float
    total: float
    raw_od: float = 0.0
    raw_function: float = 0.0
    raw_semantics: float = 0.0


@dataclass
class TrainResult:
    model: Model
    config: TrainConfig
    ablation: AblationFlags
    log: list[LossRecord]
    final_losses: dict[str, float]
    embeddings: dict[str, np.ndarray]  # per-view final embeddings

    @property
    def concat_embeddings(self) -> np.ndarray:
        return np.concatenate([self.embeddings[v] for v in VIEWS], axis=1)


def train(
    dataset: Dataset,
    config: TrainConfig,
    ablation: AblationFlags | None = None,
) -> TrainResult:
    """Full-batch training for config.epochs epochs; deterministic per seed."""
    config.validate()
    ablation = ablation or AblationFlags()
    graphs = build_graphs(dataset)
    counts = trip_counts(dataset.trips, dataset.regions.n)
    model = Model(graphs, counts, config, ablation)
    opt = Adam(
        model.params,
        lr=config.lr,
        weight_decay=config.weight_decay,
        decay=model.decay_names,
    )
    records: list[LossRecord] = []
    for epoch in range(1, config.epochs + 1):
        try:
            with Tape() as tape:
                out = model.forward()
        except NumericalError as e:
            raise NumericalError(f"epoch {epoch}: {e}") from None
        grads = tape.backward(out.total)
        opt.step(grads)
        model.clamp_thresholds()
        vals = out.loss_values()
        records.append(
            LossRecord(
                epoch=epoch,
                od=vals["od"],
                function=vals["function"],
                semantics=vals["semantics"],
                total=vals["total"],
                raw_od=out.raw["od"],
                raw_function=out.raw["function"],
                raw_semantics=out.raw["semantics"],
            )
        )
        if epoch == 1 or epoch % 50 == 0 or epoch == config.epochs:
            logger.info("epoch %d: total loss %.6f", epoch, vals["total"])
    final_out = model.forward()
    return TrainResult(
        model=model,
        config=config,
        ablation=ablation,
        log=records,
        final_losses=final_out.loss_values(),
        embeddings={v: final_out.final[v].data for v in VIEWS},
    )


def save_checkpoint(path: str | Path, result: TrainResult) -> None:
    payload = {
        "format_version": 1,
        "seed": result.config.seed,
        "config": asdict(result.config),
        "ablation": asdict(result.ablation),
        "n_regions": result.model.n,
        "params": {
            name: p.data.tolist() for name, p in result.model.params.items()
        },
    }
    Path(path).write_text(json.dumps(payload), encoding="utf-8")


def load_checkpoint(path: str | Path) -> tuple[TrainConfig, AblationFlags, dict[str, np.ndarray]]:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if payload.get("format_version") != 1:
        raise ValueError(f"unsupported checkpoint version {payload.get('format_version')!r}")
    config = TrainConfig(**payload["config"])
    ablation = AblationFlags(**payload["ablation"])
    params = {name: np.asarray(v, dtype=np.float64) for name, v in payload["params"].items()}
    return config, ablation, params


def write_loss_log(path: str | Path, records: list[LossRecord]) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(["epoch", "od", "function", "semantics", "total"])
        for r in records:
            w.writerow([r.epoch, repr(r.od), repr(r.function), repr(r.semantics), repr(r.total)])


def write_embeddings_csv(path: str | Path, embeddings: dict[str, np.ndarray]) -> None:
    dims = {v: embeddings[v].shape[1] for v in VIEWS}
    n = embeddings[VIEWS[0]].shape[0]
    with Path(path).open("w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        header = ["region_id"]
        for v in VIEWS:
            header.extend(f"{v}_{k}" for k in range(dims[v]))
        w.writerow(header)
        for i in range(n):
            row = [i]
            for v in VIEWS:
                row.extend(repr(float(x)) for x in embeddings[v][i])
            w.writerow(row)


def read_embeddings_csv(path: str | Path) -> tuple[np.ndarray, np.ndarray, dict[str, slice]]:
    """Returns (region ids, N x total matrix, per-view column slices)."""
    with Path(path).open("r", newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader)
        if not header or header[0] != "region_id":
            raise ValueError(f"{path}: not an embeddings file")
        spans: dict[str, slice] = {}
        for col, name in enumerate(header[1:]):
            view = name.rsplit("_", 1)[0]
            if view not in spans:
                spans[view] = slice(col, col + 1)
            else:
                spans[view] = slice(spans[view].start, col + 1)
        ids, rows = [], []
        for row in reader:
            if not row:
                continue
            ids.append(int(row[0]))
            rows.append([float(x) for x in row[1:]])
    return np.asarray(ids), np.asarray(rows), spans


def write_embeddings_json(path: str | Path, embeddings: dict[str, np.ndarray]) -> None:
    payload = {
        "n_regions": int(embeddings[VIEWS[0]].shape[0]),
        "views": list(VIEWS),
        "dims": {v: int(embeddings[v].shape[1]) for v in VIEWS},
        "vectors": {v: embeddings[v].tolist() for v in VIEWS},
    }
    Path(path).write_text(json.dumps(payload), encoding="utf-8")
