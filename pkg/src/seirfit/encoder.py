"""Hierarchical graph-pooling encoder for mobility snapshots.

Each snapshot graph is coarsened through learned soft cluster assignments
down to a single cluster, whose feature vector is the snapshot embedding.
The encoder is trained to classify a snapshot by its time-step index and is
then frozen; embeddings are read out below the classifier head.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .checkpoint import load_checkpoint, save_checkpoint
from .mobility import ConfigError
from .optim import Adam
from .streams import stream


@dataclass
class GnnLayerParams:
    weight: Tensor
    bias: Tensor


@dataclass
class PoolLevel:
    embed: GnnLayerParams
    pool: GnnLayerParams
    n_clusters: int


@dataclass
class EncoderConfig:
    embed_dim: int = 16
    epochs: int = 30
    lr: float = 5e-3
    batch_size: int = 8
    seed: int = 0
    # level-1 cluster count is capped so dense pooling stays tractable on
    # graphs with thousands of nodes
    cluster_cap: int = 64


def cluster_schedule(n_nodes: int, cap: int) -> tuple[int, int]:
    return min(max(4, math.ceil(n_nodes / 4)), cap), 1


def normalized_adjacency_np(adj: np.ndarray) -> np.ndarray:
    """Symmetric degree normalization with self-loops, as a constant."""
    a_hat = adj + np.eye(adj.shape[0])
    r = 1.0 / np.sqrt(a_hat.sum(axis=1))
    return a_hat * np.outer(r, r)


def normalized_adjacency(adj: Tensor) -> Tensor:
    """Differentiable normalization for pooled (parameter-dependent) graphs."""
    n = adj.shape[0]
    a_hat = ad.add(adj, Tensor(np.eye(n)))
    deg = ad.matmul(a_hat, Tensor(np.ones((n, 1))))
    r = ad.power(deg, -0.5)
    return ad.mul(ad.matmul(r, ad.transpose(r)), a_hat)


def gnn_forward(adj_norm: Tensor, features: Tensor, params: GnnLayerParams,
                activation: bool = True) -> Tensor:
    """One graph-convolution layer: relu(A_norm . X . W + b)."""
    if adj_norm.shape[0] != adj_norm.shape[1]:
        raise ad.ShapeError(f"adjacency must be square, got {adj_norm.shape}")
    if features.shape[0] != adj_norm.shape[0]:
        raise ad.ShapeError(
            f"features rows {features.shape[0]} != nodes {adj_norm.shape[0]}")
    z = ad.add_bias(ad.matmul(adj_norm, ad.matmul(features, params.weight)),
                    params.bias)
    return ad.relu(z) if activation else z


def diffpool_level(adj: Tensor, features: Tensor, level: PoolLevel,
                   adj_norm: Tensor | None = None):
    """Coarsen one level: returns (coarse adjacency, coarse features, assignment).

    The assignment is the row-softmax of the pool branch's logits, so every
    node distributes unit mass over next-level clusters.
    """
    if adj_norm is None:
        adj_norm = normalized_adjacency(adj)
    z = gnn_forward(adj_norm, features, level.embed)
    assignment = ad.softmax_rows(gnn_forward(adj_norm, features, level.pool,
                                             activation=False))
    s_t = ad.transpose(assignment)
    coarse_features = ad.matmul(s_t, z)
    coarse_adj = ad.matmul(s_t, ad.matmul(adj, assignment))
    return coarse_adj, coarse_features, assignment


@dataclass
class DiffPoolModel:
    levels: list  # PoolLevel, cluster counts strictly decreasing to 1
    classifier_weight: Tensor
    classifier_bias: Tensor
    embed_dim: int
    feature_dim: int
    n_classes: int
    config: EncoderConfig = field(default_factory=EncoderConfig)

    def parameters(self) -> list:
        out = []
        for lv in self.levels:
            out += [lv.embed.weight, lv.embed.bias, lv.pool.weight, lv.pool.bias]
        out += [self.classifier_weight, self.classifier_bias]
        return out

    def forward(self, adj: Tensor, features: Tensor,
                adj_norm: Tensor | None = None, collect_assignments: bool = False):
        """Embedding (1 x K) and optionally the per-level assignments."""
        if features.shape[1] != self.feature_dim:
            raise ad.ShapeError(
                f"feature width {features.shape[1]} != model {self.feature_dim}")
        assignments = []
        for i, level in enumerate(self.levels):
            use_norm = adj_norm if i == 0 else None
            adj, features, s = diffpool_level(adj, features, level, adj_norm=use_norm)
            assignments.append(s)
        if collect_assignments:
            return features, assignments
        return features

    def logits(self, embedding: Tensor) -> Tensor:
        return ad.add_bias(ad.matmul(embedding, self.classifier_weight),
                           self.classifier_bias)


def init_encoder(n_nodes: int, feature_dim: int, n_classes: int,
                 config: EncoderConfig) -> DiffPoolModel:
    rng = stream(config.seed, 7)
    k = config.embed_dim
    n1, n2 = cluster_schedule(n_nodes, config.cluster_cap)

    def glorot(fin, fout):
        s = math.sqrt(6.0 / (fin + fout))
        return Tensor(rng.uniform(-s, s, size=(fin, fout)), requires_grad=True)

    def layer(fin, fout):
        return GnnLayerParams(weight=glorot(fin, fout),
                              bias=Tensor(np.zeros((1, fout)), requires_grad=True))

    levels = [
        PoolLevel(embed=layer(feature_dim, k), pool=layer(feature_dim, n1), n_clusters=n1),
        PoolLevel(embed=layer(k, k), pool=layer(k, n2), n_clusters=n2),
    ]
    return DiffPoolModel(levels=levels, classifier_weight=glorot(k, n_classes),
                         classifier_bias=Tensor(np.zeros((1, n_classes)), requires_grad=True),
                         embed_dim=k, feature_dim=feature_dim, n_classes=n_classes,
                         config=config)


def encode_graph(model: DiffPoolModel, adj: Tensor, features: Tensor,
                 adj_norm: Tensor | None = None) -> Tensor:
    """Final single-cluster feature vector (1 x K) for one snapshot graph."""
    return model.forward(adj, features, adj_norm=adj_norm)


def train_encoder(graphs: list, config: EncoderConfig) -> tuple[DiffPoolModel, list]:
    """Train time-step classification over (adj, features, label) triples.

    Labels are 0-based snapshot position indices, shared across episodes.
    Returns the model (classifier head retained for diagnostics) and the
    per-epoch loss history.
    """
    if not graphs:
        raise ConfigError("no training graphs")
    labels = sorted({g[2] for g in graphs})
    if len(labels) < 2:
        raise ConfigError("need at least 2 distinct time-step labels")
    n_classes = max(labels) + 1
    n_nodes = graphs[0][0].shape[0]
    feature_dim = graphs[0][1].shape[1]
    model = init_encoder(n_nodes, feature_dim, n_classes, config)
    params = model.parameters()
    opt = Adam(params, lr=config.lr)
    rng = stream(config.seed, 8)

    # level-0 normalization does not depend on parameters: precompute once
    norm_cache = [Tensor(normalized_adjacency_np(adj.data)) for adj, _, _ in graphs]

    history = []
    order = np.arange(len(graphs))
    for _ in range(config.epochs):
        rng.shuffle(order)
        epoch_loss = 0.0
        for start in range(0, len(order), config.batch_size):
            batch = order[start:start + config.batch_size]
            losses = []
            for gi in batch:
                adj, feats, label = graphs[gi]
                emb = model.forward(adj, feats, adj_norm=norm_cache[gi])
                losses.append(ad.cross_entropy(model.logits(emb), np.array([label])))
            loss = losses[0]
            for extra in losses[1:]:
                loss = ad.add(loss, extra)
            loss = ad.scale(loss, 1.0 / len(losses))
            ad.backward(loss)
            opt.step()
            epoch_loss += loss.item() * len(batch)
        history.append(epoch_loss / len(order))
    return model, history


def classification_accuracy(model: DiffPoolModel, graphs: list) -> float:
    hits = 0
    for adj, feats, label in graphs:
        emb = model.forward(adj, feats)
        pred = int(np.argmax(model.logits(emb).data))
        hits += int(pred == label)
    return hits / len(graphs)


# ---------------------------------------------------------------------------
# persistence

def _flat_params(model: DiffPoolModel) -> dict:
    out = {}
    for i, lv in enumerate(model.levels):
        out[f"level{i}.embed.weight"] = lv.embed.weight
        out[f"level{i}.embed.bias"] = lv.embed.bias
        out[f"level{i}.pool.weight"] = lv.pool.weight
        out[f"level{i}.pool.bias"] = lv.pool.bias
    out["classifier.weight"] = model.classifier_weight
    out["classifier.bias"] = model.classifier_bias
    return out


def save_encoder(model: DiffPoolModel, path) -> None:
    config = {
        "embed_dim": model.embed_dim,
        "feature_dim": model.feature_dim,
        "n_classes": model.n_classes,
        "cluster_counts": [lv.n_clusters for lv in model.levels],
    }
    save_checkpoint(path, _flat_params(model), config)


def load_encoder(path) -> DiffPoolModel:
    params, config = load_checkpoint(path)
    levels = []
    for i, n_clusters in enumerate(config["cluster_counts"]):
        levels.append(PoolLevel(
            embed=GnnLayerParams(params[f"level{i}.embed.weight"],
                                 params[f"level{i}.embed.bias"]),
            pool=GnnLayerParams(params[f"level{i}.pool.weight"],
                                params[f"level{i}.pool.bias"]),
            n_clusters=n_clusters))
    return DiffPoolModel(levels=levels,
                         classifier_weight=params["classifier.weight"],
                         classifier_bias=params["classifier.bias"],
                         embed_dim=config["embed_dim"],
                         feature_dim=config["feature_dim"],
                         n_classes=config["n_classes"])
