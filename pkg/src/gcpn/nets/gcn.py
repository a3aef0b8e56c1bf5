"""Edge-conditioned GCN encoder over zero-padded graph batches."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import ConfigError, DimensionError
from ..molgraph import FEATURE_DIM, NUM_ATOM_TYPES, NUM_BOND_TYPES, MolGraph, node_features
from ..tensor import (BatchNormState, Tensor, add, amax, batch_norm, concat, glorot, matmul, maximum, mul,
                      relu, reshape)
from ..tensor import sum as tsum

AGGREGATIONS = ("sum", "mean", "max", "concat")
_SCAFFOLD_FEATURES = node_features(MolGraph(tuple(range(NUM_ATOM_TYPES))))


@dataclass(frozen=True)
class GcpnConfig:
    layers: int = 3
    embed_dim: int = 64
    edge_types: int = NUM_BOND_TYPES
    aggregation: str = "sum"
    batch_norm: bool = True
    atom_cap: int = 38
    readout: str = "sum"

    def __post_init__(self):
        if self.layers < 1 or self.embed_dim < 1:
            raise ConfigError("layers and embed_dim must be >= 1")
        if self.aggregation not in AGGREGATIONS:
            raise ConfigError(f"aggregation must be one of {AGGREGATIONS}, got {self.aggregation!r}")
        if self.readout not in ("sum", "mean", "max"):
            raise ConfigError(f"readout must be sum, mean or max, got {self.readout!r}")

    @property
    def pad_size(self) -> int:
        return self.atom_cap + NUM_ATOM_TYPES

    @property
    def layer_out(self) -> int:
        return self.embed_dim * (self.edge_types if self.aggregation == "concat" else 1)


def normalized_adjacency(bonds: np.ndarray, edge_types: int = NUM_BOND_TYPES) -> np.ndarray:
    """D̃^{-1/2} (E_i + I) D̃^{-1/2} for each bond type; shape (b, n, n)."""
    n = bonds.shape[0]
    out = np.empty((edge_types, n, n))
    eye = np.eye(n)
    for i in range(edge_types):
        e = (bonds == i + 1).astype(np.float64) + eye
        d = 1.0 / np.sqrt(e.sum(axis=1))
        out[i] = d[:, None] * e * d[None, :]
    return out


@dataclass
class GraphBatch:
    """Graphs padded to ``pad`` rows.

    ``graph_mask`` marks G_t rows, ``ext_mask`` marks G_t plus scaffold rows.
    Scaffold rows for graph b sit at ``n[b] .. n[b] + c - 1``.
    """

    features: np.ndarray     # (B, P, d)
    adjacency: np.ndarray    # (b, B, P, P)
    graph_mask: np.ndarray   # (B, P) bool
    ext_mask: np.ndarray     # (B, P) bool
    n: np.ndarray            # (B,)
    c: int

    @property
    def size(self) -> int:
        return self.features.shape[0]

    @property
    def pad(self) -> int:
        return self.features.shape[1]

    def subset(self, idx) -> "GraphBatch":
        idx = np.asarray(idx)
        return GraphBatch(self.features[idx], self.adjacency[:, idx], self.graph_mask[idx],
                          self.ext_mask[idx], self.n[idx], self.c)


def build_batch(graphs: Sequence[MolGraph], pad: int, with_scaffolds: bool = True,
                edge_types: int = NUM_BOND_TYPES) -> GraphBatch:
    c = NUM_ATOM_TYPES if with_scaffolds else 0
    B = len(graphs)
    feats = np.zeros((B, pad, FEATURE_DIM))
    adj = np.zeros((edge_types, B, pad, pad))
    gmask = np.zeros((B, pad), dtype=bool)
    emask = np.zeros((B, pad), dtype=bool)
    ns = np.zeros(B, dtype=int)
    for b, g in enumerate(graphs):
        n = g.n
        if n + c > pad:
            raise DimensionError(f"graph with {n} atoms (+{c} scaffolds) exceeds pad size {pad}")
        ns[b] = n
        feats[b, :n] = node_features(g)
        adj[:, b, :n, :n] = normalized_adjacency(g.bonds, edge_types)
        if c:
            feats[b, n:n + c] = _SCAFFOLD_FEATURES
            # isolated scaffold atoms: Ẽ = I, D̃ = 1
            idx = np.arange(n, n + c)
            adj[:, b, idx, idx] = 1.0
        gmask[b, :n] = True
        emask[b, :n + c] = True
    return GraphBatch(feats, adj, gmask, emask, ns, c)


def init_gcn_params(rng: np.random.Generator, cfg: GcpnConfig, prefix: str) -> dict[str, Tensor]:
    params = {}
    d_in = FEATURE_DIM
    for layer in range(cfg.layers):
        for i in range(cfg.edge_types):
            name = f"{prefix}gcn{layer}.w{i}"
            params[name] = Tensor(glorot(rng, d_in, cfg.embed_dim), requires_grad=True, name=name)
        if cfg.batch_norm:
            for tag, init in (("scale", np.ones), ("shift", np.zeros)):
                name = f"{prefix}bn{layer}.{tag}"
                params[name] = Tensor(init(cfg.layer_out), requires_grad=True, name=name)
        d_in = cfg.layer_out
    return params


def init_bn_states(cfg: GcpnConfig) -> list[BatchNormState]:
    return [BatchNormState.fresh(cfg.layer_out) for _ in range(cfg.layers)] if cfg.batch_norm else []


def _aggregate(parts: list[Tensor], how: str) -> Tensor:
    if how == "concat":
        return concat(parts, axis=-1)
    out = parts[0]
    for p in parts[1:]:
        out = maximum(out, p) if how == "max" else add(out, p)
    if how == "mean":
        out = mul(out, 1.0 / len(parts))
    return out


def encode(batch: GraphBatch, params, cfg: GcpnConfig, prefix: str, mode: str = "eval",
           bn_states: Sequence[BatchNormState] = ()) -> Tensor:
    """L rounds of H <- agg_i ReLU(Â_i H W_i), batch norm after each round."""
    B, P = batch.size, batch.pad
    mask = batch.ext_mask
    mask3 = mask[:, :, None].astype(np.float64)
    H = Tensor(batch.features)
    for layer in range(cfg.layers):
        w = [params[f"{prefix}gcn{layer}.w{i}"] for i in range(cfg.edge_types)]
        if w[0].shape[0] != H.shape[-1]:
            raise ConfigError(f"layer {layer} expects input width {w[0].shape[0]}, got {H.shape[-1]}")
        # ReLU is applied per edge type before aggregation, as in the layer definition.
        msgs = [relu(matmul(Tensor(batch.adjacency[i]), matmul(H, w[i]))) for i in range(cfg.edge_types)]
        H = _aggregate(msgs, cfg.aggregation)
        if cfg.batch_norm:
            flat = reshape(H, (B * P, H.shape[-1]))
            flat = batch_norm(flat, params[f"{prefix}bn{layer}.scale"], params[f"{prefix}bn{layer}.shift"],
                              mode, bn_states[layer], row_mask=mask.reshape(-1))
            H = mul(reshape(flat, (B, P, H.shape[-1])), mask3)
    return H


def readout(X: Tensor, row_mask: np.ndarray, how: str = "sum") -> Tensor:
    """Graph embedding from the masked node rows; shape (B, D)."""
    m = row_mask[:, :, None].astype(np.float64)
    if how == "max":
        # masked rows drop far below any real activation so they never win
        return amax(add(X, (m - 1.0) * 1e9), axis=1)
    total = tsum(mul(X, m), axis=1)
    if how == "mean":
        return mul(total, 1.0 / np.maximum(row_mask.sum(axis=1, keepdims=True), 1))
    return total
