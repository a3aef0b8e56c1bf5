"""GCN discriminator D(G) in (0, 1) and the adversarial reward derived from it."""
from __future__ import annotations

import copy
import math
from typing import Sequence

import numpy as np

from ..env import ADVERSARIAL_RANGE, scale_reward
from ..molgraph import MolGraph
from ..tensor import Tensor, init_mlp2, mlp2, reshape, sigmoid
from .gcn import GcpnConfig, GraphBatch, build_batch, encode, init_bn_states, init_gcn_params, readout

DEFAULT_CLAMP = 5.0


class Discriminator:
    def __init__(self, config: GcpnConfig, params: dict[str, Tensor], bn_states=None,
                 clamp: float = DEFAULT_CLAMP):
        self.config = config
        self.params = params
        self.bn_states = bn_states if bn_states is not None else init_bn_states(config)
        self.clamp = clamp

    @classmethod
    def initialize(cls, config: GcpnConfig, rng: np.random.Generator) -> "Discriminator":
        params = init_gcn_params(rng, config, "d.")
        params.update(init_mlp2(rng, "d.out", config.layer_out, config.embed_dim, 1, zero_output=True))
        return cls(config, params)

    def snapshot(self) -> "Discriminator":
        return Discriminator(self.config, {k: Tensor(v.data.copy(), name=k) for k, v in self.params.items()},
                             copy.deepcopy(self.bn_states), self.clamp)

    def batch(self, graphs: Sequence[MolGraph]) -> GraphBatch:
        return build_batch(graphs, self.config.atom_cap, with_scaffolds=False,
                           edge_types=self.config.edge_types)

    def logits(self, batch: GraphBatch, mode: str = "eval") -> Tensor:
        X = encode(batch, self.params, self.config, "d.", mode, self.bn_states)
        return reshape(mlp2(readout(X, batch.graph_mask, self.config.readout), self.params, "d.out"),
                       (batch.size,))

    def scores(self, graphs: Sequence[MolGraph]) -> np.ndarray:
        frozen = self if not any(p.requires_grad for p in self.params.values()) else self.snapshot()
        return sigmoid(frozen.logits(frozen.batch(graphs), "eval")).data

    def score(self, g: MolGraph) -> float:
        return float(self.scores([g])[0])

    def adversarial_reward(self, g: MolGraph) -> float:
        return adversarial_reward(self.score(g), self.clamp)

    def state_arrays(self) -> dict[str, np.ndarray]:
        arrays = {name: t.data for name, t in self.params.items()}
        for layer, st in enumerate(self.bn_states):
            arrays[f"d.bn{layer}.running_mean"] = st.running_mean
            arrays[f"d.bn{layer}.running_var"] = st.running_var
        return arrays

    def load_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        for name, t in self.params.items():
            t.data = np.array(arrays[name], dtype=np.float64)
        for layer, st in enumerate(self.bn_states):
            st.running_mean = np.array(arrays[f"d.bn{layer}.running_mean"])
            st.running_var = np.array(arrays[f"d.bn{layer}.running_var"])


def raw_adversarial(d: float, clamp: float = DEFAULT_CLAMP) -> float:
    """-log(1 - D), saturating at ``clamp``."""
    if d >= 1.0:
        return clamp
    return min(-math.log1p(-d), clamp)


def adversarial_reward(d: float, clamp: float = DEFAULT_CLAMP) -> float:
    return scale_reward(raw_adversarial(d, clamp), 0.0, clamp, *ADVERSARIAL_RANGE)


def discriminator_score(g: MolGraph, disc: Discriminator) -> float:
    return disc.score(g)
