"""Policy network, value head, discriminator and checkpoint I/O."""
from .checkpoint import MAGIC, decode_arrays, encode_arrays, load_checkpoint, save_checkpoint
from .discriminator import (Discriminator, adversarial_reward, discriminator_score, raw_adversarial)
from .gcn import GcpnConfig, GraphBatch, build_batch, encode, normalized_adjacency, readout
from .policy import (ActionArrays, ActionDistributions, GcpnPolicy, action_distributions, log_prob,
                     node_embeddings, sample_action, value)

__all__ = [
    "MAGIC", "decode_arrays", "encode_arrays", "load_checkpoint", "save_checkpoint", "Discriminator",
    "adversarial_reward", "discriminator_score", "raw_adversarial", "GcpnConfig", "GraphBatch",
    "build_batch", "encode", "normalized_adjacency", "readout", "ActionArrays",
    "ActionDistributions", "GcpnPolicy", "action_distributions", "log_prob", "node_embeddings",
    "sample_action", "value",
]
