"""Discriminator updates on corpus versus generated molecules."""
from __future__ import annotations

from typing import Sequence

import numpy as np

from ..molgraph import MolGraph
from ..nets import Discriminator
from ..tensor import AdamState, Tensor, adam_step, backward, mean, mul, softplus


def discriminator_loss(disc: Discriminator, real: Sequence[MolGraph], fake: Sequence[MolGraph],
                       mode: str = "train") -> Tensor:
    """Mean binary cross-entropy, label 1 for corpus and 0 for generated graphs."""
    graphs = list(real) + list(fake)
    labels = np.array([1.0] * len(real) + [0.0] * len(fake))
    z = disc.logits(disc.batch(graphs), mode)
    return mean(softplus(z) - mul(z, labels))


def balanced_accuracy(disc: Discriminator, real: Sequence[MolGraph], fake: Sequence[MolGraph]) -> float:
    scores = disc.scores(list(real) + list(fake))
    tpr = float(np.mean(scores[: len(real)] > 0.5))
    tnr = float(np.mean(scores[len(real):] <= 0.5))
    return 0.5 * (tpr + tnr)


def train_discriminator(real: Sequence[MolGraph], fake: Sequence[MolGraph], disc: Discriminator,
                        opt: AdamState) -> tuple[float, float]:
    """One Adam step; returns (pre-step loss, post-step balanced accuracy)."""
    if not real or not fake:
        raise ValueError("discriminator training needs both real and generated graphs")
    loss = discriminator_loss(disc, real, fake)
    grads = backward(loss, disc.params)
    adam_step(disc.params, grads, opt)
    return loss.item(), balanced_accuracy(disc, real, fake)
