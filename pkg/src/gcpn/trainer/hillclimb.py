"""Stochastic hill climbing over the environment's legal actions."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..env import MoleculeEnv, State
from ..molgraph import MolGraph

TOP_K = 5


@dataclass
class ClimbResult:
    graph: MolGraph
    score: float
    path: list[MolGraph] = field(default_factory=list)
    scores: list[float] = field(default_factory=list)


def climb(env: MoleculeEnv, score: Callable[[MolGraph], float], rng: np.random.Generator,
          start: MolGraph | None = None) -> ClimbResult:
    state = env.reset(start)
    current = score(state.graph)
    result = ClimbResult(state.graph, current, [state.graph], [current])
    while state.n < env.config.atom_cap:
        successors = {}
        for action in env.enumerate_legal(state):
            if action.stop:
                continue
            g = env.apply(state, action)
            successors.setdefault(g, score(g))
        ranked = sorted(successors.items(), key=lambda kv: -kv[1])[:TOP_K]
        improving = [(g, s) for g, s in ranked if s > current]
        if not improving:
            break
        g, current = improving[int(rng.integers(len(improving)))]
        state = State(g, state.step + 1)
        result.path.append(g)
        result.scores.append(current)
    result.graph, result.score = state.graph, current
    return result


def hill_climb(env: MoleculeEnv, score: Callable[[MolGraph], float], rng: np.random.Generator,
               restarts: int = 1) -> list[ClimbResult]:
    """One climb per restart, best final score first."""
    results = [climb(env, score, rng) for _ in range(restarts)]
    return sorted(results, key=lambda r: -r.score)
