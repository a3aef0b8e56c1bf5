"""Molecule-building MDP.

A state is the partially built graph G_t. Each action links a node of G_t
either to another node of G_t (ring closure, bond between existing atoms) or
to one of the single-atom scaffolds, which is then copied into G_t. The
environment is deterministic; all randomness comes from the agent.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .chemprops import PropertyFn, filter_check, property_fn
from .errors import ContractError, PreconditionError
from .molgraph import (ATOM_TABLE, BOND_ORDERS, MAX_VALENCE, NUM_ATOM_TYPES, NUM_BOND_TYPES,
                       MolGraph, Violation, add_atom, add_bond, disjoint_union, is_connected,
                       is_valid, single_atom)

PROPERTY_RANGE = (-4.0, 4.0)
FILTER_RANGE = (-2.0, 2.0)
ADVERSARIAL_RANGE = (-1.0, 1.0)

DEFAULT_ANCHORS = {
    "molecular_weight": (16.043, 500.0),
    "logp_lite": (-5.0, 5.0),
    "penalized_logp_lite": (-10.0, 5.0),
    "constant": (0.0, 1.0),
}


@dataclass(frozen=True)
class ActionVec:
    first: int = 0
    second: int = 0
    edge_type: int = 0
    stop: bool = False


STOP = ActionVec(stop=True)


@dataclass(frozen=True)
class State:
    graph: MolGraph
    step: int = 0
    done: bool = False

    @property
    def n(self) -> int:
        return self.graph.n


@dataclass(frozen=True)
class RewardBreakdown:
    step_validity: float = 0.0
    step_adversarial: float = 0.0
    final_property: float = 0.0
    final_filter: float = 0.0
    final_adversarial: float = 0.0

    @property
    def total(self) -> float:
        return (self.step_validity + self.step_adversarial + self.final_property
                + self.final_filter + self.final_adversarial)


@dataclass(frozen=True)
class StepOutcome:
    next: State
    reward: RewardBreakdown
    infeasible: bool


@dataclass
class RewardHooks:
    """Callables mapping a graph to an adversarial reward already in [-1, 1]."""

    final_adversarial: Callable[[MolGraph], float] | None = None
    step_adversarial: Callable[[MolGraph], float] | None = None


@dataclass
class EnvConfig:
    atom_cap: int = 38
    step_limit: int | None = None
    prop: PropertyFn = field(default_factory=lambda: property_fn("penalized_logp_lite"))
    anchors: tuple[float, float] | None = None
    filter_reward: bool = True
    final_adversarial: bool = False
    step_adversarial: bool = False

    def __post_init__(self):
        if self.atom_cap < 1:
            raise PreconditionError("atom_cap must be positive")
        lo, hi = self.reward_anchors
        if not lo < hi:
            raise PreconditionError(f"reward anchors need p_min < p_max, got ({lo}, {hi})")

    @property
    def max_steps(self) -> int:
        return self.step_limit if self.step_limit is not None else 2 * self.atom_cap

    @property
    def validity_reward(self) -> float:
        return 1.0 / self.max_steps

    @property
    def reward_anchors(self) -> tuple[float, float]:
        if self.anchors is not None:
            return tuple(self.anchors)
        p = self.prop
        if p.kind == "target_range":
            return (-max(abs(p.center), 1e-6), 0.0)
        return DEFAULT_ANCHORS[p.kind]


def anchors_from_corpus(prop: PropertyFn, corpus: Sequence[MolGraph]) -> tuple[float, float]:
    """Reward anchors spanning the corpus range of the raw reward.

    For target ranges the upper anchor is pinned at 0 (score at the centre).
    """
    raws = [prop.reward(g) for g in corpus]
    lo, hi = min(raws), max(raws)
    if prop.kind == "target_range":
        hi = 0.0
        lo = min(lo, -1e-6)
    if not lo < hi:
        hi = lo + 1.0
    return (lo, hi)


def scale_reward(raw: float, p_min: float, p_max: float, lo: float, hi: float) -> float:
    """Affine map with p_min -> lo and p_max -> hi, clamped to [lo, hi]."""
    if not p_min < p_max or not lo < hi:
        raise PreconditionError("scale_reward needs p_min < p_max and lo < hi")
    y = lo + (raw - p_min) * (hi - lo) / (p_max - p_min)
    return float(min(max(y, lo), hi))


@dataclass(frozen=True)
class ScaffoldSet:
    graphs: tuple[MolGraph, ...] = tuple(single_atom(i) for i in range(NUM_ATOM_TYPES))

    def __len__(self) -> int:
        return len(self.graphs)

    def atom(self, k: int) -> int:
        return self.graphs[k].atoms[0]


class MoleculeEnv:
    def __init__(self, config: EnvConfig | None = None, hooks: RewardHooks | None = None):
        self.config = config or EnvConfig()
        self.hooks = hooks or RewardHooks()
        self.scaffolds = ScaffoldSet()

    @property
    def c(self) -> int:
        return len(self.scaffolds)

    def reset(self, initial: MolGraph | None = None) -> State:
        if initial is None:
            return State(single_atom("C"))
        if initial.n == 0 or not is_valid(initial) or not is_connected(initial):
            raise PreconditionError("initial molecule must be valid, connected and non-empty")
        if initial.n > self.config.atom_cap:
            raise PreconditionError(f"initial molecule has {initial.n} atoms; cap is {self.config.atom_cap}")
        return State(initial)

    def extended_graph(self, s: State) -> tuple[MolGraph, list[tuple[str, int]]]:
        """G_t ∪ C with its index map: entry i is ('graph', u) or ('scaffold', k)."""
        g = s.graph
        for sc in self.scaffolds.graphs:
            g = disjoint_union(g, sc)
        index = [("graph", u) for u in range(s.n)] + [("scaffold", k) for k in range(self.c)]
        return g, index

    # ------------------------------------------------------------ legality

    def legal(self, s: State, a: ActionVec) -> Violation | None:
        """``None`` when ``a`` is a feasible link action, else the violation kind."""
        n = s.n
        if not (0 <= a.first < n + self.c and 0 <= a.second < n + self.c
                and 0 <= a.edge_type < NUM_BOND_TYPES):
            raise IndexError(f"action {a} out of bounds for n={n}, c={self.c}")
        if a.stop:
            return Violation.STOP
        if a.first >= n:
            return Violation.FIRST_NOT_IN_GRAPH
        if a.second == a.first:
            return Violation.SELF_BOND
        g = s.graph
        order = BOND_ORDERS[a.edge_type]
        val = g.bonds[a.first].sum()
        if val + order > ATOM_TABLE[g.atoms[a.first]].max_valence:
            return Violation.VALENCE
        if a.second < n:
            if g.bonds[a.first, a.second]:
                return Violation.ALREADY_BONDED
            if g.bonds[a.second].sum() + order > ATOM_TABLE[g.atoms[a.second]].max_valence:
                return Violation.VALENCE
            return None
        if order > ATOM_TABLE[self.scaffolds.atom(a.second - n)].max_valence:
            return Violation.VALENCE
        if n + 1 > self.config.atom_cap:
            return Violation.ATOM_CAP
        return None

    def enumerate_legal(self, s: State) -> list[ActionVec]:
        """Every feasible link action followed by the stop action."""
        if s.done:
            raise ContractError("enumerate_legal on a terminal state")
        g, n = s.graph, s.n
        free = MAX_VALENCE[list(g.atoms)] - g.valences()
        scaffold_cap = [MAX_VALENCE[self.scaffolds.atom(k)] for k in range(self.c)]
        room = n + 1 <= self.config.atom_cap
        actions = []
        for u in range(n):
            for j in range(n + self.c):
                if j == u:
                    continue
                for e, order in enumerate(BOND_ORDERS):
                    if order > free[u]:
                        break
                    if j < n:
                        ok = not g.bonds[u, j] and order <= free[j]
                    else:
                        ok = room and order <= scaffold_cap[j - n]
                    if ok:
                        actions.append(ActionVec(u, j, e, False))
        actions.append(STOP)
        return actions

    # ------------------------------------------------------------ dynamics

    def apply(self, s: State, a: ActionVec) -> MolGraph:
        """Graph after a legal link action (scaffold atoms are copied in first)."""
        g, n = s.graph, s.n
        second = a.second
        if second >= n:
            g = add_atom(g, self.scaffolds.atom(second - n))
            second = n
        g, violation = add_bond(g, a.first, second, BOND_ORDERS[a.edge_type])
        if violation is not None:
            raise ContractError(f"apply called with an illegal action ({violation.value})")
        return g

    def final_reward(self, g: MolGraph) -> RewardBreakdown:
        cfg = self.config
        p_min, p_max = cfg.reward_anchors
        prop = scale_reward(cfg.prop.reward(g), p_min, p_max, *PROPERTY_RANGE)
        filt = 0.0
        if cfg.filter_reward and not filter_check(g).passed:
            filt = FILTER_RANGE[0]
        adv = 0.0
        if cfg.final_adversarial and self.hooks.final_adversarial is not None:
            adv = float(np.clip(self.hooks.final_adversarial(g), *ADVERSARIAL_RANGE))
        return RewardBreakdown(final_property=prop, final_filter=filt, final_adversarial=adv)

    def step(self, s: State, a: ActionVec) -> StepOutcome:
        if s.done:
            raise ContractError("step called on a terminal state")
        cfg = self.config
        v = cfg.validity_reward
        t = s.step + 1
        if a.stop:
            final = self.final_reward(s.graph)
            return StepOutcome(State(s.graph, t, True), replace(final, step_validity=v), False)
        violation = self.legal(s, a)
        if violation is not None:
            done = t >= cfg.max_steps
            reward = self.final_reward(s.graph) if done else RewardBreakdown()
            return StepOutcome(State(s.graph, t, done), replace(reward, step_validity=-v), True)
        g = self.apply(s, a)
        done = g.n >= cfg.atom_cap or t >= cfg.max_steps
        reward = self.final_reward(g) if done else RewardBreakdown()
        step_adv = 0.0
        if cfg.step_adversarial and self.hooks.step_adversarial is not None:
            step_adv = float(np.clip(self.hooks.step_adversarial(g), *ADVERSARIAL_RANGE)) / cfg.max_steps
        return StepOutcome(State(g, t, done), replace(reward, step_validity=v, step_adversarial=step_adv), False)
