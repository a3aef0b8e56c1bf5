"""Property scores, the reactive-group blacklist and molecule-set metrics.

``penalized_logp_lite`` is raw (unstandardized) and only carries the
ring-size penalty; the synthetic-accessibility term is not modelled.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, Iterable, Sequence

from .errors import ConfigError, UndefinedMetricError
from .molgraph import (ATOM_TABLE, HYDROGEN_WEIGHT, SYMBOL_TO_INDEX, MolGraph, fingerprint, tanimoto)

PLOGP_NOTE = "penalized_logp_lite: logP-lite minus ring penalty; SA term not modelled"


def molecular_weight(g: MolGraph) -> float:
    heavy = sum(ATOM_TABLE[a].atomic_weight for a in g.atoms)
    return float(heavy + HYDROGEN_WEIGHT * int(g.implicit_hydrogens().sum()))


def logp_lite(g: MolGraph) -> float:
    return float(sum(ATOM_TABLE[a].logp_contribution for a in g.atoms))


def smallest_cycle_through_edge(g: MolGraph, u: int, v: int) -> int:
    """Length of the shortest cycle using edge u-v, or 0 if it is a bridge."""
    dist = {u: 0}
    queue = deque([u])
    while queue:
        x = queue.popleft()
        for y in g.neighbors(x):
            if (x, y) in ((u, v), (v, u)) or y in dist:
                continue
            dist[y] = dist[x] + 1
            if y == v:
                return dist[y] + 1
            queue.append(y)
    return 0


def largest_ring_size(g: MolGraph) -> int:
    return max((smallest_cycle_through_edge(g, u, v) for u, v, _ in g.edges()), default=0)


def penalized_logp_lite(g: MolGraph) -> float:
    return logp_lite(g) - max(0, largest_ring_size(g) - 6)


@dataclass(frozen=True)
class PropertyFn:
    """A named score S(G); ``target_range`` wraps an inner score with [lo, hi]."""

    kind: str
    inner: "PropertyFn | None" = None
    lo: float | None = None
    hi: float | None = None

    def __post_init__(self):
        if self.kind == "target_range":
            if self.inner is None or self.lo is None or self.hi is None:
                raise ConfigError("target_range needs inner, lo and hi")
            if not self.lo < self.hi:
                raise ConfigError(f"target range needs lo < hi, got [{self.lo}, {self.hi}]")
        elif self.kind not in _BASE:
            raise ConfigError(f"unknown property {self.kind!r}; choose from {sorted(_BASE)}")

    @property
    def center(self) -> float:
        return (self.lo + self.hi) / 2.0

    def score(self, g: MolGraph) -> float:
        """The underlying property value (inner score for target ranges)."""
        if self.kind == "target_range":
            return self.inner.score(g)
        return _BASE[self.kind](g)

    def reward(self, g: MolGraph) -> float:
        """Raw reward before scaling: the score itself, or -|S - center| for targets."""
        if self.kind == "target_range":
            return target_range_reward(self, g)
        return self.score(g)

    def success(self, g: MolGraph) -> bool:
        return self.kind == "target_range" and target_success(self, g)

    @property
    def name(self) -> str:
        if self.kind == "target_range":
            return f"{self.inner.name}[{self.lo:g}:{self.hi:g}]"
        return self.kind


_BASE: dict[str, Callable[[MolGraph], float]] = {
    "molecular_weight": molecular_weight,
    "logp_lite": logp_lite,
    "penalized_logp_lite": penalized_logp_lite,
    "constant": lambda g: 0.0,
}
ALIASES = {"mw": "molecular_weight", "logp": "logp_lite", "plogp": "penalized_logp_lite"}


def property_fn(name: str, target: tuple[float, float] | None = None) -> PropertyFn:
    base = PropertyFn(ALIASES.get(name, name))
    if target is None:
        return base
    return PropertyFn("target_range", base, float(target[0]), float(target[1]))


def target_range_reward(p: PropertyFn, g: MolGraph) -> float:
    return -abs(p.inner.score(g) - p.center)


def target_success(p: PropertyFn, g: MolGraph) -> bool:
    return p.lo <= p.inner.score(g) <= p.hi


# ---------------------------------------------------------------- filters

@dataclass(frozen=True)
class FilterVerdict:
    passed: bool
    violated_patterns: tuple[str, ...] = field(default_factory=tuple)


def _peroxide(g: MolGraph) -> bool:
    o = SYMBOL_TO_INDEX["O"]
    return any(order == 1 and g.atoms[u] == o and g.atoms[v] == o for u, v, order in g.edges())


def _azide_like(g: MolGraph) -> bool:
    n_idx = SYMBOL_TO_INDEX["N"]
    for mid in range(g.n):
        if g.atoms[mid] != n_idx:
            continue
        if sum(1 for w in g.neighbors(mid) if g.atoms[w] == n_idx) >= 2:
            return True
    return False


_HALOGENS = {SYMBOL_TO_INDEX[s] for s in ("F", "Cl", "Br", "I")}


def _halogen_double(g: MolGraph) -> bool:
    return any(order == 2 and g.atoms[u] in _HALOGENS and g.atoms[v] in _HALOGENS
               for u, v, order in g.edges())


def _sulfur_double_sulfur(g: MolGraph) -> bool:
    s = SYMBOL_TO_INDEX["S"]
    return any(order == 2 and g.atoms[u] == s and g.atoms[v] == s for u, v, order in g.edges())


FILTER_PATTERNS: dict[str, Callable[[MolGraph], bool]] = {
    "peroxide": _peroxide,
    "azide-like": _azide_like,
    "halogen-double-bond": _halogen_double,
    "sulfur-double-sulfur": _sulfur_double_sulfur,
}


def filter_check(g: MolGraph, patterns: Iterable[str] | None = None) -> FilterVerdict:
    names = list(FILTER_PATTERNS) if patterns is None else list(patterns)
    hits = tuple(name for name in names if FILTER_PATTERNS[name](g))
    return FilterVerdict(passed=not hits, violated_patterns=hits)


# ---------------------------------------------------------------- set metrics

def similarity(g1: MolGraph, g2: MolGraph) -> float:
    return tanimoto(fingerprint(g1), fingerprint(g2))


def diversity(graphs: Sequence[MolGraph]) -> float:
    """Mean pairwise Tanimoto distance over unordered pairs."""
    if len(graphs) < 2:
        raise UndefinedMetricError("diversity needs at least two molecules")
    fps = [fingerprint(g) for g in graphs]
    dists = [1.0 - tanimoto(a, b) for a, b in combinations(fps, 2)]
    return float(sum(dists) / len(dists))
