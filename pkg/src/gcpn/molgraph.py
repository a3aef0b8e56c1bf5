"""Molecular graph model: atom table, bond-order storage, valence bookkeeping,
isomorphism, circular fingerprints and connected-subgraph sampling.

A graph is stored as a tuple of atom-table indices plus a symmetric n×n
matrix of bond orders (0 = no bond, 1/2/3 = single/double/triple). The
edge-conditioned tensor ``E`` (one boolean slice per bond type) and the
adjacency ``A = sum_i E_i`` are derived views. Graphs are immutable: every
mutating operation returns a new graph.
"""
from __future__ import annotations

import enum
import hashlib
import struct
from collections import deque
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (ConfigError, PreconditionError, UnknownAtomError, UnsupportedSizeError)


@dataclass(frozen=True)
class AtomSpec:
    symbol: str
    max_valence: int
    atomic_weight: float
    logp_contribution: float


# logP contributions are a synthetic calibration; only iodine being the maximum is binding.
ATOM_TABLE: tuple[AtomSpec, ...] = (
    AtomSpec("C", 4, 12.011, 0.15),
    AtomSpec("N", 3, 14.007, -0.50),
    AtomSpec("O", 2, 15.999, -0.40),
    AtomSpec("S", 2, 32.06, 0.10),
    AtomSpec("P", 3, 30.974, -0.30),
    AtomSpec("F", 1, 18.998, 0.20),
    AtomSpec("Cl", 1, 35.45, 0.45),
    AtomSpec("Br", 1, 79.904, 0.60),
    AtomSpec("I", 1, 126.904, 0.80),
)
SYMBOL_TO_INDEX = {spec.symbol: i for i, spec in enumerate(ATOM_TABLE)}
NUM_ATOM_TYPES = len(ATOM_TABLE)
BOND_ORDERS = (1, 2, 3)
NUM_BOND_TYPES = len(BOND_ORDERS)
HYDROGEN_WEIGHT = 1.008
FEATURE_DIM = NUM_ATOM_TYPES + 1
MAX_ISOMORPHISM_NODES = 16
MAX_VALENCE = np.array([a.max_valence for a in ATOM_TABLE])


class Violation(str, enum.Enum):
    SELF_BOND = "self-bond"
    ALREADY_BONDED = "already-bonded"
    VALENCE = "valence"
    ATOM_CAP = "atom-cap"
    FIRST_NOT_IN_GRAPH = "first-not-in-graph"
    STOP = "stop"


class MolGraph:
    """Immutable attributed molecular graph."""

    __slots__ = ("atoms", "bonds", "_hash")

    def __init__(self, atoms: Sequence[int], bonds: np.ndarray | None = None):
        atoms = tuple(int(a) for a in atoms)
        for a in atoms:
            if not 0 <= a < NUM_ATOM_TYPES:
                raise UnknownAtomError(f"unknown atom index {a}")
        n = len(atoms)
        if bonds is None:
            bonds = np.zeros((n, n), dtype=np.int8)
        bonds = np.array(bonds, dtype=np.int8)
        if bonds.shape != (n, n):
            raise ValueError(f"bond matrix shape {bonds.shape} does not match {n} atoms")
        bonds.setflags(write=False)
        self.atoms = atoms
        self.bonds = bonds
        self._hash = None

    @property
    def n(self) -> int:
        return len(self.atoms)

    def __len__(self) -> int:
        return len(self.atoms)

    def __eq__(self, other) -> bool:
        return (isinstance(other, MolGraph) and self.atoms == other.atoms
                and np.array_equal(self.bonds, other.bonds))

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((self.atoms, self.bonds.tobytes()))
        return self._hash

    def __repr__(self) -> str:
        syms = "".join(ATOM_TABLE[a].symbol for a in self.atoms[:12])
        return f"MolGraph(n={self.n}, atoms={syms}{'...' if self.n > 12 else ''}, bonds={len(self.edges())})"

    @property
    def E(self) -> np.ndarray:
        """Edge-conditioned tensor, shape (b, n, n), boolean."""
        return np.stack([self.bonds == order for order in BOND_ORDERS])

    @property
    def A(self) -> np.ndarray:
        return (self.bonds > 0).astype(np.int8)

    def symbol(self, u: int) -> str:
        return ATOM_TABLE[self.atoms[u]].symbol

    def edges(self) -> list[tuple[int, int, int]]:
        """(u, v, order) with u < v."""
        us, vs = np.nonzero(np.triu(self.bonds))
        return [(int(u), int(v), int(self.bonds[u, v])) for u, v in zip(us, vs)]

    def neighbors(self, u: int) -> list[int]:
        return [int(v) for v in np.nonzero(self.bonds[u])[0]]

    def degree(self, u: int) -> int:
        return int(np.count_nonzero(self.bonds[u]))

    def valences(self) -> np.ndarray:
        return self.bonds.sum(axis=1).astype(int)

    def implicit_hydrogens(self) -> np.ndarray:
        return MAX_VALENCE[list(self.atoms)] - self.valences() if self.n else np.zeros(0, dtype=int)


def _check_node(g: MolGraph, u: int) -> None:
    if not 0 <= u < g.n:
        raise IndexError(f"node {u} out of range for graph with {g.n} atoms")


def atom_index(symbol_or_index) -> int:
    if isinstance(symbol_or_index, str):
        try:
            return SYMBOL_TO_INDEX[symbol_or_index]
        except KeyError:
            raise UnknownAtomError(f"unknown atom symbol {symbol_or_index!r}") from None
    idx = int(symbol_or_index)
    if not 0 <= idx < NUM_ATOM_TYPES:
        raise UnknownAtomError(f"unknown atom index {idx}")
    return idx


def single_atom(spec) -> MolGraph:
    return MolGraph((atom_index(spec),))


def add_atom(g: MolGraph, spec) -> MolGraph:
    """Append an unbonded atom (the caller bonds it immediately)."""
    n = g.n
    bonds = np.zeros((n + 1, n + 1), dtype=np.int8)
    bonds[:n, :n] = g.bonds
    return MolGraph(g.atoms + (atom_index(spec),), bonds)


def explicit_valence(g: MolGraph, u: int) -> int:
    _check_node(g, u)
    return int(g.bonds[u].sum())


def bond_violation(g: MolGraph, u: int, v: int, order: int) -> Violation | None:
    _check_node(g, u)
    _check_node(g, v)
    if order not in BOND_ORDERS:
        raise ValueError(f"bond order must be one of {BOND_ORDERS}, got {order}")
    if u == v:
        return Violation.SELF_BOND
    if g.bonds[u, v]:
        return Violation.ALREADY_BONDED
    if (explicit_valence(g, u) + order > ATOM_TABLE[g.atoms[u]].max_valence
            or explicit_valence(g, v) + order > ATOM_TABLE[g.atoms[v]].max_valence):
        return Violation.VALENCE
    return None


def add_bond(g: MolGraph, u: int, v: int, order: int) -> tuple[MolGraph, Violation | None]:
    """Bond ``u``-``v`` with the given order.

    Returns ``(new_graph, None)`` on success and ``(g, violation)`` when the
    bond is chemically inadmissible. Out-of-range indices raise ``IndexError``.
    """
    violation = bond_violation(g, u, v, order)
    if violation is not None:
        return g, violation
    bonds = g.bonds.copy()
    bonds[u, v] = bonds[v, u] = order
    return MolGraph(g.atoms, bonds), None


def from_edges(atoms: Sequence, edges: Sequence[tuple[int, int, int]]) -> MolGraph:
    """Build a graph checking every bond, raising ``ValueError`` on violation."""
    g = MolGraph([atom_index(a) for a in atoms])
    for u, v, order in edges:
        g, violation = add_bond(g, u, v, order)
        if violation is not None:
            raise ValueError(f"bond {u}-{v} (order {order}) rejected: {violation.value}")
    return g


def validate(g: MolGraph, atom_cap: int | None = None) -> None:
    """Raise ``AssertionError`` if any representation invariant is broken."""
    b = g.bonds
    assert b.shape == (g.n, g.n)
    assert np.array_equal(b, b.T), "bond matrix not symmetric"
    assert not np.any(np.diag(b)), "self bond on diagonal"
    assert np.all((b >= 0) & (b <= 3)), "bond order out of range"
    if g.n:
        assert np.all(g.valences() <= MAX_VALENCE[list(g.atoms)]), "valence exceeded"
    if atom_cap is not None:
        assert g.n <= atom_cap, f"{g.n} atoms exceeds cap {atom_cap}"


def is_valid(g: MolGraph, atom_cap: int | None = None) -> bool:
    try:
        validate(g, atom_cap)
    except AssertionError:
        return False
    return True


def is_connected(g: MolGraph) -> bool:
    if g.n == 0:
        return False
    seen = {0}
    queue = deque([0])
    while queue:
        u = queue.popleft()
        for v in g.neighbors(u):
            if v not in seen:
                seen.add(v)
                queue.append(v)
    return len(seen) == g.n


def induced_subgraph(g: MolGraph, nodes: Sequence[int]) -> MolGraph:
    idx = list(nodes)
    return MolGraph([g.atoms[i] for i in idx], g.bonds[np.ix_(idx, idx)])


def disjoint_union(g: MolGraph, h: MolGraph) -> MolGraph:
    n, m = g.n, h.n
    bonds = np.zeros((n + m, n + m), dtype=np.int8)
    bonds[:n, :n] = g.bonds
    bonds[n:, n:] = h.bonds
    return MolGraph(g.atoms + h.atoms, bonds)


def permute(g: MolGraph, perm: Sequence[int]) -> MolGraph:
    """Relabel so that new node ``i`` is old node ``perm[i]``."""
    return induced_subgraph(g, perm)


def node_features(g: MolGraph) -> np.ndarray:
    """One-hot atom type followed by explicit valence / max valence; shape (n, 10)."""
    feats = np.zeros((g.n, FEATURE_DIM))
    if g.n:
        atoms = np.array(g.atoms)
        feats[np.arange(g.n), atoms] = 1.0
        feats[:, -1] = g.valences() / MAX_VALENCE[atoms]
    return feats


# ---------------------------------------------------------------- isomorphism

def _signatures(g: MolGraph) -> list:
    # stable, graph-independent signatures: iterate hashed neighbourhoods n times
    colors = [(a,) for a in g.atoms]
    for _ in range(max(1, g.n)):
        colors = [(colors[u], tuple(sorted((int(g.bonds[u, v]), colors[v]) for v in g.neighbors(u))))
                  for u in range(g.n)]
        colors = [_stable_hash(repr(c).encode()) for c in colors]
    return colors


def is_isomorphic(g1: MolGraph, g2: MolGraph) -> bool:
    """Atom- and bond-type-preserving isomorphism test for graphs up to 16 atoms."""
    for g in (g1, g2):
        if g.n > MAX_ISOMORPHISM_NODES:
            raise UnsupportedSizeError(
                f"isomorphism supports at most {MAX_ISOMORPHISM_NODES} atoms, got {g.n}")
    if g1.n != g2.n or sorted(g1.atoms) != sorted(g2.atoms):
        return False
    if sorted(e[2] for e in g1.edges()) != sorted(e[2] for e in g2.edges()):
        return False
    c1, c2 = _signatures(g1), _signatures(g2)
    if sorted(c1) != sorted(c2):
        return False
    n = g1.n
    # visit g1 nodes rarest-colour first, then by adjacency to mapped nodes
    order: list[int] = []
    remaining = set(range(n))
    counts = {c: c1.count(c) for c in c1}
    while remaining:
        linked = [u for u in remaining if any(g1.bonds[u, v] for v in order)]
        pool = linked or list(remaining)
        u = min(pool, key=lambda x: (counts[c1[x]], x))
        order.append(u)
        remaining.discard(u)
    mapping: dict[int, int] = {}
    used = [False] * n

    def extend(i: int) -> bool:
        if i == n:
            return True
        u = order[i]
        for v in range(n):
            if used[v] or c2[v] != c1[u]:
                continue
            if all(g1.bonds[u, w] == g2.bonds[v, mapping[w]] for w in order[:i]):
                mapping[u] = v
                used[v] = True
                if extend(i + 1):
                    return True
                used[v] = False
                del mapping[u]
        return False

    return extend(0)


# ---------------------------------------------------------------- fingerprints

def _stable_hash(payload: bytes) -> int:
    return int.from_bytes(hashlib.blake2b(payload, digest_size=8).digest(), "little")


@dataclass(frozen=True)
class Fingerprint:
    bits: int
    n_bits: int = 1024

    def count(self) -> int:
        return self.bits.bit_count()

    def to_array(self) -> np.ndarray:
        return np.array([(self.bits >> i) & 1 for i in range(self.n_bits)], dtype=bool)


def atom_identifiers(g: MolGraph, radius: int = 2) -> list[set[int]]:
    """Circular-neighbourhood identifiers per radius (0..radius) across all atoms."""
    ids = [_stable_hash(struct.pack("<q", a)) for a in g.atoms]
    layers = [set(ids)]
    for _ in range(radius):
        new = []
        for u in range(g.n):
            env = sorted((int(g.bonds[u, v]), ids[v]) for v in g.neighbors(u))
            payload = struct.pack("<Q", ids[u]) + b"".join(struct.pack("<qQ", o, i) for o, i in env)
            new.append(_stable_hash(payload))
        ids = new
        layers.append(set(ids))
    return layers


def fingerprint(g: MolGraph, n_bits: int = 1024, radius: int = 2) -> Fingerprint:
    bits = 0
    for layer in atom_identifiers(g, radius):
        for ident in layer:
            bits |= 1 << (ident % n_bits)
    return Fingerprint(bits, n_bits)


def tanimoto(f1: Fingerprint, f2: Fingerprint) -> float:
    if f1.n_bits != f2.n_bits:
        raise ConfigError(f"fingerprint lengths differ: {f1.n_bits} vs {f2.n_bits}")
    union = (f1.bits | f2.bits).bit_count()
    if union == 0:
        return 1.0
    return (f1.bits & f2.bits).bit_count() / union


# ---------------------------------------------------------------- subgraph sampling

def connected_subgraph_sample(g: MolGraph, rng: np.random.Generator) -> tuple[MolGraph, list[int]]:
    """Random connected induced subgraph and its node map (sub index -> g index).

    A target size is drawn uniformly from 1..n, then the node set grows from a
    random seed atom by adding random frontier atoms.
    """
    if g.n == 0 or not is_connected(g):
        raise PreconditionError("connected_subgraph_sample requires a connected, non-empty graph")
    size = int(rng.integers(1, g.n + 1))
    start = int(rng.integers(g.n))
    chosen = [start]
    inside = {start}
    frontier: list[int] = sorted(set(g.neighbors(start)))
    while len(chosen) < size:
        v = frontier.pop(int(rng.integers(len(frontier))))
        chosen.append(v)
        inside.add(v)
        for w in g.neighbors(v):
            if w not in inside and w not in frontier:
                frontier.append(w)
    return induced_subgraph(g, chosen), chosen
